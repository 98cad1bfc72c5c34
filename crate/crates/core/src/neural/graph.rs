//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Graph`] is built fresh for every forward pass. Parameter leaves are
//! read from a [`ParamStore`]; frozen parameters enter as constants so no
//! gradient work is spent on them.

use ndarray::{s, Array2, Axis, Zip};

use rand::Rng as _;

use super::params::{ParamId, ParamStore};
use crate::rng::{self, Rng};

pub type Mat = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    /// a · bᵀ
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    Sigmoid(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Mat,
        inv_std: Vec<f64>,
    },
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    PoolRows {
        x: Var,
        groups: Vec<Vec<usize>>,
    },
    MaxOf {
        inputs: Vec<Var>,
        argmax: Vec<usize>,
    },
    Im2Col {
        x: Var,
        height: usize,
        width: usize,
    },
    Mse {
        x: Var,
        target: Mat,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Mat,
    },
    SumAll(Var),
}

struct Node {
    value: Mat,
    op: Op,
    needs_grad: bool,
}

pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
    dropout: Option<(f64, Rng)>,
}

/// Gradients of a scalar with respect to every trainable parameter that took
/// part in the forward pass, indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub grads: Vec<Option<Mat>>,
}

impl Gradients {
    pub fn empty(n: usize) -> Self {
        Gradients {
            grads: vec![None; n],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Mat> {
        self.grads[id.index()].as_ref()
    }

    pub fn accumulate(&mut self, other: &Gradients, weight: f64) {
        for (mine, theirs) in self.grads.iter_mut().zip(&other.grads) {
            if let Some(t) = theirs {
                match mine {
                    Some(m) => m.scaled_add(weight, t),
                    None => *mine = Some(t * weight),
                }
            }
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_rows(x: &Mat) -> Mat {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph {
            params,
            nodes: Vec::with_capacity(512),
            param_vars: vec![None; params.len()],
            dropout: None,
        }
    }

    /// Enables inverted dropout with rate `p` for subsequent
    /// [`Graph::dropout`] calls. Rates of zero leave the graph deterministic.
    pub fn with_dropout(mut self, p: f64, seed: u64) -> Self {
        if p > 0.0 {
            self.dropout = Some((p, rng::seeded(seed, 0xD50)));
        }
        self
    }

    pub fn dropout(&mut self, x: Var) -> Var {
        let Some((p, rng)) = self.dropout.as_mut() else {
            return x;
        };
        let p = *p;
        let keep = 1.0 / (1.0 - p);
        let mask = Mat::from_shape_simple_fn(self.nodes[x.0].value.dim(), || {
            if rng.random::<f64>() < p {
                0.0
            } else {
                keep
            }
        });
        let m = self.constant(mask);
        self.mul(x, m)
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    fn push(&mut self, value: Mat, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    pub fn rows(&self, v: Var) -> usize {
        self.nodes[v.0].value.nrows()
    }

    pub fn cols(&self, v: Var) -> usize {
        self.nodes[v.0].value.ncols()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Parameter leaf; repeated calls for the same id share one node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.index()] {
            return v;
        }
        let trainable = !self.params.is_frozen(id);
        let v = self.push(self.params.value(id).clone(), Op::Param(id), trainable);
        self.param_vars[id.index()] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::MatMul(a, b), ng)
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(&self.value(b).t());
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::MatMulT(a, b), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let v = self.value(a) + self.value(b);
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::Add(a, b), ng)
    }

    /// Adds a `1×d` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.rows(row), 1, "add_row expects a single row");
        let v = self.value(a) + self.value(row);
        let ng = self.ng(a) || self.ng(row);
        self.push(v, Op::AddRow(a, row), ng)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let v = self.value(a) * self.value(b);
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::Mul(a, b), ng)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) * k;
        let ng = self.ng(a);
        self.push(v, Op::Scale(a, k), ng)
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(gelu);
        let ng = self.ng(a);
        self.push(v, Op::Gelu(a), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(sigmoid);
        let ng = self.ng(a);
        self.push(v, Op::Sigmoid(a), ng)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let v = softmax_rows(self.value(a));
        let ng = self.ng(a);
        self.push(v, Op::SoftmaxRows(a), ng)
    }

    /// Row-wise layer normalization with `1×d` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        const EPS: f64 = 1e-5;
        let xv = self.value(x);
        let d = xv.ncols() as f64;
        let mut xhat = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.rows_mut() {
            let mean = row.sum() / d;
            let var = row.fold(0.0, |a, &b| a + (b - mean) * (b - mean)) / d;
            let is = 1.0 / (var + EPS).sqrt();
            row.mapv_inplace(|v| (v - mean) * is);
            inv_std.push(is);
        }
        let out = &(&xhat * self.value(gain)) + self.value(bias);
        let ng = self.ng(x) || self.ng(gain) || self.ng(bias);
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            ng,
        )
    }

    /// Row lookup into an embedding table.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let mut out = Mat::zeros((ids.len(), t.ncols()));
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).assign(&t.row(id));
        }
        let ng = self.ng(table);
        self.push(
            out,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
            ng,
        )
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = parts.iter().map(|&p| self.cols(p)).max().unwrap_or(0);
        let rows: usize = parts.iter().map(|&p| self.rows(p)).sum();
        let mut out = Mat::zeros((rows, cols));
        let mut r0 = 0;
        for &p in parts {
            let v = self.value(p);
            if v.nrows() > 0 {
                assert_eq!(v.ncols(), cols, "concat_rows width mismatch");
                out.slice_mut(s![r0..r0 + v.nrows(), ..]).assign(v);
            }
            r0 += v.nrows();
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(out, Op::ConcatRows(parts.to_vec()), ng)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).slice(s![start..start + len, ..]).to_owned();
        let ng = self.ng(a);
        self.push(v, Op::SliceRows(a, start), ng)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.rows(parts[0]);
        let cols: usize = parts.iter().map(|&p| self.cols(p)).sum();
        let mut out = Mat::zeros((rows, cols));
        let mut c0 = 0;
        for &p in parts {
            let v = self.value(p);
            assert_eq!(v.nrows(), rows, "concat_cols height mismatch");
            out.slice_mut(s![.., c0..c0 + v.ncols()]).assign(v);
            c0 += v.ncols();
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(out, Op::ConcatCols(parts.to_vec()), ng)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).slice(s![.., start..start + len]).to_owned();
        let ng = self.ng(a);
        self.push(v, Op::SliceCols(a, start), ng)
    }

    /// Output row `g` is the mean of the input rows listed in `groups[g]`;
    /// an empty group yields a zero row.
    pub fn pool_rows(&mut self, x: Var, groups: Vec<Vec<usize>>) -> Var {
        let xv = self.value(x);
        let mut out = Mat::zeros((groups.len(), xv.ncols()));
        for (g, rows) in groups.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            let mut acc = out.row_mut(g);
            for &r in rows {
                acc += &xv.row(r);
            }
            acc /= rows.len() as f64;
        }
        let ng = self.ng(x);
        self.push(out, Op::PoolRows { x, groups }, ng)
    }

    pub fn mean_rows(&mut self, x: Var) -> Var {
        let n = self.rows(x);
        self.pool_rows(x, vec![(0..n).collect()])
    }

    /// Elementwise maximum across same-shaped inputs. Ties go to the earliest
    /// input.
    pub fn max_of(&mut self, inputs: &[Var]) -> Var {
        let shape = self.shape(inputs[0]);
        let mut out = self.value(inputs[0]).clone();
        let mut argmax = vec![0usize; shape.0 * shape.1];
        for (k, &inp) in inputs.iter().enumerate().skip(1) {
            let v = self.value(inp);
            assert_eq!(v.dim(), shape, "max_of shape mismatch");
            for (idx, (o, &x)) in out.iter_mut().zip(v.iter()).enumerate() {
                if x > *o {
                    *o = x;
                    argmax[idx] = k;
                }
            }
        }
        let ng = inputs.iter().any(|&p| self.ng(p));
        self.push(
            out,
            Op::MaxOf {
                inputs: inputs.to_vec(),
                argmax,
            },
            ng,
        )
    }

    /// 3×3 patches with zero padding. Input rows are pixels in row-major
    /// order (`height·width` rows, one column per channel); output has one
    /// row per pixel and `9·channels` columns ordered (dy, dx, channel).
    pub fn im2col(&mut self, x: Var, height: usize, width: usize) -> Var {
        let xv = self.value(x);
        let c = xv.ncols();
        assert_eq!(xv.nrows(), height * width, "im2col pixel count");
        let mut out = Mat::zeros((height * width, 9 * c));
        for py in 0..height {
            for px in 0..width {
                let r = py * width + px;
                for dy in 0..3 {
                    let sy = py as isize + dy as isize - 1;
                    if sy < 0 || sy >= height as isize {
                        continue;
                    }
                    for dx in 0..3 {
                        let sx = px as isize + dx as isize - 1;
                        if sx < 0 || sx >= width as isize {
                            continue;
                        }
                        let src = sy as usize * width + sx as usize;
                        let c0 = (dy * 3 + dx) * c;
                        out.slice_mut(s![r, c0..c0 + c]).assign(&xv.row(src));
                    }
                }
            }
        }
        let ng = self.ng(x);
        self.push(out, Op::Im2Col { x, height, width }, ng)
    }

    /// Mean squared error against a constant target, as a `1×1` value.
    pub fn mse(&mut self, x: Var, target: Mat) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.dim(), target.dim(), "mse shape mismatch");
        let n = xv.len().max(1) as f64;
        let loss = Zip::from(xv)
            .and(&target)
            .fold(0.0, |acc, &a, &b| acc + (a - b) * (a - b))
            / n;
        let ng = self.ng(x);
        self.push(Mat::from_elem((1, 1), loss), Op::Mse { x, target }, ng)
    }

    /// Mean row-wise softmax cross-entropy against class indices.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.nrows(), labels.len(), "cross_entropy label count");
        let probs = softmax_rows(lv);
        let n = labels.len().max(1) as f64;
        let loss = labels
            .iter()
            .enumerate()
            .map(|(r, &y)| -probs[[r, y]].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / n;
        let ng = self.ng(logits);
        self.push(
            Mat::from_elem((1, 1), loss),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            ng,
        )
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let v = self.value(x).sum();
        let ng = self.ng(x);
        self.push(Mat::from_elem((1, 1), v), Op::SumAll(x), ng)
    }

    /// Backpropagates from a `1×1` node.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.shape(loss), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut out = Gradients::empty(self.params.len());
        if !self.ng(loss) {
            return out;
        }
        grads[loss.0] = Some(Mat::from_elem((1, 1), 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let send = |v: Var, d: Mat, grads: &mut Vec<Option<Mat>>| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => *acc += &d,
                    slot @ None => *slot = Some(d),
                }
            };
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    let slot = &mut out.grads[id.index()];
                    match slot {
                        Some(acc) => *acc += &g,
                        None => *slot = Some(g),
                    }
                }
                Op::MatMul(a, b) => {
                    if self.ng(*a) {
                        send(*a, g.dot(&self.value(*b).t()), &mut grads);
                    }
                    if self.ng(*b) {
                        send(*b, self.value(*a).t().dot(&g), &mut grads);
                    }
                }
                Op::MatMulT(a, b) => {
                    if self.ng(*a) {
                        send(*a, g.dot(self.value(*b)), &mut grads);
                    }
                    if self.ng(*b) {
                        send(*b, g.t().dot(self.value(*a)), &mut grads);
                    }
                }
                Op::Add(a, b) => {
                    send(*a, g.clone(), &mut grads);
                    send(*b, g, &mut grads);
                }
                Op::AddRow(a, row) => {
                    if self.ng(*row) {
                        send(*row, g.sum_axis(Axis(0)).insert_axis(Axis(0)), &mut grads);
                    }
                    send(*a, g, &mut grads);
                }
                Op::Mul(a, b) => {
                    if self.ng(*a) {
                        send(*a, &g * self.value(*b), &mut grads);
                    }
                    if self.ng(*b) {
                        send(*b, &g * self.value(*a), &mut grads);
                    }
                }
                Op::Scale(a, k) => send(*a, g * *k, &mut grads),
                Op::Gelu(a) => {
                    let mut d = self.value(*a).mapv(gelu_grad);
                    d *= &g;
                    send(*a, d, &mut grads);
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let d = Zip::from(&g)
                        .and(y)
                        .map_collect(|&gv, &yv| gv * yv * (1.0 - yv));
                    send(*a, d, &mut grads);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut d = &g * y;
                    let dots = d.sum_axis(Axis(1));
                    for (mut row, (yr, dot)) in d
                        .rows_mut()
                        .into_iter()
                        .zip(y.rows().into_iter().zip(dots.iter()))
                    {
                        row.scaled_add(-dot, &yr);
                    }
                    send(*a, d, &mut grads);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    if self.ng(*bias) {
                        send(*bias, g.sum_axis(Axis(0)).insert_axis(Axis(0)), &mut grads);
                    }
                    if self.ng(*gain) {
                        send(
                            *gain,
                            (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)),
                            &mut grads,
                        );
                    }
                    if self.ng(*x) {
                        let gy = &g * self.value(*gain);
                        let d = gy.ncols() as f64;
                        let mut dx = Mat::zeros(gy.dim());
                        for r in 0..gy.nrows() {
                            let gr = gy.row(r);
                            let xr = xhat.row(r);
                            let mean_g = gr.sum() / d;
                            let mean_gx = gr.dot(&xr) / d;
                            let is = inv_std[r];
                            for c in 0..gy.ncols() {
                                dx[[r, c]] = is * (gr[c] - mean_g - xr[c] * mean_gx);
                            }
                        }
                        send(*x, dx, &mut grads);
                    }
                }
                Op::Gather { table, ids } => {
                    let mut d = Mat::zeros(self.shape(*table));
                    for (r, &id) in ids.iter().enumerate() {
                        let mut row = d.row_mut(id);
                        row += &g.row(r);
                    }
                    send(*table, d, &mut grads);
                }
                Op::ConcatRows(parts) => {
                    let mut r0 = 0;
                    for &p in parts {
                        let n = self.rows(p);
                        if n > 0 && self.ng(p) {
                            send(p, g.slice(s![r0..r0 + n, ..]).to_owned(), &mut grads);
                        }
                        r0 += n;
                    }
                }
                Op::SliceRows(a, start) => {
                    let mut d = Mat::zeros(self.shape(*a));
                    d.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    send(*a, d, &mut grads);
                }
                Op::ConcatCols(parts) => {
                    let mut c0 = 0;
                    for &p in parts {
                        let n = self.cols(p);
                        if self.ng(p) {
                            send(p, g.slice(s![.., c0..c0 + n]).to_owned(), &mut grads);
                        }
                        c0 += n;
                    }
                }
                Op::SliceCols(a, start) => {
                    let mut d = Mat::zeros(self.shape(*a));
                    d.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    send(*a, d, &mut grads);
                }
                Op::PoolRows { x, groups } => {
                    let mut d = Mat::zeros(self.shape(*x));
                    for (gi, rows) in groups.iter().enumerate() {
                        if rows.is_empty() {
                            continue;
                        }
                        let w = 1.0 / rows.len() as f64;
                        for &r in rows {
                            d.row_mut(r).scaled_add(w, &g.row(gi));
                        }
                    }
                    send(*x, d, &mut grads);
                }
                Op::MaxOf { inputs, argmax } => {
                    for (k, &inp) in inputs.iter().enumerate() {
                        if !self.ng(inp) {
                            continue;
                        }
                        let mut d = Mat::zeros(g.dim());
                        for ((dv, &gv), &am) in d.iter_mut().zip(g.iter()).zip(argmax.iter()) {
                            if am == k {
                                *dv = gv;
                            }
                        }
                        send(inp, d, &mut grads);
                    }
                }
                Op::Im2Col { x, height, width } => {
                    let (height, width) = (*height, *width);
                    let c = self.cols(*x);
                    let mut d = Mat::zeros(self.shape(*x));
                    for py in 0..height {
                        for px in 0..width {
                            let r = py * width + px;
                            for dy in 0..3 {
                                let sy = py as isize + dy as isize - 1;
                                if sy < 0 || sy >= height as isize {
                                    continue;
                                }
                                for dx in 0..3 {
                                    let sx = px as isize + dx as isize - 1;
                                    if sx < 0 || sx >= width as isize {
                                        continue;
                                    }
                                    let src = sy as usize * width + sx as usize;
                                    let c0 = (dy * 3 + dx) * c;
                                    let mut row = d.row_mut(src);
                                    row += &g.slice(s![r, c0..c0 + c]);
                                }
                            }
                        }
                    }
                    send(*x, d, &mut grads);
                }
                Op::Mse { x, target } => {
                    let n = target.len().max(1) as f64;
                    let k = g[[0, 0]] * 2.0 / n;
                    let d = (self.value(*x) - target) * k;
                    send(*x, d, &mut grads);
                }
                Op::CrossEntropy {
                    logits,
                    labels,
                    probs,
                } => {
                    let n = labels.len().max(1) as f64;
                    let mut d = probs.clone();
                    for (r, &y) in labels.iter().enumerate() {
                        d[[r, y]] -= 1.0;
                    }
                    d *= g[[0, 0]] / n;
                    send(*logits, d, &mut grads);
                }
                Op::SumAll(x) => {
                    let d = Mat::from_elem(self.shape(*x), g[[0, 0]]);
                    send(*x, d, &mut grads);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::params::{Init, ParamGroup};
    use ndarray::array;

    #[test]
    fn matmul_grad_simple() {
        let mut store = ParamStore::new(0);
        let w = store.register("w", ParamGroup::TagHead, (2, 2), Init::Constant(1.0));
        let mut g = Graph::new(&store);
        let x = g.constant(array![[1.0, 2.0]]);
        let wv = g.param(w);
        let y = g.matmul(x, wv);
        let s = g.sum_all(y);
        assert_eq!(g.scalar(s), 6.0);
        let grads = g.backward(s);
        assert_eq!(grads.get(w).unwrap(), &array![[1.0, 1.0], [2.0, 2.0]]);
    }

    #[test]
    fn frozen_params_get_no_gradient() {
        let mut store = ParamStore::new(0);
        let w = store.register("w", ParamGroup::TokenEncoder, (1, 1), Init::Constant(2.0));
        store.freeze(ParamGroup::TokenEncoder);
        let mut g = Graph::new(&store);
        let wv = g.param(w);
        let s = g.sum_all(wv);
        assert!(g.backward(s).get(w).is_none());
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let p = softmax_rows(&array![[1.0, 2.0, 3.0], [1000.0, 0.0, -1000.0]]);
        for r in p.rows() {
            assert!((r.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn im2col_center_patch() {
        let store = ParamStore::new(0);
        let mut g = Graph::new(&store);
        let x = g.constant(Mat::from_shape_fn((9, 1), |(r, _)| r as f64));
        let cols = g.im2col(x, 3, 3);
        let v = g.value(cols);
        assert_eq!(
            v.row(4).to_vec(),
            (0..9).map(|i| i as f64).collect::<Vec<_>>()
        );
        assert_eq!(v[[0, 0]], 0.0);
        assert_eq!(v[[0, 4]], 0.0);
        assert_eq!(v[[0, 8]], 4.0);
    }
}
