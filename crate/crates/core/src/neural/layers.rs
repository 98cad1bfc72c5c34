//! Transformer building blocks on top of [`Graph`].

use super::graph::{Graph, Var};
use super::params::{Init, ParamGroup, ParamId, ParamStore};

pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        group: ParamGroup,
        inputs: usize,
        outputs: usize,
    ) -> Self {
        let weight = store.register(
            format!("{name}.weight"),
            group,
            (inputs, outputs),
            Init::Normal(INIT_STD),
        );
        let bias = store.register(
            format!("{name}.bias"),
            group,
            (1, outputs),
            Init::Constant(0.0),
        );
        Linear {
            weight,
            bias: Some(bias),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let w = g.param(self.weight);
        let y = g.matmul(x, w);
        match self.bias {
            Some(b) => {
                let b = g.param(b);
                g.add_row(y, b)
            }
            None => y,
        }
    }

    pub fn param_count(inputs: usize, outputs: usize) -> usize {
        inputs * outputs + outputs
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, group: ParamGroup, dim: usize) -> Self {
        LayerNorm {
            gain: store.register(format!("{name}.gain"), group, (1, dim), Init::Constant(1.0)),
            bias: store.register(format!("{name}.bias"), group, (1, dim), Init::Constant(0.0)),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let gain = g.param(self.gain);
        let bias = g.param(self.bias);
        g.layer_norm(x, gain, bias)
    }
}

/// Multi-head scaled dot-product attention.
#[derive(Debug, Clone)]
pub struct Attention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
}

impl Attention {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        group: ParamGroup,
        dim: usize,
        heads: usize,
    ) -> Self {
        assert!(
            heads > 0 && dim.is_multiple_of(heads),
            "hidden size must split evenly across heads"
        );
        Attention {
            query: Linear::new(store, &format!("{name}.query"), group, dim, dim),
            key: Linear::new(store, &format!("{name}.key"), group, dim, dim),
            value: Linear::new(store, &format!("{name}.value"), group, dim, dim),
            output: Linear::new(store, &format!("{name}.output"), group, dim, dim),
            heads,
        }
    }

    /// Attends from each row of `x` over the rows of `memory`.
    pub fn forward(&self, g: &mut Graph, x: Var, memory: Var) -> Var {
        let dim = g.cols(x);
        let dh = dim / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let q = self.query.forward(g, x);
        let k = self.key.forward(g, memory);
        let v = self.value.forward(g, memory);
        let mut outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_cols(q, h * dh, dh);
            let kh = g.slice_cols(k, h * dh, dh);
            let vh = g.slice_cols(v, h * dh, dh);
            let scores = g.matmul_t(qh, kh);
            let scores = g.scale(scores, scale);
            let probs = g.softmax_rows(scores);
            outs.push(g.matmul(probs, vh));
        }
        let merged = if outs.len() == 1 {
            outs[0]
        } else {
            g.concat_cols(&outs)
        };
        self.output.forward(g, merged)
    }

    pub fn param_count(dim: usize) -> usize {
        4 * Linear::param_count(dim, dim)
    }
}

#[derive(Debug, Clone)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        group: ParamGroup,
        dim: usize,
        inner: usize,
    ) -> Self {
        FeedForward {
            up: Linear::new(store, &format!("{name}.up"), group, dim, inner),
            down: Linear::new(store, &format!("{name}.down"), group, inner, dim),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let h = self.up.forward(g, x);
        let h = g.gelu(h);
        self.down.forward(g, h)
    }

    pub fn param_count(dim: usize, inner: usize) -> usize {
        Linear::param_count(dim, inner) + Linear::param_count(inner, dim)
    }
}

/// Pre-norm self-attention block.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub norm_attn: LayerNorm,
    pub attn: Attention,
    pub norm_ffn: LayerNorm,
    pub ffn: FeedForward,
}

impl EncoderLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        group: ParamGroup,
        dim: usize,
        heads: usize,
    ) -> Self {
        EncoderLayer {
            norm_attn: LayerNorm::new(store, &format!("{name}.norm_attn"), group, dim),
            attn: Attention::new(store, &format!("{name}.attn"), group, dim, heads),
            norm_ffn: LayerNorm::new(store, &format!("{name}.norm_ffn"), group, dim),
            ffn: FeedForward::new(store, &format!("{name}.ffn"), group, dim, 4 * dim),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        if g.rows(x) == 0 {
            return x;
        }
        let h = self.norm_attn.forward(g, x);
        let a = self.attn.forward(g, h, h);
        let a = g.dropout(a);
        let x = g.add(x, a);
        let h = self.norm_ffn.forward(g, x);
        let f = self.ffn.forward(g, h);
        let f = g.dropout(f);
        g.add(x, f)
    }

    pub fn param_count(dim: usize) -> usize {
        2 * 2 * dim + Attention::param_count(dim) + FeedForward::param_count(dim, 4 * dim)
    }
}

/// Stack of encoder layers followed by a final layer norm.
#[derive(Debug, Clone)]
pub struct TransformerEncoder {
    pub layers: Vec<EncoderLayer>,
    pub norm: LayerNorm,
}

impl TransformerEncoder {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        group: ParamGroup,
        dim: usize,
        heads: usize,
        n_layers: usize,
    ) -> Self {
        TransformerEncoder {
            layers: (0..n_layers)
                .map(|i| EncoderLayer::new(store, &format!("{name}.layer{i}"), group, dim, heads))
                .collect(),
            norm: LayerNorm::new(store, &format!("{name}.norm"), group, dim),
        }
    }

    pub fn forward(&self, g: &mut Graph, mut x: Var) -> Var {
        for layer in &self.layers {
            x = layer.forward(g, x);
        }
        self.norm.forward(g, x)
    }

    pub fn param_count(dim: usize, n_layers: usize) -> usize {
        n_layers * EncoderLayer::param_count(dim) + 2 * dim
    }
}

/// Pre-norm decoder block: self-attention, cross-attention over a memory
/// sequence, feed-forward. An empty memory skips the cross-attention.
#[derive(Debug, Clone)]
pub struct DecoderLayer {
    pub norm_self: LayerNorm,
    pub self_attn: Attention,
    pub norm_cross: LayerNorm,
    pub cross_attn: Attention,
    pub norm_ffn: LayerNorm,
    pub ffn: FeedForward,
}

impl DecoderLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        group: ParamGroup,
        dim: usize,
        heads: usize,
    ) -> Self {
        DecoderLayer {
            norm_self: LayerNorm::new(store, &format!("{name}.norm_self"), group, dim),
            self_attn: Attention::new(store, &format!("{name}.self_attn"), group, dim, heads),
            norm_cross: LayerNorm::new(store, &format!("{name}.norm_cross"), group, dim),
            cross_attn: Attention::new(store, &format!("{name}.cross_attn"), group, dim, heads),
            norm_ffn: LayerNorm::new(store, &format!("{name}.norm_ffn"), group, dim),
            ffn: FeedForward::new(store, &format!("{name}.ffn"), group, dim, 4 * dim),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var, memory: Var) -> Var {
        if g.rows(x) == 0 {
            return x;
        }
        let h = self.norm_self.forward(g, x);
        let a = self.self_attn.forward(g, h, h);
        let a = g.dropout(a);
        let mut x = g.add(x, a);
        if g.rows(memory) > 0 {
            let h = self.norm_cross.forward(g, x);
            let c = self.cross_attn.forward(g, h, memory);
            let c = g.dropout(c);
            x = g.add(x, c);
        }
        let h = self.norm_ffn.forward(g, x);
        let f = self.ffn.forward(g, h);
        let f = g.dropout(f);
        g.add(x, f)
    }

    pub fn param_count(dim: usize) -> usize {
        3 * 2 * dim + 2 * Attention::param_count(dim) + FeedForward::param_count(dim, 4 * dim)
    }
}

/// Decoder stack. The output is the residual stream without a closing norm,
/// so an untrained decoder stays close to its source input.
#[derive(Debug, Clone)]
pub struct TransformerDecoder {
    pub layers: Vec<DecoderLayer>,
}

impl TransformerDecoder {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        group: ParamGroup,
        dim: usize,
        heads: usize,
        n_layers: usize,
    ) -> Self {
        TransformerDecoder {
            layers: (0..n_layers)
                .map(|i| DecoderLayer::new(store, &format!("{name}.layer{i}"), group, dim, heads))
                .collect(),
        }
    }

    pub fn forward(&self, g: &mut Graph, mut x: Var, memory: Var) -> Var {
        for layer in &self.layers {
            x = layer.forward(g, x, memory);
        }
        x
    }

    pub fn param_count(dim: usize, n_layers: usize) -> usize {
        n_layers * DecoderLayer::param_count(dim)
    }
}
