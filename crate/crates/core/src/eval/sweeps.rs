//! Experiment grids. Every cell is an independent
//! (configuration, column, seed) run; tables report the median over seeds.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use log::info;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, MetricsReport};
use crate::docmodel::io::corpus_hash;
use crate::docmodel::Document;
use crate::error::{Error, Result};
use crate::model::{Framework, ModelSpec};
use crate::rng;
use crate::synthgen::{corrupt_guidance_labels_with_stats, LabelNoiseConfig, NoiseMode};
use crate::workflow::{
    run_adaptation, run_finetune, run_inference, AdaptationPlan, Checkpoint, FinetuneStart,
    TaskMode,
};

const STREAM_SIZE: u64 = 0x512E;

pub const DEFAULT_RATIOS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
pub const DEFAULT_LAMBDAS: [f64; 3] = [2.0, 1.5, 1.0];
pub const DEFAULT_FRACTIONS: [f64; 2] = [0.5, 1.0];

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub name: String,
    /// Adaptation stages and the fine-tuning hyperparameters.
    pub plan: AdaptationPlan,
    /// `false` fine-tunes from scratch (the `F_t` baseline).
    #[serde(default = "yes")]
    pub adapt: bool,
    #[serde(default)]
    pub mono_grained: bool,
}

fn yes() -> bool {
    true
}

impl SweepConfig {
    pub fn adapted(name: impl Into<String>, plan: AdaptationPlan) -> Self {
        SweepConfig {
            name: name.into(),
            plan,
            adapt: true,
            mono_grained: false,
        }
    }

    pub fn baseline(plan: AdaptationPlan) -> Self {
        SweepConfig {
            name: "baseline".into(),
            plan,
            adapt: false,
            mono_grained: false,
        }
    }

    /// Token-only pipeline without the infuser, fine-tuned from scratch.
    pub fn mono_grained(plan: AdaptationPlan) -> Self {
        SweepConfig {
            name: "mono-grained".into(),
            plan,
            adapt: false,
            mono_grained: true,
        }
    }
}

/// Data and model shape shared by every cell.
#[derive(Debug, Clone, Copy)]
pub struct SweepData<'a> {
    pub d_n: &'a [Document],
    pub d_g: &'a [Document],
    pub d_i: &'a [Document],
    pub spec: &'a ModelSpec,
}

impl SweepData<'_> {
    pub fn corpus_hash(&self) -> Result<String> {
        let all: Vec<Document> = self
            .d_n
            .iter()
            .chain(self.d_g)
            .chain(self.d_i)
            .cloned()
            .collect();
        corpus_hash(&all)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub seeds: Vec<u64>,
    /// Which task the cell value measures.
    pub mode: TaskMode,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            seeds: vec![0, 1, 2],
            mode: TaskMode::Both,
        }
    }
}

impl SweepOptions {
    fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("sweep needs at least one seed".into()));
        }
        Ok(())
    }
}

/// A single evaluated run with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub config: String,
    pub column: String,
    pub seed: u64,
    pub value: f64,
    pub micro_f1: Option<f64>,
    pub retrieval_accuracy: Option<f64>,
    pub corpus_hash: String,
    pub plan_hash: String,
    pub guidance_ratio: Option<f64>,
    pub synthetic_fraction: Option<f64>,
    pub lambda: Option<f64>,
    pub noise_mode: Option<NoiseMode>,
    pub labeled_tokens: Option<usize>,
    pub corrupted_tokens: Option<usize>,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub kind: String,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<SweepCell>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

impl SweepTable {
    fn new(kind: &str) -> Self {
        SweepTable {
            kind: kind.into(),
            rows: Vec::new(),
            columns: Vec::new(),
            cells: Vec::new(),
        }
    }

    fn push(&mut self, cell: SweepCell) {
        if !self.rows.contains(&cell.config) {
            self.rows.push(cell.config.clone());
        }
        if !self.columns.contains(&cell.column) {
            self.columns.push(cell.column.clone());
        }
        info!(
            "{} cell {} / {} seed {}: {:.4}",
            self.kind, cell.config, cell.column, cell.seed, cell.value
        );
        self.cells.push(cell);
    }

    pub fn values(&self, row: &str, column: &str) -> Vec<f64> {
        self.cells
            .iter()
            .filter(|c| c.config == row && c.column == column)
            .map(|c| c.value)
            .collect()
    }

    pub fn median(&self, row: &str, column: &str) -> Option<f64> {
        median(self.values(row, column))
    }

    /// Rows × columns of medians; empty where a cell is missing.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["config".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.clone()];
            for col in &self.columns {
                rec.push(
                    self.median(row, col)
                        .map(|v| format!("{v:.4}"))
                        .unwrap_or_default(),
                );
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One line per run with every provenance field.
    pub fn write_cells_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "config",
            "column",
            "seed",
            "value",
            "micro_f1",
            "retrieval_accuracy",
            "corpus_hash",
            "plan_hash",
            "guidance_ratio",
            "synthetic_fraction",
            "lambda",
            "noise_mode",
            "labeled_tokens",
            "corrupted_tokens",
            "wall_time_seconds",
        ])?;
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map(T::to_string).unwrap_or_default()
        }
        for c in &self.cells {
            w.write_record([
                c.config.clone(),
                c.column.clone(),
                c.seed.to_string(),
                c.value.to_string(),
                opt(&c.micro_f1),
                opt(&c.retrieval_accuracy),
                c.corpus_hash.clone(),
                c.plan_hash.clone(),
                opt(&c.guidance_ratio),
                opt(&c.synthetic_fraction),
                opt(&c.lambda),
                opt(&c.noise_mode),
                opt(&c.labeled_tokens),
                opt(&c.corrupted_tokens),
                format!("{:.3}", c.wall_time_seconds),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<kind>.csv` (medians), `<kind>_cells.csv` and `<kind>.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_summary_csv(std::fs::File::create(
            dir.join(format!("{}.csv", self.kind)),
        )?)?;
        self.write_cells_csv(std::fs::File::create(
            dir.join(format!("{}_cells.csv", self.kind)),
        )?)?;
        std::fs::write(
            dir.join(format!("{}.json", self.kind)),
            serde_json::to_string_pretty(self)? + "\n",
        )?;
        Ok(())
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("| {} |", self.kind);
        for c in &self.columns {
            s += &format!(" {c} |");
        }
        s += "\n|---|";
        s += &"---|".repeat(self.columns.len());
        s += "\n";
        for row in &self.rows {
            s += &format!("| {row} |");
            for col in &self.columns {
                match self.median(row, col) {
                    Some(v) => s += &format!(" {:.2} |", 100.0 * v),
                    None => s += " - |",
                }
            }
            s += "\n";
        }
        s
    }
}

pub fn ratio_label(r: f64) -> String {
    format!("{}%", (r * 100.0).round() as i64)
}

fn lambda_label(l: f64) -> String {
    if l.is_infinite() {
        "clean".into()
    } else {
        format!("P_{l}")
    }
}

/// Value of a report for the sweep's task: micro F1, retrieval accuracy,
/// or their mean when both tasks are evaluated.
fn cell_value(report: &MetricsReport, mode: TaskMode) -> f64 {
    match (mode.fine(), mode.coarse()) {
        (true, false) => report.micro_f1.unwrap_or(0.0),
        (false, true) => report.retrieval_accuracy.unwrap_or(0.0),
        _ => {
            let v: Vec<f64> = [report.micro_f1, report.retrieval_accuracy]
                .into_iter()
                .flatten()
                .collect();
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        }
    }
}

struct Cell<'a> {
    config: &'a SweepConfig,
    column: String,
    seed: u64,
    plan_hash: String,
    corpus_hash: &'a str,
}

impl Cell<'_> {
    fn finish(
        self,
        model: &Framework,
        d_i: &[Document],
        mode: TaskMode,
        started: Instant,
    ) -> Result<SweepCell> {
        let rows = run_inference(d_i, model, mode)?;
        let wall = started.elapsed().as_secs_f64();
        let report = evaluate(&rows, &model.spec.labels.gold, wall, self.plan_hash.clone())?;
        Ok(SweepCell {
            config: self.config.name.clone(),
            column: self.column,
            seed: self.seed,
            value: cell_value(&report, mode),
            micro_f1: report.micro_f1,
            retrieval_accuracy: report.retrieval_accuracy,
            corpus_hash: self.corpus_hash.to_string(),
            plan_hash: self.plan_hash,
            guidance_ratio: None,
            synthetic_fraction: None,
            lambda: None,
            noise_mode: None,
            labeled_tokens: None,
            corrupted_tokens: None,
            wall_time_seconds: wall,
        })
    }
}

fn seeded_spec(data: &SweepData, cfg: &SweepConfig, seed: u64) -> ModelSpec {
    let mut spec = data.spec.clone();
    spec.encoder.seed = seed;
    spec.mono_grained = cfg.mono_grained;
    spec
}

fn seeded_plan(cfg: &SweepConfig, seed: u64) -> AdaptationPlan {
    AdaptationPlan {
        seed,
        ..cfg.plan.clone()
    }
}

fn check_configs(configs: &[SweepConfig]) -> Result<()> {
    if configs.is_empty() {
        return Err(Error::InvalidConfig(
            "sweep needs at least one configuration".into(),
        ));
    }
    for c in configs {
        c.plan.validate()?;
        if c.adapt {
            c.plan.validate_adaptation()?;
        }
        if c.adapt && c.mono_grained {
            return Err(Error::InvalidConfig(format!(
                "{}: the mono-grained pipeline has no adaptation stages",
                c.name
            )));
        }
    }
    Ok(())
}

/// Adapts on `d_n` when the configuration asks for it.
fn starting_point(
    d_n: &[Document],
    spec: ModelSpec,
    cfg: &SweepConfig,
    plan: &AdaptationPlan,
) -> Result<FinetuneStart> {
    if cfg.adapt {
        Ok(FinetuneStart::Adapted(
            run_adaptation(d_n, spec, plan)?.checkpoint,
        ))
    } else {
        Ok(FinetuneStart::Scratch(spec))
    }
}

fn start_model(start: &FinetuneStart) -> Result<Framework> {
    match start {
        FinetuneStart::Adapted(c) => Ok(c.model.clone()),
        FinetuneStart::Scratch(spec) => Framework::new(spec.clone()),
    }
}

fn finetuned(
    d_g: &[Document],
    start: &FinetuneStart,
    plan: &AdaptationPlan,
    ratio: f64,
) -> Result<Checkpoint> {
    Ok(run_finetune(d_g, start.clone(), plan, ratio)?.checkpoint)
}

/// Configurations × guidance ratios, with a leading `0%` zero-shot column.
pub fn ratio_sweep(
    data: &SweepData,
    configs: &[SweepConfig],
    ratios: &[f64],
    opts: &SweepOptions,
) -> Result<SweepTable> {
    check_configs(configs)?;
    opts.validate()?;
    for &r in ratios {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "guidance ratio {r} outside (0, 1]"
            )));
        }
    }
    let hash = data.corpus_hash()?;
    let mut table = SweepTable::new("ratio_sweep");
    for &seed in &opts.seeds {
        for cfg in configs {
            let plan = seeded_plan(cfg, seed);
            let started = Instant::now();
            let start = starting_point(data.d_n, seeded_spec(data, cfg, seed), cfg, &plan)?;
            let cell = Cell {
                config: cfg,
                column: ratio_label(0.0),
                seed,
                plan_hash: plan.hash(),
                corpus_hash: &hash,
            };
            let mut zero = cell.finish(&start_model(&start)?, data.d_i, opts.mode, started)?;
            zero.guidance_ratio = Some(0.0);
            table.push(zero);
            for &r in ratios {
                let started = Instant::now();
                let ckpt = finetuned(data.d_g, &start, &plan, r)?;
                let cell = Cell {
                    config: cfg,
                    column: ratio_label(r),
                    seed,
                    plan_hash: plan.hash(),
                    corpus_hash: &hash,
                };
                let mut out = cell.finish(&ckpt.model, data.d_i, opts.mode, started)?;
                out.guidance_ratio = Some(r);
                table.push(out);
            }
        }
    }
    Ok(table)
}

/// Fine-tunes on corrupted guidance labels and evaluates on clean `D_i`.
/// Rows are `<config>/<noise mode>`; the first column is the uncorrupted run.
pub fn robustness_sweep(
    data: &SweepData,
    configs: &[SweepConfig],
    lambdas: &[f64],
    modes: &[NoiseMode],
    ratio: f64,
    opts: &SweepOptions,
) -> Result<SweepTable> {
    check_configs(configs)?;
    opts.validate()?;
    if modes.is_empty() {
        return Err(Error::InvalidConfig(
            "robustness sweep needs a noise mode".into(),
        ));
    }
    for &l in lambdas {
        if l.is_nan() || l <= 0.0 {
            return Err(Error::InvalidConfig(format!("lambda {l} must be positive")));
        }
    }
    let hash = data.corpus_hash()?;
    let gold = &data.spec.labels.gold;
    let mut columns = vec![f64::INFINITY];
    columns.extend(lambdas.iter().copied().filter(|l| l.is_finite()));
    let mut table = SweepTable::new("robustness_sweep");
    for &seed in &opts.seeds {
        for cfg in configs {
            let plan = seeded_plan(cfg, seed);
            let start = starting_point(data.d_n, seeded_spec(data, cfg, seed), cfg, &plan)?;
            for &mode in modes {
                for &lambda in &columns {
                    let started = Instant::now();
                    let noise = LabelNoiseConfig { lambda, mode, seed };
                    let (d_g, stats) = corrupt_guidance_labels_with_stats(data.d_g, gold, &noise)?;
                    let ckpt = finetuned(&d_g, &start, &plan, ratio)?;
                    let row = SweepConfig {
                        name: format!("{}/{}", cfg.name, mode),
                        ..cfg.clone()
                    };
                    let cell = Cell {
                        config: &row,
                        column: lambda_label(lambda),
                        seed,
                        plan_hash: plan.hash(),
                        corpus_hash: &hash,
                    };
                    let mut out = cell.finish(&ckpt.model, data.d_i, TaskMode::Fine, started)?;
                    out.guidance_ratio = Some(ratio);
                    out.lambda = lambda.is_finite().then_some(lambda);
                    out.noise_mode = Some(mode);
                    out.labeled_tokens = Some(stats.labeled);
                    out.corrupted_tokens = Some(stats.corrupted);
                    table.push(out);
                }
            }
        }
    }
    Ok(table)
}

/// Seeded prefix of `d_n` holding `ceil(fraction · n)` documents.
pub fn synthetic_subset(d_n: &[Document], fraction: f64, seed: u64) -> Result<Vec<Document>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "synthetic fraction {fraction} outside (0, 1]"
        )));
    }
    let k = ((fraction * d_n.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut order: Vec<usize> = (0..d_n.len()).collect();
    order.shuffle(&mut rng::seeded(seed, STREAM_SIZE));
    let mut keep: Vec<usize> = order[..k.min(d_n.len())].to_vec();
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| d_n[i].clone()).collect())
}

fn fraction_label(f: f64) -> String {
    if (f - 1.0).abs() < 1e-12 {
        String::new()
    } else if (f - 0.5).abs() < 1e-12 {
        "½ ".into()
    } else {
        format!("{f} ")
    }
}

/// Adaptation on fractions of `D_n`, fine-tuned at `ratio`, plus the
/// "No DW" row that skips adaptation. Adapted configurations only; the
/// control row reuses the first configuration's fine-tuning settings.
pub fn size_sweep(
    data: &SweepData,
    configs: &[SweepConfig],
    fractions: &[f64],
    ratio: f64,
    opts: &SweepOptions,
) -> Result<SweepTable> {
    check_configs(configs)?;
    opts.validate()?;
    for &f in fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "synthetic fraction {f} outside (0, 1]"
            )));
        }
    }
    let hash = data.corpus_hash()?;
    let column = ratio_label(ratio);
    let control = SweepConfig {
        name: "No DW".into(),
        adapt: false,
        mono_grained: false,
        plan: configs[0].plan.clone(),
    };
    let mut table = SweepTable::new("size_sweep");
    for &seed in &opts.seeds {
        let plan = seeded_plan(&control, seed);
        let started = Instant::now();
        let ckpt = finetuned(
            data.d_g,
            &FinetuneStart::Scratch(seeded_spec(data, &control, seed)),
            &plan,
            ratio,
        )?;
        let cell = Cell {
            config: &control,
            column: column.clone(),
            seed,
            plan_hash: plan.hash(),
            corpus_hash: &hash,
        };
        let mut out = cell.finish(&ckpt.model, data.d_i, opts.mode, started)?;
        out.guidance_ratio = Some(ratio);
        table.push(out);
        for cfg in configs.iter().filter(|c| c.adapt) {
            for &f in fractions {
                let plan = seeded_plan(cfg, seed);
                let started = Instant::now();
                let subset = synthetic_subset(data.d_n, f, seed)?;
                let adapted =
                    run_adaptation(&subset, seeded_spec(data, cfg, seed), &plan)?.checkpoint;
                let ckpt = finetuned(data.d_g, &FinetuneStart::Adapted(adapted), &plan, ratio)?;
                let row = SweepConfig {
                    name: format!("{}{}", fraction_label(f), cfg.name),
                    ..cfg.clone()
                };
                let cell = Cell {
                    config: &row,
                    column: column.clone(),
                    seed,
                    plan_hash: plan.hash(),
                    corpus_hash: &hash,
                };
                let mut out = cell.finish(&ckpt.model, data.d_i, opts.mode, started)?;
                out.guidance_ratio = Some(ratio);
                out.synthetic_fraction = Some(f);
                table.push(out);
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_even() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
    }

    #[test]
    fn labels() {
        assert_eq!(ratio_label(0.0), "0%");
        assert_eq!(ratio_label(0.3), "30%");
        assert_eq!(lambda_label(f64::INFINITY), "clean");
        assert_eq!(lambda_label(1.5), "P_1.5");
        assert_eq!(fraction_label(0.5), "½ ");
    }

    #[test]
    fn subset_rejects_bad_fractions() {
        assert!(synthetic_subset(&[], 0.0, 0).is_err());
        assert!(synthetic_subset(&[], 1.5, 0).is_err());
    }
}
