use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use docadapt_core::docmodel::io::{
    corpus_hash, labels_path, read_jsonl, read_labels, write_jsonl, write_labels,
};
use docadapt_core::docmodel::{assign_splits, Document, LabelSpaces, Split};
use docadapt_core::enhancers::{read_predictions, write_predictions};
use docadapt_core::eval::{
    evaluate, ratio_sweep, robustness_sweep, size_sweep, MetricsReport, SweepConfig, SweepData,
    SweepOptions, SweepTable,
};
use docadapt_core::model::ModelSpec;
use docadapt_core::synthgen::{
    annotate_collection, generate_corpus, measure_annotation_quality, synthetic_label_space,
    AnnotationProvider, CorpusSpec, DocumentKind, RemoteConfig, RemoteProvider, RuleOracle,
};
use docadapt_core::workflow::{
    run_adaptation, run_finetune, run_inference, sha256_hex, AdaptationPlan, Checkpoint,
    FinetuneStart, RunDir, RunRecord, StageTag, TaskMode, TrainOutput,
};
use log::info;
use serde::Serialize;

use crate::config::Config;
use crate::manifest::Manifest;
use crate::{Common, Usage};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| usage(format!("bad {what} value {x:?}")))
        })
        .collect()
}

/// Defaults, then the config file, then `flags`; logged once resolved.
fn resolve(
    common: &Common,
    cmd: &str,
    flags: impl FnOnce(&mut Config) -> Result<()>,
) -> Result<Config> {
    let mut cfg = Config::load(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    flags(&mut cfg)?;
    cfg.propagate_seed();
    cfg.validate()?;
    match &common.config {
        Some(p) => info!("{cmd}: defaults < {} < command-line flags", p.display()),
        None => info!("{cmd}: defaults < command-line flags"),
    }
    info!("{cmd}: effective config {}", serde_json::to_string(&cfg)?);
    Ok(cfg)
}

/// `--out` naming a file is used as is; otherwise `default_name` inside the
/// `--out` directory (or `default_dir`).
fn out_file(common: &Common, default_dir: &str, default_name: &str) -> Result<PathBuf> {
    let path = match &common.out {
        Some(p) if p.extension().is_some() => p.clone(),
        Some(p) => p.join(default_name),
        None => Path::new(default_dir).join(default_name),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(path)
}

fn out_dir(common: &Common, default_dir: &str) -> Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| default_dir.into());
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn sidecar_manifest(file: &Path) -> PathBuf {
    file.with_extension("manifest.json")
}

struct Corpus {
    path: PathBuf,
    docs: Vec<Document>,
    labels: LabelSpaces,
}

impl Corpus {
    fn load(path: &Path) -> Result<Self> {
        let docs =
            read_jsonl(path).with_context(|| format!("reading corpus {}", path.display()))?;
        let lp = labels_path(path);
        let labels =
            read_labels(&lp).with_context(|| format!("reading labels {}", lp.display()))?;
        Ok(Corpus {
            path: path.to_path_buf(),
            docs,
            labels,
        })
    }

    fn split(&self, s: Split) -> Vec<Document> {
        self.docs.iter().filter(|d| d.split == s).cloned().collect()
    }

    fn spec(&self, cfg: &Config) -> ModelSpec {
        ModelSpec::from_corpus(
            &self.docs,
            self.labels.clone(),
            cfg.encoder.clone(),
            cfg.sit_memory,
        )
    }

    fn record(&self, m: &mut Manifest) -> Result<()> {
        m.input(&self.path)?;
        m.input(&labels_path(&self.path))
    }
}

fn parse_split(s: &str) -> Result<Split> {
    match s {
        "n" | "synthetic" => Ok(Split::Synthetic),
        "g" | "guidance" => Ok(Split::Guidance),
        "i" | "inference" => Ok(Split::Inference),
        _ => Err(usage(format!(
            "unknown split {s:?}; expected synthetic, guidance or inference"
        ))),
    }
}

#[derive(Args, Debug)]
pub struct GenCorpusArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of documents.
    #[arg(long)]
    pub n: Option<usize>,
    /// form or receipt.
    #[arg(long)]
    pub kind: Option<String>,
    /// Relative D_n,D_g,D_i sizes, e.g. 500,40,100.
    #[arg(long)]
    pub splits: Option<String>,
}

pub fn gen_corpus(a: GenCorpusArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = resolve(&a.common, "gen-corpus", |c| {
        if let Some(n) = a.n {
            c.corpus.n_documents = n;
        }
        if let Some(k) = &a.kind {
            c.corpus.kind = DocumentKind::from_str(k).map_err(|e| usage(e.to_string()))?;
        }
        if let Some(s) = &a.splits {
            let v: Vec<usize> = parse_list(s, "split")?;
            c.corpus.splits = v
                .try_into()
                .map_err(|_| usage("--splits takes three counts"))?;
        }
        Ok(())
    })?;
    let path = out_file(&a.common, ".", "corpus.jsonl")?;
    let spec = CorpusSpec::new(cfg.corpus.n_documents, cfg.corpus.kind, cfg.seed);
    let mut docs = generate_corpus(&spec)?;
    let [n, g, i] = cfg.split_counts();
    for (idx, split) in assign_splits(docs.len(), n, g, i, cfg.seed)? {
        docs[idx].split = split;
    }
    write_jsonl(&path, &docs)?;
    let lp = labels_path(&path);
    write_labels(
        &lp,
        &LabelSpaces {
            gold: spec.gold_label_space.clone(),
            synthetic: synthetic_label_space(),
        },
    )?;
    info!(
        "wrote {} documents ({n}/{g}/{i}) to {}",
        docs.len(),
        path.display()
    );
    let mut m = Manifest::new(&cfg);
    m.output(&path)?;
    m.output(&lp)?;
    m.wall_time_seconds = started.elapsed().as_secs_f64();
    m.write(&sidecar_manifest(&path))?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct AnnotateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Corpus written by gen-corpus.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Target mean IoU of the simulated layout annotation.
    #[arg(long)]
    pub layout_noise: Option<f64>,
    /// rule or remote.
    #[arg(long)]
    pub provider: Option<String>,
    /// Maximum QA pairs per document.
    #[arg(long)]
    pub max_qa: Option<usize>,
    /// Audit log for remote requests.
    #[arg(long)]
    pub audit: Option<PathBuf>,
}

#[derive(Serialize)]
struct AnnotateReport {
    documents: usize,
    annotated: usize,
    failures: Vec<docadapt_core::synthgen::AnnotationFailure>,
    mean_iou: f64,
    mean_text_jaccard: f64,
}

pub fn annotate(a: AnnotateArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = resolve(&a.common, "annotate", |c| {
        if let Some(v) = a.layout_noise {
            c.annotate.layout_noise.target_mean_iou = v;
        }
        if let Some(p) = &a.provider {
            c.provider = p.clone();
        }
        if let Some(k) = a.max_qa {
            c.annotate.max_pairs = k;
        }
        Ok(())
    })?;
    let corpus = Corpus::load(&a.corpus)?;
    let provider: Box<dyn AnnotationProvider> = match cfg.provider.as_str() {
        "rule" => Box::new(RuleOracle),
        "remote" => {
            let mut rc = RemoteConfig::from_env()?;
            rc.audit_path = a.audit.clone();
            Box::new(RemoteProvider::new(rc)?)
        }
        other => {
            return Err(usage(format!(
                "unknown provider {other:?}; expected rule or remote"
            )))
        }
    };
    let out = annotate_collection(
        &corpus.docs,
        &cfg.annotate,
        provider.as_ref(),
        &corpus.labels.synthetic,
    )?;
    let failed: std::collections::BTreeSet<&str> =
        out.failures.iter().map(|f| f.doc.as_str()).collect();
    let gold: Vec<Document> = corpus
        .docs
        .iter()
        .filter(|d| d.split == Split::Synthetic && !failed.contains(d.id.as_str()))
        .cloned()
        .collect();
    let synthetic: Vec<Document> = out
        .documents
        .iter()
        .filter(|d| d.split == Split::Synthetic)
        .cloned()
        .collect();
    let quality = measure_annotation_quality(&synthetic, &gold)?;
    info!(
        "annotated {} documents, {} failures, mean IoU {:.3}",
        synthetic.len(),
        out.failures.len(),
        quality.mean_iou
    );

    let path = out_file(&a.common, ".", "annotated.jsonl")?;
    write_jsonl(&path, &out.documents)?;
    let lp = labels_path(&path);
    write_labels(&lp, &corpus.labels)?;
    let report_path = path.with_extension("report.json");
    let report = AnnotateReport {
        documents: out.documents.len(),
        annotated: synthetic.len(),
        failures: out.failures,
        mean_iou: quality.mean_iou,
        mean_text_jaccard: quality.mean_text_jaccard,
    };
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
    let mut m = Manifest::new(&cfg);
    corpus.record(&mut m)?;
    m.output(&path)?;
    m.output(&lp)?;
    m.output(&report_path)?;
    m.wall_time_seconds = started.elapsed().as_secs_f64();
    m.write(&sidecar_manifest(&path))?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct AdaptArgs {
    #[command(flatten)]
    pub common: Common,
    /// Annotated corpus.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Comma-separated stages out of sds, sst, sit; unlisted stages are skipped.
    #[arg(long)]
    pub tasks: Option<String>,
    /// Epochs for every listed stage.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// fine, coarse or both.
    #[arg(long)]
    pub mode: Option<TaskMode>,
}

fn apply_tasks(
    plan: &mut AdaptationPlan,
    tasks: Option<&str>,
    epochs: Option<usize>,
) -> Result<()> {
    let Some(tasks) = tasks else {
        if let Some(e) = epochs {
            plan.sds_epochs = e;
            plan.sst_epochs = e;
            plan.sit_epochs = e;
        }
        return Ok(());
    };
    let mut chosen = [false; 3];
    for t in tasks.split(',').map(str::trim) {
        match t {
            "sds" => chosen[0] = true,
            "sst" => chosen[1] = true,
            "sit" => chosen[2] = true,
            _ => {
                return Err(usage(format!(
                    "unknown task {t:?}; expected sds, sst or sit"
                )))
            }
        }
    }
    for (on, slot) in chosen.into_iter().zip([
        &mut plan.sds_epochs,
        &mut plan.sst_epochs,
        &mut plan.sit_epochs,
    ]) {
        *slot = match (on, epochs) {
            (false, _) => 0,
            (true, Some(e)) => e,
            (true, None) => (*slot).max(1),
        };
    }
    Ok(())
}

fn run_name(dir: &Path) -> String {
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

fn save_run(
    dir: &Path,
    out: &TrainOutput,
    cfg: &Config,
    corpus: &Corpus,
    ratio: Option<f64>,
    parent: Option<&Path>,
    started: Instant,
) -> Result<()> {
    let rd = RunDir::new(dir);
    let bytes = out.checkpoint.to_bytes()?;
    let record = RunRecord {
        name: run_name(dir),
        stage: out.checkpoint.stage,
        plan: cfg.plan.clone(),
        plan_hash: cfg.plan.hash(),
        seed: cfg.seed,
        corpus_hash: corpus_hash(&corpus.docs)?,
        checkpoint_sha256: sha256_hex(&bytes),
        guidance_ratio: ratio,
        parent_checkpoint: parent.map(|p| p.display().to_string()),
        metrics: out.checkpoint.metrics.clone(),
        command: std::env::args().collect(),
    };
    let ckpt = rd.save(&out.checkpoint, &out.losses, &record)?;
    info!("wrote {} ({})", ckpt.display(), out.checkpoint.stage);
    let mut m = Manifest::new(cfg);
    corpus.record(&mut m)?;
    if let Some(p) = parent {
        m.input(p)?;
    }
    m.output(&ckpt)?;
    m.output(&rd.record_path())?;
    m.output(&rd.losses_path())?;
    m.wall_time_seconds = started.elapsed().as_secs_f64();
    m.write(&dir.join("manifest.json"))?;
    Ok(())
}

pub fn adapt(a: AdaptArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = resolve(&a.common, "adapt", |c| {
        apply_tasks(&mut c.plan, a.tasks.as_deref(), a.epochs)?;
        if let Some(lr) = a.lr {
            c.plan.learning_rate = lr;
        }
        if let Some(m) = a.mode {
            c.plan.task_mode = m;
        }
        Ok(())
    })?;
    let corpus = Corpus::load(&a.corpus)?;
    let d_n = corpus.split(Split::Synthetic);
    let out = run_adaptation(&d_n, corpus.spec(&cfg), &cfg.plan)?;
    let dir = out_dir(&a.common, "runs/adapt")?;
    save_run(&dir, &out, &cfg, &corpus, None, None, started)
}

#[derive(Args, Debug)]
pub struct FinetuneArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Fraction of the guidance set, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub ratio: f64,
    /// Adapted F_n checkpoint; omitted trains F_t from scratch.
    #[arg(long)]
    pub from: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub mode: Option<TaskMode>,
    /// Keep the token and entity decoders fixed.
    #[arg(long)]
    pub freeze_decoders: bool,
}

pub fn finetune(a: FinetuneArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = resolve(&a.common, "finetune", |c| {
        if let Some(e) = a.epochs {
            c.plan.finetune_epochs = e;
        }
        if let Some(lr) = a.lr {
            c.plan.finetune_learning_rate = Some(lr);
        }
        if let Some(m) = a.mode {
            c.plan.task_mode = m;
        }
        if a.freeze_decoders {
            c.plan.finetune_decoders = false;
        }
        Ok(())
    })?;
    if !(a.ratio > 0.0 && a.ratio <= 1.0) {
        return Err(usage(format!("--ratio {} outside (0, 1]", a.ratio)));
    }
    let corpus = Corpus::load(&a.corpus)?;
    let start = match &a.from {
        Some(p) => {
            let ckpt = Checkpoint::load(p).with_context(|| format!("loading {}", p.display()))?;
            if ckpt.stage != StageTag::Fn {
                return Err(usage(format!(
                    "{} is a {} checkpoint; --from needs F_n",
                    p.display(),
                    ckpt.stage
                )));
            }
            FinetuneStart::Adapted(ckpt)
        }
        None => FinetuneStart::Scratch(corpus.spec(&cfg)),
    };
    let d_g = corpus.split(Split::Guidance);
    let out = run_finetune(&d_g, start, &cfg.plan, a.ratio)?;
    let dir = out_dir(&a.common, "runs/finetune")?;
    save_run(
        &dir,
        &out,
        &cfg,
        &corpus,
        Some(a.ratio),
        a.from.as_deref(),
        started,
    )
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub ckpt: PathBuf,
    /// fine, coarse or both.
    #[arg(long)]
    pub mode: Option<TaskMode>,
    /// synthetic, guidance or inference.
    #[arg(long, default_value = "inference")]
    pub split: String,
}

pub fn infer(a: InferArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = resolve(&a.common, "infer", |c| {
        if let Some(m) = a.mode {
            c.plan.task_mode = m;
        }
        Ok(())
    })?;
    let split = parse_split(&a.split)?;
    let corpus = Corpus::load(&a.corpus)?;
    let ckpt =
        Checkpoint::load(&a.ckpt).with_context(|| format!("loading {}", a.ckpt.display()))?;
    let docs = corpus.split(split);
    let rows = run_inference(&docs, &ckpt.model, cfg.plan.task_mode)?;
    let dir = out_dir(&a.common, "infer")?;
    let preds = dir.join("predictions.csv");
    write_predictions(&preds, &rows)?;
    let bytes = std::fs::read(&a.ckpt)?;
    let report = evaluate(
        &rows,
        &ckpt.model.spec.labels.gold,
        started.elapsed().as_secs_f64(),
        sha256_hex(&bytes),
    )?;
    let metrics = dir.join("metrics.json");
    write_report(&metrics, &report)?;
    info!(
        "{} predictions on {} ({} checkpoint): {}",
        rows.len(),
        split,
        ckpt.stage,
        summary(&report)
    );
    let mut m = Manifest::new(&cfg);
    corpus.record(&mut m)?;
    m.input(&a.ckpt)?;
    m.output(&preds)?;
    m.output(&metrics)?;
    m.wall_time_seconds = started.elapsed().as_secs_f64();
    m.write(&dir.join("manifest.json"))?;
    Ok(())
}

fn write_report(path: &Path, r: &MetricsReport) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(r)? + "\n")?;
    Ok(())
}

fn summary(r: &MetricsReport) -> String {
    let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    format!(
        "micro_f1 {} retrieval_accuracy {} anls {} (n={})",
        f(r.micro_f1),
        f(r.retrieval_accuracy),
        f(r.anls),
        r.n_samples
    )
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// predictions.csv written by infer.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Label sidecar; defaults to the one next to --corpus.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = resolve(&a.common, "eval", |_| Ok(()))?;
    let lp = match (&a.labels, &a.corpus) {
        (Some(l), _) => l.clone(),
        (None, Some(c)) => labels_path(c),
        (None, None) => return Err(usage("eval needs --labels or --corpus")),
    };
    let labels = read_labels(&lp).with_context(|| format!("reading labels {}", lp.display()))?;
    let rows = read_predictions(&a.predictions)?;
    let fingerprint = sha256_hex(&std::fs::read(&a.predictions)?);
    let report = evaluate(
        &rows,
        &labels.gold,
        started.elapsed().as_secs_f64(),
        fingerprint,
    )?;
    let path = out_file(&a.common, ".", "metrics.json")?;
    write_report(&path, &report)?;
    println!("{}", summary(&report));
    let mut m = Manifest::new(&cfg);
    m.input(&a.predictions)?;
    m.input(&lp)?;
    m.output(&path)?;
    m.wall_time_seconds = started.elapsed().as_secs_f64();
    m.write(&sidecar_manifest(&path))?;
    Ok(())
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum SweepKind {
    Ratio,
    Size,
    Robustness,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    pub kind: SweepKind,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Comma-separated seeds.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Guidance ratios for the ratio sweep.
    #[arg(long)]
    pub ratios: Option<String>,
    /// Synthetic-set fractions for the size sweep.
    #[arg(long)]
    pub fractions: Option<String>,
    /// Noise levels for the robustness sweep.
    #[arg(long)]
    pub lambdas: Option<String>,
    #[arg(long)]
    pub mode: Option<TaskMode>,
}

/// Built-in rows when the config names none.
fn default_configs(kind: SweepKind, plan: &AdaptationPlan) -> Vec<SweepConfig> {
    let only = |sst: bool, sit: bool| AdaptationPlan {
        sst_epochs: if sst { plan.sst_epochs.max(1) } else { 0 },
        sit_epochs: if sit { plan.sit_epochs.max(1) } else { 0 },
        sds_epochs: plan.sds_epochs.max(1),
        ..plan.clone()
    };
    match kind {
        SweepKind::Ratio => vec![
            SweepConfig::baseline(plan.clone()),
            SweepConfig::adapted("SDS", only(false, false)),
            SweepConfig::adapted("SDS+SST", only(true, false)),
            SweepConfig::adapted("SDS+SIT", only(false, true)),
            SweepConfig::adapted("SDS+SST+SIT", only(true, true)),
        ],
        SweepKind::Size => vec![
            SweepConfig::adapted("SDS", only(false, false)),
            SweepConfig::adapted("SDS+SST+SIT", only(true, true)),
        ],
        SweepKind::Robustness => vec![
            SweepConfig::mono_grained(AdaptationPlan {
                task_mode: TaskMode::Fine,
                ..plan.clone()
            }),
            SweepConfig::adapted(
                "SDS+SST",
                AdaptationPlan {
                    task_mode: TaskMode::Fine,
                    ..only(true, false)
                },
            ),
        ],
    }
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = resolve(&a.common, "sweep", |c| {
        if let Some(s) = &a.seeds {
            c.sweep.seeds = parse_list(s, "seed")?;
        }
        if let Some(s) = &a.ratios {
            c.sweep.ratios = parse_list(s, "ratio")?;
        }
        if let Some(s) = &a.fractions {
            c.sweep.fractions = parse_list(s, "fraction")?;
        }
        if let Some(s) = &a.lambdas {
            c.sweep.lambdas = parse_list(s, "lambda")?;
        }
        if let Some(m) = a.mode {
            c.sweep.mode = m;
        }
        Ok(())
    })?;
    let corpus = Corpus::load(&a.corpus)?;
    let (d_n, d_g, d_i) = (
        corpus.split(Split::Synthetic),
        corpus.split(Split::Guidance),
        corpus.split(Split::Inference),
    );
    let spec = corpus.spec(&cfg);
    let data = SweepData {
        d_n: &d_n,
        d_g: &d_g,
        d_i: &d_i,
        spec: &spec,
    };
    let configs = if cfg.sweep.configs.is_empty() {
        default_configs(a.kind, &cfg.plan)
    } else {
        cfg.sweep.configs.clone()
    };
    let opts = SweepOptions {
        seeds: cfg.sweep.seeds.clone(),
        mode: cfg.sweep.mode,
    };
    let table = match a.kind {
        SweepKind::Ratio => ratio_sweep(&data, &configs, &cfg.sweep.ratios, &opts)?,
        SweepKind::Size => size_sweep(
            &data,
            &configs,
            &cfg.sweep.fractions,
            cfg.sweep.guidance_ratio,
            &opts,
        )?,
        SweepKind::Robustness => robustness_sweep(
            &data,
            &configs,
            &cfg.sweep.lambdas,
            &cfg.sweep.noise_modes,
            cfg.sweep.guidance_ratio,
            &opts,
        )?,
    };
    let dir = out_dir(&a.common, "sweeps")?;
    table.save(&dir)?;
    print!("{}", table.to_markdown());
    let mut m = Manifest::new(&cfg);
    corpus.record(&mut m)?;
    for suffix in [".csv", "_cells.csv", ".json"] {
        m.output(&dir.join(format!("{}{suffix}", table.kind)))?;
    }
    m.wall_time_seconds = started.elapsed().as_secs_f64();
    m.write(&dir.join(format!("{}.manifest.json", table.kind)))?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directories searched recursively for metrics.json and sweep tables.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
}

fn walk(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            walk(&p, found)?;
        } else {
            found.push(p);
        }
    }
    Ok(())
}

pub fn report(a: ReportArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = resolve(&a.common, "report", |_| Ok(()))?;
    let mut files = Vec::new();
    for d in &a.inputs {
        walk(d, &mut files)?;
    }
    let mut m = Manifest::new(&cfg);
    let mut text = String::from("# Report\n");
    let mut metrics = Vec::new();
    for f in &files {
        let name = f.file_name().and_then(|s| s.to_str()).unwrap_or_default();
        if name == "metrics.json" {
            let r: MetricsReport = serde_json::from_str(&std::fs::read_to_string(f)?)
                .with_context(|| format!("parsing {}", f.display()))?;
            metrics.push((f.clone(), r));
            m.input(f)?;
        } else if name.ends_with("_sweep.json") {
            let t: SweepTable = serde_json::from_str(&std::fs::read_to_string(f)?)
                .with_context(|| format!("parsing {}", f.display()))?;
            text += &format!("\n## {} ({})\n\n{}", t.kind, f.display(), t.to_markdown());
            m.input(f)?;
        }
    }
    if !metrics.is_empty() {
        text +=
            "\n## Runs\n\n| run | micro F1 | retrieval acc. | ANLS | n |\n|---|---|---|---|---|\n";
        let pct = |v: Option<f64>| {
            v.map(|x| format!("{:.2}", 100.0 * x))
                .unwrap_or_else(|| "-".into())
        };
        for (f, r) in &metrics {
            let run = f
                .parent()
                .map(|p| p.display().to_string())
                .unwrap_or_default();
            text += &format!(
                "| {run} | {} | {} | {} | {} |\n",
                pct(r.micro_f1),
                pct(r.retrieval_accuracy),
                pct(r.anls),
                r.n_samples
            );
        }
    }
    let path = out_file(&a.common, ".", "report.md")?;
    std::fs::write(&path, &text)?;
    print!("{text}");
    m.output(&path)?;
    m.wall_time_seconds = started.elapsed().as_secs_f64();
    m.write(&sidecar_manifest(&path))?;
    Ok(())
}
