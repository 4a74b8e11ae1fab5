use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use handsup::datasets::{balance_undersample, materialize, split_by_identity, Manifest, SplitSpec, SYNTHETIC_LABEL_MIX};
use handsup::experiment::{run_experiment_matrix, ExperimentMatrixConfig, MatrixPools};
use handsup::iteration::BothOffMetrics;
use handsup::nn::{load_checkpoint, save_checkpoint, ModelConfig, ModelParams};
use handsup::pipeline::{evaluate, export_errors, finetune_mixed, train, Dataset, TrainConfig};
use handsup::scenegen::GenerationConfig;
use handsup::triage::{serve, CategoryStore, TriageSession};

#[derive(Parser)]
#[command(name = "handsup", version, about = "Synthetic hands-on-wheel data lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a generation config into PPM frames plus a manifest.
    Generate(GenerateArgs),
    /// Relabel a manifest from its stored hand distances.
    Label(LabelArgs),
    /// Split a manifest by driver identity into train/val/test.
    Split(SplitArgs),
    /// Undersample a manifest toward a joint-label mix.
    Balance(BalanceArgs),
    /// Train a model from scratch (or from --init).
    Train(TrainArgs),
    /// Fine-tune with an even mix of synthetic and target-domain frames.
    Finetune(FinetuneArgs),
    /// Per-hand AUC, precision and recall of a checkpoint.
    Evaluate(EvaluateArgs),
    /// Write misclassified frames and their crops for review.
    ExportErrors(ExportArgs),
    /// Serve the review API over an error manifest.
    Triage(TriageArgs),
    /// Export errors, review, apply the plan, generate, fine-tune, evaluate.
    Iterate(IterateArgs),
    /// Run the real-only versus synthetic-plus-real experiment matrix.
    Matrix(MatrixArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Synthetic,
    PseudoReal,
}

#[derive(Args)]
struct GenerateArgs {
    /// Generation config file; a preset is used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "synthetic")]
    preset: Preset,
    /// Full-size frames and sequences.
    #[arg(long)]
    paper_scale: bool,
    /// Dataset root; receives frames, manifest.tsv and generation.cfg.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LabelArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// On-wheel distance threshold in meters.
    #[arg(long, default_value_t = handsup::labeling::DEFAULT_ON_WHEEL_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0.55)]
    train: f64,
    #[arg(long, default_value_t = 0.15)]
    val: f64,
    #[arg(long, default_value_t = 0.30)]
    test: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for train.tsv, val.tsv and test.tsv (default: beside the manifest).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BalanceArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Four fractions for (on,on), (on,off), (off,on), (off,off).
    #[arg(long, value_delimiter = ',')]
    target: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct TrainOpts {
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Full-size optimizer settings and batch counts.
    #[arg(long)]
    paper_scale: bool,
}

impl TrainOpts {
    fn config(&self, finetune: bool) -> TrainConfig {
        let mut c = TrainConfig {
            seed: self.seed,
            ..TrainConfig::default()
        };
        if self.paper_scale {
            c = c.paper_scale();
        }
        if let Some(b) = self.batches {
            if finetune {
                c.finetune_batches = b;
            } else {
                c.max_batches = b;
            }
        }
        if let Some(lr) = self.lr {
            c.optimizer.lr = lr;
        }
        if let Some(bs) = self.batch_size {
            c.optimizer.batch_size = bs;
        }
        c
    }
}

/// A manifest and the directory its image paths are relative to.
#[derive(Args, Clone)]
struct Data {
    #[arg(long)]
    manifest: PathBuf,
    /// Dataset root (default: the manifest's directory).
    #[arg(long, env = "HANDSUP_DATA_ROOT")]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: PathBuf,
    #[arg(long, env = "HANDSUP_DATA_ROOT")]
    data: Option<PathBuf>,
    /// Start from this checkpoint instead of a fresh initialization.
    #[arg(long)]
    init: Option<PathBuf>,
    #[command(flatten)]
    opts: TrainOpts,
    /// Checkpoint path; the history goes beside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FinetuneArgs {
    #[arg(long)]
    init: PathBuf,
    #[arg(long)]
    synth: PathBuf,
    #[arg(long)]
    synth_data: Option<PathBuf>,
    #[arg(long)]
    real: PathBuf,
    #[arg(long)]
    real_data: Option<PathBuf>,
    #[command(flatten)]
    opts: TrainOpts,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: Data,
    /// Report path; a .json twin is written beside it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: Data,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TriageArgs {
    #[arg(long)]
    errors: PathBuf,
    /// Generation config the plan is applied to.
    #[arg(long)]
    base_config: PathBuf,
    /// Category log (default: store.jsonl beside the error manifest).
    #[arg(long)]
    store: Option<PathBuf>,
    /// Where applied configs are written (default: configs/ beside the error manifest).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
}

#[derive(Args)]
struct IterateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Config of the synthetic pool the new sequences extend.
    #[arg(long)]
    synth_config: PathBuf,
    #[arg(long)]
    synth: PathBuf,
    #[arg(long)]
    real: PathBuf,
    /// Target-domain frames whose errors are reviewed.
    #[arg(long)]
    review: PathBuf,
    /// Fixed test set for the before/after comparison.
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    work: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Skip serving and use the categories already in the store.
    #[arg(long)]
    no_serve: bool,
    #[command(flatten)]
    opts: TrainOpts,
}

#[derive(Args)]
struct MatrixArgs {
    #[arg(long)]
    synth_config: Option<PathBuf>,
    #[arg(long)]
    real_config: Option<PathBuf>,
    #[arg(long)]
    repetitions: Option<usize>,
    /// Eleven repetitions, full-size data and training.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn root_of(manifest: &Path, data: &Option<PathBuf>) -> PathBuf {
    data.clone()
        .unwrap_or_else(|| manifest.parent().unwrap_or(Path::new(".")).to_path_buf())
}

fn load(manifest: &Path, data: &Option<PathBuf>, input_size: usize) -> Result<(Manifest, Dataset)> {
    let m = Manifest::read(manifest)?;
    let ds = Dataset::from_manifest(&m, &root_of(manifest, data), input_size)?;
    Ok((m, ds))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(p).with_context(|| p.display().to_string())?;
    }
    std::fs::write(path, text).with_context(|| path.display().to_string())
}

fn history_path(ckpt: &Path) -> PathBuf {
    ckpt.with_extension("history.txt")
}

fn generation_config(path: &Option<PathBuf>, preset: Preset, paper: bool) -> Result<GenerationConfig> {
    let cfg = match path {
        Some(p) => GenerationConfig::read(p)?,
        None => match preset {
            Preset::Synthetic => GenerationConfig::desk_synthetic(),
            Preset::PseudoReal => GenerationConfig::desk_pseudo_real(),
        },
    };
    Ok(if paper { cfg.paper_scale() } else { cfg })
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Runtime::new()?)
}

fn serve_until_interrupt(session: TriageSession, bind: SocketAddr) -> Result<()> {
    runtime()?.block_on(async move {
        tokio::select! {
            r = serve(session, bind) => r.map_err(anyhow::Error::from),
            _ = tokio::signal::ctrl_c() => Ok(()),
        }
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => {
            let cfg = generation_config(&a.config, a.preset, a.paper_scale)?;
            let m = materialize(&cfg, &a.out, 0..cfg.num_sequences)?;
            m.write(&a.out.join("manifest.tsv"))?;
            cfg.write(&a.out.join("generation.cfg"))?;
            println!("frames {} config_hash {}", m.len(), m.config_hash);
        }
        Command::Label(a) => {
            let m = Manifest::read(&a.manifest)?.relabeled(a.threshold)?;
            m.write(&a.out)?;
            let h = m.histogram();
            println!("frames {} on_on {} on_off {} off_on {} off_off {}", h.total(), h.counts[0], h.counts[1], h.counts[2], h.counts[3]);
        }
        Command::Split(a) => {
            let m = Manifest::read(&a.manifest)?;
            let (tr, va, te) = split_by_identity(&m, &SplitSpec::new(a.train, a.val, a.test, a.seed)?)?;
            let dir = a.out.unwrap_or_else(|| root_of(&a.manifest, &None));
            for (name, part) in [("train", &tr), ("val", &va), ("test", &te)] {
                part.write(&dir.join(format!("{name}.tsv")))?;
                println!("{name} frames {} drivers {}", part.len(), part.drivers().len());
            }
        }
        Command::Balance(a) => {
            let m = Manifest::read(&a.manifest)?;
            let target = match a.target.as_deref() {
                Some(&[a, b, c, d]) => [a, b, c, d],
                Some(v) => {
                    return Err(handsup::Error::InvalidConfig(format!("--target needs 4 fractions, got {}", v.len())).into());
                }
                None => SYNTHETIC_LABEL_MIX,
            };
            let out = balance_undersample(&m, &target, a.seed)?;
            out.write(&a.out)?;
            let f = out.histogram().fractions();
            println!("frames {} fractions {:.4} {:.4} {:.4} {:.4}", out.len(), f[0], f[1], f[2], f[3]);
        }
        Command::Train(a) => {
            let tc = a.opts.config(false);
            let params = match &a.init {
                Some(p) => load_checkpoint(p)?,
                None => ModelParams::init(ModelConfig::default(), a.opts.seed)?,
            };
            let size = params.config.input_size;
            let (_, tr) = load(&a.train, &a.data, size)?;
            let (_, va) = load(&a.val, &a.data, size)?;
            let (p, history) = train(&params, &tr, &va, &tc)?;
            save_checkpoint(&p, &a.out)?;
            write_text(&history_path(&a.out), &history.to_text())?;
            println!("best_batch {} checkpoint {}", history.best_batch, a.out.display());
        }
        Command::Finetune(a) => {
            let tc = a.opts.config(true);
            let params = load_checkpoint(&a.init)?;
            let size = params.config.input_size;
            let (_, synth) = load(&a.synth, &a.synth_data, size)?;
            let (_, real) = load(&a.real, &a.real_data, size)?;
            let (p, audit) = finetune_mixed(&params, &synth, &real, &tc)?;
            save_checkpoint(&p, &a.out)?;
            println!("batches {} checkpoint {}", audit.len(), a.out.display());
        }
        Command::Evaluate(a) => {
            let params = load_checkpoint(&a.checkpoint)?;
            let (m, ds) = load(&a.data.manifest, &a.data.data, params.config.input_size)?;
            let report = evaluate(&params, &ds)?;
            let text = format!("config_hash {}\n{}", m.config_hash, report.to_text());
            print!("{text}");
            if let Some(out) = a.out {
                write_text(&out, &text)?;
                write_text(&out.with_extension("json"), &serde_json::to_string_pretty(&report)?)?;
            }
        }
        Command::ExportErrors(a) => {
            let params = load_checkpoint(&a.checkpoint)?;
            let (m, ds) = load(&a.data.manifest, &a.data.data, params.config.input_size)?;
            let errs = export_errors(&params, &ds, &m, &root_of(&a.data.manifest, &a.data.data), &a.out)?;
            println!("errors {} of {} frames", errs.errors.len(), m.len());
        }
        Command::Triage(a) => {
            let dir = root_of(&a.errors, &None);
            let store = a.store.unwrap_or_else(|| dir.join("store.jsonl"));
            let out_dir = a.out_dir.unwrap_or_else(|| dir.join("configs"));
            let session = TriageSession::open(&a.errors, &store, &a.base_config, &out_dir)?;
            serve_until_interrupt(session, a.bind)?;
        }
        Command::Iterate(a) => iterate(a)?,
        Command::Matrix(a) => {
            let mut cfg = ExperimentMatrixConfig::default();
            let sc = generation_config(&a.synth_config, Preset::Synthetic, a.paper_scale)?;
            let rc = generation_config(&a.real_config, Preset::PseudoReal, a.paper_scale)?;
            if a.paper_scale {
                cfg = cfg.paper_scale();
                cfg.train = cfg.train.paper_scale();
            }
            if let Some(r) = a.repetitions {
                cfg.repetitions = r;
                cfg.seeds = (0..r as u64).collect();
            }
            sc.validate()?;
            rc.validate()?;
            let synth = handsup::datasets::generate_frames(&sc)?;
            let real = handsup::datasets::generate_frames(&rc)?;
            let pools = MatrixPools::from_frames(&synth, &real, cfg.model.input_size, a.seed)?;
            let result = run_experiment_matrix(&cfg, &pools)?;
            result.write(&a.out)?;
            print!("{}", result.summary_text());
        }
    }
    Ok(())
}

fn iterate(a: IterateArgs) -> Result<()> {
    let params = load_checkpoint(&a.checkpoint)?;
    let size = params.config.input_size;
    let (review_m, review) = load(&a.review, &None, size)?;
    let errors_path = a.work.join("errors/errors.tsv");
    let errs = export_errors(&params, &review, &review_m, &root_of(&a.review, &None), &errors_path)?;
    println!("errors {} of {} frames exported to {}", errs.errors.len(), review_m.len(), errors_path.display());

    let store = a.work.join("errors/store.jsonl");
    let mut session = TriageSession::open(&errors_path, &store, &a.synth_config, &a.work.join("configs"))?;
    if !a.no_serve {
        println!("review at http://{} and press Ctrl-C when done", a.bind);
        serve_until_interrupt(session, a.bind)?;
        session = TriageSession::new(
            errs,
            root_of(&errors_path, &None),
            CategoryStore::open(&store)?,
            GenerationConfig::read(&a.synth_config)?,
            a.work.join("configs"),
        );
    }
    let base = session.base.clone();
    let applied = session.apply()?;
    println!("applied config {} hash {}", applied.path.display(), applied.hash);

    let gen_root = a.work.join("generated");
    let added = materialize(&session.base, &gen_root, base.num_sequences..session.base.num_sequences)?;
    added.write(&gen_root.join("manifest.tsv"))?;
    let (_, synth) = load(&a.synth, &None, size)?;
    let synth = synth.concat(&Dataset::from_manifest(&added, &gen_root, size)?)?;
    let (_, real) = load(&a.real, &None, size)?;
    let (tuned, _) = finetune_mixed(&params, &synth, &real, &a.opts.config(true))?;
    let ckpt = a.work.join("finetuned.ckpt");
    save_checkpoint(&tuned, &ckpt)?;

    let (_, test) = load(&a.test, &None, size)?;
    let f = |v: Option<f64>| v.map_or("undefined".into(), |v| format!("{v:.4}"));
    let (eb, ea) = (evaluate(&params, &test)?, evaluate(&tuned, &test)?);
    println!("frames_added {}", added.len());
    println!("auc_left {} -> {}", f(eb.auc_left), f(ea.auc_left));
    println!("auc_right {} -> {}", f(eb.auc_right), f(ea.auc_right));
    // Undefined when the test set holds no both-off frames.
    let both_off = match (BothOffMetrics::of(&params, &test), BothOffMetrics::of(&tuned, &test)) {
        (Ok(b), Ok(a)) => {
            println!("both_off_recall {:.4} -> {:.4}", b.recall, a.recall);
            println!("both_off_precision {} -> {}", f(b.precision), f(a.precision));
            Some((b, a))
        }
        _ => {
            println!("both_off_recall undefined");
            None
        }
    };
    let report = serde_json::json!({
        "config_hash": applied.hash,
        "frames_added": added.len(),
        "before": eb,
        "after": ea,
        "both_off": both_off,
        "checkpoint": ckpt,
    });
    write_text(&a.work.join("iterate_report.json"), &serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

/// Exit status per error class; 2 is left to argument parsing.
fn exit_code(class: &str) -> u8 {
    match class {
        "Io" => 3,
        "ParseError" | "InvalidConfig" => 4,
        "BindError" => 5,
        "NoCategorizedErrors" => 6,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let class = match (e.downcast_ref::<handsup::Error>(), e.downcast_ref::<std::io::Error>()) {
                (Some(e), _) => e.class(),
                (None, Some(_)) => "Io",
                _ => "Error",
            };
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error[{class}]: {msg}");
            ExitCode::from(exit_code(class))
        }
    }
}
