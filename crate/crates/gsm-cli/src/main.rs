//! Command-line front end: every workflow as a subcommand.
//!
//! Flags mirror config-file keys one to one (`beta` becomes `--beta`);
//! `--set key=value` takes arbitrary keys through the same parser. Overrides
//! apply on top of `--config`, with named flags winning over `--set`.
//!
//! Exit codes: 0 success, 2 configuration errors, 3 I/O and file-format
//! errors, 4 numerical failures (non-finite training loss). Failures print
//! one machine-parsable line: `error: category=<config|io|numerical> <message>`.

use clap::{Args, Parser, Subcommand};
use gsm_core::data::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use gsm_core::data::config::{RunConfig, RunMode};
use gsm_core::data::metrics::append_metrics;
use gsm_core::error::{Error, Result};
use gsm_core::exp::{lottery_experiment, train_base, train_gsm};
use gsm_core::nn::evaluate;
use gsm_core::optim::iterations_to_threshold;
use gsm_core::prune::{global_magnitude_prune, layer_sensitivity};
use gsm_core::rng::{stream, StreamKind};
use std::path::{Path, PathBuf};

/// Default output root when neither `--out-dir` nor the config sets one.
const OUTPUT_ROOT_ENV: &str = "GSM_OUTPUT_ROOT";

#[derive(Parser)]
#[command(
    name = "gsm",
    version,
    about = "Global sparse momentum SGD: train, sparsify, prune, and analyze small networks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a dense base model with momentum SGD.
    TrainBase(RunArgs),
    /// Sparse-momentum training from a base checkpoint, then lossless pruning.
    TrainGsm(TrainGsmArgs),
    /// Globally magnitude-prune a checkpoint to a target size.
    Prune(PruneArgs),
    /// Evaluate a checkpoint on the configured dataset.
    Eval(EvalArgs),
    /// Single-layer pruning sensitivity scan of a checkpoint.
    Sensitivity(SensitivityArgs),
    /// Winning-ticket comparison: magnitude tickets vs sparse-run tickets.
    Lottery(RunArgs),
    /// Iterations until the passive-decay ratio falls below a threshold.
    PredictDecay(PredictDecayArgs),
}

/// Run configuration sources. Every config key has a flag of the same name.
#[derive(Args)]
struct RunArgs {
    /// Config file (key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra override, repeatable: --set key=value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Architecture: lenet-300-100, lenet-5, or mlp(<input>,<widths...>).
    #[arg(long)]
    model: Option<String>,
    /// Dataset kind: digits, synthetic, or mnist.
    #[arg(long)]
    dataset: Option<String>,
    /// Directory holding the four MNIST IDX files.
    #[arg(long)]
    data_dir: Option<String>,
    /// Training example count (generated datasets).
    #[arg(long)]
    train_n: Option<String>,
    /// Test example count (generated datasets).
    #[arg(long)]
    test_n: Option<String>,
    /// Class count (synthetic dataset).
    #[arg(long)]
    classes: Option<String>,
    /// Input dimensionality (synthetic dataset).
    #[arg(long)]
    dims: Option<String>,
    /// Cluster tightness (synthetic dataset).
    #[arg(long)]
    spread: Option<String>,
    /// Seed for dataset generation (kept separate from the run seed).
    #[arg(long)]
    data_seed: Option<String>,
    /// Master seed for initialization and shuffling.
    #[arg(long)]
    seed: Option<String>,
    /// Momentum coefficient.
    #[arg(long)]
    beta: Option<String>,
    /// Weight-decay coefficient.
    #[arg(long)]
    eta: Option<String>,
    /// Stages as <alpha>x<epochs>, comma separated (e.g. 3e-2x30,3e-3x8).
    #[arg(long)]
    lr_schedule: Option<String>,
    /// Schedule for the ticket-search leg of a lottery run.
    #[arg(long)]
    gsm_lr_schedule: Option<String>,
    /// Examples per minibatch.
    #[arg(long)]
    batch_size: Option<String>,
    /// Active-parameter count (alternative to --compression).
    #[arg(long)]
    q: Option<String>,
    /// Target compression ratio; Q = floor(total / C).
    #[arg(long)]
    compression: Option<String>,
    /// Iterations between metrics rows.
    #[arg(long)]
    eval_interval: Option<String>,
    /// Artifact directory (defaults under $GSM_OUTPUT_ROOT or ./runs).
    #[arg(long)]
    out_dir: Option<String>,
    /// Base-model checkpoint to start from.
    #[arg(long)]
    init_checkpoint: Option<String>,
}

#[derive(Args)]
struct TrainGsmArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Freeze the masks computed at the first iteration.
    #[arg(long)]
    no_reselection: bool,
}

#[derive(Args)]
struct PruneArgs {
    /// Checkpoint to prune.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Keep count / dataset / output settings, shared with the run flags
    /// (--q or --compression select the size; a dataset enables
    /// before/after accuracy).
    #[command(flatten)]
    data: RunArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: RunArgs,
}

#[derive(Args)]
struct SensitivityArgs {
    /// Checkpoint to scan.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Single-layer pruning ratios to try.
    #[arg(long, value_delimiter = ',', default_values_t = [0.90, 0.99, 0.995, 0.997])]
    ratios: Vec<f64>,
    #[command(flatten)]
    data: RunArgs,
}

#[derive(Args)]
struct PredictDecayArgs {
    /// Learning rate during the decay phase.
    #[arg(long)]
    alpha: f64,
    /// Weight-decay coefficient.
    #[arg(long)]
    eta: f64,
    /// Momentum coefficient.
    #[arg(long)]
    beta: f64,
    /// Target ratio w(k)/w(0), e.g. 1e-4.
    #[arg(long)]
    tau: f64,
}

impl RunArgs {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut pairs = Vec::new();
        for item in &self.set {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                Error::Config(format!("--set wants key=value, got {item:?}"))
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let named: [(&str, &Option<String>); 19] = [
            ("model", &self.model),
            ("dataset", &self.dataset),
            ("data_dir", &self.data_dir),
            ("train_n", &self.train_n),
            ("test_n", &self.test_n),
            ("classes", &self.classes),
            ("dims", &self.dims),
            ("spread", &self.spread),
            ("data_seed", &self.data_seed),
            ("seed", &self.seed),
            ("beta", &self.beta),
            ("eta", &self.eta),
            ("lr_schedule", &self.lr_schedule),
            ("gsm_lr_schedule", &self.gsm_lr_schedule),
            ("batch_size", &self.batch_size),
            ("q", &self.q),
            ("compression", &self.compression),
            ("eval_interval", &self.eval_interval),
            ("out_dir", &self.out_dir),
        ];
        for (key, value) in named {
            if let Some(v) = value {
                pairs.push((key.to_string(), v.clone()));
            }
        }
        if let Some(v) = &self.init_checkpoint {
            pairs.push(("init_checkpoint".to_string(), v.clone()));
        }
        Ok(pairs)
    }

    /// Parse config + overrides; `default_mode` fills in when no source
    /// names one, and the result must be one of `allowed`.
    fn load(&self, default_mode: RunMode, allowed: &[RunMode]) -> Result<RunConfig> {
        let text = match &self.config {
            Some(path) => std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?,
            None => String::new(),
        };
        let overrides = self.overrides()?;
        let cfg = match RunConfig::from_sources(&text, &overrides) {
            Ok(cfg) => cfg,
            Err(Error::Config(msg)) if msg.contains("needs a mode") => {
                let with_mode = format!("mode = {}\n{text}", default_mode.as_str());
                RunConfig::from_sources(&with_mode, &overrides)?
            }
            Err(e) => return Err(e),
        };
        if !allowed.contains(&cfg.mode) {
            return Err(Error::Config(format!(
                "this subcommand cannot run a {} config",
                cfg.mode.as_str()
            )));
        }
        Ok(cfg)
    }
}

fn resolve_out_dir(explicit: Option<&Path>, label: &str) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => {
            let root = std::env::var(OUTPUT_ROOT_ENV).unwrap_or_else(|_| "runs".into());
            PathBuf::from(root).join(label)
        }
    }
}

fn prepare_out_dir(cfg: &mut RunConfig) -> Result<PathBuf> {
    let dir = resolve_out_dir(cfg.out_dir.as_deref(), cfg.mode.as_str());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    cfg.out_dir = Some(dir.clone());
    std::fs::write(dir.join("config.txt"), cfg.to_text())
        .map_err(|e| Error::io(dir.join("config.txt"), e))?;
    Ok(dir)
}

fn write_metrics(dir: &Path, rows: &[gsm_core::data::metrics::MetricsRow]) -> Result<()> {
    let path = dir.join("metrics.csv");
    // Deterministic reruns rewrite rather than append across invocations.
    if path.exists() {
        std::fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
    }
    for row in rows {
        append_metrics(&path, row)?;
    }
    Ok(())
}

fn params_checkpoint(
    model: gsm_core::nn::ModelSpec,
    params: gsm_core::nn::ParamSet,
    opt: Option<gsm_core::optim::OptimizerState>,
    iteration: u64,
    seed: u64,
) -> Checkpoint {
    Checkpoint {
        model,
        params,
        opt,
        iteration,
        master_seed: seed,
        rng_state: stream(seed, StreamKind::Shuffle, 0).state(),
    }
}

fn cmd_train_base(args: &RunArgs) -> Result<()> {
    let mut cfg = args.load(RunMode::Base, &[RunMode::Base])?;
    let dir = prepare_out_dir(&mut cfg)?;
    let (train, test) = cfg.load_data()?;
    let out = train_base(&cfg, &train, &test)?;
    let model = cfg.model_spec()?;
    let (top1, loss) = evaluate(&model, &out.params, &test)?;
    let iteration = out.state.iteration;
    let ckpt = params_checkpoint(model, out.params, Some(out.state), iteration, cfg.seed);
    save_checkpoint(dir.join("base.ckpt"), &ckpt)?;
    write_metrics(&dir, &out.metrics)?;
    println!("trained base model: top1 = {top1:.6}, loss = {loss:.6}");
    println!("artifacts under {}", dir.display());
    Ok(())
}

fn cmd_train_gsm(args: &TrainGsmArgs) -> Result<()> {
    let default = if args.no_reselection {
        RunMode::GsmNoReselection
    } else {
        RunMode::Gsm
    };
    let mut cfg = args
        .run
        .load(default, &[RunMode::Gsm, RunMode::GsmNoReselection])?;
    if args.no_reselection {
        cfg.mode = RunMode::GsmNoReselection;
    }
    let dir = prepare_out_dir(&mut cfg)?;
    let (train, test) = cfg.load_data()?;
    let out = train_gsm(&cfg, &train, &test)?;
    let model = cfg.model_spec()?;
    let iteration = out.state.iteration;
    let final_ckpt = params_checkpoint(
        model.clone(),
        out.final_params,
        Some(out.state),
        iteration,
        cfg.seed,
    );
    save_checkpoint(dir.join("gsm_final.ckpt"), &final_ckpt)?;
    let pruned_ckpt = params_checkpoint(model, out.pruned_params, None, iteration, cfg.seed);
    save_checkpoint(dir.join("gsm_pruned.ckpt"), &pruned_ckpt)?;
    write_metrics(&dir, &out.metrics)?;
    std::fs::write(dir.join("prune_report.txt"), out.report.summary_text())
        .map_err(|e| Error::io(dir.join("prune_report.txt"), e))?;
    std::fs::write(dir.join("prune_report.csv"), out.report.per_layer_csv())
        .map_err(|e| Error::io(dir.join("prune_report.csv"), e))?;
    println!(
        "sparse training done: top1 {:.6} -> {:.6} at {:.2}x",
        out.report.accuracy_before.unwrap_or(f64::NAN),
        out.report.accuracy_after.unwrap_or(f64::NAN),
        out.report.compression_ratio
    );
    println!("artifacts under {}", dir.display());
    Ok(())
}

fn cmd_prune(args: &PruneArgs) -> Result<()> {
    let cfg = args.data.load(RunMode::Base, &[RunMode::Base])?;
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let total = ckpt.params.total_kernel_params();
    let q = match (cfg.q, cfg.compression) {
        (Some(q), None) => q,
        (None, Some(c)) => gsm_core::optim::q_from_compression(total, c)?,
        _ => return Err(Error::Config("pruning needs --q or --compression".into())),
    };
    let (pruned, mut report) = global_magnitude_prune(&ckpt.params, q)?;

    // Accuracy before/after when a dataset is configured.
    if args.data.config.is_some() || args.data.dataset.is_some() {
        let (_, test) = cfg.load_data()?;
        let (before, _) = evaluate(&ckpt.model, &ckpt.params, &test)?;
        let (after, _) = evaluate(&ckpt.model, &pruned, &test)?;
        report.accuracy_before = Some(before);
        report.accuracy_after = Some(after);
    }

    let dir = resolve_out_dir(cfg.out_dir.as_deref(), "prune");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let out_ckpt = params_checkpoint(ckpt.model, pruned, None, ckpt.iteration, ckpt.master_seed);
    save_checkpoint(dir.join("pruned.ckpt"), &out_ckpt)?;
    std::fs::write(dir.join("prune_report.txt"), report.summary_text())
        .map_err(|e| Error::io(dir.join("prune_report.txt"), e))?;
    std::fs::write(dir.join("prune_report.csv"), report.per_layer_csv())
        .map_err(|e| Error::io(dir.join("prune_report.csv"), e))?;
    print!("{}", report.summary_text());
    println!("artifacts under {}", dir.display());
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let cfg = args.data.load(RunMode::Base, &[RunMode::Base])?;
    let (_, test) = cfg.load_data()?;
    let (top1, loss) = evaluate(&ckpt.model, &ckpt.params, &test)?;
    println!("top1 = {top1:.6}");
    println!("loss = {loss:.6}");
    Ok(())
}

fn cmd_sensitivity(args: &SensitivityArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let cfg = args.data.load(RunMode::Base, &[RunMode::Base])?;
    let (_, test) = cfg.load_data()?;
    let table = layer_sensitivity(&ckpt.model, &ckpt.params, &test, &args.ratios)?;
    let mut csv = String::from("layer,ratio,top1\n");
    println!("layer  {}", args.ratios.iter().map(|r| format!("{r:<8}")).collect::<String>());
    for (layer, row) in table.iter().enumerate() {
        print!("{layer:<6} ");
        for (ratio, top1) in args.ratios.iter().zip(row) {
            print!("{top1:<8.4} ");
            csv.push_str(&format!("{layer},{ratio},{top1:.5e}\n"));
        }
        println!();
    }
    let dir = resolve_out_dir(cfg.out_dir.as_deref(), "sensitivity");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    std::fs::write(dir.join("sensitivity.csv"), csv)
        .map_err(|e| Error::io(dir.join("sensitivity.csv"), e))?;
    println!("artifacts under {}", dir.display());
    Ok(())
}

fn cmd_lottery(args: &RunArgs) -> Result<()> {
    let mut cfg = args.load(RunMode::Lottery, &[RunMode::Lottery])?;
    let dir = prepare_out_dir(&mut cfg)?;
    let (train, test) = cfg.load_data()?;
    let out = lottery_experiment(&cfg, &train, &test)?;
    let model = cfg.model_spec()?;
    save_checkpoint(
        dir.join("theta0.ckpt"),
        &params_checkpoint(model.clone(), out.theta0, None, 0, cfg.seed),
    )?;
    save_checkpoint(
        dir.join("magnitude_ticket.ckpt"),
        &params_checkpoint(model.clone(), out.magnitude_final, None, 0, cfg.seed),
    )?;
    save_checkpoint(
        dir.join("gsm_ticket.ckpt"),
        &params_checkpoint(model, out.gsm_final, None, 0, cfg.seed),
    )?;
    let csv = format!(
        "ticket,q,top1\nmagnitude,{},{:.5e}\ngsm,{},{:.5e}\n",
        out.q, out.magnitude_top1, out.q, out.gsm_top1
    );
    std::fs::write(dir.join("lottery.csv"), csv)
        .map_err(|e| Error::io(dir.join("lottery.csv"), e))?;
    println!(
        "winning tickets at q = {}: magnitude top1 = {:.6}, sparse-run top1 = {:.6}",
        out.q, out.magnitude_top1, out.gsm_top1
    );
    println!("artifacts under {}", dir.display());
    Ok(())
}

fn cmd_predict_decay(args: &PredictDecayArgs) -> Result<()> {
    let k = iterations_to_threshold(args.alpha, args.eta, args.beta, args.tau)?;
    println!("k = {k}");
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::TrainBase(args) => cmd_train_base(args),
        Cmd::TrainGsm(args) => cmd_train_gsm(args),
        Cmd::Prune(args) => cmd_prune(args),
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::Sensitivity(args) => cmd_sensitivity(args),
        Cmd::Lottery(args) => cmd_lottery(args),
        Cmd::PredictDecay(args) => cmd_predict_decay(args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("error: category={} {err}", err.category());
        let code = match err.category() {
            "config" => 2,
            "io" => 3,
            "numerical" => 4,
            _ => 1,
        };
        std::process::exit(code);
    }
}
