//! Experiment protocols: base training, sparse-momentum training with and
//! without re-selection, and the winning-ticket workflow.

pub mod lottery;
pub mod session;

use crate::data::config::{RunConfig, RunMode};
use crate::data::dataset::Dataset;
use crate::data::metrics::MetricsRow;
use crate::error::{Error, Result};
use crate::nn::eval::evaluate;
use crate::nn::model::ModelSpec;
use crate::nn::params::ParamSet;
use crate::optim::{GsmConfig, OptimizerState};
use crate::prune::{global_magnitude_prune, PruneReport};
use crate::rng::{stream, StreamKind};

pub use lottery::{apply_ticket, lottery_experiment, support_masks, LotteryOutcome};
pub use session::{ratio_below, reactivation_ratio, Session, StepRule};

#[derive(Debug)]
pub struct TrainOutcome {
    pub params: ParamSet,
    pub state: OptimizerState,
    pub metrics: Vec<MetricsRow>,
}

#[derive(Debug)]
pub struct GsmOutcome {
    pub final_params: ParamSet,
    pub pruned_params: ParamSet,
    pub report: PruneReport,
    pub state: OptimizerState,
    pub metrics: Vec<MetricsRow>,
}

/// Baseline momentum-SGD training from explicit starting parameters.
pub fn train_base_from(
    model: &ModelSpec,
    params: ParamSet,
    cfg: &GsmConfig,
    seed: u64,
    eval_interval: u64,
    train: &Dataset,
    test: &Dataset,
) -> Result<TrainOutcome> {
    let mut session = Session::new(
        model.clone(),
        params,
        cfg.clone(),
        StepRule::Baseline,
        seed,
        train.len(),
    )?;
    session.run(train, test, eval_interval)?;
    Ok(TrainOutcome { params: session.params, state: session.state, metrics: session.metrics })
}

/// Config-driven base training: initializes from the init stream of the
/// master seed, or from `init_checkpoint` when the config names one.
pub fn train_base(run: &RunConfig, train: &Dataset, test: &Dataset) -> Result<TrainOutcome> {
    let model = run.model_spec()?;
    let params = match &run.init_checkpoint {
        Some(path) => {
            let ckpt = crate::data::checkpoint::load_checkpoint(path)?;
            if ckpt.model != model {
                return Err(Error::Config(format!(
                    "init checkpoint model {} does not match configured model",
                    ckpt.model.spec_string()
                )));
            }
            ckpt.params
        }
        None => ParamSet::init(&model, &mut stream(run.seed, StreamKind::Init, 0))?,
    };
    let cfg = run.gsm_config(model.total_kernel_params())?;
    train_base_from(&model, params, &cfg, run.seed, run.eval_interval, train, test)
}

/// Sparse-momentum training from explicit starting parameters (normally a
/// trained base model). Runs the schedule with per-iteration selection
/// (`reselect`) or first-iteration-only masks, then applies the final global
/// magnitude prune at Q and evaluates both models.
#[allow(clippy::too_many_arguments)]
pub fn train_gsm_from(
    model: &ModelSpec,
    params: ParamSet,
    cfg: &GsmConfig,
    reselect: bool,
    seed: u64,
    eval_interval: u64,
    train: &Dataset,
    test: &Dataset,
) -> Result<GsmOutcome> {
    let mut session = Session::new(
        model.clone(),
        params,
        cfg.clone(),
        StepRule::Sparse { reselect },
        seed,
        train.len(),
    )?;
    session.run(train, test, eval_interval)?;
    let (pruned, mut report) = global_magnitude_prune(&session.params, cfg.q)?;
    let (before, _) = evaluate(model, &session.params, test)?;
    let (after, _) = evaluate(model, &pruned, test)?;
    report.accuracy_before = Some(before);
    report.accuracy_after = Some(after);
    Ok(GsmOutcome {
        final_params: session.params,
        pruned_params: pruned,
        report,
        state: session.state,
        metrics: session.metrics,
    })
}

/// Config-driven sparse training; requires `init_checkpoint` (the base
/// model to start from).
pub fn train_gsm(run: &RunConfig, train: &Dataset, test: &Dataset) -> Result<GsmOutcome> {
    let reselect = match run.mode {
        RunMode::Gsm => true,
        RunMode::GsmNoReselection => false,
        other => {
            return Err(Error::Config(format!(
                "train_gsm cannot run a {} config",
                other.as_str()
            )))
        }
    };
    let model = run.model_spec()?;
    // Validate the configuration (including the Q range) before any I/O.
    let cfg = run.gsm_config(model.total_kernel_params())?;
    let path = run.init_checkpoint.as_ref().ok_or_else(|| {
        Error::Config("sparse training starts from a base model: set init_checkpoint".into())
    })?;
    let ckpt = crate::data::checkpoint::load_checkpoint(path)?;
    if ckpt.model != model {
        return Err(Error::Config(format!(
            "init checkpoint model {} does not match configured model",
            ckpt.model.spec_string()
        )));
    }
    train_gsm_from(
        &model,
        ckpt.params,
        &cfg,
        reselect,
        run.seed,
        run.eval_interval,
        train,
        test,
    )
}
