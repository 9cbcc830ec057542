//! The winning-ticket workflow:
//!
//! 1. randomly initialize parameters Θ₀ (seed-derived, so step 4 can rebuild
//!    them bit for bit);
//! 2. train to Θ with baseline momentum SGD;
//! 3. identify a sparse support of size Q two ways: (a) the largest-magnitude
//!    entries of Θ, (b) the support left by a sparse-momentum run started
//!    from Θ followed by magnitude pruning;
//! 4. reset the surviving entries to their Θ₀ values and zero the rest;
//! 5. retrain each ticket with the support pinned (non-ticket entries stay
//!    exactly zero throughout) and report final accuracy for both.

use crate::data::config::RunConfig;
use crate::data::dataset::Dataset;
use crate::error::Result;
use crate::exp::session::{Session, StepRule};
use crate::exp::{train_base_from, train_gsm_from};
use crate::nn::eval::evaluate;
use crate::nn::params::ParamSet;
use crate::optim::GsmConfig;
use crate::rng::{stream, StreamKind};
use crate::tensor::{topk_threshold, Tensor};

#[derive(Debug)]
pub struct LotteryOutcome {
    pub q: usize,
    /// The initialization Θ₀ (step 1).
    pub theta0: ParamSet,
    /// The trained dense model Θ (step 2).
    pub trained: ParamSet,
    /// 0/1 support masks per kernel for each ticket family (step 3).
    pub magnitude_masks: Vec<Tensor>,
    pub gsm_masks: Vec<Tensor>,
    /// Θ₀ restricted to each support (step 4).
    pub magnitude_ticket_init: ParamSet,
    pub gsm_ticket_init: ParamSet,
    /// Retrained tickets (step 5).
    pub magnitude_final: ParamSet,
    pub gsm_final: ParamSet,
    pub magnitude_top1: f64,
    pub gsm_top1: f64,
}

/// 0/1 masks marking the `q` largest-magnitude kernel entries (global,
/// ties toward the lower flat index).
pub fn support_masks(params: &ParamSet, q: usize) -> Result<Vec<Tensor>> {
    let magnitudes: Vec<f32> = params.flat_kernel_values().map(f32::abs).collect();
    let (_, keep) = topk_threshold(&magnitudes, q)?;
    let mut masks: Vec<Tensor> = params.kernels.iter().map(Tensor::zeros_like).collect();
    let mut offsets = Vec::with_capacity(masks.len() + 1);
    let mut acc = 0;
    for k in &params.kernels {
        offsets.push(acc);
        acc += k.len();
    }
    offsets.push(acc);
    let mut kernel = 0;
    for idx in keep {
        while idx >= offsets[kernel + 1] {
            kernel += 1;
        }
        masks[kernel].data_mut()[idx - offsets[kernel]] = 1.0;
    }
    Ok(masks)
}

/// Θ₀ restricted to a support: kernel entries keep their initialization
/// value where the mask is 1 and are zero elsewhere; biases reset densely.
pub fn apply_ticket(theta0: &ParamSet, masks: &[Tensor]) -> ParamSet {
    let kernels = theta0
        .kernels
        .iter()
        .zip(masks)
        .map(|(k, m)| {
            let data = k
                .iter()
                .zip(m.iter())
                .map(|(&w, &keep)| if keep != 0.0 { w } else { 0.0 })
                .collect();
            Tensor::new(k.shape().to_vec(), data).expect("shapes match")
        })
        .collect();
    ParamSet { kernels, biases: theta0.biases.clone() }
}

fn train_ticket(
    run: &RunConfig,
    cfg: &GsmConfig,
    ticket_init: ParamSet,
    masks: &[Tensor],
    train: &Dataset,
    test: &Dataset,
) -> Result<(ParamSet, f64)> {
    let model = run.model_spec()?;
    let mut session = Session::new(
        model.clone(),
        ticket_init,
        cfg.clone(),
        StepRule::PinnedMask,
        run.seed,
        train.len(),
    )?;
    session.state.masks = masks.to_vec();
    session.run(train, test, run.eval_interval)?;
    let (top1, _) = evaluate(&model, &session.params, test)?;
    Ok((session.params, top1))
}

/// Momentum for the dense legs (2, 5). Ticket identification wants the
/// config's high-momentum setting for fast zeroing-out; ordinary training
/// does not, so the dense legs always run at the standard 0.9.
const DENSE_LEG_BETA: f32 = 0.9;

pub fn lottery_experiment(
    run: &RunConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<LotteryOutcome> {
    let model = run.model_spec()?;
    let total = model.total_kernel_params();
    let q = run.resolved_q(total)?;
    let cfg = GsmConfig { beta: DENSE_LEG_BETA, ..run.gsm_config(total)? };

    // Step 1: Θ₀ from the init stream of the master seed.
    let theta0 = ParamSet::init(&model, &mut stream(run.seed, StreamKind::Init, 0))?;

    // Step 2: dense training.
    let base = train_base_from(&model, theta0.clone(), &cfg, run.seed, run.eval_interval, train, test)?;

    // Step 3a: magnitude support of Θ.
    let magnitude_masks = support_masks(&base.params, q)?;

    // Step 3b: sparse-momentum run from Θ, then the pruned support.
    let gsm_cfg = GsmConfig {
        beta: run.beta,
        lr_schedule: run.gsm_lr_schedule.clone().unwrap_or_else(|| run.lr_schedule.clone()),
        ..cfg.clone()
    };
    let gsm = train_gsm_from(
        &model,
        base.params.clone(),
        &gsm_cfg,
        true,
        run.seed,
        run.eval_interval,
        train,
        test,
    )?;
    let gsm_masks = support_masks(&gsm.final_params, q)?;

    // Step 4: winning tickets = Θ₀ on each support.
    let magnitude_ticket_init = apply_ticket(&theta0, &magnitude_masks);
    let gsm_ticket_init = apply_ticket(&theta0, &gsm_masks);

    // Step 5: retrain with pinned supports.
    let (magnitude_final, magnitude_top1) =
        train_ticket(run, &cfg, magnitude_ticket_init.clone(), &magnitude_masks, train, test)?;
    let (gsm_final, gsm_top1) =
        train_ticket(run, &cfg, gsm_ticket_init.clone(), &gsm_masks, train, test)?;

    Ok(LotteryOutcome {
        q,
        theta0,
        trained: base.params,
        magnitude_masks,
        gsm_masks,
        magnitude_ticket_init,
        gsm_ticket_init,
        magnitude_final,
        gsm_final,
        magnitude_top1,
        gsm_top1,
    })
}
