//! The iteration engine shared by every training protocol.
//!
//! A session owns the parameters and optimizer state for one run and applies
//! one of three step rules:
//!
//! - `Baseline`: plain momentum SGD.
//! - `Sparse { reselect }`: per-iteration saliency ranking picks the global
//!   top-Q entries, then the split update runs on the same minibatch
//!   (forward, backward, saliency, selection, step). With `reselect: false`
//!   the masks computed at the very first iteration stay frozen.
//! - `PinnedMask`: the split update with caller-provided masks that never
//!   change (used for ticket retraining, where pruned-away entries must stay
//!   exactly zero).
//!
//! Batch order is derived statelessly: the permutation for epoch `e` comes
//! from `stream(seed, Shuffle, e)`, so a resumed session replays the exact
//! order an uninterrupted run would have used.

use crate::data::dataset::Dataset;
use crate::data::checkpoint::Checkpoint;
use crate::data::metrics::MetricsRow;
use crate::error::{Error, Result};
use crate::nn::backward::loss_and_backward;
use crate::nn::eval::evaluate;
use crate::nn::forward::forward;
use crate::nn::model::ModelSpec;
use crate::nn::params::ParamSet;
use crate::optim::saliency::{saliency, select_active};
use crate::optim::step::{gsm_step, momentum_sgd_step};
use crate::optim::{GsmConfig, OptimizerState};
use crate::prune::global_magnitude_prune;
use crate::rng::{stream, StreamKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    Baseline,
    Sparse { reselect: bool },
    PinnedMask,
}

pub struct Session {
    pub model: ModelSpec,
    pub params: ParamSet,
    pub state: OptimizerState,
    pub cfg: GsmConfig,
    pub rule: StepRule,
    pub seed: u64,
    pub metrics: Vec<MetricsRow>,
    train_len: usize,
    batches_per_epoch: u64,
    perm: Vec<u32>,
    perm_epoch: Option<u64>,
    loss_sum: f64,
    loss_count: u64,
    react_sum: f64,
    react_count: u64,
}

/// Fraction of kernel entries with magnitude strictly below `threshold`.
pub fn ratio_below(params: &ParamSet, threshold: f32) -> f64 {
    let total = params.total_kernel_params();
    let below = params
        .flat_kernel_values()
        .filter(|v| v.abs() < threshold)
        .count();
    below as f64 / total as f64
}

/// Fraction of kernel entries switching passive -> active between two mask
/// sets, relative to the total kernel entry count.
pub fn reactivation_ratio(
    prev: &[crate::tensor::Tensor],
    new: &[crate::tensor::Tensor],
) -> Result<f64> {
    if prev.len() != new.len() {
        return Err(Error::Dimension(format!(
            "{} previous masks vs {} new masks",
            prev.len(),
            new.len()
        )));
    }
    let mut switched = 0usize;
    let mut total = 0usize;
    for (p, n) in prev.iter().zip(new) {
        if p.shape() != n.shape() {
            return Err(Error::Dimension(format!(
                "mask shapes {:?} vs {:?}",
                p.shape(),
                n.shape()
            )));
        }
        total += p.len();
        switched += p
            .iter()
            .zip(n.iter())
            .filter(|(&pv, &nv)| pv == 0.0 && nv != 0.0)
            .count();
    }
    Ok(switched as f64 / total as f64)
}

impl Session {
    pub fn new(
        model: ModelSpec,
        params: ParamSet,
        cfg: GsmConfig,
        rule: StepRule,
        seed: u64,
        train_len: usize,
    ) -> Result<Self> {
        model.validate()?;
        params.check_matches(&model)?;
        cfg.validate(params.total_kernel_params())?;
        if train_len == 0 {
            return Err(Error::Argument("training set must not be empty".into()));
        }
        let state = OptimizerState::new(&params);
        Ok(Session {
            model,
            params,
            state,
            batches_per_epoch: train_len.div_ceil(cfg.batch_size) as u64,
            cfg,
            rule,
            seed,
            metrics: Vec::new(),
            train_len,
            perm: Vec::new(),
            perm_epoch: None,
            loss_sum: 0.0,
            loss_count: 0,
            react_sum: 0.0,
            react_count: 0,
        })
    }

    /// Rebuild a session from a checkpoint (same config and rule as the run
    /// that wrote it). The metrics window restarts at the checkpoint, so
    /// checkpoints written at eval-interval boundaries resume with identical
    /// logs.
    pub fn resume(ckpt: Checkpoint, cfg: GsmConfig, rule: StepRule, train_len: usize) -> Result<Self> {
        let opt = ckpt
            .opt
            .ok_or_else(|| Error::Corruption("checkpoint carries no optimizer state".into()))?;
        let mut session = Session::new(ckpt.model, ckpt.params, cfg, rule, ckpt.master_seed, train_len)?;
        session.state = opt;
        session.state.iteration = ckpt.iteration;
        session.state.check_matches(&session.params)?;
        Ok(session)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let epoch = self.state.iteration / self.batches_per_epoch.max(1);
        Checkpoint {
            model: self.model.clone(),
            params: self.params.clone(),
            opt: Some(self.state.clone()),
            iteration: self.state.iteration,
            master_seed: self.seed,
            rng_state: stream(self.seed, StreamKind::Shuffle, epoch).state(),
        }
    }

    /// Iterations in the full schedule.
    pub fn total_iterations(&self) -> u64 {
        self.cfg.total_epochs() as u64 * self.batches_per_epoch
    }

    pub fn current_epoch(&self) -> u64 {
        self.state.iteration / self.batches_per_epoch
    }

    fn batch_indices(&mut self) -> Vec<usize> {
        let epoch = self.current_epoch();
        if self.perm_epoch != Some(epoch) {
            let mut order: Vec<u32> = (0..self.train_len as u32).collect();
            stream(self.seed, StreamKind::Shuffle, epoch).shuffle(&mut order);
            self.perm = order;
            self.perm_epoch = Some(epoch);
        }
        let pos = (self.state.iteration % self.batches_per_epoch) as usize;
        let lo = pos * self.cfg.batch_size;
        let hi = (lo + self.cfg.batch_size).min(self.train_len);
        self.perm[lo..hi].iter().map(|&i| i as usize).collect()
    }

    /// Run one iteration: forward, backward, (selection,) update.
    pub fn step(&mut self, train: &Dataset) -> Result<()> {
        let epoch = self.current_epoch();
        let alpha = self.cfg.alpha_at_epoch(epoch as usize);
        let indices = self.batch_indices();
        let (batch, labels) = train.gather(&indices);
        let (_, cache) = forward(&self.model, &self.params, &batch)?;
        let (loss, grads) = loss_and_backward(&self.model, &self.params, &cache, &labels)?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!(
                "training loss became {loss} at iteration {}",
                self.state.iteration
            )));
        }
        self.loss_sum += loss as f64;
        self.loss_count += 1;

        match self.rule {
            StepRule::Baseline => {
                momentum_sgd_step(&mut self.params, &grads, &mut self.state, &self.cfg, alpha)?;
            }
            StepRule::Sparse { reselect } => {
                if reselect || self.state.iteration == 0 {
                    let snap = saliency(&self.params, &grads)?;
                    let selection = select_active(&snap, self.cfg.q)?;
                    if self.state.iteration > 0 {
                        let ratio = reactivation_ratio(&self.state.masks, &selection.masks)?;
                        self.react_sum += ratio;
                        self.react_count += 1;
                    }
                    self.state.masks = selection.masks;
                }
                gsm_step(&mut self.params, &grads, &mut self.state, &self.cfg, alpha)?;
            }
            StepRule::PinnedMask => {
                gsm_step(&mut self.params, &grads, &mut self.state, &self.cfg, alpha)?;
            }
        }
        Ok(())
    }

    fn emit_row(&mut self, test: &Dataset) -> Result<()> {
        let done = self.state.iteration;
        let epoch = done.saturating_sub(1) / self.batches_per_epoch;
        let (orig_top1, _) = evaluate(&self.model, &self.params, test)?;
        let (pruned, _) = global_magnitude_prune(&self.params, self.cfg.q)?;
        let (pruned_top1, _) = evaluate(&self.model, &pruned, test)?;
        let row = MetricsRow {
            iteration: done,
            epoch,
            train_loss: if self.loss_count > 0 { self.loss_sum / self.loss_count as f64 } else { 0.0 },
            orig_top1,
            pruned_top1,
            ratio_below_1e3: ratio_below(&self.params, 1e-3),
            ratio_below_1e4: ratio_below(&self.params, 1e-4),
            reactivation_ratio: if self.react_count > 0 {
                self.react_sum / self.react_count as f64
            } else {
                0.0
            },
            current_alpha: self.cfg.alpha_at_epoch(epoch as usize) as f64,
        };
        self.metrics.push(row);
        self.loss_sum = 0.0;
        self.loss_count = 0;
        self.react_sum = 0.0;
        self.react_count = 0;
        Ok(())
    }

    /// Run until `stop_at` (capped by the schedule), logging a metrics row
    /// every `eval_interval` iterations and at the end of the schedule.
    pub fn run_until(
        &mut self,
        train: &Dataset,
        test: &Dataset,
        eval_interval: u64,
        stop_at: Option<u64>,
    ) -> Result<()> {
        if eval_interval == 0 {
            return Err(Error::Argument("eval_interval must be >= 1".into()));
        }
        let total = self.total_iterations();
        let stop = stop_at.map_or(total, |s| s.min(total));
        while self.state.iteration < stop {
            self.step(train)?;
            let done = self.state.iteration;
            if done.is_multiple_of(eval_interval) || done == total {
                self.emit_row(test)?;
            }
        }
        Ok(())
    }

    /// Run the complete schedule.
    pub fn run(&mut self, train: &Dataset, test: &Dataset, eval_interval: u64) -> Result<()> {
        self.run_until(train, test, eval_interval, None)
    }
}
