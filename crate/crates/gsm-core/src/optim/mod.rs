//! The sparse-momentum optimizer: hyperparameters, per-run state, saliency
//! selection, the split update rule, and the passive-decay calculus used to
//! plan how long a run must be before pruning is lossless.

pub mod decay;
pub mod saliency;
pub mod step;

use crate::error::{Error, Result};
use crate::nn::params::ParamSet;
use crate::tensor::Tensor;

pub use decay::{approx_passive_decay, exact_passive_decay, iterations_to_threshold};
pub use saliency::{saliency, select_active, SaliencySnapshot, Selection};
pub use step::{gsm_step, momentum_sgd_step};

/// One stage of the piecewise-constant learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrStage {
    pub epochs: usize,
    pub alpha: f32,
}

/// Optimizer hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GsmConfig {
    /// Momentum coefficient, `0 <= beta < 1`.
    pub beta: f32,
    /// Weight-decay coefficient applied to kernels, `eta >= 0`.
    pub eta: f32,
    /// Learning-rate stages, applied by epoch with no warmup and no
    /// momentum reset at boundaries.
    pub lr_schedule: Vec<LrStage>,
    /// Number of kernel entries kept active each iteration (and preserved
    /// by the final pruning).
    pub q: usize,
    pub batch_size: usize,
}

impl GsmConfig {
    pub fn validate(&self, total_kernel_params: usize) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta {} outside [0, 1)", self.beta)));
        }
        if self.eta < 0.0 || !self.eta.is_finite() {
            return Err(Error::Config(format!("eta {} must be finite and >= 0", self.eta)));
        }
        if self.lr_schedule.is_empty() {
            return Err(Error::Config("empty learning-rate schedule".into()));
        }
        for stage in &self.lr_schedule {
            if stage.alpha <= 0.0 || !stage.alpha.is_finite() {
                return Err(Error::Config(format!("alpha {} must be positive", stage.alpha)));
            }
        }
        if self.q == 0 || self.q > total_kernel_params {
            return Err(Error::Config(format!(
                "active count Q={} outside 1..={total_kernel_params}",
                self.q
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.lr_schedule.iter().map(|s| s.epochs).sum()
    }

    /// The stage rate in effect for a zero-based epoch index. Epochs past
    /// the schedule keep the final rate.
    pub fn alpha_at_epoch(&self, epoch: usize) -> f32 {
        let mut boundary = 0;
        for stage in &self.lr_schedule {
            boundary += stage.epochs;
            if epoch < boundary {
                return stage.alpha;
            }
        }
        self.lr_schedule.last().map(|s| s.alpha).unwrap_or(0.0)
    }
}

/// `Q = floor(|kernels| / C)`, so the realized compression ratio is >= C.
pub fn q_from_compression(total_kernel_params: usize, compression: f64) -> Result<usize> {
    if !compression.is_finite() || compression < 1.0 {
        return Err(Error::Config(format!(
            "compression ratio {compression} must be >= 1"
        )));
    }
    let q = (total_kernel_params as f64 / compression).floor() as usize;
    if q == 0 {
        return Err(Error::Config(format!(
            "compression {compression}x of {total_kernel_params} params leaves no active weights"
        )));
    }
    Ok(q)
}

/// Momentum buffers, current masks, and the iteration counter.
///
/// Masks are `f32` tensors holding exactly 0.0 or 1.0 so the masked gradient
/// is a plain elementwise product. A state is single-writer: only one step
/// function may drive it at a time.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub momentum: ParamSet,
    pub masks: Vec<Tensor>,
    pub iteration: u64,
}

impl OptimizerState {
    /// Fresh state: zero momentum (the decay calculus assumes z(0)=0) and
    /// all-ones masks.
    pub fn new(params: &ParamSet) -> Self {
        OptimizerState {
            momentum: params.zeros_like(),
            masks: params
                .kernels
                .iter()
                .map(|k| Tensor::full(k.shape().to_vec(), 1.0))
                .collect(),
            iteration: 0,
        }
    }

    /// Total number of active (mask = 1) kernel entries.
    pub fn active_count(&self) -> usize {
        self.masks
            .iter()
            .map(|m| m.iter().filter(|&&v| v != 0.0).count())
            .sum()
    }

    pub fn check_matches(&self, params: &ParamSet) -> Result<()> {
        for (z, w) in self
            .momentum
            .kernels
            .iter()
            .chain(self.momentum.biases.iter())
            .zip(params.kernels.iter().chain(params.biases.iter()))
        {
            if z.shape() != w.shape() {
                return Err(Error::Dimension(format!(
                    "momentum shape {:?} does not match parameter shape {:?}",
                    z.shape(),
                    w.shape()
                )));
            }
        }
        if self.masks.len() != params.kernels.len() {
            return Err(Error::Dimension(format!(
                "{} masks for {} kernels",
                self.masks.len(),
                params.kernels.len()
            )));
        }
        for (m, k) in self.masks.iter().zip(&params.kernels) {
            if m.shape() != k.shape() {
                return Err(Error::Dimension(format!(
                    "mask shape {:?} does not match kernel shape {:?}",
                    m.shape(),
                    k.shape()
                )));
            }
        }
        Ok(())
    }
}
