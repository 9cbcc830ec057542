//! The two update rules.
//!
//! Baseline momentum SGD on kernels:
//!
//! ```text
//! z <- beta*z + eta*w + g        w <- w - alpha*z
//! ```
//!
//! The sparse rule replaces `g` with `mask*g`, so passive entries (mask 0)
//! receive only momentum-accelerated weight decay while active entries get
//! the full update. Biases always train with plain momentum SGD, without
//! decay and without masks.
//!
//! Both functions spell the kernel update with the same expression shape, so
//! with all-ones masks the sparse rule reproduces the baseline bit for bit.

use crate::error::Result;
use crate::nn::params::ParamSet;
use crate::optim::{GsmConfig, OptimizerState};

/// One sparse update using `state.masks` (freshly selected by the caller).
pub fn gsm_step(
    params: &mut ParamSet,
    grads: &ParamSet,
    state: &mut OptimizerState,
    config: &GsmConfig,
    alpha: f32,
) -> Result<()> {
    state.check_matches(params)?;
    params.check_shapes_against(grads)?;
    let beta = config.beta;
    let eta = config.eta;
    for ((w, g), (z, m)) in params
        .kernels
        .iter_mut()
        .zip(&grads.kernels)
        .zip(state.momentum.kernels.iter_mut().zip(&state.masks))
    {
        for (((wv, &gv), zv), &mv) in w
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(zv_iter(z))
            .zip(m.data())
        {
            let znew = beta * *zv + eta * *wv + mv * gv;
            *zv = znew;
            *wv -= alpha * znew;
        }
    }
    bias_momentum_step(params, grads, state, beta, alpha);
    state.iteration += 1;
    Ok(())
}

/// One baseline momentum-SGD update (all kernel entries active).
pub fn momentum_sgd_step(
    params: &mut ParamSet,
    grads: &ParamSet,
    state: &mut OptimizerState,
    config: &GsmConfig,
    alpha: f32,
) -> Result<()> {
    state.check_matches(params)?;
    params.check_shapes_against(grads)?;
    let beta = config.beta;
    let eta = config.eta;
    for ((w, g), z) in params
        .kernels
        .iter_mut()
        .zip(&grads.kernels)
        .zip(state.momentum.kernels.iter_mut())
    {
        for ((wv, &gv), zv) in w.data_mut().iter_mut().zip(g.data()).zip(zv_iter(z)) {
            let znew = beta * *zv + eta * *wv + gv;
            *zv = znew;
            *wv -= alpha * znew;
        }
    }
    bias_momentum_step(params, grads, state, beta, alpha);
    state.iteration += 1;
    Ok(())
}

fn zv_iter(z: &mut crate::tensor::Tensor) -> std::slice::IterMut<'_, f32> {
    z.data_mut().iter_mut()
}

fn bias_momentum_step(
    params: &mut ParamSet,
    grads: &ParamSet,
    state: &mut OptimizerState,
    beta: f32,
    alpha: f32,
) {
    for ((b, g), z) in params
        .biases
        .iter_mut()
        .zip(&grads.biases)
        .zip(state.momentum.biases.iter_mut())
    {
        for ((bv, &gv), zv) in b.data_mut().iter_mut().zip(g.data()).zip(zv_iter(z)) {
            let znew = beta * *zv + gv;
            *zv = znew;
            *bv -= alpha * znew;
        }
    }
}

impl ParamSet {
    /// Gradient sets must mirror parameter shapes exactly.
    pub fn check_shapes_against(&self, grads: &ParamSet) -> Result<()> {
        use crate::error::Error;
        if self.kernels.len() != grads.kernels.len() || self.biases.len() != grads.biases.len() {
            return Err(Error::Dimension(format!(
                "parameter set has {}/{} kernels/biases, gradients have {}/{}",
                self.kernels.len(),
                self.biases.len(),
                grads.kernels.len(),
                grads.biases.len()
            )));
        }
        for (a, b) in self
            .kernels
            .iter()
            .chain(self.biases.iter())
            .zip(grads.kernels.iter().chain(grads.biases.iter()))
        {
            if a.shape() != b.shape() {
                return Err(Error::Dimension(format!(
                    "parameter shape {:?} vs gradient shape {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
        }
        Ok(())
    }
}
