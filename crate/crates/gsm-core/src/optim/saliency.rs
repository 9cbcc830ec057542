//! First-order saliency and global activation selection.
//!
//! The saliency of a kernel entry is `T = |grad * w|`: the first-order
//! Taylor estimate of how much the minibatch loss would change if the entry
//! were set to zero. Selection keeps the global top-Q entries across all
//! kernels; everything else goes passive for this iteration.

use crate::error::{Error, Result};
use crate::nn::params::ParamSet;
use crate::tensor::{topk_threshold, Tensor};

/// Per-kernel saliency values for one minibatch.
#[derive(Debug, Clone)]
pub struct SaliencySnapshot {
    /// One tensor of `T >= 0` values per kernel, kernel-layer order.
    pub values: Vec<Tensor>,
}

impl SaliencySnapshot {
    pub fn total_len(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }
}

/// The outcome of one activation selection.
#[derive(Debug, Clone)]
pub struct Selection {
    /// Binary (0.0/1.0) masks shaped like the kernels, exactly `q` ones.
    pub masks: Vec<Tensor>,
    /// The q-th greatest saliency value, i.e. the selection cutoff.
    pub threshold: f32,
}

/// Elementwise `T = |grad * w|` over kernel entries. Biases carry no
/// saliency: they are never masked.
pub fn saliency(params: &ParamSet, grads: &ParamSet) -> Result<SaliencySnapshot> {
    if params.kernels.len() != grads.kernels.len() {
        return Err(Error::Dimension(format!(
            "{} kernels vs {} gradient kernels",
            params.kernels.len(),
            grads.kernels.len()
        )));
    }
    let mut values = Vec::with_capacity(params.kernels.len());
    for (w, g) in params.kernels.iter().zip(&grads.kernels) {
        if w.shape() != g.shape() {
            return Err(Error::Dimension(format!(
                "kernel shape {:?} vs gradient shape {:?}",
                w.shape(),
                g.shape()
            )));
        }
        let data = w
            .iter()
            .zip(g.iter())
            .map(|(&wv, &gv)| (gv * wv).abs())
            .collect();
        values.push(Tensor::new(w.shape().to_vec(), data)?);
    }
    Ok(SaliencySnapshot { values })
}

/// Keep the `q` globally greatest saliency values. Ties at the cutoff are
/// broken toward the lower flat global index (kernel order, then row-major),
/// so the mask always carries exactly `q` ones.
pub fn select_active(snapshot: &SaliencySnapshot, q: usize) -> Result<Selection> {
    let total = snapshot.total_len();
    if q == 0 || q > total {
        return Err(Error::Argument(format!(
            "active count {q} outside 1..={total}"
        )));
    }
    let mut flat = Vec::with_capacity(total);
    for t in &snapshot.values {
        flat.extend_from_slice(t.data());
    }
    let (threshold, selected) = topk_threshold(&flat, q)?;

    let mut masks: Vec<Tensor> = snapshot.values.iter().map(Tensor::zeros_like).collect();
    let mut offsets = Vec::with_capacity(masks.len() + 1);
    let mut acc = 0;
    for t in &snapshot.values {
        offsets.push(acc);
        acc += t.len();
    }
    offsets.push(acc);
    let mut kernel = 0;
    for idx in selected {
        while idx >= offsets[kernel + 1] {
            kernel += 1;
        }
        masks[kernel].data_mut()[idx - offsets[kernel]] = 1.0;
    }
    Ok(Selection { masks, threshold })
}
