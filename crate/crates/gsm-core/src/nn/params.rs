//! Trainable parameters: one unfolded kernel matrix plus one bias vector per
//! kernel-bearing layer. Biases are deliberately not part of the kernel
//! collection: they are never masked, never counted toward the compressible
//! parameter total, and never pruned.

use crate::error::{Error, Result};
use crate::nn::model::ModelSpec;
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    /// `[rows, cols]` kernel matrices in kernel-layer order.
    pub kernels: Vec<Tensor>,
    /// `[cols]` bias vectors, one per kernel.
    pub biases: Vec<Tensor>,
}

impl ParamSet {
    /// Fan-in-scaled uniform init, `U(-sqrt(6/fan_in), +sqrt(6/fan_in))`,
    /// drawn kernel by kernel in row-major order; biases start at zero.
    /// The draw order is part of the reproducibility contract.
    pub fn init(model: &ModelSpec, rng: &mut Rng) -> Result<Self> {
        model.validate()?;
        let mut kernels = Vec::new();
        let mut biases = Vec::new();
        for layer in model.layers.iter().filter(|l| l.is_kernel()) {
            let [rows, cols] = layer.kernel_shape().unwrap();
            let bound = (6.0f32 / rows as f32).sqrt();
            let data = (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect();
            kernels.push(Tensor::new(vec![rows, cols], data)?);
            biases.push(Tensor::zeros(vec![cols]));
        }
        Ok(ParamSet { kernels, biases })
    }

    /// Zero-valued parameters with the model's shapes.
    pub fn zeros(model: &ModelSpec) -> Result<Self> {
        model.validate()?;
        let mut kernels = Vec::new();
        let mut biases = Vec::new();
        for layer in model.layers.iter().filter(|l| l.is_kernel()) {
            let [rows, cols] = layer.kernel_shape().unwrap();
            kernels.push(Tensor::zeros(vec![rows, cols]));
            biases.push(Tensor::zeros(vec![cols]));
        }
        Ok(ParamSet { kernels, biases })
    }

    pub fn zeros_like(&self) -> Self {
        ParamSet {
            kernels: self.kernels.iter().map(Tensor::zeros_like).collect(),
            biases: self.biases.iter().map(Tensor::zeros_like).collect(),
        }
    }

    /// Total kernel entry count (the compressible parameter total).
    pub fn total_kernel_params(&self) -> usize {
        self.kernels.iter().map(Tensor::len).sum()
    }

    /// Check that kernels and biases correspond 1:1 with the model's
    /// kernel-bearing layers.
    pub fn check_matches(&self, model: &ModelSpec) -> Result<()> {
        let expect: Vec<[usize; 2]> = model
            .layers
            .iter()
            .filter_map(|l| l.kernel_shape())
            .collect();
        if expect.len() != self.kernels.len() || expect.len() != self.biases.len() {
            return Err(Error::Dimension(format!(
                "model has {} kernel layers, params carry {} kernels / {} biases",
                expect.len(),
                self.kernels.len(),
                self.biases.len()
            )));
        }
        for (i, ([rows, cols], kernel)) in expect.iter().zip(&self.kernels).enumerate() {
            if kernel.shape() != [*rows, *cols] {
                return Err(Error::Dimension(format!(
                    "kernel {i}: expected [{rows}, {cols}], got {:?}",
                    kernel.shape()
                )));
            }
            if self.biases[i].shape() != [*cols] {
                return Err(Error::Dimension(format!(
                    "bias {i}: expected [{cols}], got {:?}",
                    self.biases[i].shape()
                )));
            }
        }
        Ok(())
    }

    /// Visit every kernel entry in flat global order (kernel order, then
    /// row-major), the order used for tie-breaking everywhere.
    pub fn flat_kernel_values(&self) -> impl Iterator<Item = f32> + '_ {
        self.kernels.iter().flat_map(|k| k.iter().copied())
    }
}
