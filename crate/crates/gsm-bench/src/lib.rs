//! Shared fixtures for the criterion benchmarks.

use gsm_core::nn::model::ModelSpec;
use gsm_core::nn::params::ParamSet;
use gsm_core::rng::{stream, Rng, StreamKind};
use gsm_core::tensor::Tensor;

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = Rng::from_seed(seed);
    Tensor::new(
        vec![rows, cols],
        (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect(),
    )
    .unwrap()
}

pub fn random_images(n: usize, c: usize, h: usize, w: usize, seed: u64) -> Tensor {
    let mut rng = Rng::from_seed(seed);
    Tensor::new(
        vec![n, c, h, w],
        (0..n * c * h * w).map(|_| rng.next_f32()).collect(),
    )
    .unwrap()
}

pub fn lenet300_fixture(batch: usize) -> (ModelSpec, ParamSet, Tensor, Vec<usize>) {
    let model = ModelSpec::lenet_300_100();
    let params = ParamSet::init(&model, &mut stream(1, StreamKind::Init, 0)).unwrap();
    let images = random_images(batch, 1, 28, 28, 2);
    let labels = (0..batch).map(|i| i % 10).collect();
    (model, params, images, labels)
}
