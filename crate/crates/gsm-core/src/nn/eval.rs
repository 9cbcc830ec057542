//! Whole-dataset evaluation.

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::backward::softmax_cross_entropy;
use crate::nn::forward::forward;
use crate::nn::model::ModelSpec;
use crate::nn::params::ParamSet;

const EVAL_BATCH: usize = 256;

/// Top-1 accuracy and mean loss over the dataset, in dataset order.
/// Ties in the argmax go to the lowest class index.
pub fn evaluate(model: &ModelSpec, params: &ParamSet, data: &Dataset) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::Argument("evaluate needs a nonempty dataset".into()));
    }
    let n = data.len();
    let mut correct = 0usize;
    let mut loss_sum = 0.0f64;
    let mut start = 0;
    while start < n {
        let end = (start + EVAL_BATCH).min(n);
        let indices: Vec<usize> = (start..end).collect();
        let (batch, labels) = data.gather(&indices);
        let (logits, _) = forward(model, params, &batch)?;
        let (batch_loss, _) = softmax_cross_entropy(&logits, &labels)?;
        loss_sum += batch_loss as f64 * labels.len() as f64;
        let (_, classes) = logits.as_2d()?;
        for (row, &y) in logits.data().chunks(classes).zip(&labels) {
            let mut best = 0usize;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            if best == y {
                correct += 1;
            }
        }
        start = end;
    }
    Ok((correct as f64 / n as f64, loss_sum / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::{Dataset, Split};
    use crate::rng::Rng;
    use crate::tensor::Tensor;

    #[test]
    fn constant_predictor_on_matching_labels_scores_one() {
        // All-zero params give uniform logits; the tie rule predicts class 0.
        let model = ModelSpec::mlp([1, 1, 4], &[3], ).unwrap();
        let params = ParamSet::zeros(&model).unwrap();
        let imgs = Tensor::zeros(vec![5, 1, 1, 4]);
        let ds = Dataset::new(imgs, vec![0; 5], 3, Split::Test).unwrap();
        let (acc, loss) = evaluate(&model, &params, &ds).unwrap();
        assert_eq!(acc, 1.0);
        assert!((loss - (3.0f64).ln()).abs() < 1e-6);
    }

    #[test]
    fn random_predictor_is_near_chance_on_balanced_data() {
        let model = ModelSpec::mlp([1, 1, 8], &[16, 10]).unwrap();
        let params = ParamSet::init(&model, &mut Rng::from_seed(123)).unwrap();
        let n = 10_000;
        let mut rng = Rng::from_seed(77);
        let imgs = Tensor::new(
            vec![n, 1, 1, 8],
            (0..n * 8).map(|_| rng.uniform(0.0, 1.0)).collect(),
        )
        .unwrap();
        let labels: Vec<usize> = (0..n).map(|i| i % 10).collect();
        let ds = Dataset::new(imgs, labels, 10, Split::Test).unwrap();
        let (acc, _) = evaluate(&model, &params, &ds).unwrap();
        assert!((acc - 0.1).abs() < 0.03, "accuracy {acc} not near chance");
    }

    #[test]
    fn singleton_dataset_evaluates() {
        let model = ModelSpec::mlp([1, 1, 2], &[2]).unwrap();
        let params = ParamSet::zeros(&model).unwrap();
        let ds = Dataset::new(Tensor::zeros(vec![1, 1, 1, 2]), vec![1], 2, Split::Test).unwrap();
        let (acc, _) = evaluate(&model, &params, &ds).unwrap();
        assert_eq!(acc, 0.0);
    }
}
