//! Final magnitude pruning, compression accounting, and per-layer
//! sensitivity scans.

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::eval::evaluate;
use crate::nn::model::ModelSpec;
use crate::nn::params::ParamSet;
use crate::tensor::{topk_threshold, Tensor};

/// Outcome of a global magnitude prune.
#[derive(Debug, Clone)]
pub struct PruneReport {
    /// Total kernel entry count.
    pub total_params: usize,
    /// Entries preserved.
    pub remaining: usize,
    /// `total_params / remaining`.
    pub compression_ratio: f64,
    /// `(kernel layer index, nonzero fraction)` of the pruned kernels.
    pub per_layer_nonzero: Vec<(usize, f64)>,
    /// Filled in by callers that evaluate around the prune.
    pub accuracy_before: Option<f64>,
    pub accuracy_after: Option<f64>,
}

impl PruneReport {
    /// Human-readable summary.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("total kernel params : {}\n", self.total_params));
        out.push_str(&format!("remaining (Q)       : {}\n", self.remaining));
        out.push_str(&format!("compression ratio   : {:.2}x\n", self.compression_ratio));
        if let Some(a) = self.accuracy_before {
            out.push_str(&format!("top1 before pruning : {:.4}\n", a));
        }
        if let Some(a) = self.accuracy_after {
            out.push_str(&format!("top1 after pruning  : {:.4}\n", a));
        }
        out.push_str("layer  nonzero-fraction\n");
        for (layer, frac) in &self.per_layer_nonzero {
            out.push_str(&format!("{layer:<6} {frac:.6}\n"));
        }
        out
    }

    /// Per-layer rows as CSV (`layer,nonzero_fraction`).
    pub fn per_layer_csv(&self) -> String {
        let mut out = String::from("layer,nonzero_fraction\n");
        for (layer, frac) in &self.per_layer_nonzero {
            out.push_str(&format!("{layer},{frac:.5e}\n"));
        }
        out
    }
}

/// Keep the `q` kernel entries of largest magnitude (ties at the boundary
/// resolved toward the lower flat global index), zero the rest. Biases pass
/// through untouched.
pub fn global_magnitude_prune(params: &ParamSet, q: usize) -> Result<(ParamSet, PruneReport)> {
    let total = params.total_kernel_params();
    if q == 0 || q > total {
        return Err(Error::Argument(format!("keep count {q} outside 1..={total}")));
    }
    let magnitudes: Vec<f32> = params.flat_kernel_values().map(f32::abs).collect();
    let (_, keep) = topk_threshold(&magnitudes, q)?;

    let mut pruned = ParamSet {
        kernels: params.kernels.iter().map(Tensor::zeros_like).collect(),
        biases: params.biases.clone(),
    };
    let mut offsets = Vec::with_capacity(params.kernels.len() + 1);
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
        let local = idx - offsets[kernel];
        pruned.kernels[kernel].data_mut()[local] = params.kernels[kernel].data()[local];
    }

    let report = PruneReport {
        total_params: total,
        remaining: q,
        compression_ratio: total as f64 / q as f64,
        per_layer_nonzero: per_layer_nonzero(&pruned),
        accuracy_before: None,
        accuracy_after: None,
    };
    Ok((pruned, report))
}

/// Global compression ratio: total kernel entries over nonzero entries.
pub fn compression_ratio(params: &ParamSet) -> Result<f64> {
    let total = params.total_kernel_params();
    let nonzero = params.flat_kernel_values().filter(|&v| v != 0.0).count();
    if nonzero == 0 {
        return Err(Error::Argument(
            "all kernel entries are zero; compression ratio is undefined".into(),
        ));
    }
    Ok(total as f64 / nonzero as f64)
}

/// Nonzero fraction of each kernel, in kernel-layer order.
pub fn per_layer_nonzero(params: &ParamSet) -> Vec<(usize, f64)> {
    params
        .kernels
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let nz = k.iter().filter(|&&v| v != 0.0).count();
            (i, nz as f64 / k.len() as f64)
        })
        .collect()
}

/// Single-layer pruning scan: for each kernel layer and each ratio, zero that
/// fraction of the layer's smallest-magnitude entries, evaluate, and restore.
/// Returns Top-1 accuracies indexed `[layer][ratio]`; `params` is borrowed
/// immutably and left untouched.
pub fn layer_sensitivity(
    model: &ModelSpec,
    params: &ParamSet,
    data: &Dataset,
    ratios: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if let Some(&bad) = ratios.iter().find(|r| !(0.0..1.0).contains(*r)) {
        return Err(Error::Argument(format!("pruning ratio {bad} outside (0, 1)")));
    }
    let mut table = Vec::with_capacity(params.kernels.len());
    for layer in 0..params.kernels.len() {
        let mut row = Vec::with_capacity(ratios.len());
        let size = params.kernels[layer].len();
        for &ratio in ratios {
            let zero_count = (ratio * size as f64).floor() as usize;
            let mut probe = params.clone();
            if zero_count >= size {
                probe.kernels[layer] = params.kernels[layer].zeros_like();
            } else if zero_count > 0 {
                let keep = size - zero_count;
                let mags: Vec<f32> = params.kernels[layer].iter().map(|v| v.abs()).collect();
                let (_, kept_idx) = topk_threshold(&mags, keep)?;
                let mut masked = params.kernels[layer].zeros_like();
                for idx in kept_idx {
                    masked.data_mut()[idx] = params.kernels[layer].data()[idx];
                }
                probe.kernels[layer] = masked;
            }
            let (top1, _) = evaluate(model, &probe, data)?;
            row.push(top1);
        }
        table.push(row);
    }
    Ok(table)
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Argument(format!(
            "rank correlation needs two equal-length series of >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        num += (x - mean) * (y - mean);
        da += (x - mean).powi(2);
        db += (y - mean).powi(2);
    }
    if da == 0.0 || db == 0.0 {
        return Err(Error::Argument("constant series has no rank correlation".into()));
    }
    Ok(num / (da * db).sqrt())
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::Split;
    use crate::nn::params::ParamSet;
    use crate::rng::Rng;

    fn params(kernels: Vec<Vec<f32>>) -> ParamSet {
        ParamSet {
            biases: kernels.iter().map(|_| Tensor::zeros(vec![1])).collect(),
            kernels: kernels
                .into_iter()
                .map(|k| Tensor::new(vec![k.len()], k).unwrap())
                .collect(),
        }
    }

    #[test]
    fn full_keep_is_identity() {
        let p = params(vec![vec![1.0, -2.0, 0.5]]);
        let (pruned, report) = global_magnitude_prune(&p, 3).unwrap();
        assert_eq!(pruned.kernels[0].data(), p.kernels[0].data());
        assert_eq!(report.compression_ratio, 1.0);
    }

    #[test]
    fn keeps_largest_magnitudes() {
        let p = params(vec![vec![3.0, -4.0, 1.0, 0.5]]);
        let (pruned, report) = global_magnitude_prune(&p, 2).unwrap();
        assert_eq!(pruned.kernels[0].data(), &[3.0, -4.0, 0.0, 0.0]);
        assert_eq!(report.remaining, 2);
        assert_eq!(report.compression_ratio, 2.0);
    }

    #[test]
    fn prune_is_global_across_layers_and_spares_biases() {
        let mut p = params(vec![vec![0.1, 5.0], vec![1.0, 2.0]]);
        p.biases[0] = Tensor::new(vec![1], vec![9.0]).unwrap();
        let (pruned, report) = global_magnitude_prune(&p, 2).unwrap();
        assert_eq!(pruned.kernels[0].data(), &[0.0, 5.0]);
        assert_eq!(pruned.kernels[1].data(), &[0.0, 2.0]);
        assert_eq!(pruned.biases[0].data(), &[9.0]);
        assert_eq!(report.per_layer_nonzero, vec![(0, 0.5), (1, 0.5)]);
    }

    #[test]
    fn prune_is_idempotent_and_never_grows_magnitudes() {
        let mut rng = Rng::from_seed(3);
        let p = params(vec![
            (0..40).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            (0..25).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        ]);
        let (once, _) = global_magnitude_prune(&p, 13).unwrap();
        let (twice, _) = global_magnitude_prune(&once, 13).unwrap();
        assert_eq!(once.kernels, twice.kernels);
        for (orig, pruned) in p.kernels.iter().zip(&once.kernels) {
            for (a, b) in orig.iter().zip(pruned.iter()) {
                assert!(b.abs() <= a.abs());
            }
        }
    }

    #[test]
    fn per_layer_fractions_sum_to_the_keep_count() {
        let mut rng = Rng::from_seed(8);
        let p = params(vec![
            (0..60).map(|_| rng.uniform(0.5, 1.5)).collect(),
            (0..40).map(|_| rng.uniform(0.5, 1.5)).collect(),
        ]);
        assert!(per_layer_nonzero(&p).iter().all(|&(_, f)| f == 1.0));
        let (pruned, _) = global_magnitude_prune(&p, 25).unwrap();
        let weighted: f64 = per_layer_nonzero(&pruned)
            .iter()
            .zip(&pruned.kernels)
            .map(|(&(_, f), k)| f * k.len() as f64)
            .sum();
        assert_eq!(weighted.round() as usize, 25);
    }

    #[test]
    fn compression_ratio_accounting() {
        let p = params(vec![vec![1.0; 4]]);
        assert_eq!(compression_ratio(&p).unwrap(), 1.0);
        let half = params(vec![vec![1.0, 0.0, 2.0, 0.0]]);
        assert_eq!(compression_ratio(&half).unwrap(), 2.0);
        let dead = params(vec![vec![0.0; 4]]);
        assert!(compression_ratio(&dead).is_err());
    }

    #[test]
    fn table_scale_compression() {
        // 267,000 kernel entries with 4,450 alive is exactly 60x.
        let mut k = vec![0.0f32; 267_000];
        for v in k.iter_mut().take(4450) {
            *v = 0.5;
        }
        let p = params(vec![k]);
        assert_eq!(compression_ratio(&p).unwrap(), 60.0);
    }

    #[test]
    fn sensitivity_leaves_params_untouched_and_tiny_ratio_is_baseline() {
        use crate::nn::model::ModelSpec;
        let model = ModelSpec::mlp([1, 1, 6], &[5, 3]).unwrap();
        let p = ParamSet::init(&model, &mut Rng::from_seed(1)).unwrap();
        let before = p.clone();
        let mut rng = Rng::from_seed(2);
        let imgs = Tensor::new(vec![40, 1, 1, 6], (0..240).map(|_| rng.next_f32()).collect())
            .unwrap();
        let labels: Vec<usize> = (0..40).map(|i| i % 3).collect();
        let ds = Dataset::new(imgs, labels, 3, Split::Test).unwrap();
        let (baseline, _) = evaluate(&model, &p, &ds).unwrap();
        let table = layer_sensitivity(&model, &p, &ds, &[1e-9, 0.9]).unwrap();
        assert_eq!(p, before);
        for row in &table {
            assert_eq!(row[0], baseline);
        }
        assert!(layer_sensitivity(&model, &p, &ds, &[1.5]).is_err());
    }

    #[test]
    fn spearman_matches_hand_values() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&a, &[2.0, 4.0, 6.0, 8.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&a, &[8.0, 6.0, 4.0, 2.0]).unwrap() + 1.0).abs() < 1e-12);
        let mixed = spearman(&a, &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((mixed - 0.8).abs() < 1e-12);
    }
}
