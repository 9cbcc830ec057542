//! Shared test support: an independent f64 reference network for
//! finite-difference oracles, plus small helpers used across suites.
//!
//! The reference implementation deliberately avoids the production code
//! paths: direct convolution instead of im2col, plain nested loops, and f64
//! arithmetic throughout, so it can serve as an oracle for the analytic f32
//! gradients.

#![allow(dead_code)]

use gsm_core::nn::model::{LayerSpec, ModelSpec};
use gsm_core::nn::params::ParamSet;

/// Parameters of the reference net, in f64.
#[derive(Clone)]
pub struct RefParams {
    pub kernels: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl RefParams {
    pub fn from_params(p: &ParamSet) -> Self {
        RefParams {
            kernels: p
                .kernels
                .iter()
                .map(|k| k.iter().map(|&v| v as f64).collect())
                .collect(),
            biases: p
                .biases
                .iter()
                .map(|b| b.iter().map(|&v| v as f64).collect())
                .collect(),
        }
    }
}

struct RefAct {
    // [n, c, h, w] layout even for vectors (c = len, h = w = 1 after fc).
    data: Vec<f64>,
    n: usize,
    c: usize,
    h: usize,
    w: usize,
}

/// Structural margins observed during a reference forward pass; used to
/// reject inputs too close to a ReLU kink or a pooling tie, where finite
/// differences are not trustworthy.
#[derive(Debug, Clone, Copy)]
pub struct KinkMargins {
    pub min_relu_distance: f64,
    pub min_pool_margin: f64,
}

/// Mean softmax cross-entropy of the reference net, plus kink margins.
pub fn ref_loss(
    model: &ModelSpec,
    params: &RefParams,
    batch: &[f64],
    n: usize,
    labels: &[usize],
) -> (f64, KinkMargins) {
    let [c0, h0, w0] = model.input_shape;
    assert_eq!(batch.len(), n * c0 * h0 * w0);
    let mut act = RefAct { data: batch.to_vec(), n, c: c0, h: h0, w: w0 };
    let mut margins = KinkMargins { min_relu_distance: f64::INFINITY, min_pool_margin: f64::INFINITY };
    let mut kernel_idx = 0;

    for layer in &model.layers {
        act = match *layer {
            LayerSpec::FullyConnected { inp, out } => {
                assert_eq!(act.c * act.h * act.w, inp);
                let w_mat = &params.kernels[kernel_idx];
                let bias = &params.biases[kernel_idx];
                kernel_idx += 1;
                let mut data = vec![0.0f64; act.n * out];
                for i in 0..act.n {
                    let row = &act.data[i * inp..(i + 1) * inp];
                    for q in 0..out {
                        let mut acc = bias[q];
                        for (p, &x) in row.iter().enumerate() {
                            acc += x * w_mat[p * out + q];
                        }
                        data[i * out + q] = acc;
                    }
                }
                RefAct { data, n: act.n, c: out, h: 1, w: 1 }
            }
            LayerSpec::Conv2d { kh, kw, in_ch, out_ch, stride, pad } => {
                assert_eq!(act.c, in_ch);
                let oh = (act.h + 2 * pad - kh) / stride + 1;
                let ow = (act.w + 2 * pad - kw) / stride + 1;
                let k = &params.kernels[kernel_idx];
                let bias = &params.biases[kernel_idx];
                kernel_idx += 1;
                let mut data = vec![0.0f64; act.n * out_ch * oh * ow];
                for ni in 0..act.n {
                    for s in 0..out_ch {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let mut acc = bias[s];
                                for ky in 0..kh {
                                    for kx in 0..kw {
                                        let iy = (oy * stride + ky) as isize - pad as isize;
                                        let ix = (ox * stride + kx) as isize - pad as isize;
                                        if iy < 0 || ix < 0 || iy >= act.h as isize || ix >= act.w as isize {
                                            continue;
                                        }
                                        for ci in 0..in_ch {
                                            let x = act.data[((ni * act.c + ci) * act.h
                                                + iy as usize)
                                                * act.w
                                                + ix as usize];
                                            let kv = k[((ky * kw + kx) * in_ch + ci) * out_ch + s];
                                            acc += x * kv;
                                        }
                                    }
                                }
                                data[((ni * out_ch + s) * oh + oy) * ow + ox] = acc;
                            }
                        }
                    }
                }
                RefAct { data, n: act.n, c: out_ch, h: oh, w: ow }
            }
            LayerSpec::ReLU => {
                let mut data = act.data;
                for v in data.iter_mut() {
                    margins.min_relu_distance = margins.min_relu_distance.min(v.abs());
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                RefAct { data, ..act }
            }
            LayerSpec::MaxPool2 => {
                assert!(act.h.is_multiple_of(2) && act.w.is_multiple_of(2));
                let (oh, ow) = (act.h / 2, act.w / 2);
                let mut data = vec![0.0f64; act.n * act.c * oh * ow];
                for ni in 0..act.n {
                    for ci in 0..act.c {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let mut vals = [0.0f64; 4];
                                for (j, (dy, dx)) in
                                    [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate()
                                {
                                    vals[j] = act.data[((ni * act.c + ci) * act.h + 2 * oy + dy)
                                        * act.w
                                        + 2 * ox
                                        + dx];
                                }
                                let mut sorted = vals;
                                sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
                                margins.min_pool_margin =
                                    margins.min_pool_margin.min(sorted[0] - sorted[1]);
                                data[((ni * act.c + ci) * oh + oy) * ow + ox] = sorted[0];
                            }
                        }
                    }
                }
                RefAct { data, n: act.n, c: act.c, h: oh, w: ow }
            }
            LayerSpec::Flatten => RefAct {
                data: act.data,
                n: act.n,
                c: act.c * act.h * act.w,
                h: 1,
                w: 1,
            },
        };
    }

    let classes = model.classes;
    assert_eq!(act.c * act.h * act.w, classes);
    let mut loss = 0.0f64;
    for (row, &y) in act.data.chunks(classes).zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        loss += max + sum.ln() - row[y];
    }
    (loss / n as f64, margins)
}

/// Central finite differences of the reference loss for every kernel and
/// bias entry, at the given step.
pub fn fd_gradients(
    model: &ModelSpec,
    params: &RefParams,
    batch: &[f64],
    n: usize,
    labels: &[usize],
    eps: f64,
) -> RefParams {
    let mut work = params.clone();
    let mut out = RefParams {
        kernels: params.kernels.iter().map(|k| vec![0.0; k.len()]).collect(),
        biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
    };
    for ki in 0..params.kernels.len() {
        for j in 0..params.kernels[ki].len() {
            let orig = work.kernels[ki][j];
            work.kernels[ki][j] = orig + eps;
            let (plus, _) = ref_loss(model, &work, batch, n, labels);
            work.kernels[ki][j] = orig - eps;
            let (minus, _) = ref_loss(model, &work, batch, n, labels);
            work.kernels[ki][j] = orig;
            out.kernels[ki][j] = (plus - minus) / (2.0 * eps);
        }
        for j in 0..params.biases[ki].len() {
            let orig = work.biases[ki][j];
            work.biases[ki][j] = orig + eps;
            let (plus, _) = ref_loss(model, &work, batch, n, labels);
            work.biases[ki][j] = orig - eps;
            let (minus, _) = ref_loss(model, &work, batch, n, labels);
            work.biases[ki][j] = orig;
            out.biases[ki][j] = (plus - minus) / (2.0 * eps);
        }
    }
    out
}

/// Per-entry relative error with an absolute floor: `|a - b|` over
/// `max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// One pass/fail line per acceptance criterion, printed from the test body
/// so `--nocapture` runs read as a checklist.
pub fn criterion_line(id: u32, name: &str, detail: &str) {
    println!("criterion {id:>2} [{name}]: PASS ({detail})");
}
