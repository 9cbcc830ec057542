//! Forward pass with the per-layer activations backward needs.

use crate::error::{Error, Result};
use crate::nn::model::{LayerSpec, ModelSpec};
use crate::nn::params::ParamSet;
use crate::tensor::{im2col, matmul, Tensor};

/// What each layer stashes for its backward rule.
#[derive(Debug)]
pub enum LayerCache {
    /// Input activations `[n, p]`.
    Fc { input: Tensor },
    /// Unfolded windows `[(n·oh·ow), kh·kw·r]` plus the input image shape.
    Conv { cols: Tensor, in_shape: [usize; 4], out_hw: (usize, usize) },
    /// Which pre-activations were positive.
    Relu { mask: Vec<bool> },
    /// Flat input index of each window maximum, plus the input shape.
    MaxPool { argmax: Vec<u32>, in_shape: [usize; 4] },
    Flatten { in_shape: Vec<usize> },
}

/// Everything backward needs from one forward call.
///
/// Caller contract: a cache is only valid for the exact parameters that
/// produced it; any parameter mutation invalidates it.
#[derive(Debug)]
pub struct ForwardCache {
    pub layers: Vec<LayerCache>,
    pub logits: Tensor,
}

fn add_row_bias(y: &mut Tensor, bias: &Tensor) {
    let cols = bias.len();
    let b = bias.data();
    for row in y.data_mut().chunks_mut(cols) {
        for (o, &v) in row.iter_mut().zip(b) {
            *o += v;
        }
    }
}

fn image_dims(t: &Tensor) -> Result<[usize; 4]> {
    match t.shape() {
        &[n, c, h, w] => Ok([n, c, h, w]),
        other => Err(Error::Dimension(format!("expected [n,c,h,w], got {other:?}"))),
    }
}

/// Run the network on a batch `[n, c, h, w]`, returning logits `[n, classes]`
/// and the cache consumed by [`super::loss_and_backward`]. Deterministic:
/// identical inputs give identical outputs.
pub fn forward(model: &ModelSpec, params: &ParamSet, batch: &Tensor) -> Result<(Tensor, ForwardCache)> {
    params.check_matches(model)?;
    let [n, c, h, w] = image_dims(batch)?;
    if [c, h, w] != model.input_shape {
        return Err(Error::Dimension(format!(
            "batch example shape [{c},{h},{w}] does not match model input {:?}",
            model.input_shape
        )));
    }
    if n == 0 {
        return Err(Error::Argument("empty batch".into()));
    }

    let mut acts = batch.clone();
    let mut caches = Vec::with_capacity(model.layers.len());
    let mut kernel_idx = 0;

    for layer in &model.layers {
        match *layer {
            LayerSpec::FullyConnected { inp, out } => {
                let w_mat = &params.kernels[kernel_idx];
                let (rows, d) = acts.as_2d()?;
                if d != inp {
                    return Err(Error::Dimension(format!(
                        "fc({inp},{out}) fed a [{rows}x{d}] activation"
                    )));
                }
                let mut y = matmul(&acts, w_mat)?;
                add_row_bias(&mut y, &params.biases[kernel_idx]);
                caches.push(LayerCache::Fc { input: std::mem::replace(&mut acts, y) });
                kernel_idx += 1;
            }
            LayerSpec::Conv2d { kh, kw, in_ch, out_ch, stride, pad } => {
                let in_shape = image_dims(&acts)?;
                if in_shape[1] != in_ch {
                    return Err(Error::Dimension(format!(
                        "conv expects {in_ch} channels, activation has {}",
                        in_shape[1]
                    )));
                }
                let cols = im2col(&acts, kh, kw, stride, pad)?;
                let mut y = matmul(&cols, &params.kernels[kernel_idx])?;
                add_row_bias(&mut y, &params.biases[kernel_idx]);
                // Rows of y are (sample, oy, ox); permute into [n, s, oh, ow].
                let oh = (in_shape[2] + 2 * pad - kh) / stride + 1;
                let ow = (in_shape[3] + 2 * pad - kw) / stride + 1;
                let mut img = vec![0.0f32; n * out_ch * oh * ow];
                let yd = y.data();
                for ni in 0..n {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let row = &yd[((ni * oh + oy) * ow + ox) * out_ch..][..out_ch];
                            for (s, &v) in row.iter().enumerate() {
                                img[((ni * out_ch + s) * oh + oy) * ow + ox] = v;
                            }
                        }
                    }
                }
                acts = Tensor::new(vec![n, out_ch, oh, ow], img)?;
                caches.push(LayerCache::Conv { cols, in_shape, out_hw: (oh, ow) });
                kernel_idx += 1;
            }
            LayerSpec::ReLU => {
                let mut mask = vec![false; acts.len()];
                for (m, v) in mask.iter_mut().zip(acts.data_mut()) {
                    if *v > 0.0 {
                        *m = true;
                    } else {
                        *v = 0.0;
                    }
                }
                caches.push(LayerCache::Relu { mask });
            }
            LayerSpec::MaxPool2 => {
                let [bn, bc, bh, bw] = image_dims(&acts)?;
                if !bh.is_multiple_of(2) || !bw.is_multiple_of(2) {
                    return Err(Error::Dimension(format!(
                        "maxpool2 needs even spatial dims, got {bh}x{bw}"
                    )));
                }
                let (oh, ow) = (bh / 2, bw / 2);
                let src = acts.data();
                let mut out = vec![0.0f32; bn * bc * oh * ow];
                let mut argmax = vec![0u32; out.len()];
                for ni in 0..bn {
                    for ci in 0..bc {
                        let plane = (ni * bc + ci) * bh * bw;
                        for oy in 0..oh {
                            for ox in 0..ow {
                                // Scan order pins the tie rule: first max wins.
                                let mut best_idx = plane + (2 * oy) * bw + 2 * ox;
                                let mut best = src[best_idx];
                                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                                    let idx = plane + (2 * oy + dy) * bw + 2 * ox + dx;
                                    if src[idx] > best {
                                        best = src[idx];
                                        best_idx = idx;
                                    }
                                }
                                let o = ((ni * bc + ci) * oh + oy) * ow + ox;
                                out[o] = best;
                                argmax[o] = best_idx as u32;
                            }
                        }
                    }
                }
                acts = Tensor::new(vec![bn, bc, oh, ow], out)?;
                caches.push(LayerCache::MaxPool { argmax, in_shape: [bn, bc, bh, bw] });
            }
            LayerSpec::Flatten => {
                let in_shape = acts.shape().to_vec();
                let flat = in_shape[1..].iter().product();
                acts = acts.reshape(vec![n, flat])?;
                caches.push(LayerCache::Flatten { in_shape });
            }
        }
    }

    let logits = acts;
    let cache = ForwardCache { layers: caches, logits: logits.clone() };
    Ok((logits, cache))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::ModelSpec;

    fn batch(shape: Vec<usize>, data: Vec<f32>) -> Tensor {
        Tensor::new(shape, data).unwrap()
    }

    #[test]
    fn zero_params_give_zero_logits() {
        let model = ModelSpec::mlp([1, 1, 4], &[3, 2]).unwrap();
        let params = ParamSet::zeros(&model).unwrap();
        let x = batch(vec![2, 1, 1, 4], vec![1.0; 8]);
        let (logits, _) = forward(&model, &params, &x).unwrap();
        assert_eq!(logits.data(), &[0.0; 4]);
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let model = ModelSpec {
            input_shape: [1, 1, 3],
            classes: 3,
            layers: vec![
                LayerSpec::Flatten,
                LayerSpec::FullyConnected { inp: 3, out: 3 },
            ],
        };
        let mut params = ParamSet::zeros(&model).unwrap();
        params.kernels[0] = Tensor::identity(3);
        let x = batch(vec![1, 1, 1, 3], vec![0.5, -2.0, 3.25]);
        let (logits, _) = forward(&model, &params, &x).unwrap();
        assert_eq!(logits.data(), x.data());
    }

    #[test]
    fn hand_computed_two_layer_mlp() {
        // All constants are exactly representable, so equality is exact.
        let model = ModelSpec {
            input_shape: [1, 1, 2],
            classes: 2,
            layers: vec![
                LayerSpec::Flatten,
                LayerSpec::FullyConnected { inp: 2, out: 3 },
                LayerSpec::ReLU,
                LayerSpec::FullyConnected { inp: 3, out: 2 },
            ],
        };
        let mut params = ParamSet::zeros(&model).unwrap();
        params.kernels[0] =
            Tensor::new(vec![2, 3], vec![0.5, -1.0, 0.25, 1.0, 2.0, -0.5]).unwrap();
        params.biases[0] = Tensor::new(vec![3], vec![0.25, -0.5, 1.0]).unwrap();
        params.kernels[1] =
            Tensor::new(vec![3, 2], vec![1.0, -1.0, 0.5, 0.25, -2.0, 0.5]).unwrap();
        params.biases[1] = Tensor::new(vec![2], vec![0.125, -0.25]).unwrap();
        let x = batch(vec![1, 1, 1, 2], vec![2.0, -1.0]);
        let (logits, _) = forward(&model, &params, &x).unwrap();
        // Hidden pre-activations: [0.25, -4.5, 2.0] -> ReLU -> [0.25, 0, 2].
        assert_eq!(logits.data(), &[-3.625, 0.5]);
    }

    #[test]
    fn forward_is_pure() {
        let model = ModelSpec::lenet_5();
        let params = ParamSet::init(&model, &mut crate::rng::Rng::from_seed(5)).unwrap();
        let mut rng = crate::rng::Rng::from_seed(9);
        let x = batch(
            vec![2, 1, 28, 28],
            (0..2 * 28 * 28).map(|_| rng.next_f32()).collect(),
        );
        let (a, _) = forward(&model, &params, &x).unwrap();
        let (b, _) = forward(&model, &params, &x).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn batch_shape_mismatch_is_an_error() {
        let model = ModelSpec::lenet_300_100();
        let params = ParamSet::zeros(&model).unwrap();
        let x = batch(vec![1, 1, 14, 14], vec![0.0; 196]);
        assert!(matches!(forward(&model, &params, &x), Err(Error::Dimension(_))));
    }

    #[test]
    fn maxpool_takes_first_of_tied_values() {
        let model = ModelSpec {
            input_shape: [1, 2, 2],
            classes: 1,
            layers: vec![LayerSpec::MaxPool2, LayerSpec::Flatten],
        };
        let params = ParamSet::zeros(&model).unwrap();
        let x = batch(vec![1, 1, 2, 2], vec![3.0, 3.0, 3.0, 3.0]);
        let (y, cache) = forward(&model, &params, &x).unwrap();
        assert_eq!(y.data(), &[3.0]);
        match &cache.layers[0] {
            LayerCache::MaxPool { argmax, .. } => assert_eq!(argmax, &[0u32]),
            other => panic!("unexpected cache {other:?}"),
        }
    }
}
