//! Cross-entropy objective and the analytic backward pass.

use crate::error::{Error, Result};
use crate::nn::forward::{ForwardCache, LayerCache};
use crate::nn::model::{LayerSpec, ModelSpec};
use crate::nn::params::ParamSet;
use crate::tensor::{col2im, matmul, matmul_at_b, transpose2, Tensor};

/// Row-wise softmax probabilities and the mean cross-entropy over the batch.
///
/// Uses the max-shift form, so the loss is finite for any finite logits.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f32, Tensor)> {
    let (n, classes) = logits.as_2d()?;
    if labels.len() != n {
        return Err(Error::Dimension(format!(
            "{n} logit rows vs {} labels",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Argument(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    let mut probs = logits.clone();
    let mut loss_sum = 0.0f32;
    for (row, &y) in probs.data_mut().chunks_mut(classes).zip(labels) {
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mut sum = 0.0f32;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        loss_sum += sum.ln() - (row[y].ln());
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok((loss_sum / n as f32, probs))
}

/// Mean softmax cross-entropy plus gradients for every kernel and bias.
///
/// `cache` must come from a [`super::forward`] call with the same model and
/// parameters; the gradient of the loss w.r.t. the logits is
/// `(softmax - onehot) / n`, then each layer applies its chain rule.
pub fn loss_and_backward(
    model: &ModelSpec,
    params: &ParamSet,
    cache: &ForwardCache,
    labels: &[usize],
) -> Result<(f32, ParamSet)> {
    if cache.layers.len() != model.layers.len() {
        return Err(Error::Dimension(format!(
            "cache has {} layers, model has {}",
            cache.layers.len(),
            model.layers.len()
        )));
    }
    let (loss, probs) = softmax_cross_entropy(&cache.logits, labels)?;
    let (n, classes) = probs.as_2d()?;

    let mut grad = probs;
    {
        let inv_n = 1.0 / n as f32;
        let g = grad.data_mut();
        for (row, &y) in g.chunks_mut(classes).zip(labels) {
            row[y] -= 1.0;
        }
        for v in g.iter_mut() {
            *v *= inv_n;
        }
    }

    let mut grads = params.zeros_like();
    let mut kernel_idx = params.kernels.len();
    // Nothing below the bottom-most kernel layer consumes a gradient, so the
    // walk stops there and skips its (large) input-gradient product.
    let lowest_kernel = model.layers.iter().position(LayerSpec::is_kernel);

    for (layer_idx, (layer, state)) in model.layers.iter().zip(cache.layers.iter()).enumerate().rev()
    {
        let need_input_grad = Some(layer_idx) != lowest_kernel;
        match (layer, state) {
            (LayerSpec::FullyConnected { .. }, LayerCache::Fc { input }) => {
                kernel_idx -= 1;
                grads.kernels[kernel_idx] = matmul_at_b(input, &grad)?;
                grads.biases[kernel_idx] = column_sums(&grad)?;
                if !need_input_grad {
                    break;
                }
                grad = matmul(&grad, &transpose2(&params.kernels[kernel_idx])?)?;
            }
            (
                LayerSpec::Conv2d { kh, kw, stride, pad, out_ch, .. },
                LayerCache::Conv { cols, in_shape, out_hw },
            ) => {
                kernel_idx -= 1;
                let (oh, ow) = *out_hw;
                let [bn, bc, bh, bw] = *in_shape;
                // [n, s, oh, ow] -> rows ordered (sample, oy, ox).
                let gd = grad.data();
                let mut gmat = vec![0.0f32; bn * oh * ow * out_ch];
                for ni in 0..bn {
                    for s in 0..*out_ch {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                gmat[((ni * oh + oy) * ow + ox) * out_ch + s] =
                                    gd[((ni * out_ch + s) * oh + oy) * ow + ox];
                            }
                        }
                    }
                }
                let gmat = Tensor::new(vec![bn * oh * ow, *out_ch], gmat)?;
                grads.kernels[kernel_idx] = matmul_at_b(cols, &gmat)?;
                grads.biases[kernel_idx] = column_sums(&gmat)?;
                if !need_input_grad {
                    break;
                }
                let dcols = matmul(&gmat, &transpose2(&params.kernels[kernel_idx])?)?;
                grad = col2im(&dcols, bn, bc, bh, bw, *kh, *kw, *stride, *pad)?;
            }
            (LayerSpec::ReLU, LayerCache::Relu { mask }) => {
                for (g, &keep) in grad.data_mut().iter_mut().zip(mask) {
                    if !keep {
                        *g = 0.0;
                    }
                }
            }
            (LayerSpec::MaxPool2, LayerCache::MaxPool { argmax, in_shape }) => {
                let mut up = Tensor::zeros(in_shape.to_vec());
                let dst = up.data_mut();
                for (&src_idx, &g) in argmax.iter().zip(grad.iter()) {
                    dst[src_idx as usize] += g;
                }
                grad = up;
            }
            (LayerSpec::Flatten, LayerCache::Flatten { in_shape }) => {
                grad = grad.reshape(in_shape.clone())?;
            }
            (layer, state) => {
                return Err(Error::Dimension(format!(
                    "cache entry {state:?} does not match layer {layer:?}"
                )));
            }
        }
    }

    Ok((loss, grads))
}

fn column_sums(m: &Tensor) -> Result<Tensor> {
    let (rows, cols) = m.as_2d()?;
    let mut out = vec![0.0f32; cols];
    for i in 0..rows {
        for (o, &v) in out.iter_mut().zip(&m.data()[i * cols..(i + 1) * cols]) {
            *o += v;
        }
    }
    Tensor::new(vec![cols], out)
}
