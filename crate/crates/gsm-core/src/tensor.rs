//! Dense row-major `f32` tensors and the deterministic kernels built on them.
//!
//! Everything here is written so that results are bit-for-bit reproducible
//! across runs: per-element accumulation always walks the reduction axis
//! left to right, and parallelism only ever splits work along output
//! elements, never along a reduction.

use crate::error::{Error, Result};
use rayon::prelude::*;

/// Work size (m*k*n) above which matmul fans rows out to the thread pool.
const PAR_WORK_THRESHOLD: usize = 1 << 18;

/// Dense numeric array. `data.len() == shape.iter().product()` always holds,
/// and the kernels here keep finite inputs finite (no division, no
/// unguarded exponentials).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} wants {expect} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![0.0; n] }
    }

    pub fn zeros_like(&self) -> Self {
        Tensor { shape: self.shape.clone(), data: vec![0.0; self.data.len()] }
    }

    pub fn full(shape: Vec<usize>, value: f32) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![value; n] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Reinterpret with a new shape of identical element count.
    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if expect != self.data.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} ({} values) to {shape:?}",
                self.shape,
                self.data.len()
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn as_2d(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            &[r, c] => Ok((r, c)),
            other => Err(Error::Dimension(format!("expected a matrix, got shape {other:?}"))),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f32> {
        self.data.iter()
    }
}

/// `out[i] += s * x[i]`, preserving per-element operation order.
#[inline]
fn axpy(out: &mut [f32], s: f32, x: &[f32]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o += s * v;
    }
}

/// Matrix product `a[m×k] · b[k×n]`.
///
/// Each output element accumulates over `k` in ascending order, so results
/// do not depend on the (row-level) parallel split.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.as_2d()?;
    let (k2, n) = b.as_2d()?;
    if k != k2 {
        return Err(Error::Dimension(format!(
            "matmul inner dims disagree: {m}x{k} vs {k2}x{n}"
        )));
    }
    let mut out = vec![0.0f32; m * n];
    let ad = a.data();
    let bd = b.data();
    let row = |i: usize, out_row: &mut [f32]| {
        for (kk, &aik) in ad[i * k..(i + 1) * k].iter().enumerate() {
            axpy(out_row, aik, &bd[kk * n..(kk + 1) * n]);
        }
    };
    if m * k * n >= PAR_WORK_THRESHOLD && m > 1 {
        out.par_chunks_mut(n).enumerate().for_each(|(i, r)| row(i, r));
    } else {
        out.chunks_mut(n).enumerate().for_each(|(i, r)| row(i, r));
    }
    Tensor::new(vec![m, n], out)
}

/// `aᵀ[p×m] · b[m×q]` without materializing the transpose.
///
/// Per output element the sum over `m` runs in ascending row order.
pub fn matmul_at_b(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, p) = a.as_2d()?;
    let (m2, q) = b.as_2d()?;
    if m != m2 {
        return Err(Error::Dimension(format!(
            "matmul_at_b outer dims disagree: {m}x{p} vs {m2}x{q}"
        )));
    }
    let mut out = vec![0.0f32; p * q];
    let ad = a.data();
    let bd = b.data();
    let row = |pp: usize, out_row: &mut [f32]| {
        for i in 0..m {
            axpy(out_row, ad[i * p + pp], &bd[i * q..(i + 1) * q]);
        }
    };
    if m * p * q >= PAR_WORK_THRESHOLD && p > 1 {
        out.par_chunks_mut(q).enumerate().for_each(|(pp, r)| row(pp, r));
    } else {
        out.chunks_mut(q).enumerate().for_each(|(pp, r)| row(pp, r));
    }
    Tensor::new(vec![p, q], out)
}

/// Materialized transpose of a matrix.
pub fn transpose2(a: &Tensor) -> Result<Tensor> {
    let (m, n) = a.as_2d()?;
    let ad = a.data();
    let mut out = vec![0.0f32; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = ad[i * n + j];
        }
    }
    Tensor::new(vec![n, m], out)
}

fn conv_out_len(input: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = input + 2 * pad;
    if padded < k {
        return Err(Error::Dimension(format!(
            "window {k} larger than padded input {padded}"
        )));
    }
    if !(padded - k).is_multiple_of(stride) {
        return Err(Error::Dimension(format!(
            "non-integral output size: ({input} + 2*{pad} - {k}) not divisible by stride {stride}"
        )));
    }
    Ok((padded - k) / stride + 1)
}

/// Unfold image batches into receptive-field rows.
///
/// Input `[n, r, H, W]` becomes `[(n·H'·W'), (kh·kw·r)]`; rows are ordered
/// `(sample, out_y, out_x)` and each row lists its window in
/// `(ky, kx, channel)` order, matching how convolution kernels are stored
/// as unfolded `[kh·kw·r, s]` matrices. Out-of-bounds taps read zero.
pub fn im2col(input: &Tensor, kh: usize, kw: usize, stride: usize, pad: usize) -> Result<Tensor> {
    let (n, r, h, w) = match input.shape() {
        &[n, r, h, w] => (n, r, h, w),
        other => {
            return Err(Error::Dimension(format!(
                "im2col expects [n, c, h, w], got {other:?}"
            )))
        }
    };
    if stride == 0 {
        return Err(Error::Argument("stride must be positive".into()));
    }
    let oh = conv_out_len(h, kh, stride, pad)?;
    let ow = conv_out_len(w, kw, stride, pad)?;
    let cols = kh * kw * r;
    let mut out = vec![0.0f32; n * oh * ow * cols];
    let src = input.data();
    let sample_rows = oh * ow;
    let fill_sample = |ni: usize, block: &mut [f32]| {
        let img = &src[ni * r * h * w..(ni + 1) * r * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let row = &mut block[(oy * ow + ox) * cols..(oy * ow + ox + 1) * cols];
                let mut col = 0;
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        let inside =
                            iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w;
                        for c in 0..r {
                            row[col] = if inside {
                                img[(c * h + iy as usize) * w + ix as usize]
                            } else {
                                0.0
                            };
                            col += 1;
                        }
                    }
                }
            }
        }
    };
    if n > 1 && out.len() >= PAR_WORK_THRESHOLD {
        out.par_chunks_mut(sample_rows * cols)
            .enumerate()
            .for_each(|(ni, block)| fill_sample(ni, block));
    } else {
        out.chunks_mut(sample_rows * cols)
            .enumerate()
            .for_each(|(ni, block)| fill_sample(ni, block));
    }
    Tensor::new(vec![n * oh * ow, cols], out)
}

/// Adjoint of [`im2col`]: scatter-add window-row gradients back onto the
/// input image layout. Per input element, contributions arrive in ascending
/// `(out_y, out_x, ky, kx)` order; parallelism splits across samples only.
#[allow(clippy::too_many_arguments)]
pub fn col2im(
    cols_grad: &Tensor,
    n: usize,
    r: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let oh = conv_out_len(h, kh, stride, pad)?;
    let ow = conv_out_len(w, kw, stride, pad)?;
    let cols = kh * kw * r;
    let (rows, got_cols) = cols_grad.as_2d()?;
    if rows != n * oh * ow || got_cols != cols {
        return Err(Error::Dimension(format!(
            "col2im expects [{}x{}], got [{rows}x{got_cols}]",
            n * oh * ow,
            cols
        )));
    }
    let mut out = vec![0.0f32; n * r * h * w];
    let src = cols_grad.data();
    let scatter_sample = |ni: usize, img: &mut [f32]| {
        let block = &src[ni * oh * ow * cols..(ni + 1) * oh * ow * cols];
        for oy in 0..oh {
            for ox in 0..ow {
                let row = &block[(oy * ow + ox) * cols..(oy * ow + ox + 1) * cols];
                let mut col = 0;
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        let inside =
                            iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w;
                        for c in 0..r {
                            if inside {
                                img[(c * h + iy as usize) * w + ix as usize] += row[col];
                            }
                            col += 1;
                        }
                    }
                }
            }
        }
    };
    if n > 1 && out.len() >= PAR_WORK_THRESHOLD {
        out.par_chunks_mut(r * h * w)
            .enumerate()
            .for_each(|(ni, img)| scatter_sample(ni, img));
    } else {
        out.chunks_mut(r * h * w)
            .enumerate()
            .for_each(|(ni, img)| scatter_sample(ni, img));
    }
    Tensor::new(vec![n, r, h, w], out)
}

/// Indices of the `q` greatest values, ties at the cut broken toward the
/// lower flat index. Returns the q-th greatest value (the selection
/// threshold) and the selected indices in ascending order.
pub fn topk_threshold(values: &[f32], q: usize) -> Result<(f32, Vec<usize>)> {
    if q == 0 || q > values.len() {
        return Err(Error::Argument(format!(
            "top-q count {q} out of range 1..={}",
            values.len()
        )));
    }
    let mut idx: Vec<u32> = (0..values.len() as u32).collect();
    let rank = |a: &u32, b: &u32| {
        values[*b as usize]
            .total_cmp(&values[*a as usize])
            .then_with(|| a.cmp(b))
    };
    if q < idx.len() {
        idx.select_nth_unstable_by(q - 1, rank);
        idx.truncate(q);
    }
    let threshold = idx
        .iter()
        .map(|&i| values[i as usize])
        .fold(f32::INFINITY, f32::min);
    idx.sort_unstable();
    Ok((threshold, idx.into_iter().map(|i| i as usize).collect()))
}
