//! Generated datasets: Gaussian class clusters and a rendered-digit corpus.
//!
//! Both generators derive every example from `(seed, example index)` alone,
//! so a corpus is reproducible and any prefix of it is stable under taking
//! subsets.

use crate::data::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::rng::{stream, Rng, StreamKind};
use crate::tensor::Tensor;

/// Index namespace separating test examples from train examples.
const TEST_INDEX_BASE: u64 = 1 << 40;

fn example_index(split: Split, i: usize) -> u64 {
    match split {
        Split::Train => i as u64,
        Split::Test => TEST_INDEX_BASE + i as u64,
    }
}

/// Gaussian cluster data in `[0, 1]^dims`: each class has a fixed mean drawn
/// uniformly from `[0.15, 0.85]^dims`, and examples scatter around it with
/// spherical standard deviation `0.25 / spread` (clamped into range). At the
/// default `spread = 3` the classes are linearly separable with margin.
pub fn synthetic_dataset(
    seed: u64,
    n: usize,
    classes: usize,
    dims: usize,
    spread: f32,
    split: Split,
) -> Result<Dataset> {
    if n == 0 || classes == 0 || dims == 0 {
        return Err(Error::Argument(
            "synthetic dataset needs n, classes, dims >= 1".into(),
        ));
    }
    if spread <= 0.0 {
        return Err(Error::Argument(format!("spread {spread} must be positive")));
    }
    let mut means = Vec::with_capacity(classes);
    for c in 0..classes {
        let mut rng = stream(seed, StreamKind::Synthetic, u64::MAX - c as u64);
        means.push((0..dims).map(|_| rng.uniform(0.15, 0.85)).collect::<Vec<f32>>());
    }
    let sigma = 0.25 / spread;
    let mut data = Vec::with_capacity(n * dims);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = stream(seed, StreamKind::Synthetic, example_index(split, i));
        let class = rng.below(classes as u64) as usize;
        labels.push(class);
        for &mean in &means[class] {
            let v = mean + sigma * rng.normal();
            data.push(v.clamp(0.0, 1.0));
        }
    }
    let images = Tensor::new(vec![n, 1, 1, dims], data)?;
    Dataset::new(images, labels, classes, split)
}

/// 5x7 pixel-font glyphs for the rendered-digit corpus.
const GLYPHS: [[u8; 7]; 10] = [
    // Each row is 5 bits, MSB = leftmost column.
    [0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110], // 0
    [0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110], // 1
    [0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111], // 2
    [0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110], // 3
    [0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010], // 4
    [0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110], // 5
    [0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110], // 6
    [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000], // 7
    [0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110], // 8
    [0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100], // 9
];

const CANVAS: usize = 28;
const GLYPH_W: f32 = 5.0;
const GLYPH_H: f32 = 7.0;

fn glyph_at(label: usize, u: f32, v: f32) -> f32 {
    // Bilinear sample of the binary glyph; outside reads zero.
    let sample = |x: i32, y: i32| -> f32 {
        if x < 0 || y < 0 || x >= 5 || y >= 7 {
            0.0
        } else {
            ((GLYPHS[label][y as usize] >> (4 - x as usize)) & 1) as f32
        }
    };
    let x0 = u.floor();
    let y0 = v.floor();
    let fx = u - x0;
    let fy = v - y0;
    let (xi, yi) = (x0 as i32, y0 as i32);
    let top = sample(xi, yi) * (1.0 - fx) + sample(xi + 1, yi) * fx;
    let bot = sample(xi, yi + 1) * (1.0 - fx) + sample(xi + 1, yi + 1) * fx;
    top * (1.0 - fy) + bot * fy
}

fn render_digit(label: usize, rng: &mut Rng, out: &mut [f32]) {
    let scale = rng.uniform(2.0, 3.4);
    let angle = rng.uniform(-0.35, 0.35);
    let cx = rng.uniform(-3.5, 3.5);
    let cy = rng.uniform(-3.5, 3.5);
    let intensity = rng.uniform(0.7, 1.0);
    let noise = 0.12f32;
    let (sin, cos) = angle.sin_cos();
    let center = (CANVAS as f32 - 1.0) / 2.0;
    for y in 0..CANVAS {
        for x in 0..CANVAS {
            let dx = x as f32 - center - cx;
            let dy = y as f32 - center - cy;
            let u = (dx * cos + dy * sin) / scale + GLYPH_W / 2.0 - 0.5;
            let v = (-dx * sin + dy * cos) / scale + GLYPH_H / 2.0 - 0.5;
            let ink = glyph_at(label, u, v) * intensity;
            let value = ink + noise * rng.normal();
            out[y * CANVAS + x] = value.clamp(0.0, 1.0);
        }
    }
}

/// Rendered 28x28 digit corpus: pixel-font glyphs with per-example scale,
/// rotation, offset, intensity, and pixel noise. A stand-in for handwritten
/// digits with the same shape, value range, and class structure.
pub fn digits_dataset(seed: u64, n: usize, split: Split) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Argument("digit corpus needs n >= 1".into()));
    }
    let mut data = vec![0.0f32; n * CANVAS * CANVAS];
    let mut labels = Vec::with_capacity(n);
    for (i, img) in data.chunks_mut(CANVAS * CANVAS).enumerate() {
        let mut rng = stream(seed, StreamKind::Digits, example_index(split, i));
        let label = rng.below(10) as usize;
        labels.push(label);
        render_digit(label, &mut rng, img);
    }
    let images = Tensor::new(vec![n, 1, CANVAS, CANVAS], data)?;
    Dataset::new(images, labels, 10, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_dataset() {
        let a = synthetic_dataset(9, 50, 3, 8, 3.0, Split::Train).unwrap();
        let b = synthetic_dataset(9, 50, 3, 8, 3.0, Split::Train).unwrap();
        assert_eq!(a.images.data(), b.images.data());
        assert_eq!(a.labels, b.labels);
        let c = digits_dataset(9, 20, Split::Train).unwrap();
        let d = digits_dataset(9, 20, Split::Train).unwrap();
        assert_eq!(c.images.data(), d.images.data());
    }

    #[test]
    fn prefix_stability_under_subsetting() {
        let big = digits_dataset(4, 30, Split::Train).unwrap();
        let small = digits_dataset(4, 10, Split::Train).unwrap();
        assert_eq!(
            &big.images.data()[..small.images.len()],
            small.images.data()
        );
        assert_eq!(&big.labels[..10], &small.labels[..]);
    }

    #[test]
    fn splits_differ() {
        let train = digits_dataset(4, 10, Split::Train).unwrap();
        let test = digits_dataset(4, 10, Split::Test).unwrap();
        assert_ne!(train.images.data(), test.images.data());
    }

    #[test]
    fn values_stay_in_unit_range() {
        let ds = digits_dataset(1, 64, Split::Train).unwrap();
        assert!(ds.images.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let sy = synthetic_dataset(1, 64, 4, 6, 3.0, Split::Test).unwrap();
        assert!(sy.images.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn singleton_dataset_is_fine() {
        let ds = synthetic_dataset(5, 1, 2, 4, 3.0, Split::Test).unwrap();
        assert_eq!(ds.len(), 1);
    }

    #[test]
    fn digit_images_have_ink() {
        let ds = digits_dataset(2, 16, Split::Train).unwrap();
        for img in ds.images.data().chunks(28 * 28) {
            let ink: f32 = img.iter().sum();
            assert!(ink > 10.0, "blank canvas rendered: total ink {ink}");
        }
    }
}
