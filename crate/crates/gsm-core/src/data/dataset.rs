//! In-memory labeled image sets.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// A labeled dataset: images `[n, c, h, w]` with values in `[0, 1]` and one
/// class index per image.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub split: Split,
}

impl Dataset {
    pub fn new(images: Tensor, labels: Vec<usize>, classes: usize, split: Split) -> Result<Self> {
        let n = match images.shape() {
            &[n, _, _, _] => n,
            other => {
                return Err(Error::Dimension(format!(
                    "dataset images must be [n,c,h,w], got {other:?}"
                )))
            }
        };
        if n == 0 {
            return Err(Error::Argument("dataset must not be empty".into()));
        }
        if labels.len() != n {
            return Err(Error::Consistency(format!(
                "{n} images but {} labels",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::Consistency(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        Ok(Dataset { images, labels, classes, split })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `[c, h, w]` of one example.
    pub fn example_shape(&self) -> [usize; 3] {
        match self.images.shape() {
            &[_, c, h, w] => [c, h, w],
            _ => unreachable!("validated at construction"),
        }
    }

    /// Gather the examples at `indices` into a contiguous batch.
    pub fn gather(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let [c, h, w] = self.example_shape();
        let stride = c * h * w;
        let src = self.images.data();
        let mut data = Vec::with_capacity(indices.len() * stride);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(&src[i * stride..(i + 1) * stride]);
            labels.push(self.labels[i]);
        }
        let images = Tensor::new(vec![indices.len(), c, h, w], data)
            .expect("gather preserves element counts");
        (images, labels)
    }

    /// First `n` examples as a new dataset (for reduced-budget runs).
    pub fn take(&self, n: usize) -> Result<Dataset> {
        if n == 0 || n > self.len() {
            return Err(Error::Argument(format!(
                "cannot take {n} of {} examples",
                self.len()
            )));
        }
        let indices: Vec<usize> = (0..n).collect();
        let (images, labels) = self.gather(&indices);
        Dataset::new(images, labels, self.classes, self.split)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_count_mismatch_and_bad_labels() {
        let imgs = Tensor::zeros(vec![2, 1, 2, 2]);
        assert!(Dataset::new(imgs.clone(), vec![0], 2, Split::Train).is_err());
        assert!(Dataset::new(imgs.clone(), vec![0, 5], 2, Split::Train).is_err());
        assert!(Dataset::new(imgs, vec![0, 1], 2, Split::Train).is_ok());
    }

    #[test]
    fn gather_picks_rows() {
        let imgs = Tensor::new(vec![3, 1, 1, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let ds = Dataset::new(imgs, vec![0, 1, 2], 3, Split::Test).unwrap();
        let (b, y) = ds.gather(&[2, 0]);
        assert_eq!(b.data(), &[5.0, 6.0, 1.0, 2.0]);
        assert_eq!(y, vec![2, 0]);
    }
}
