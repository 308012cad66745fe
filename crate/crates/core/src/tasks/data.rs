//! Datasets, train/valid/test bundles and the synthetic benchmark.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.len() != self.labels.len() {
            return Err(Error::Validation("feature/label count mismatch".into()));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.n_classes) {
            return Err(Error::Validation(format!(
                "label {bad} outside {} classes",
                self.n_classes
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataBundle {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
}

impl DataBundle {
    pub fn split(&self, which: Split) -> &Dataset {
        match which {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Gaussian class blobs with angularly separated centers and clamped noise,
/// split 60/20/20. For two classes the centers are antipodal, which makes the
/// data linearly separable with margin ≥ 0.5 by construction
/// (center distance 2.4, per-component noise clamped to ±0.75).
pub fn synthetic_dataset(n: usize, n_classes: usize, dim: usize, seed: u64) -> Result<DataBundle> {
    if n_classes < 2 || dim < 2 || n < n_classes {
        return Err(Error::Validation("synthetic dataset needs ≥2 classes, dim ≥2, n ≥ classes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // orthonormal pair spanning the center circle
    let mut e1: Vec<f64> = (0..dim).map(|_| gaussian(&mut rng)).collect();
    let norm1 = e1.iter().map(|v| v * v).sum::<f64>().sqrt();
    e1.iter_mut().for_each(|v| *v /= norm1);
    let mut e2: Vec<f64> = (0..dim).map(|_| gaussian(&mut rng)).collect();
    let dot: f64 = e1.iter().zip(&e2).map(|(a, b)| a * b).sum();
    e2.iter_mut().zip(&e1).for_each(|(v, u)| *v -= dot * u);
    let norm2 = e2.iter().map(|v| v * v).sum::<f64>().sqrt();
    e2.iter_mut().for_each(|v| *v /= norm2);

    let radius = 1.2;
    let centers: Vec<Vec<f64>> = (0..n_classes)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / n_classes as f64;
            e1.iter()
                .zip(&e2)
                .map(|(a, b)| radius * (angle.cos() * a + angle.sin() * b))
                .collect()
        })
        .collect();

    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % n_classes;
        let f: Vec<f64> = centers[label]
            .iter()
            .map(|&c| c + (0.25 * gaussian(&mut rng)).clamp(-0.75, 0.75))
            .collect();
        features.push(f);
        labels.push(label);
    }

    let n_train = (n * 6) / 10;
    let n_valid = (n * 2) / 10;
    let make = |lo: usize, hi: usize, split: Split| Dataset {
        features: features[lo..hi].to_vec(),
        labels: labels[lo..hi].to_vec(),
        n_classes,
        split,
    };
    let bundle = DataBundle {
        train: make(0, n_train, Split::Train),
        valid: make(n_train, n_train + n_valid, Split::Valid),
        test: make(n_train + n_valid, n, Split::Test),
    };
    bundle.train.validate()?;
    bundle.valid.validate()?;
    bundle.test.validate()?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_class_margin_at_least_half() {
        let b = synthetic_dataset(300, 2, 16, 7).unwrap();
        // project every sample onto the center axis and check separation
        let all: Vec<(&Vec<f64>, usize)> = b
            .train
            .features
            .iter()
            .zip(b.train.labels.iter().copied())
            .chain(b.valid.features.iter().zip(b.valid.labels.iter().copied()))
            .chain(b.test.features.iter().zip(b.test.labels.iter().copied()))
            .collect();
        // center direction: difference of class means
        let dim = all[0].0.len();
        let mut mean0 = vec![0.0; dim];
        let mut mean1 = vec![0.0; dim];
        let (mut c0, mut c1) = (0.0, 0.0);
        for (f, l) in &all {
            let (m, c) = if *l == 0 { (&mut mean0, &mut c0) } else { (&mut mean1, &mut c1) };
            for (a, b) in m.iter_mut().zip(*f) {
                *a += b;
            }
            *c += 1.0;
        }
        mean0.iter_mut().for_each(|v| *v /= c0);
        mean1.iter_mut().for_each(|v| *v /= c1);
        let axis: Vec<f64> = mean1.iter().zip(&mean0).map(|(a, b)| a - b).collect();
        let norm = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
        let proj = |f: &Vec<f64>| f.iter().zip(&axis).map(|(a, b)| a * b).sum::<f64>() / norm;
        let max0 = all.iter().filter(|(_, l)| *l == 0).map(|(f, _)| proj(f)).fold(f64::MIN, f64::max);
        let min1 = all.iter().filter(|(_, l)| *l == 1).map(|(f, _)| proj(f)).fold(f64::MAX, f64::min);
        assert!(min1 - max0 >= 0.5, "margin {}", min1 - max0);
    }

    #[test]
    fn deterministic_and_balanced() {
        let a = synthetic_dataset(100, 2, 8, 3).unwrap();
        let b = synthetic_dataset(100, 2, 8, 3).unwrap();
        assert_eq!(a, b);
        let ones = a.train.labels.iter().filter(|&&l| l == 1).count();
        let zeros = a.train.labels.len() - ones;
        assert!(ones.abs_diff(zeros) <= 1);
        assert_eq!(a.train.len() + a.valid.len() + a.test.len(), 100);
    }

    #[test]
    fn four_class_shapes() {
        let b = synthetic_dataset(200, 4, 16, 11).unwrap();
        assert_eq!(b.train.n_classes, 4);
        assert!(b.train.labels.iter().all(|&l| l < 4));
    }
}
