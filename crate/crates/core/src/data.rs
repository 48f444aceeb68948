//! Seeded synthetic datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(y) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::InvalidArgument(format!(
                "label {y} outside {classes} classes"
            )));
        }
        if let Some(first) = features.first() {
            if features.iter().any(|f| f.len() != first.len()) {
                return Err(Error::InvalidArgument(
                    "feature rows differ in length".into(),
                ));
            }
        }
        Ok(Self {
            features,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_len(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    /// Seeded shuffle, then the first `val_fraction` of rows become the
    /// validation set.
    pub fn split(&self, val_fraction: f64, seed: u64) -> (Self, Self) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = (0..self.len()).collect();
        for i in (1..idx.len()).rev() {
            idx.swap(i, rng.random_range(0..=i));
        }
        let n_val = ((self.len() as f64) * val_fraction.clamp(0.0, 1.0)).round() as usize;
        let (val, train) = idx.split_at(n_val);
        (self.subset(train), self.subset(val))
    }
}

/// Which generator to draw from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// Two linearly separable Gaussian blobs.
    Separable,
    /// Two interleaved Gaussian mixtures in the plane, padded with noise
    /// features.
    Mixture,
    /// 8x8 glyph images of two shapes.
    Digits,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub kind: DatasetKind,
    pub samples: usize,
    /// Extra pure-noise features appended to the planar datasets.
    #[serde(default)]
    pub noise_features: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl DataConfig {
    pub fn generate(&self) -> Dataset {
        match self.kind {
            DatasetKind::Separable => separable(self.samples, self.noise_features, self.seed),
            DatasetKind::Mixture => gaussian_mixture(self.samples, self.noise_features, self.seed),
            DatasetKind::Digits => digits(self.samples, self.seed),
        }
    }

    pub fn feature_len(&self) -> usize {
        match self.kind {
            DatasetKind::Separable | DatasetKind::Mixture => 2 + self.noise_features,
            DatasetKind::Digits => 64,
        }
    }
}

fn planar(n: usize, noise: usize, seed: u64, centers: &[&[(f64, f64)]; 2], std: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = Normal::new(0.0, std).expect("positive std");
    let junk = Normal::new(0.0, 1.0).expect("unit std");
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % 2;
        let (cx, cy) = centers[y][rng.random_range(0..centers[y].len())];
        let mut f = vec![cx + spread.sample(&mut rng), cy + spread.sample(&mut rng)];
        f.extend((0..noise).map(|_| junk.sample(&mut rng)));
        features.push(f);
        labels.push(y);
    }
    Dataset {
        features,
        labels,
        classes: 2,
    }
}

pub fn separable(n: usize, noise: usize, seed: u64) -> Dataset {
    planar(n, noise, seed, &[&[(-1.5, -1.0)], &[(1.5, 1.0)]], 0.4)
}

/// XOR-style layout: each class is a mixture of two diagonal blobs.
pub fn gaussian_mixture(n: usize, noise: usize, seed: u64) -> Dataset {
    planar(
        n,
        noise,
        seed,
        &[&[(-1.0, -1.0), (1.0, 1.0)], &[(-1.0, 1.0), (1.0, -1.0)]],
        0.35,
    )
}

const GLYPHS: [[&str; 5]; 2] = [
    ["###", "#.#", "#.#", "#.#", "###"],
    [".#.", "##.", ".#.", ".#.", "###"],
];

/// 8x8 images of a ring ("0") or a bar ("1"), 3x5 glyphs scaled to 4x5 and
/// jittered in position, with pixel noise. Values are in `[0, 1]`.
pub fn digits(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.15).expect("positive std");
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % 2;
        let mut img = vec![0.0f64; 64];
        let (oy, ox) = (rng.random_range(1..=2), rng.random_range(1..=3));
        for (gy, row) in GLYPHS[y].iter().enumerate() {
            for (gx, ch) in row.chars().enumerate() {
                if ch == '#' {
                    // widen the middle column so glyphs are 4 pixels across
                    let cols: &[usize] = match gx {
                        0 => &[0],
                        1 => &[1, 2],
                        _ => &[3],
                    };
                    for &cx in cols {
                        img[(oy + gy) * 8 + ox + cx] = 1.0;
                    }
                }
            }
        }
        for p in &mut img {
            *p = (*p + noise.sample(&mut rng)).clamp(0.0, 1.0);
        }
        features.push(img);
        labels.push(y);
    }
    Dataset {
        features,
        labels,
        classes: 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_disjoint_and_seeded() {
        let d = gaussian_mixture(50, 1, 4);
        let (a, b) = d.split(0.2, 9);
        assert_eq!((a.len(), b.len()), (40, 10));
        let (a2, b2) = d.split(0.2, 9);
        assert_eq!((a, b.clone()), (a2, b2));
        for f in &b.features {
            assert_eq!(d.features.iter().filter(|g| *g == f).count(), 1);
        }
    }

    #[test]
    fn labels_are_checked() {
        assert!(Dataset::new(vec![vec![0.0]], vec![2], 2).is_err());
        assert!(Dataset::new(vec![vec![0.0]], vec![], 2).is_err());
    }

    #[test]
    fn digits_stay_in_unit_range() {
        let d = digits(20, 1);
        assert!(d.features.iter().flatten().all(|p| (0.0..=1.0).contains(p)));
        assert_eq!(d.feature_len(), 64);
    }
}
