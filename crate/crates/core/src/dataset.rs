//! Long-tailed datasets: storage, synthetic generation and class partitions.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Labelled feature matrix with per-class sample counts.
///
/// Features are stored row-major, `len() x dim()`.
#[derive(Debug, Clone, PartialEq)]
pub struct LongTailDataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
    class_counts: Vec<usize>,
    split: Split,
}

impl LongTailDataset {
    pub fn new(
        dim: usize,
        num_classes: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
        split: Split,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("feature dimension must be positive"));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::Dimension {
                what: "feature matrix",
                expected: labels.len() * dim,
                got: features.len(),
            });
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "feature {} of sample {} is not finite",
                i % dim,
                i / dim
            )));
        }
        let mut class_counts = vec![0; num_classes];
        for (i, &y) in labels.iter().enumerate() {
            if y >= num_classes {
                return Err(Error::input(format!(
                    "sample {i} has label {y}, outside [0, {num_classes})"
                )));
            }
            class_counts[y] += 1;
        }
        Ok(Self {
            dim,
            features,
            labels,
            class_counts,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.class_counts.len()
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_matrix(&self) -> &[f64] {
        &self.features
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], usize)> + '_ {
        self.features
            .chunks_exact(self.dim)
            .zip(self.labels.iter().copied())
    }
}

/// Parameters of the synthetic Gaussian long-tailed task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub num_classes: usize,
    /// Training samples in class 0.
    pub n_max: usize,
    /// Ratio between the largest and smallest class.
    pub imbalance_factor: f64,
    pub dim: usize,
    /// Norm of every class mean; noise is unit isotropic Gaussian.
    pub separation: f64,
    pub test_per_class: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_classes: 10,
            n_max: 1000,
            imbalance_factor: 100.0,
            dim: 16,
            separation: 2.0,
            test_per_class: 100,
            seed: 0,
        }
    }
}

/// Exponential long-tail profile `round(n_max * IF^(-k/(K-1)))`.
pub fn profile_counts(
    num_classes: usize,
    n_max: usize,
    imbalance_factor: f64,
) -> Result<Vec<usize>> {
    if num_classes < 2 {
        return Err(Error::input("need at least 2 classes"));
    }
    if n_max < num_classes {
        return Err(Error::input(format!(
            "n_max ({n_max}) must be at least the number of classes ({num_classes})"
        )));
    }
    if !imbalance_factor.is_finite() || imbalance_factor < 1.0 {
        return Err(Error::input(format!(
            "imbalance factor must be a finite value >= 1, got {imbalance_factor}"
        )));
    }
    let last = (num_classes - 1) as f64;
    let counts: Vec<usize> = (0..num_classes)
        .map(|k| {
            let frac = libm::pow(imbalance_factor, -(k as f64) / last);
            libm::round(n_max as f64 * frac) as usize
        })
        .collect();
    if let Some(k) = counts.iter().position(|&n| n == 0) {
        return Err(Error::input(format!(
            "profile leaves class {k} empty; raise n_max or lower the imbalance factor"
        )));
    }
    Ok(counts)
}

/// Class means of norm `separation`: a seeded random rotation of the first
/// `K` basis vectors when `dim >= K`, otherwise independent random directions.
pub fn class_means(config: &SyntheticConfig) -> Vec<Vec<f64>> {
    let mut rng = rng::stream(config.seed, rng::TAG_MEANS, 0);
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(config.num_classes);
    for _ in 0..config.num_classes {
        let mut v: Vec<f64> = (0..config.dim)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        if config.dim >= config.num_classes {
            // Gram-Schmidt against earlier means
            for m in &means {
                let proj: f64 = v.iter().zip(m).map(|(a, b)| a * b).sum();
                for (a, b) in v.iter_mut().zip(m) {
                    *a -= proj * b;
                }
            }
        }
        let norm = libm::sqrt(v.iter().map(|a| a * a).sum::<f64>());
        for a in v.iter_mut() {
            *a /= norm;
        }
        means.push(v);
    }
    for m in means.iter_mut() {
        for a in m.iter_mut() {
            *a *= config.separation;
        }
    }
    means
}

fn sample_gaussian_classes<R: Rng>(
    rng: &mut R,
    means: &[Vec<f64>],
    counts: &[usize],
    dim: usize,
    split: Split,
) -> Result<LongTailDataset> {
    let n: usize = counts.iter().sum();
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (k, (&count, mean)) in counts.iter().zip(means).enumerate() {
        for _ in 0..count {
            for &mu in mean {
                let z: f64 = rng.sample(StandardNormal);
                features.push(mu + z);
            }
            labels.push(k);
        }
    }
    LongTailDataset::new(dim, counts.len(), features, labels, split)
}

/// Generates a long-tailed training set and a balanced test set from the
/// same class-conditional Gaussians. Train and test use independent random
/// streams, so no test sample is a copy of a training sample.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<(LongTailDataset, LongTailDataset)> {
    let counts = profile_counts(config.num_classes, config.n_max, config.imbalance_factor)?;
    if config.dim == 0 {
        return Err(Error::input("feature dimension must be positive"));
    }
    if !config.separation.is_finite() || config.separation < 0.0 {
        return Err(Error::input(
            "class separation must be finite and non-negative",
        ));
    }
    if config.test_per_class == 0 {
        return Err(Error::input("test_per_class must be positive"));
    }
    let means = class_means(config);
    let train = sample_gaussian_classes(
        &mut rng::stream(config.seed, rng::TAG_TRAIN, 0),
        &means,
        &counts,
        config.dim,
        Split::Train,
    )?;
    let test_counts = vec![config.test_per_class; config.num_classes];
    let test = sample_gaussian_classes(
        &mut rng::stream(config.seed, rng::TAG_TEST, 0),
        &means,
        &test_counts,
        config.dim,
        Split::Test,
    )?;
    Ok((train, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Head,
    Med,
    Tail,
}

/// Equal three-way split of class ids into head / med / tail regions.
///
/// Head and med each get `floor(K/3)` classes, tail gets the rest; lower
/// class ids are the more populous ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionPartition {
    num_classes: usize,
    med_start: usize,
    tail_start: usize,
}

impl RegionPartition {
    pub fn new(num_classes: usize) -> Result<Self> {
        if num_classes < 3 {
            return Err(Error::input(format!(
                "region partition needs at least 3 classes, got {num_classes}"
            )));
        }
        let third = num_classes / 3;
        Ok(Self {
            num_classes,
            med_start: third,
            tail_start: 2 * third,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn region_of(&self, class: usize) -> Region {
        if class < self.med_start {
            Region::Head
        } else if class < self.tail_start {
            Region::Med
        } else {
            Region::Tail
        }
    }

    pub fn head(&self) -> core::ops::Range<usize> {
        0..self.med_start
    }

    pub fn med(&self) -> core::ops::Range<usize> {
        self.med_start..self.tail_start
    }

    pub fn tail(&self) -> core::ops::Range<usize> {
        self.tail_start..self.num_classes
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.head().len(), self.med().len(), self.tail().len())
    }
}

/// Binary head/tail split where the tail is the last `ceil(ratio * K)` classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSplit {
    ratio: f64,
    num_classes: usize,
    tail_start: usize,
}

impl TailSplit {
    pub fn new(num_classes: usize, ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::input(format!(
                "tail ratio must lie in (0, 1), got {ratio}"
            )));
        }
        if num_classes < 2 {
            return Err(Error::input("tail split needs at least 2 classes"));
        }
        // the slack keeps e.g. 0.3 * 10 = 3.0000000000000004 from rounding up to 4
        let tail_len = libm::ceil(ratio * num_classes as f64 - 1e-9) as usize;
        let tail_len = tail_len.clamp(1, num_classes);
        Ok(Self {
            ratio,
            num_classes,
            tail_start: num_classes - tail_len,
        })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn is_tail(&self, class: usize) -> bool {
        class >= self.tail_start
    }

    pub fn tail(&self) -> core::ops::Range<usize> {
        self.tail_start..self.num_classes
    }

    pub fn head(&self) -> core::ops::Range<usize> {
        0..self.tail_start
    }
}
