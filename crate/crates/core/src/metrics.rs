//! Evaluation metrics: region accuracies, false head rate, predictive
//! entropy, misclassification AUC and expected calibration error.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{Region, RegionPartition, TailSplit};
use crate::error::{check_dim, Error, Result};

/// Default number of equal-width confidence bins for ECE.
pub const DEFAULT_ECE_BINS: usize = 15;
/// Tail ratios at which the false head rate is reported.
pub const DEFAULT_TAIL_RATIOS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionAccuracy {
    pub overall: f64,
    pub head: f64,
    pub med: f64,
    pub tail: f64,
    /// Sample counts per region, by label.
    pub n_head: usize,
    pub n_med: usize,
    pub n_tail: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy overall and within each region; a sample belongs to the region
/// of its label. Empty regions report 0.
pub fn region_accuracy(
    decisions: &[usize],
    labels: &[usize],
    partition: &RegionPartition,
) -> Result<RegionAccuracy> {
    check_dim("decisions", labels.len(), decisions.len())?;
    let mut correct = [0usize; 3];
    let mut total = [0usize; 3];
    for (&d, &y) in decisions.iter().zip(labels) {
        if y >= partition.num_classes() {
            return Err(Error::input(format!("label {y} outside the partition")));
        }
        let r = match partition.region_of(y) {
            Region::Head => 0,
            Region::Med => 1,
            Region::Tail => 2,
        };
        total[r] += 1;
        correct[r] += usize::from(d == y);
    }
    Ok(RegionAccuracy {
        overall: ratio(correct.iter().sum(), labels.len()),
        head: ratio(correct[0], total[0]),
        med: ratio(correct[1], total[1]),
        tail: ratio(correct[2], total[2]),
        n_head: total[0],
        n_med: total[1],
        n_tail: total[2],
    })
}

/// `TH / (TT + TH)` over tail-labelled samples: the share predicted as some
/// head class. Returns 0 (with a warning) when no sample has a tail label.
pub fn false_head_rate(decisions: &[usize], labels: &[usize], split: &TailSplit) -> Result<f64> {
    check_dim("decisions", labels.len(), decisions.len())?;
    let (mut th, mut tt) = (0usize, 0usize);
    for (&d, &y) in decisions.iter().zip(labels) {
        if split.is_tail(y) {
            if split.is_tail(d) {
                tt += 1;
            } else {
                th += 1;
            }
        }
    }
    if th + tt == 0 {
        log::warn!(
            "no tail-labelled samples at tail ratio {}; FHR set to 0",
            split.ratio()
        );
        return Ok(0.0);
    }
    Ok(th as f64 / (th + tt) as f64)
}

/// Shannon entropy in nats, with `0 log 0 = 0`.
pub fn predictive_entropy(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * libm::log(p))
        .sum();
    h.max(0.0)
}

/// Area under the ROC curve of `uncertainties` as a detector of incorrect
/// predictions, via the Mann-Whitney rank statistic with mid-ranks for ties.
/// `None` when every prediction is correct or every one is wrong.
pub fn auc_misclassification(uncertainties: &[f64], correct: &[bool]) -> Result<Option<f64>> {
    check_dim("correctness flags", uncertainties.len(), correct.len())?;
    if uncertainties.iter().any(|u| u.is_nan()) {
        return Err(Error::input("uncertainty scores must not be NaN"));
    }
    let n_neg = correct.iter().filter(|&&c| c).count();
    let n_pos = correct.len() - n_neg;
    if n_pos == 0 || n_neg == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..uncertainties.len()).collect();
    order.sort_by(|&a, &b| uncertainties[a].total_cmp(&uncertainties[b]));
    // sum of (1-based) mid-ranks of the positives, doubled to stay integral
    let mut rank_sum2 = 0u64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && uncertainties[order[j]] == uncertainties[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share (i + 1 + j) / 2
        let mid2 = (i + 1 + j) as u64;
        let positives = order[i..j].iter().filter(|&&s| !correct[s]).count() as u64;
        rank_sum2 += mid2 * positives;
        i = j;
    }
    let (p, n) = (n_pos as u64, n_neg as u64);
    // U = R - p(p+1)/2, doubled
    let u2 = rank_sum2 - p * (p + 1);
    Ok(Some(u2 as f64 / (2 * p * n) as f64))
}

/// Bin index on `(0, 1]` with `bins` equal-width bins; bin `b` holds
/// `b/bins < c <= (b+1)/bins`, and a confidence of exactly 0 goes to bin 0.
fn ece_bin(c: f64, bins: usize) -> usize {
    let nb = bins as f64;
    let mut b = (libm::ceil(c * nb) as usize)
        .saturating_sub(1)
        .min(bins - 1);
    while b > 0 && c <= b as f64 / nb {
        b -= 1;
    }
    while b + 1 < bins && c > (b + 1) as f64 / nb {
        b += 1;
    }
    b
}

/// Expected calibration error over equal-width bins.
pub fn expected_calibration_error(
    confidences: &[f64],
    correct: &[bool],
    bins: usize,
) -> Result<f64> {
    check_dim("correctness flags", confidences.len(), correct.len())?;
    if bins == 0 {
        return Err(Error::input("ECE needs at least one bin"));
    }
    if let Some(c) = confidences.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::input(format!("confidence {c} outside [0, 1]")));
    }
    if confidences.is_empty() {
        return Ok(0.0);
    }
    let mut count = vec![0usize; bins];
    let mut hits = vec![0usize; bins];
    let mut conf_sum = vec![0.0; bins];
    for (&c, &ok) in confidences.iter().zip(correct) {
        let b = ece_bin(c, bins);
        count[b] += 1;
        hits[b] += usize::from(ok);
        conf_sum[b] += c;
    }
    let n = confidences.len() as f64;
    let mut ece = 0.0;
    for b in 0..bins {
        if count[b] == 0 {
            continue;
        }
        let nb = count[b] as f64;
        let gap = (hits[b] as f64 / nb - conf_sum[b] / nb).abs();
        ece += nb / n * gap;
    }
    Ok(ece)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FhrEntry {
    pub tail_ratio: f64,
    pub fhr: f64,
}

/// Full evaluation of one ensemble on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_test: usize,
    pub acc_overall: f64,
    pub acc_head: f64,
    pub acc_med: f64,
    pub acc_tail: f64,
    pub fhr: Vec<FhrEntry>,
    pub fhr_avg: f64,
    /// `None` when predictions are all correct or all wrong.
    pub auc: Option<f64>,
    pub ece: f64,
    /// Accuracy of the mixture argmax, reported next to the decision rule.
    pub acc_mixture_argmax: f64,
    pub mean_param_distance: f64,
    pub mean_disagreement: f64,
}

impl MetricsReport {
    pub fn fhr_at(&self, tail_ratio: f64) -> Option<f64> {
        self.fhr
            .iter()
            .find(|e| (e.tail_ratio - tail_ratio).abs() < 1e-12)
            .map(|e| e.fhr)
    }
}
