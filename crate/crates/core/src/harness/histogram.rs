use serde::{Deserialize, Serialize};

use crate::bitstring::BitString;
use crate::error::{Error, Result};

/// Counts over contiguous bins `[edge[i], edge[i+1])`; the last bin is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// `bins` equal-width bins over `[lo, hi]`. A degenerate range is widened to
    /// `[lo - 0.5, lo + 0.5]`. Values outside the range are rejected.
    pub fn uniform(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("histogram needs at least one bin"));
        }
        if !(lo.is_finite() && hi.is_finite()) {
            if values.is_empty() {
                return Ok(Self {
                    bin_edges: (0..=bins).map(|i| i as f64).collect(),
                    counts: vec![0; bins],
                });
            }
            return Err(Error::invalid("histogram range must be finite"));
        }
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        };
        let width = (hi - lo) / bins as f64;
        let bin_edges: Vec<f64> = (0..=bins)
            .map(|i| if i == bins { hi } else { lo + width * i as f64 })
            .collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            if !(lo..=hi).contains(&v) {
                return Err(Error::invalid(format!("value {v} outside [{lo}, {hi}]")));
            }
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Ok(Self { bin_edges, counts })
    }

    /// Equal-width bins spanning the data.
    pub fn auto(values: &[f64], bins: usize) -> Result<Self> {
        let (lo, hi) = super::stats::min_max(values.iter().copied());
        Self::uniform(values, bins, lo, hi)
    }

    /// One unit-width bin per integer `0..=max`.
    pub fn integer(values: &[usize], max: usize) -> Result<Self> {
        let mut counts = vec![0u64; max + 1];
        for &v in values {
            if v > max {
                return Err(Error::invalid(format!("value {v} above {max}")));
            }
            counts[v] += 1;
        }
        Ok(Self {
            bin_edges: (0..=max + 1).map(|i| i as f64).collect(),
            counts,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Mean of an integer histogram, reading each bin as its lower edge.
    pub fn integer_mean(&self) -> Option<f64> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        let sum: f64 = self
            .counts
            .iter()
            .zip(&self.bin_edges)
            .map(|(&c, &e)| c as f64 * e)
            .sum();
        Some(sum / total as f64)
    }
}

/// Histogram of all pairwise Hamming distances, bins `0..=k`.
pub fn diversity_histogram(strings: &[BitString]) -> Result<Histogram> {
    if strings.len() < 2 {
        return Err(Error::invalid("diversity needs at least 2 strings"));
    }
    let k = strings[0].len();
    let mut distances = Vec::with_capacity(strings.len() * (strings.len() - 1) / 2);
    for (i, a) in strings.iter().enumerate() {
        for b in &strings[i + 1..] {
            distances.push(a.hamming(b)?);
        }
    }
    Histogram::integer(&distances, k)
}

/// Mean pairwise Hamming distance; `None` below two strings.
pub fn mean_pairwise_distance(strings: &[BitString]) -> Option<f64> {
    diversity_histogram(strings).ok()?.integer_mean()
}
