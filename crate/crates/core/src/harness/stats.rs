//! Descriptive statistics, Pearson correlation and percentile bootstrap intervals.

use crate::error::{Error, Result};
use crate::rng::{Entropy, SimRng};

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Sample standard deviation (n - 1 denominator); `None` below two values.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

/// Population standard deviation (n denominator); 0 for empty input.
pub fn population_std(values: &[f64]) -> f64 {
    let Some(m) = mean(values) else {
        return 0.0;
    };
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    (ss / values.len() as f64).sqrt()
}

pub fn min_max(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    values
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

/// Linear-interpolation percentile of already sorted data, `q` in `[0, 100]`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

/// Pearson product-moment correlation.
///
/// Errors on unequal lengths or fewer than three points; returns `Ok(None)` when
/// either series is constant (the coefficient is undefined there, not zero).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "pearson: series lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::invalid("pearson: need at least 3 points"));
    }
    Ok(pearson_unchecked(x, y))
}

fn pearson_unchecked(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// A two-sided percentile interval.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn excludes_zero(&self) -> bool {
        !self.contains(0.0)
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

pub const DEFAULT_RESAMPLES: usize = 10_000;

/// Percentile bootstrap with a seeded resampler.
#[derive(Debug, Clone)]
pub struct Bootstrap {
    pub resamples: usize,
    pub level: f64,
    rng: SimRng,
}

impl Bootstrap {
    pub fn new(seed: u64, resamples: usize) -> Self {
        Self {
            resamples,
            level: 0.95,
            rng: SimRng::new(seed),
        }
    }

    fn interval(&self, mut stats: Vec<f64>) -> Option<Interval> {
        if stats.is_empty() {
            return None;
        }
        stats.sort_by(f64::total_cmp);
        let tail = (1.0 - self.level) / 2.0 * 100.0;
        Some(Interval {
            lo: percentile_sorted(&stats, tail),
            hi: percentile_sorted(&stats, 100.0 - tail),
        })
    }

    fn resample_mean(&mut self, values: &[f64]) -> f64 {
        let n = values.len();
        (0..n).map(|_| values[self.rng.below(n)]).sum::<f64>() / n as f64
    }

    /// Interval for the mean; degenerate for a single value.
    pub fn mean_ci(&mut self, values: &[f64]) -> Option<Interval> {
        match values.len() {
            0 => None,
            1 => Some(Interval {
                lo: values[0],
                hi: values[0],
            }),
            _ => {
                let stats = (0..self.resamples)
                    .map(|_| self.resample_mean(values))
                    .collect();
                self.interval(stats)
            }
        }
    }

    /// Interval for `mean(a) - mean(b)` with `a` and `b` resampled independently.
    pub fn mean_diff_ci(&mut self, a: &[f64], b: &[f64]) -> Option<Interval> {
        if a.is_empty() || b.is_empty() {
            return None;
        }
        let stats = (0..self.resamples)
            .map(|_| self.resample_mean(a) - self.resample_mean(b))
            .collect();
        self.interval(stats)
    }

    /// Interval for Pearson's r, resampling pairs. Resamples where r is undefined
    /// are skipped; `None` if fewer than half of them are usable.
    pub fn pearson_ci(&mut self, x: &[f64], y: &[f64]) -> Option<Interval> {
        let n = x.len();
        if n < 3 || n != y.len() {
            return None;
        }
        let mut rx = vec![0.0; n];
        let mut ry = vec![0.0; n];
        let mut stats = Vec::with_capacity(self.resamples);
        for _ in 0..self.resamples {
            for i in 0..n {
                let s = self.rng.below(n);
                rx[i] = x[s];
                ry[i] = y[s];
            }
            if let Some(r) = pearson_unchecked(&rx, &ry) {
                stats.push(r);
            }
        }
        if stats.len() * 2 < self.resamples {
            return None;
        }
        self.interval(stats)
    }
}
