use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a "matching above a certain threshold" bar is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdKind {
    /// The bar is the value itself, in match-count units.
    AbsoluteCount,
    /// The bar is `ceil(value * k)`.
    FractionOfK,
    /// The bar is `ceil(k / 2 + value)`: `value` positions above a chance match.
    AboveChance,
}

impl ThresholdKind {
    pub const ALL: [ThresholdKind; 3] = [
        ThresholdKind::AbsoluteCount,
        ThresholdKind::FractionOfK,
        ThresholdKind::AboveChance,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ThresholdKind::AbsoluteCount => "absolute-count",
            ThresholdKind::FractionOfK => "fraction-of-k",
            ThresholdKind::AboveChance => "above-chance",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// A match-count bar, resolved against the string length at use time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchThreshold {
    pub kind: ThresholdKind,
    pub value: f64,
}

impl Default for MatchThreshold {
    fn default() -> Self {
        Self::above_chance(1.0)
    }
}

impl MatchThreshold {
    pub fn absolute(value: f64) -> Self {
        Self {
            kind: ThresholdKind::AbsoluteCount,
            value,
        }
    }

    pub fn fraction(value: f64) -> Self {
        Self {
            kind: ThresholdKind::FractionOfK,
            value,
        }
    }

    pub fn above_chance(value: f64) -> Self {
        Self {
            kind: ThresholdKind::AboveChance,
            value,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.value.is_finite() {
            return Err(Error::config("threshold_value", "must be finite"));
        }
        Ok(())
    }

    /// Integer match-count bar in `[0, k]`; a string qualifies when its match is `>=` the bar.
    pub fn resolve(&self, k: usize) -> usize {
        let kf = k as f64;
        let raw = match self.kind {
            ThresholdKind::AbsoluteCount => self.value.ceil(),
            ThresholdKind::FractionOfK => (self.value * kf).ceil(),
            ThresholdKind::AboveChance => (kf / 2.0 + self.value).ceil(),
        };
        raw.clamp(0.0, kf) as usize
    }
}
