//! Fixed-length bit strings and the matching arithmetic shared by both models.
//!
//! Position 0 is the most significant position and is printed first.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::Entropy;

pub const MAX_BITS: usize = 64;

/// An immutable string of `len` bits, packed into a `u64`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitString {
    word: u64,
    len: u8,
}

fn check_len(k: usize) -> Result<()> {
    if k == 0 || k > MAX_BITS {
        return Err(Error::invalid(format!(
            "bit string length must be in 1..={MAX_BITS}, got {k}"
        )));
    }
    Ok(())
}

fn check_same_len(a: &BitString, b: &BitString) -> Result<()> {
    if a.len != b.len {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            a.len, b.len
        )));
    }
    Ok(())
}

impl BitString {
    pub fn zeros(k: usize) -> Result<Self> {
        check_len(k)?;
        Ok(Self {
            word: 0,
            len: k as u8,
        })
    }

    pub fn ones(k: usize) -> Result<Self> {
        check_len(k)?;
        Ok(Self {
            word: mask(k),
            len: k as u8,
        })
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        check_len(bits.len())?;
        let word = bits.iter().fold(0u64, |w, &b| (w << 1) | b as u64);
        Ok(Self {
            word,
            len: bits.len() as u8,
        })
    }

    /// Builds a string from the low `k` bits of `word`, position 0 being bit `k - 1`.
    pub fn from_word(word: u64, k: usize) -> Result<Self> {
        check_len(k)?;
        Ok(Self {
            word: word & mask(k),
            len: k as u8,
        })
    }

    /// Draws `k` independent fair bits, consuming exactly `k` coins.
    pub fn random<E: Entropy>(k: usize, rng: &mut E) -> Result<Self> {
        check_len(k)?;
        let mut word = 0u64;
        for _ in 0..k {
            word = (word << 1) | rng.coin() as u64;
        }
        Ok(Self { word, len: k as u8 })
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn word(&self) -> u64 {
        self.word
    }

    fn shift(&self, pos: usize) -> usize {
        self.len() - 1 - pos
    }

    pub fn get(&self, pos: usize) -> Result<bool> {
        if pos >= self.len() {
            return Err(Error::invalid(format!(
                "position {pos} out of range for length {}",
                self.len
            )));
        }
        Ok(self.bit(pos))
    }

    #[inline]
    pub(crate) fn bit(&self, pos: usize) -> bool {
        (self.word >> self.shift(pos)) & 1 == 1
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(move |p| self.bit(p))
    }

    pub fn count_ones(&self) -> usize {
        self.word.count_ones() as usize
    }

    /// Number of positions at which `self` and `other` hold equal bits.
    pub fn match_count(&self, other: &BitString) -> Result<usize> {
        check_same_len(self, other)?;
        Ok(self.matches(other))
    }

    pub fn hamming(&self, other: &BitString) -> Result<usize> {
        check_same_len(self, other)?;
        Ok(self.distance(other))
    }

    /// Unchecked `match_count` for strings known to share a length.
    #[inline]
    pub(crate) fn matches(&self, other: &BitString) -> usize {
        debug_assert_eq!(self.len, other.len);
        self.len() - self.distance(other)
    }

    #[inline]
    pub(crate) fn distance(&self, other: &BitString) -> usize {
        debug_assert_eq!(self.len, other.len);
        (self.word ^ other.word).count_ones() as usize
    }

    pub fn flip(&self, pos: usize) -> Result<BitString> {
        if pos >= self.len() {
            return Err(Error::invalid(format!(
                "flip position {pos} out of range for length {}",
                self.len
            )));
        }
        Ok(self.flipped(pos))
    }

    #[inline]
    pub(crate) fn flipped(&self, pos: usize) -> BitString {
        Self {
            word: self.word ^ (1u64 << self.shift(pos)),
            len: self.len,
        }
    }

    pub fn complement(&self) -> BitString {
        Self {
            word: !self.word & mask(self.len()),
            len: self.len,
        }
    }
}

#[inline]
fn mask(k: usize) -> u64 {
    if k == 64 {
        u64::MAX
    } else {
        (1u64 << k) - 1
    }
}

fn check_refs(target: &BitString, refs: &[BitString]) -> Result<()> {
    if refs.is_empty() {
        return Err(Error::invalid("reference set is empty"));
    }
    refs.iter().try_for_each(|r| check_same_len(target, r))
}

/// For each position, how many of `refs` hold the same bit as `target`.
pub fn agreement_counts(target: &BitString, refs: &[BitString]) -> Result<Vec<usize>> {
    refs.iter().try_for_each(|r| check_same_len(target, r))?;
    let mut counts = vec![0usize; target.len()];
    for r in refs {
        let agree = !(target.word ^ r.word);
        for (pos, c) in counts.iter_mut().enumerate() {
            *c += ((agree >> target.shift(pos)) & 1) as usize;
        }
    }
    Ok(counts)
}

fn pick_extreme<E: Entropy>(counts: &[usize], best: usize, rng: &mut E) -> usize {
    let tied: Vec<usize> = (0..counts.len()).filter(|&p| counts[p] == best).collect();
    rng.pick(&tied)
}

/// Position where `target` agrees with the fewest references. Ties are broken
/// uniformly at random (one draw, only when more than one position ties).
pub fn worst_bit<E: Entropy>(target: &BitString, refs: &[BitString], rng: &mut E) -> Result<usize> {
    check_refs(target, refs)?;
    let counts = agreement_counts(target, refs)?;
    let min = *counts.iter().min().expect("k >= 1");
    Ok(pick_extreme(&counts, min, rng))
}

/// Position where `target` agrees with the most references; ties as in [`worst_bit`].
pub fn best_bit<E: Entropy>(target: &BitString, refs: &[BitString], rng: &mut E) -> Result<usize> {
    check_refs(target, refs)?;
    let counts = agreement_counts(target, refs)?;
    let max = *counts.iter().max().expect("k >= 1");
    Ok(pick_extreme(&counts, max, rng))
}

/// Per-position majority. Exact ties draw one coin per tied position, in position order.
pub fn majority_string<E: Entropy>(strings: &[BitString], rng: &mut E) -> Result<BitString> {
    let first = strings
        .first()
        .ok_or_else(|| Error::invalid("majority of an empty list"))?;
    strings.iter().try_for_each(|s| check_same_len(first, s))?;
    let m = strings.len();
    let mut bits = Vec::with_capacity(first.len());
    for pos in 0..first.len() {
        let ones = strings.iter().filter(|s| s.bit(pos)).count();
        let bit = match (2 * ones).cmp(&m) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => rng.coin(),
        };
        bits.push(bit);
    }
    BitString::from_bits(&bits)
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::invalid(format!("bad bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(&bits)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
