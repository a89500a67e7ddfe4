//! Bit strings, their run-length view, and partial sums over gap sequences.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A finite binary string. The text form is ASCII `'0'`/`'1'`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, index: usize) -> Option<bool> {
        self.bits.get(index).copied()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn reverse(&self) -> BitString {
        BitString {
            bits: self.bits.iter().rev().copied().collect(),
        }
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }
}

impl From<Vec<bool>> for BitString {
    fn from(bits: Vec<bool>) -> Self {
        Self { bits }
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .enumerate()
            .map(|(position, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                found => Err(Error::InvalidBit { position, found }),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitString::new)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

/// Reverses a bit string.
pub fn reverse(b: &BitString) -> BitString {
    b.reverse()
}

/// Run-length view of a binary string: `a_0` zeros, a one, `a_1` zeros, a
/// one, ..., a one, `a_t` zeros.
///
/// `gaps` always has `t + 1` entries. The separation metadata is the
/// guaranteed minimum interior gap; `None` stands for "unbounded", which is
/// what a string with at most one 1 carries since it has no interior gaps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparatedString {
    gaps: Vec<u64>,
    separation: Option<u64>,
}

impl SeparatedString {
    /// Builds a string from its gaps and checks that every interior gap is at
    /// least `l`.
    pub fn new(gaps: Vec<u64>, l: u64) -> Result<Self> {
        if gaps.is_empty() {
            return Err(Error::InvalidParameter(
                "gap sequence must have t + 1 >= 1 entries".into(),
            ));
        }
        if let Some((index, &gap)) = interior(&gaps).find(|(_, &g)| g < l) {
            return Err(Error::NotSeparated {
                index,
                gap: gap as usize,
                l: l as usize,
            });
        }
        let separation = if gaps.len() <= 2 { None } else { Some(l) };
        Ok(Self { gaps, separation })
    }

    /// Builds a string from its gaps, recording the smallest interior gap as
    /// the separation.
    pub fn from_gaps(gaps: Vec<u64>) -> Result<Self> {
        if gaps.is_empty() {
            return Err(Error::InvalidParameter(
                "gap sequence must have t + 1 >= 1 entries".into(),
            ));
        }
        let separation = interior(&gaps).map(|(_, &g)| g).min();
        Ok(Self { gaps, separation })
    }

    pub fn gaps(&self) -> &[u64] {
        &self.gaps
    }

    /// Number of ones.
    pub fn t(&self) -> usize {
        self.gaps.len() - 1
    }

    /// Minimum interior gap guaranteed by construction, `None` when unbounded.
    pub fn separation(&self) -> Option<u64> {
        self.separation
    }

    /// Total length `sum(a_i) + t`.
    pub fn len(&self) -> usize {
        self.gaps.iter().sum::<u64>() as usize + self.t()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_separated(&self, l: u64) -> bool {
        interior(&self.gaps).all(|(_, &g)| g >= l)
    }

    /// The same string with `pad` extra zeros on both ends. Padding never
    /// breaks separation because interior gaps are untouched.
    pub fn padded(&self, pad: u64) -> SeparatedString {
        let mut gaps = self.gaps.clone();
        gaps[0] += pad;
        *gaps.last_mut().expect("non-empty") += pad;
        SeparatedString {
            gaps,
            separation: self.separation,
        }
    }

    pub fn reversed(&self) -> SeparatedString {
        SeparatedString {
            gaps: self.gaps.iter().rev().copied().collect(),
            separation: self.separation,
        }
    }

    /// 0-based positions of the ones in the bit string.
    pub fn one_positions(&self) -> Vec<usize> {
        let mut pos = 0usize;
        self.gaps[..self.t()]
            .iter()
            .map(|&g| {
                pos += g as usize;
                let p = pos;
                pos += 1;
                p
            })
            .collect()
    }

    pub fn to_bits(&self) -> BitString {
        let mut bits = Vec::with_capacity(self.len());
        for (i, &g) in self.gaps.iter().enumerate() {
            if i > 0 {
                bits.push(true);
            }
            bits.extend(std::iter::repeat_n(false, g as usize));
        }
        BitString::new(bits)
    }

    pub fn from_bits(bits: &BitString) -> SeparatedString {
        let mut gaps = vec![0u64];
        for &b in bits.bits() {
            if b {
                gaps.push(0);
            } else {
                *gaps.last_mut().expect("non-empty") += 1;
            }
        }
        Self::from_gaps(gaps).expect("at least one gap")
    }
}

impl fmt::Display for SeparatedString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_bits().fmt(f)
    }
}

fn interior(gaps: &[u64]) -> impl Iterator<Item = (usize, &u64)> {
    let t = gaps.len().saturating_sub(1);
    gaps.iter().enumerate().skip(1).take(t.saturating_sub(1))
}

pub fn from_bits(bits: &BitString) -> SeparatedString {
    SeparatedString::from_bits(bits)
}

pub fn to_bits(s: &SeparatedString) -> BitString {
    s.to_bits()
}

/// Prefix-sum table answering half-open range sums `a_{j:j'}` in O(1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixSums {
    prefix: Vec<u64>,
}

impl PrefixSums {
    pub fn new(seq: &[u64]) -> Self {
        let mut prefix = Vec::with_capacity(seq.len() + 1);
        prefix.push(0);
        let mut acc = 0u64;
        for &v in seq {
            acc += v;
            prefix.push(acc);
        }
        Self { prefix }
    }

    /// Length of the underlying sequence.
    pub fn len(&self) -> usize {
        self.prefix.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `seq[start] + ... + seq[end - 1]`.
    pub fn sum(&self, start: usize, end: usize) -> Result<u64> {
        if start > end || end > self.len() {
            return Err(Error::IndexOutOfRange {
                start,
                end,
                len: self.len(),
            });
        }
        Ok(self.prefix[end] - self.prefix[start])
    }
}

/// Half-open partial sum `seq[start..end].sum()`. Build a [`PrefixSums`] for
/// repeated queries.
pub fn gap_sum(seq: &[u64], start: usize, end: usize) -> Result<u64> {
    if start > end || end > seq.len() {
        return Err(Error::IndexOutOfRange {
            start,
            end,
            len: seq.len(),
        });
    }
    Ok(seq[start..end].iter().sum())
}

/// Draws an `l`-separated string of length exactly `n` with `t` ones.
///
/// Every interior gap receives its `l` mandatory zeros; the remaining zeros
/// are split over the `t + 1` runs uniformly over all compositions.
pub fn random_separated<R: Rng + ?Sized>(n: usize, l: usize, t: usize, rng: &mut R) -> Result<SeparatedString> {
    if t.checked_mul(l + 1).is_none_or(|need| need > n) {
        return Err(Error::Infeasible { n, l, t });
    }
    let mandatory = t.saturating_sub(1) * l;
    let free = n - t - mandatory;
    // Stars and bars: t bars among free + t slots.
    let mut bars = rand::seq::index::sample(rng, free + t, t).into_vec();
    bars.sort_unstable();
    let mut gaps = Vec::with_capacity(t + 1);
    let mut prev = 0usize;
    for (k, &bar) in bars.iter().enumerate() {
        // Slots before this bar that are stars, minus those already assigned.
        let stars = bar - k;
        gaps.push((stars - prev) as u64);
        prev = stars;
    }
    gaps.push((free - prev) as u64);
    for g in gaps.iter_mut().skip(1).take(t.saturating_sub(1)) {
        *g += l as u64;
    }
    SeparatedString::new(gaps, l as u64)
}
