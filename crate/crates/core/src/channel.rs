//! The deletion channel.
//!
//! Two samplers produce statistically identical traces:
//!
//! - [`sample_trace`] walks the string bit by bit and records which original
//!   positions survived. It is the reference sampler and the one used for
//!   trace files.
//! - [`sample_runs`] draws one binomial per run of zeros and one Bernoulli
//!   per one, producing the run-length view of the trace directly. The
//!   reconstruction pipeline only ever looks at run lengths, so this is what
//!   simulated sources use at scale.

use rand::distr::{Bernoulli, Distribution};
use rand::Rng;
use rand_distr::Binomial;
use serde::{Deserialize, Serialize};

use crate::bits::{BitString, SeparatedString};
use crate::{Error, Result, DELTA_BOUND};

/// Deletion probability and the seed of the experiment that uses it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub delta: f64,
    pub seed: u64,
}

impl ChannelParams {
    pub fn new(delta: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidParameter(format!("delta = {delta} must lie in [0, 1)")));
        }
        if delta > DELTA_BOUND {
            log::warn!("delta = {delta} exceeds the worst-case bound {DELTA_BOUND:.3e}; guarantees are empirical only");
        }
        Ok(Self { delta, seed })
    }

    pub fn retention(&self) -> f64 {
        1.0 - self.delta
    }

    fn keep(&self) -> Bernoulli {
        Bernoulli::new(self.retention()).expect("delta validated")
    }
}

/// A sampled trace, optionally carrying the 0-based indices of the original
/// bits that were retained. Provenance is ground truth for tests and is never
/// read by the reconstruction code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub bits: BitString,
    pub provenance: Option<Vec<usize>>,
}

impl Trace {
    pub fn new(bits: BitString) -> Self {
        Self { bits, provenance: None }
    }

    pub fn profile(&self) -> TraceGapProfile {
        gap_profile(self)
    }

    /// Drops the ground truth.
    pub fn without_provenance(self) -> Self {
        Self::new(self.bits)
    }
}

/// Run lengths of zeros in a trace: `s_0, ..., s_m~` where `m~` is the number
/// of ones in the trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceGapProfile {
    gaps: Vec<u64>,
}

impl TraceGapProfile {
    /// Builds a profile from its runs; there must be at least one.
    pub fn from_gaps(gaps: Vec<u64>) -> Self {
        assert!(!gaps.is_empty(), "a gap profile has m~ + 1 >= 1 runs");
        Self { gaps }
    }

    pub fn gaps(&self) -> &[u64] {
        &self.gaps
    }

    /// Number of ones in the trace.
    pub fn m_tilde(&self) -> usize {
        self.gaps.len() - 1
    }

    /// Length of the trace.
    pub fn len(&self) -> usize {
        self.gaps.iter().sum::<u64>() as usize + self.m_tilde()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// 1-based positions `r_1, ..., r_m~` of the ones, framed by the
    /// sentinels `r_0 = 0` and `r_{m~+1} = len + 1`.
    pub fn positions(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.gaps.len() + 1);
        out.push(0);
        let mut r = 0usize;
        for &g in &self.gaps {
            r += g as usize + 1;
            out.push(r);
        }
        out
    }

    /// Profile of the reversed trace.
    pub fn reversed(&self) -> TraceGapProfile {
        Self {
            gaps: self.gaps.iter().rev().copied().collect(),
        }
    }
}

impl From<&BitString> for TraceGapProfile {
    fn from(bits: &BitString) -> Self {
        Self {
            gaps: SeparatedString::from_bits(bits).gaps().to_vec(),
        }
    }
}

pub fn gap_profile(trace: &Trace) -> TraceGapProfile {
    TraceGapProfile::from(&trace.bits)
}

/// Passes `x` through the deletion channel bit by bit.
pub fn sample_trace<R: Rng + ?Sized>(x: &SeparatedString, params: &ChannelParams, rng: &mut R) -> Trace {
    let keep = params.keep();
    let mut bits = Vec::with_capacity(x.len());
    let mut provenance = Vec::with_capacity(x.len());
    for (i, &b) in x.to_bits().bits().iter().enumerate() {
        if keep.sample(rng) {
            bits.push(b);
            provenance.push(i);
        }
    }
    Trace {
        bits: BitString::new(bits),
        provenance: Some(provenance),
    }
}

/// A trace of `x` padded with `pad` zeros on both sides. Each padding zero
/// survives independently, so the two paddings contribute `Bin(pad, 1 - delta)`
/// zeros each. Provenance indexes the padded string of length `n + 2 pad`.
pub fn sample_padded_trace<R: Rng + ?Sized>(
    x: &SeparatedString,
    pad: usize,
    params: &ChannelParams,
    rng: &mut R,
) -> Trace {
    sample_trace(&x.padded(pad as u64), params, rng)
}

/// Run-level sample of a trace with its ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSample {
    pub profile: TraceGapProfile,
    /// `kept[i]` tells whether the `(i + 1)`-th one of `x` survived.
    pub kept: Vec<bool>,
    /// Surviving zeros of each run of `x`.
    pub zeros: Vec<u64>,
}

impl RunSample {
    /// 1-based indices (in `x`) of the ones that survived, in trace order. The
    /// `q`-th one of the trace is the `kept_ones()[q - 1]`-th one of `x`.
    pub fn kept_ones(&self) -> Vec<usize> {
        self.kept
            .iter()
            .enumerate()
            .filter_map(|(i, &k)| k.then_some(i + 1))
            .collect()
    }
}

/// Samples the run-length view of a trace of `x` directly.
pub fn sample_runs<R: Rng + ?Sized>(x: &SeparatedString, params: &ChannelParams, rng: &mut R) -> RunSample {
    let keep = params.keep();
    let p = params.retention();
    let t = x.t();
    let mut kept = Vec::with_capacity(t);
    let mut zeros = Vec::with_capacity(t + 1);
    let mut gaps = Vec::with_capacity(t + 1);
    let mut current = 0u64;
    for (i, &a) in x.gaps().iter().enumerate() {
        let z = if a == 0 {
            0
        } else {
            Binomial::new(a, p).expect("valid binomial").sample(rng)
        };
        zeros.push(z);
        current += z;
        if i < t {
            let k = keep.sample(rng);
            kept.push(k);
            if k {
                gaps.push(current);
                current = 0;
            }
        }
    }
    gaps.push(current);
    RunSample {
        profile: TraceGapProfile { gaps },
        kept,
        zeros,
    }
}

/// Like [`sample_runs`] on the padded string `x` with `pad` zeros each side.
pub fn sample_padded_runs<R: Rng + ?Sized>(
    x: &SeparatedString,
    pad: usize,
    params: &ChannelParams,
    rng: &mut R,
) -> RunSample {
    sample_runs(&x.padded(pad as u64), params, rng)
}
