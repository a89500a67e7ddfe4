//! Greedy left-to-right alignment of a trace against estimated gap lengths.
//!
//! Given estimates `b_0, b_1, ...` of the runs of `x` and the runs
//! `s_0, s_1, ...` of a trace, the aligner keeps a pointer `val` into `x`
//! (initially 0, the start of the string). For each trace run `s_q` it moves
//! the pointer to the smallest `j' > val` such that some block
//! `b_j + ... + b_{j'-1}` with `val <= j < j'` is within the acceptance
//! threshold `c0 * log(n) * sqrt(b_{j:j'})` of `s_q`. The pointer after `q`
//! runs is the aligner's guess for which one of `x` the `q`-th one of the
//! trace came from.
//!
//! The same rule driven by a known retention pattern `w` and exact run sums
//! gives the abstract alignment process ([`run_process`]), which is what the
//! probability bounds are stated for.

use rand::distr::{Bernoulli, Distribution};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::PrefixSums;
use crate::channel::TraceGapProfile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Natural,
    Base2,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Base2 => x.log2(),
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "natural" | "e" | "ln" => Ok(LogBase::Natural),
            "base2" | "2" | "log2" => Ok(LogBase::Base2),
            other => Err(Error::InvalidParameter(format!("unknown log base {other:?}"))),
        }
    }
}

/// Acceptance threshold parameters.
///
/// `c0` trades false matches against missed matches: a larger value tolerates
/// noisier estimates but needs a larger separation `L`, since the merged run
/// left by a deleted one must stay outside the threshold of a single gap
/// (roughly `L > c0 * log(n) * sqrt(2 L)`). The base of the logarithm folds
/// into `c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    pub c0: f64,
    pub n_ref: usize,
    #[serde(default)]
    pub log_base: LogBase,
}

impl AlignConfig {
    pub fn new(c0: f64, n_ref: usize, log_base: LogBase) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::InvalidParameter(format!("c0 = {c0} must be positive")));
        }
        if n_ref < 2 {
            return Err(Error::InvalidParameter(format!("n_ref = {n_ref} must be at least 2")));
        }
        Ok(Self { c0, n_ref, log_base })
    }

    /// Natural-log configuration with the given multiplier.
    pub fn natural(c0: f64, n_ref: usize) -> Result<Self> {
        Self::new(c0, n_ref, LogBase::Natural)
    }

    /// `c0 * log(n_ref)`.
    pub fn scale(&self) -> f64 {
        self.c0 * self.log_base.log(self.n_ref as f64)
    }
}

/// `c0 * log(n_ref) * sqrt(b_sum)`.
pub fn threshold(b_sum: f64, cfg: &AlignConfig) -> f64 {
    cfg.scale() * b_sum.sqrt()
}

/// Estimates `b_0, ..., b_{m'-1}` of the gap lengths, with prefix sums.
#[derive(Debug, Clone, PartialEq)]
pub struct GapEstimates {
    values: Vec<f64>,
    prefix: Vec<f64>,
}

impl GapEstimates {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "gap estimate b_{i} = {v} must be finite and non-negative"
            )));
        }
        let mut prefix = Vec::with_capacity(values.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &v in &values {
            acc += v;
            prefix.push(acc);
        }
        Ok(Self { values, prefix })
    }

    pub fn from_counts(values: &[u64]) -> Self {
        Self::new(values.iter().map(|&v| v as f64).collect()).expect("counts are valid estimates")
    }

    pub fn empty() -> Self {
        Self::new(Vec::new()).expect("empty is valid")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `b_start + ... + b_{end-1}`; panics when out of range.
    pub fn sum(&self, start: usize, end: usize) -> f64 {
        self.prefix[end] - self.prefix[start]
    }

    pub fn push(&mut self, v: f64) -> Result<()> {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gap estimate {v} must be finite and non-negative"
            )));
        }
        let last = *self.prefix.last().expect("prefix is never empty");
        self.values.push(v);
        self.prefix.push(last + v);
        Ok(())
    }

    pub fn reversed(&self) -> GapEstimates {
        Self::new(self.values.iter().rev().copied().collect()).expect("already validated")
    }

    /// Logs entries outside the `[lo, hi]` range the analysis assumes.
    pub fn warn_out_of_range(&self, lo: f64, hi: f64) {
        for (i, &v) in self.values.iter().enumerate() {
            if v < lo || v > hi {
                log::warn!("gap estimate b_{i} = {v} outside [{lo}, {hi}]");
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlignOutcome {
    /// The `q`-th one of the trace was matched, and `gap` zeros follow it.
    Success {
        q: usize,
        gap: u64,
    },
    Fail,
}

impl AlignOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, AlignOutcome::Success { .. })
    }
}

#[inline]
fn accepts(observed: f64, block: f64, scale: f64) -> bool {
    (observed - block).abs() <= scale * block.sqrt()
}

/// Smallest `end > val` such that some block `b_{j:end}` with `val <= j`
/// accepts `observed`, or `None`.
///
/// For a fixed `end` the block sums shrink as `j` grows, and the accepted
/// block sums form an interval containing `observed`. So if any `j` is
/// accepted, one of the two blocks bracketing `observed` is too, and a binary
/// search finds them. This returns the same `end` as scanning every `j`.
pub(crate) fn next_alignment(observed: f64, val: usize, b: &GapEstimates, scale: f64) -> Option<usize> {
    (val + 1..=b.len()).find(|&end| {
        let total = b.prefix[end];
        let starts = &b.prefix[val..end];
        let split = starts.partition_point(|&p| total - p >= observed);
        (split > 0 && accepts(observed, total - starts[split - 1], scale))
            || (split < starts.len() && accepts(observed, total - starts[split], scale))
    })
}

/// Runs the aligner on the trace runs and returns the position in `x` of the
/// `m`-th one, i.e. `Success { q, gap: s_q }` when the pointer lands exactly on
/// `m` after consuming `q` runs.
///
/// `b` needs at least `m` entries; when it has more, the pointer may jump past
/// `m`, which is a failure. `m = 0` succeeds immediately with `s_0`.
pub fn align(profile: &TraceGapProfile, m: usize, b: &GapEstimates, cfg: &AlignConfig) -> Result<AlignOutcome> {
    if b.len() < m {
        return Err(Error::InvalidParameter(format!(
            "align needs at least m = {m} gap estimates, got {}",
            b.len()
        )));
    }
    let s = profile.gaps();
    let m_tilde = profile.m_tilde();
    let scale = cfg.scale();
    let mut val = 0usize;
    let mut q = 0usize;
    while val < m {
        // s_q runs from the q-th one to the (q+1)-th; past the last one the
        // trace has nothing left to align.
        if q > m_tilde {
            return Ok(AlignOutcome::Fail);
        }
        match next_alignment(s[q] as f64, val, b, scale) {
            Some(end) => val = end,
            None => return Ok(AlignOutcome::Fail),
        }
        q += 1;
    }
    if val == m && q <= m_tilde {
        Ok(AlignOutcome::Success { q, gap: s[q] })
    } else {
        Ok(AlignOutcome::Fail)
    }
}

/// The full sequence of pointer values `g_0 = 0, g_1, ...` the aligner visits
/// on one trace, run until it fails or consumes every run.
///
/// Because the pointer only depends on runs already consumed, a single path
/// answers [`align`] for every `m` at once: `align(m)` succeeds with `q`
/// exactly when `g_q = m` and `q <= m~`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignPath {
    values: Vec<usize>,
    m_tilde: usize,
}

impl AlignPath {
    pub fn values(&self) -> &[usize] {
        &self.values
    }

    /// Whether the aligner got stuck before consuming the last run.
    pub fn stalled(&self) -> bool {
        self.values.len() < self.m_tilde + 2
    }

    /// The trace one `q` that the aligner matched to the `m`-th one of `x`.
    pub fn index_of(&self, m: usize) -> Option<usize> {
        self.values.binary_search(&m).ok().filter(|&q| q <= self.m_tilde)
    }

    pub fn outcome(&self, m: usize, profile: &TraceGapProfile) -> AlignOutcome {
        match self.index_of(m) {
            Some(q) => AlignOutcome::Success {
                q,
                gap: profile.gaps()[q],
            },
            None => AlignOutcome::Fail,
        }
    }
}

pub fn align_path(profile: &TraceGapProfile, b: &GapEstimates, cfg: &AlignConfig) -> AlignPath {
    let scale = cfg.scale();
    let mut values = Vec::with_capacity(profile.gaps().len() + 1);
    values.push(0);
    let mut val = 0usize;
    for &s in profile.gaps() {
        match next_alignment(s as f64, val, b, scale) {
            Some(end) => {
                val = end;
                values.push(val);
            }
            None => break,
        }
    }
    AlignPath {
        values,
        m_tilde: profile.m_tilde(),
    }
}

/// Value of the alignment pointer at a retained index of the process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Reach {
    At(usize),
    /// No admissible block exists; every later retained index is unreachable too.
    Never,
}

/// One realisation of the alignment process: retention bits `w_0..=w_m` and
/// the pointer value `f_i` at each retained index (`None` where `w_i = 0`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessRun {
    pub w: Vec<bool>,
    pub f: Vec<Option<Reach>>,
}

impl ProcessRun {
    /// Length `m` of the gap sequence the run was generated for.
    pub fn m(&self) -> usize {
        self.w.len() - 1
    }

    pub fn final_value(&self) -> Reach {
        self.f[self.m()].expect("w_m = 1")
    }

    /// Retained indices with their pointer values, in order.
    pub fn retained(&self) -> impl Iterator<Item = (usize, Reach)> + '_ {
        self.f.iter().enumerate().filter_map(|(i, f)| f.map(|r| (i, r)))
    }

    /// Whether some retained `i` has `f_i > i`.
    pub fn ever_ahead(&self) -> bool {
        self.retained().any(|(i, r)| matches!(r, Reach::At(v) if v > i))
    }

    /// Largest relative slip `(i' - f_i') - (i - f_i)` over retained
    /// `i <= i'`, or `None` if the pointer ever becomes unreachable.
    pub fn max_relative_slip(&self) -> Option<i64> {
        let mut min_behind = i64::MAX;
        let mut worst = 0i64;
        for (i, r) in self.retained() {
            let Reach::At(v) = r else { return None };
            let behind = i as i64 - v as i64;
            min_behind = min_behind.min(behind);
            worst = worst.max(behind - min_behind);
        }
        Some(worst)
    }
}

/// Runs the process deterministically for a given retention pattern.
///
/// `a` holds the exact gap lengths (`m = a.len()`); `w` must have `m + 1`
/// entries with `w_0 = w_m = 1`. Between consecutive retained indices
/// `i_0 < i` the observed run is `a_{i_0:i}`, and `f_i` is the aligner's next
/// pointer from `f_{i_0}`.
pub fn run_process(a: &[u64], b: &GapEstimates, w: &[bool], cfg: &AlignConfig) -> Result<ProcessRun> {
    let m = a.len();
    if w.len() != m + 1 || !w[0] || !w[m] {
        return Err(Error::InvalidParameter(format!(
            "retention pattern needs m + 1 = {} entries with w_0 = w_m = 1",
            m + 1
        )));
    }
    let sums = PrefixSums::new(a);
    let scale = cfg.scale();
    let mut f = vec![None; m + 1];
    f[0] = Some(Reach::At(0));
    let mut prev_index = 0usize;
    let mut prev = Reach::At(0);
    for i in 1..=m {
        if !w[i] {
            continue;
        }
        let next = match prev {
            Reach::At(val) => {
                let observed = sums.sum(prev_index, i)? as f64;
                next_alignment(observed, val, b, scale).map_or(Reach::Never, Reach::At)
            }
            Reach::Never => Reach::Never,
        };
        f[i] = Some(next);
        prev = next;
        prev_index = i;
    }
    Ok(ProcessRun { w: w.to_vec(), f })
}

/// Samples `w_1..w_{m-1}` i.i.d. with `P(w_i = 1) = 1 - delta` and runs the
/// process.
pub fn simulate_process<R: Rng + ?Sized>(
    a: &[u64],
    b: &GapEstimates,
    delta: f64,
    cfg: &AlignConfig,
    rng: &mut R,
) -> Result<ProcessRun> {
    if a.is_empty() {
        return Err(Error::InvalidParameter("the process needs at least one gap".into()));
    }
    if a.contains(&0) {
        return Err(Error::InvalidParameter("process gaps must be positive".into()));
    }
    let keep = Bernoulli::new(1.0 - delta)
        .map_err(|_| Error::InvalidParameter(format!("delta = {delta} must lie in [0, 1)")))?;
    let m = a.len();
    let w: Vec<bool> = (0..=m).map(|i| i == 0 || i == m || keep.sample(rng)).collect();
    run_process(a, b, &w, cfg)
}

/// Where the process ended relative to the target index `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Exact,
    Behind(usize),
    Ahead(usize),
    Failed,
}

impl Outcome {
    pub fn of(final_value: Reach, m: usize) -> Outcome {
        match final_value {
            Reach::Never => Outcome::Failed,
            Reach::At(v) if v == m => Outcome::Exact,
            Reach::At(v) if v < m => Outcome::Behind(m - v),
            Reach::At(v) => Outcome::Ahead(v - m),
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Outcome::Exact => write!(f, "exact"),
            Outcome::Behind(k) => write!(f, "behind({k})"),
            Outcome::Ahead(k) => write!(f, "ahead({k})"),
            Outcome::Failed => write!(f, "failed"),
        }
    }
}

pub fn classify(run: &ProcessRun, m: usize) -> Outcome {
    Outcome::of(run.f[m].unwrap_or(Reach::Never), m)
}
