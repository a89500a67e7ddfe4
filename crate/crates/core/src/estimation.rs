//! End-to-end reconstruction: count the ones, estimate every gap coarsely
//! with medians of aligned runs, then pin each gap down exactly by averaging
//! runs whose forward and backward alignments agree.

use serde::{Deserialize, Serialize};

use crate::alignment::{align, align_path, AlignConfig, AlignOutcome, GapEstimates};
use crate::bits::{BitString, SeparatedString};
use crate::channel::{sample_runs, ChannelParams, TraceGapProfile};
use crate::rng::stream;
use crate::{par, Error, Result};

/// Trace budgets and parameters of one reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub align: AlignConfig,
    /// Known deletion probability.
    pub delta: f64,
    /// Zeros added to both ends of `x` before sampling; removed at the end.
    pub pad: usize,
    /// Traces aligned per gap during coarse estimation.
    pub coarse_reps: usize,
    /// Size of the single batch shared by every gap during fine estimation.
    pub fine_traces: usize,
    /// Traces used to count the ones.
    pub t_traces: usize,
    /// Fraction of coarse alignments per gap that must succeed.
    pub min_success_fraction: f64,
    /// Length the recovered string must have, when known.
    #[serde(default)]
    pub expected_len: Option<usize>,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(0.0..1.0).contains(&self.delta) {
            return bad(format!("delta = {} must lie in [0, 1)", self.delta));
        }
        if self.coarse_reps == 0 || self.fine_traces == 0 || self.t_traces == 0 {
            return bad("trace budgets must all be at least 1".into());
        }
        if !(self.min_success_fraction > 0.0 && self.min_success_fraction <= 1.0) {
            return bad(format!(
                "min_success_fraction = {} must lie in (0, 1]",
                self.min_success_fraction
            ));
        }
        Ok(())
    }
}

/// Supplies fresh traces on demand, already reduced to their run lengths.
pub trait TraceSource {
    fn draw(&mut self, count: usize) -> Result<Vec<TraceGapProfile>>;
}

/// Simulated padded traces of a hidden string. Trace `k` (counting every
/// trace ever drawn) uses random stream `k` of the seed, so the sample does
/// not depend on how draws are batched or scheduled.
#[derive(Debug, Clone)]
pub struct SimulatedSource {
    padded: SeparatedString,
    params: ChannelParams,
    drawn: u64,
}

impl SimulatedSource {
    pub fn new(x: &SeparatedString, pad: usize, params: ChannelParams) -> Self {
        Self {
            padded: x.padded(pad as u64),
            params,
            drawn: 0,
        }
    }

    pub fn drawn(&self) -> u64 {
        self.drawn
    }
}

impl TraceSource for SimulatedSource {
    fn draw(&mut self, count: usize) -> Result<Vec<TraceGapProfile>> {
        let start = self.drawn;
        let (padded, params) = (&self.padded, &self.params);
        let out = par::map_indexed(count, |k| {
            sample_runs(padded, params, &mut stream(params.seed, start + k as u64)).profile
        });
        self.drawn += count as u64;
        Ok(out)
    }
}

/// A fixed batch of traces handed out in order, wrapping around when more
/// are requested than exist.
#[derive(Debug, Clone)]
pub struct ReplaySource {
    profiles: Vec<TraceGapProfile>,
    cursor: usize,
}

impl ReplaySource {
    pub fn new(profiles: Vec<TraceGapProfile>) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::NoTraces);
        }
        Ok(Self { profiles, cursor: 0 })
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }
}

impl TraceSource for ReplaySource {
    fn draw(&mut self, count: usize) -> Result<Vec<TraceGapProfile>> {
        let n = self.profiles.len();
        let out = (0..count)
            .map(|k| self.profiles[(self.cursor + k) % n].clone())
            .collect();
        self.cursor = (self.cursor + count) % n;
        Ok(out)
    }
}

/// Nearest integer, ties to even.
pub fn round_half_even(v: f64) -> f64 {
    v.round_ties_even()
}

/// Number of ones in `x`: the mean number of ones per trace divided by the
/// retention probability, rounded.
pub fn estimate_t(profiles: &[TraceGapProfile], delta: f64) -> Result<usize> {
    if profiles.is_empty() {
        return Err(Error::NoTraces);
    }
    let ones: u64 = profiles.iter().map(|p| p.m_tilde() as u64).sum();
    let mean = ones as f64 / profiles.len() as f64;
    Ok(round_half_even(mean / (1.0 - delta)) as usize)
}

/// Median of a non-empty sample; the midpoint of the two middle values for
/// even sizes.
pub fn median(values: &mut [u64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    values.sort_unstable();
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid] as f64
    } else {
        (values[mid - 1] as f64 + values[mid] as f64) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseEstimate {
    /// `b_0, ..., b_t`, each approximating `(1 - delta) a_m`.
    pub b: GapEstimates,
    /// Successful alignments per gap, out of `coarse_reps`.
    pub successes: Vec<usize>,
}

/// Learns `b_0, ..., b_t` one gap at a time. Gap `m` aligns `coarse_reps`
/// fresh traces against `b_0, ..., b_{m-1}` and takes the median of the runs
/// that follow the matched one. Failed alignments are dropped rather than
/// padded with arbitrary values; a gap whose success rate falls below
/// `min_success_fraction` aborts the estimation.
pub fn coarse_estimate<S: TraceSource + ?Sized>(
    source: &mut S,
    t: usize,
    cfg: &PipelineConfig,
) -> Result<CoarseEstimate> {
    cfg.validate()?;
    let mut b = GapEstimates::empty();
    let mut successes = Vec::with_capacity(t + 1);
    for m in 0..=t {
        let traces = source.draw(cfg.coarse_reps)?;
        let current = &b;
        let outcomes = par::map_indexed(traces.len(), |i| align(&traces[i], m, current, &cfg.align));
        let mut gaps = Vec::with_capacity(traces.len());
        for outcome in outcomes {
            if let AlignOutcome::Success { gap, .. } = outcome? {
                gaps.push(gap);
            }
        }
        let needed = cfg.min_success_fraction * cfg.coarse_reps as f64;
        if gaps.is_empty() || (gaps.len() as f64) < needed {
            return Err(Error::CoarseFailure {
                m,
                successes: gaps.len(),
                reps: cfg.coarse_reps,
            });
        }
        successes.push(gaps.len());
        b.push(median(&mut gaps))?;
    }
    Ok(CoarseEstimate { b, successes })
}

/// Gaps of one trace accepted by the forward/backward check, as
/// `(m, q_f)` pairs: the forward aligner matched the `m`-th one of `x` to the
/// `q_f`-th one of the trace, the backward aligner matched the `(t - m)`-th
/// one from the right to the `q_b`-th one from the right, and
/// `q_f + q_b = m~`, i.e. the two matches are adjacent ones of the trace. The
/// accepted run is `s_{q_f}`.
///
/// `b_rev` must be `b` reversed.
pub fn accepted_matches(
    profile: &TraceGapProfile,
    t: usize,
    b: &GapEstimates,
    b_rev: &GapEstimates,
    cfg: &AlignConfig,
) -> Vec<(usize, usize)> {
    let m_tilde = profile.m_tilde();
    let forward = align_path(profile, b, cfg);
    let backward = align_path(&profile.reversed(), b_rev, cfg);
    forward
        .values()
        .iter()
        .enumerate()
        .filter(|&(q, &m)| q <= m_tilde && m <= t)
        .filter_map(|(q_f, &m)| {
            let q_b = backward.index_of(t - m)?;
            (q_f + q_b == m_tilde).then_some((m, q_f))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FineEstimate {
    /// Recovered `a_0, ..., a_t`.
    pub gaps: Vec<u64>,
    /// Traces accepted per gap.
    pub accepted: Vec<usize>,
}

/// Recovers every gap exactly from one batch of traces independent of those
/// that produced `b`. Accepted runs of gap `m` are averaged, divided by
/// `1 - delta` and rounded.
pub fn fine_estimate(
    profiles: &[TraceGapProfile],
    t: usize,
    b: &GapEstimates,
    cfg: &PipelineConfig,
) -> Result<FineEstimate> {
    if b.len() != t + 1 {
        return Err(Error::InvalidParameter(format!(
            "fine estimation needs t + 1 = {} coarse estimates, got {}",
            t + 1,
            b.len()
        )));
    }
    if profiles.is_empty() {
        return Err(Error::NoTraces);
    }
    let b_rev = b.reversed();
    // Integer sums keep the result independent of how the batch is split.
    let (sums, counts) = par::fold_reduce(
        profiles,
        || (vec![0u64; t + 1], vec![0u64; t + 1]),
        |(mut sums, mut counts), p| {
            for (m, q_f) in accepted_matches(p, t, b, &b_rev, &cfg.align) {
                sums[m] += p.gaps()[q_f];
                counts[m] += 1;
            }
            (sums, counts)
        },
        |(mut s1, mut c1), (s2, c2)| {
            s1.iter_mut().zip(s2).for_each(|(a, b)| *a += b);
            c1.iter_mut().zip(c2).for_each(|(a, b)| *a += b);
            (s1, c1)
        },
    );
    let mut gaps = Vec::with_capacity(t + 1);
    for m in 0..=t {
        if counts[m] == 0 {
            return Err(Error::FineFailure { m });
        }
        let mean = sums[m] as f64 / counts[m] as f64;
        gaps.push(round_half_even(mean / (1.0 - cfg.delta)) as u64);
    }
    Ok(FineEstimate {
        gaps,
        accepted: counts.into_iter().map(|c| c as usize).collect(),
    })
}

/// Removes `pad` zeros from both ends of a recovered padded gap sequence.
pub fn unpad(mut gaps: Vec<u64>, pad: usize) -> Result<Vec<u64>> {
    let pad64 = pad as u64;
    let t = gaps.len() - 1;
    if t == 0 {
        gaps[0] = gaps[0].checked_sub(2 * pad64).ok_or(Error::PaddingUnderflow {
            side: "only",
            gap: gaps[0],
            pad: 2 * pad,
        })?;
        return Ok(gaps);
    }
    gaps[0] = gaps[0].checked_sub(pad64).ok_or(Error::PaddingUnderflow {
        side: "leading",
        gap: gaps[0],
        pad,
    })?;
    gaps[t] = gaps[t].checked_sub(pad64).ok_or(Error::PaddingUnderflow {
        side: "trailing",
        gap: gaps[t],
        pad,
    })?;
    Ok(gaps)
}

/// Pipeline stage boundaries, reported to observers of [`reconstruct_observed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    TEstimation,
    Coarse,
    Fine,
    Unpad,
    Done,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub bits: BitString,
    /// Recovered gaps of `x` (padding removed).
    pub gaps: Vec<u64>,
    pub t: usize,
    pub coarse: CoarseEstimate,
    pub fine: FineEstimate,
}

pub fn reconstruct<S: TraceSource + ?Sized>(source: &mut S, cfg: &PipelineConfig) -> Result<Reconstruction> {
    reconstruct_observed(source, cfg, |_| {})
}

/// [`reconstruct`], calling `on_stage` as each stage begins and once more
/// with [`Stage::Done`] on success.
pub fn reconstruct_observed<S, F>(source: &mut S, cfg: &PipelineConfig, mut on_stage: F) -> Result<Reconstruction>
where
    S: TraceSource + ?Sized,
    F: FnMut(Stage),
{
    cfg.validate()?;
    on_stage(Stage::TEstimation);
    let t = estimate_t(&source.draw(cfg.t_traces)?, cfg.delta)?;

    on_stage(Stage::Coarse);
    let coarse = coarse_estimate(source, t, cfg)?;

    on_stage(Stage::Fine);
    let batch = source.draw(cfg.fine_traces)?;
    let fine = fine_estimate(&batch, t, &coarse.b, cfg)?;
    drop(batch);

    on_stage(Stage::Unpad);
    let gaps = unpad(fine.gaps.clone(), cfg.pad)?;
    let bits = SeparatedString::from_gaps(gaps.clone())?.to_bits();
    if let Some(expected) = cfg.expected_len {
        if bits.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: bits.len(),
            });
        }
    }
    on_stage(Stage::Done);
    Ok(Reconstruction {
        bits,
        gaps,
        t,
        coarse,
        fine,
    })
}
