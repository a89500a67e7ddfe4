//! Exact outcome probabilities of the alignment process on small instances.
//!
//! For a gap sequence of length `m` the process is driven by `m - 1` free
//! retention bits, so all `2^(m-1)` patterns can be enumerated. Patterns are
//! tallied by outcome and by number of deletions `z`; the probability of an
//! outcome is then the polynomial `sum_z count_z * delta^z * (1 - delta)^(m-1-z)`,
//! evaluated either in floating point or exactly over the rationals.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::alignment::{run_process, AlignConfig, GapEstimates, Outcome};
use crate::{Error, Result, DELTA_BOUND};

/// Enumeration limits.
///
/// `k_window` is the relative-slip window `K` in the windowed behind
/// probabilities `p_k`: patterns that ever slip back `K + 1` or more steps
/// between two retained indices are excluded. With `K >= m` the window never
/// binds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OracleConfig {
    pub k_window: usize,
    pub max_m: usize,
}

impl OracleConfig {
    pub fn new(k_window: usize, max_m: usize) -> Result<Self> {
        if k_window == 0 || max_m == 0 {
            return Err(Error::InvalidParameter("k_window and max_m must be at least 1".into()));
        }
        Ok(Self { k_window, max_m })
    }

    /// Window equal to the instance length, cap of 20.
    pub fn for_length(m: usize) -> Self {
        Self {
            k_window: m.max(1),
            max_m: 20,
        }
    }
}

/// Exact outcome distribution of the process on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BehindDistribution {
    m: usize,
    k_window: usize,
    delta: f64,
    /// Pattern counts per outcome, indexed by number of deleted ones.
    counts: BTreeMap<Outcome, Vec<u64>>,
    /// `windowed[d][z]`: patterns ending exactly `d` behind (`d = 0` is exact)
    /// that never slip more than `K` steps between retained indices.
    windowed: Vec<Vec<u64>>,
    probs: BTreeMap<Outcome, f64>,
}

fn weight(z: usize, free: usize, delta: f64) -> f64 {
    delta.powi(z as i32) * (1.0 - delta).powi((free - z) as i32)
}

fn eval(counts: &[u64], delta: f64) -> f64 {
    let free = counts.len() - 1;
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(z, &c)| c as f64 * weight(z, free, delta))
        .sum()
}

fn eval_exact(counts: &[u64], delta: &BigRational) -> BigRational {
    let free = counts.len() - 1;
    let keep = BigRational::one() - delta;
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(z, &c)| {
            BigRational::from_integer(BigInt::from(c))
                * num_traits::pow(delta.clone(), z)
                * num_traits::pow(keep.clone(), free - z)
        })
        .fold(BigRational::zero(), |acc, v| acc + v)
}

impl BehindDistribution {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn probabilities(&self) -> &BTreeMap<Outcome, f64> {
        &self.probs
    }

    pub fn probability(&self, outcome: Outcome) -> f64 {
        self.probs.get(&outcome).copied().unwrap_or(0.0)
    }

    /// Pattern counts of an outcome by number of deletions.
    pub fn counts(&self, outcome: Outcome) -> Option<&[u64]> {
        self.counts.get(&outcome).map(Vec::as_slice)
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    /// `P(f_m <= m - k)`, with no window condition.
    pub fn behind_at_least(&self, k: usize) -> f64 {
        self.probs
            .iter()
            .filter(|(o, _)| match **o {
                Outcome::Exact => k == 0,
                Outcome::Behind(d) => d >= k,
                _ => false,
            })
            .map(|(_, p)| p)
            .sum()
    }

    fn windowed_counts(&self, k: usize) -> Vec<u64> {
        let mut acc = vec![0u64; self.m];
        for row in self.windowed.iter().skip(k) {
            acc.iter_mut().zip(row).for_each(|(a, c)| *a += c);
        }
        acc
    }

    /// `p_k`: probability of ending at least `k` behind while never slipping
    /// more than `K` steps between any two retained indices.
    pub fn p_k(&self, k: usize) -> f64 {
        eval(&self.windowed_counts(k), self.delta)
    }

    pub fn exact_probability(&self, outcome: Outcome, delta: &BigRational) -> BigRational {
        self.counts
            .get(&outcome)
            .map_or_else(BigRational::zero, |c| eval_exact(c, delta))
    }

    pub fn exact_p_k(&self, k: usize, delta: &BigRational) -> BigRational {
        eval_exact(&self.windowed_counts(k), delta)
    }

    /// The distribution re-evaluated at another deletion probability.
    pub fn at_delta(&self, delta: f64) -> BehindDistribution {
        let probs = self.counts.iter().map(|(o, c)| (*o, eval(c, delta))).collect();
        BehindDistribution {
            delta,
            probs,
            ..self.clone()
        }
    }

    pub fn k_window(&self) -> usize {
        self.k_window
    }
}

/// Enumerates every retention pattern of the process on `(a, b)`.
pub fn enumerate_outcomes(
    a: &[u64],
    b: &GapEstimates,
    delta: f64,
    cfg: &AlignConfig,
    ocfg: &OracleConfig,
) -> Result<BehindDistribution> {
    let m = a.len();
    if m == 0 {
        return Err(Error::InvalidParameter("the process needs at least one gap".into()));
    }
    if m > ocfg.max_m {
        return Err(Error::InstanceTooLarge { m, max_m: ocfg.max_m });
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must lie in [0, 1)")));
    }
    let free = m - 1;
    let mut counts: BTreeMap<Outcome, Vec<u64>> = BTreeMap::new();
    let mut windowed = vec![vec![0u64; free + 1]; m + 1];
    let mut w = vec![true; m + 1];
    for mask in 0u64..(1u64 << free) {
        for (i, slot) in w[1..m].iter_mut().enumerate() {
            *slot = mask >> i & 1 == 1;
        }
        let z = free - mask.count_ones() as usize;
        let run = run_process(a, b, &w, cfg)?;
        let outcome = Outcome::of(run.final_value(), m);
        counts.entry(outcome).or_insert_with(|| vec![0; free + 1])[z] += 1;
        let behind = match outcome {
            Outcome::Exact => Some(0),
            Outcome::Behind(d) => Some(d),
            _ => None,
        };
        if let (Some(d), Some(slip)) = (behind, run.max_relative_slip()) {
            if slip <= ocfg.k_window as i64 {
                windowed[d][z] += 1;
            }
        }
    }
    let probs = counts.iter().map(|(o, c)| (*o, eval(c, delta))).collect();
    Ok(BehindDistribution {
        m,
        k_window: ocfg.k_window,
        delta,
        counts,
        windowed,
        probs,
    })
}

/// `C_k = binom(2k, k) / (k + 1)`.
pub fn catalan(k: u32) -> BigUint {
    // C_{i+1} = C_i * 2(2i + 1) / (i + 2), exact at every step.
    (0..k).fold(BigUint::one(), |c, i| c * (2 * (2 * i as u64 + 1)) / (i as u64 + 2))
}

/// `D_k = 100^(2k - 1) C_k` for `k >= 1`, `D_0 = 1`.
pub fn d_k(k: u32) -> BigUint {
    if k == 0 {
        return BigUint::one();
    }
    num_traits::pow(BigUint::from(100u32), (2 * k - 1) as usize) * catalan(k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PkRow {
    pub k: usize,
    pub p_k: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PkReport {
    /// Whether `delta` is small enough for the bound to be claimed; otherwise
    /// the rows are informational.
    pub claimed: bool,
    pub rows: Vec<PkRow>,
}

impl PkReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Compares each exact `p_k`, `0 <= k <= K`, against `D_k delta^k`. The
/// comparison is done in exact rational arithmetic with `delta` taken as the
/// exact value of the given float.
pub fn check_pk_bound(
    a: &[u64],
    b: &GapEstimates,
    delta: f64,
    cfg: &AlignConfig,
    ocfg: &OracleConfig,
) -> Result<PkReport> {
    let dist = enumerate_outcomes(a, b, delta, cfg, ocfg)?;
    let exact_delta = BigRational::from_float(delta).expect("finite delta");
    let rows = (0..=ocfg.k_window)
        .map(|k| {
            let p = dist.exact_p_k(k, &exact_delta);
            let bound =
                BigRational::from_integer(BigInt::from(d_k(k as u32))) * num_traits::pow(exact_delta.clone(), k);
            PkRow {
                k,
                p_k: p.to_f64().unwrap_or(f64::NAN),
                bound: bound.to_f64().unwrap_or(f64::INFINITY),
                pass: p <= bound,
            }
        })
        .collect();
    Ok(PkReport {
        claimed: delta <= DELTA_BOUND,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::simulate_process;
    use crate::rng::stream;

    fn cfg(n: usize) -> AlignConfig {
        AlignConfig::natural(1.0, n).unwrap()
    }

    fn chain(len: usize) -> Vec<u64> {
        let mut a = vec![10_000u64];
        a.extend(std::iter::repeat_n(100, len - 1));
        a
    }

    #[test]
    fn catalan_values() {
        let expected = [1u32, 1, 2, 5, 14, 42, 132, 429];
        for (k, &c) in expected.iter().enumerate() {
            assert_eq!(catalan(k as u32), BigUint::from(c));
        }
        assert_eq!(catalan(35).to_string(), "3116285494907301262");
    }

    #[test]
    fn catalan_recurrence() {
        for k in 0..=20u32 {
            let sum: BigUint = (0..=k).map(|i| catalan(i) * catalan(k - i)).sum();
            assert_eq!(catalan(k + 1), sum, "k = {k}");
        }
    }

    #[test]
    fn catalan_ratio_bounds() {
        for k in 1..=30u32 {
            let (c, next) = (catalan(k), catalan(k + 1));
            assert!(next >= &c * 2u32 && next <= &c * 4u32, "k = {k}");
        }
    }

    #[test]
    fn d_k_values() {
        assert_eq!(d_k(0), BigUint::from(1u32));
        assert_eq!(d_k(1), BigUint::from(100u32));
        assert_eq!(d_k(2), BigUint::from(2_000_000u32));
    }

    #[test]
    fn config_validation() {
        assert!(OracleConfig::new(0, 5).is_err());
        assert!(OracleConfig::new(3, 0).is_err());
        assert_eq!(OracleConfig::for_length(7).k_window, 7);
    }

    #[test]
    fn single_gap_is_always_exact() {
        let a = [400u64];
        let b = GapEstimates::from_counts(&a);
        let d = enumerate_outcomes(&a, &b, 0.3, &cfg(1000), &OracleConfig::for_length(1)).unwrap();
        assert_eq!(d.probability(Outcome::Exact), 1.0);
        assert_eq!(d.probabilities().len(), 1);
        assert_eq!(d.p_k(0), 1.0);
        assert_eq!(d.p_k(1), 0.0);
        let report = check_pk_bound(&a, &b, 1e-7, &cfg(1000), &OracleConfig::for_length(1)).unwrap();
        assert!(report.all_pass() && report.claimed);
    }

    #[test]
    fn rejects_large_instances() {
        let a = vec![50u64; 12];
        let b = GapEstimates::from_counts(&a);
        let o = OracleConfig::new(12, 10).unwrap();
        assert_eq!(
            enumerate_outcomes(&a, &b, 0.1, &cfg(1000), &o),
            Err(Error::InstanceTooLarge { m: 12, max_m: 10 })
        );
    }

    #[test]
    fn counts_partition_all_patterns() {
        let a = chain(9);
        let b = GapEstimates::from_counts(&a);
        let d = enumerate_outcomes(&a, &b, 0.1, &cfg(11_000), &OracleConfig::for_length(9)).unwrap();
        // Summing the count polynomials gives the binomial coefficients.
        let mut total = vec![0u64; 9];
        for c in d.counts.values() {
            total.iter_mut().zip(c).for_each(|(t, c)| *t += c);
        }
        let binom: Vec<u64> = (0..9u64)
            .map(|z| (0..z).fold(1u64, |acc, i| acc * (8 - i) / (i + 1)))
            .collect();
        assert_eq!(total, binom);
        let half = BigRational::new(BigInt::from(1), BigInt::from(3));
        let exact_total = d
            .probabilities()
            .keys()
            .map(|&o| d.exact_probability(o, &half))
            .fold(BigRational::zero(), |acc, p| acc + p);
        assert_eq!(exact_total, BigRational::one());
        assert!((d.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chain_behind_probabilities_follow_delta_powers() {
        // Deleting the first k ones makes the process align the (k+1)-th one
        // with the first, and the short equal runs afterwards never let it
        // catch up: P(behind >= k) = delta^k up to patterns that also delete
        // nearly everything else.
        let a = chain(11);
        let b = GapEstimates::from_counts(&a);
        let c = cfg(11_010);
        let delta = 1e-3;
        let d = enumerate_outcomes(&a, &b, delta, &c, &OracleConfig::for_length(11)).unwrap();
        for k in 1..=2 {
            let ratio = d.behind_at_least(k) / delta.powi(k as i32);
            assert!((ratio - 1.0).abs() < 0.02, "k = {k}: ratio {ratio}");
        }
        assert_eq!(d.probability(Outcome::Ahead(1)), 0.0);
    }

    #[test]
    fn vanishing_delta_limit_is_exact() {
        let a = [300u64, 350, 280, 410, 390, 305];
        let b = GapEstimates::new(a.iter().map(|&x| x as f64 + 5.0).collect()).unwrap();
        let d = enumerate_outcomes(&a, &b, 1e-9, &cfg(2_000), &OracleConfig::for_length(6)).unwrap();
        assert!(d.probability(Outcome::Exact) > 1.0 - 1e-8);
    }

    #[test]
    fn window_excludes_large_slips() {
        let a = chain(8);
        let b = GapEstimates::from_counts(&a);
        let c = cfg(10_800);
        let wide = enumerate_outcomes(&a, &b, 0.2, &c, &OracleConfig::new(8, 20).unwrap()).unwrap();
        let narrow = enumerate_outcomes(&a, &b, 0.2, &c, &OracleConfig::new(1, 20).unwrap()).unwrap();
        assert!((wide.p_k(1) - wide.behind_at_least(1)).abs() < 1e-12);
        assert!(narrow.p_k(2) == 0.0);
        assert!(narrow.p_k(1) > 0.0 && narrow.p_k(1) < wide.p_k(1));
        for k in 2..=8 {
            assert_eq!(narrow.p_k(k), 0.0);
        }
    }

    #[test]
    fn pk_bound_holds_on_chain() {
        let a = chain(11);
        let b = GapEstimates::from_counts(&a);
        let report = check_pk_bound(&a, &b, 1e-7, &cfg(11_010), &OracleConfig::for_length(11)).unwrap();
        assert!(report.claimed);
        assert!(report.all_pass(), "{report:?}");
        assert_eq!(report.rows.len(), 12);
        // Margins: p_1 ~ 1e-7 against 1e-5.
        assert!(report.rows[1].p_k < report.rows[1].bound / 50.0);
        assert!(
            !check_pk_bound(&a, &b, 0.01, &cfg(11_010), &OracleConfig::for_length(11))
                .unwrap()
                .claimed
        );
    }

    #[test]
    fn monte_carlo_agrees_with_enumeration() {
        let a = chain(8);
        let b = GapEstimates::from_counts(&a);
        let c = cfg(10_800);
        let delta = 0.2;
        let d = enumerate_outcomes(&a, &b, delta, &c, &OracleConfig::for_length(8)).unwrap();
        let samples = 100_000usize;
        let mut rng = stream(77, 0);
        let mut freq: BTreeMap<Outcome, usize> = BTreeMap::new();
        for _ in 0..samples {
            let run = simulate_process(&a, &b, delta, &c, &mut rng).unwrap();
            *freq.entry(Outcome::of(run.final_value(), a.len())).or_default() += 1;
        }
        for (o, count) in &freq {
            assert!(d.probabilities().contains_key(o), "{o} never enumerated");
            let p = d.probability(*o);
            let sigma = (p * (1.0 - p) / samples as f64).sqrt();
            assert!((*count as f64 / samples as f64 - p).abs() <= 4.0 * sigma, "{o}");
        }
    }
}
