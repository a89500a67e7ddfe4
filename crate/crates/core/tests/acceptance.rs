//! Acceptance suite. Runs every criterion in order and prints one line per
//! criterion; exits non-zero if any fails.
//!
//! `cargo test -p septrace --test acceptance -- <number>...` runs a subset.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::Rng;
use rayon::prelude::*;
use septrace::alignment::simulate_process;
use septrace::bits::random_separated;
use septrace::channel::sample_runs;
use septrace::estimation::{accepted_matches, coarse_estimate, estimate_t, reconstruct, SimulatedSource};
use septrace::oracle::{catalan, check_pk_bound, enumerate_outcomes};
use septrace::rng::{mix, stream};
use septrace::{
    AlignConfig, ChannelParams, GapEstimates, OracleConfig, Outcome, PipelineConfig, SeparatedString, TraceSource,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

const DESK_N: usize = 20_000;
const DESK_L: usize = 600;
const DESK_T: usize = 30;
const DESK_DELTA: f64 = 0.05;

fn desk_config(delta: f64, pad: usize, n: usize) -> PipelineConfig {
    PipelineConfig {
        align: AlignConfig::natural(1.0, n + 2 * pad).unwrap(),
        delta,
        pad,
        coarse_reps: 64,
        fine_traces: 100_000,
        t_traces: 10_000,
        min_success_fraction: 0.6,
        expected_len: Some(n),
    }
}

fn desk_instance(seed: u64) -> SeparatedString {
    random_separated(DESK_N, DESK_L, DESK_T, &mut stream(seed, 0)).unwrap()
}

/// Positive gaps in `[lo, hi]`.
fn random_gaps(m: usize, lo: u64, hi: u64, seed: u64) -> Vec<u64> {
    let mut rng = stream(seed, 1);
    (0..m).map(|_| rng.random_range(lo..=hi)).collect()
}

/// `b_i = a_i + u_i` with `|u_i| <= frac * (c0 / 4) sqrt(a_i ln n)`.
fn perturbed(a: &[u64], frac: f64, c0: f64, n: usize, seed: u64) -> GapEstimates {
    let mut rng = stream(seed, 2);
    let ln = (n as f64).ln();
    let b = a
        .iter()
        .map(|&x| {
            let r = frac * c0 / 4.0 * (x as f64 * ln).sqrt();
            x as f64 + rng.random_range(-r..=r)
        })
        .collect();
    GapEstimates::new(b).unwrap()
}

fn chain(m: usize) -> Vec<u64> {
    let mut a = vec![10_000u64];
    a.extend(std::iter::repeat_n(100, m - 1));
    a
}

fn exact_recovery_zero_noise() -> Verdict {
    let start = Instant::now();
    let sizes = [100usize, 1_000, 10_000];
    let mut failures = Vec::new();
    for i in 0..100u64 {
        let n = sizes[i as usize % 3];
        let mut rng = stream(mix(1, i), 0);
        let l = rng.random_range(2..=n / 10);
        let t = rng.random_range(0..=n / (l + 1));
        let x = random_separated(n, l, t, &mut rng).unwrap();
        let cfg = PipelineConfig {
            coarse_reps: 3,
            fine_traces: 10,
            t_traces: 10,
            ..desk_config(0.0, l, n)
        };
        let mut source = SimulatedSource::new(&x, l, ChannelParams::new(0.0, i).unwrap());
        match reconstruct(&mut source, &cfg) {
            Ok(r) if r.bits.to_string() == x.to_string() => {}
            _ => failures.push(i),
        }
    }
    let elapsed = start.elapsed();
    verdict(
        failures.is_empty() && elapsed < Duration::from_secs(10),
        format!(
            "{} of 100 recovered, {:.2}s (failures {:?})",
            100 - failures.len(),
            elapsed.as_secs_f64(),
            failures
        ),
    )
}

fn end_to_end_monte_carlo() -> Verdict {
    let start = Instant::now();
    let outcomes: Vec<bool> = (0..20u64)
        .map(|seed| {
            let x = desk_instance(mix(2, seed));
            let cfg = desk_config(DESK_DELTA, DESK_L, DESK_N);
            let mut source = SimulatedSource::new(&x, DESK_L, ChannelParams::new(DESK_DELTA, mix(20, seed)).unwrap());
            matches!(reconstruct(&mut source, &cfg), Ok(r) if r.gaps == x.gaps())
        })
        .collect();
    let ok = outcomes.iter().filter(|&&s| s).count();
    verdict(
        ok >= 18,
        format!(
            "{ok} of 20 exact recoveries (need 18), {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn never_ahead() -> Verdict {
    let m = 200;
    let (instances, runs) = (10u64, 1_000u64);
    let mut ahead = 0usize;
    let mut total = 0usize;
    for inst in 0..instances {
        let a = random_gaps(m, 600, 1_200, mix(3, inst));
        let n: usize = a.iter().sum::<u64>() as usize + m;
        let cfg = AlignConfig::natural(1.0, n).unwrap();
        let b = perturbed(&a, 0.95, cfg.c0, n, mix(3, inst));
        let bad: usize = (0..runs)
            .into_par_iter()
            .map(|r| {
                let run = simulate_process(&a, &b, DESK_DELTA, &cfg, &mut stream(mix(30, inst), r)).unwrap();
                run.ever_ahead() as usize
            })
            .sum();
        ahead += bad;
        total += runs as usize;
    }
    verdict(
        ahead == 0,
        format!("{ahead} ahead events in {total} runs at m = {m}, delta = {DESK_DELTA}"),
    )
}

fn behind_rate(a: &[u64], b: &GapEstimates, delta: f64, cfg: &AlignConfig, runs: u64, seed: u64) -> f64 {
    let m = a.len();
    let behind: usize = (0..runs)
        .into_par_iter()
        .map(|r| {
            let run = simulate_process(a, b, delta, cfg, &mut stream(seed, r)).unwrap();
            matches!(Outcome::of(run.final_value(), m), Outcome::Behind(_) | Outcome::Failed) as usize
        })
        .sum();
    behind as f64 / runs as f64
}

fn behind_bound() -> Verdict {
    let runs = 100_000u64;
    let deltas = [0.001, 0.005, 0.01];
    let mut instances = vec![("chain".to_string(), chain(11))];
    for i in 0..10u64 {
        instances.push((format!("random{i}"), random_gaps(20, 600, 1_200, mix(4, i))));
    }
    let mut pass = true;
    let mut worst = (0.0f64, String::new());
    let mut chain_rates = Vec::new();
    for (idx, (name, a)) in instances.iter().enumerate() {
        let n = a.iter().sum::<u64>() as usize + a.len();
        let cfg = AlignConfig::natural(1.0, n).unwrap();
        let b = GapEstimates::from_counts(a);
        for (di, &delta) in deltas.iter().enumerate() {
            let rate = behind_rate(a, &b, delta, &cfg, runs, mix(40 + idx as u64, di as u64));
            if rate > 200.0 * delta {
                pass = false;
            }
            if rate / delta > worst.0 {
                worst = (rate / delta, format!("{name} at delta {delta}"));
            }
            if idx == 0 {
                chain_rates.push(rate);
            }
        }
    }
    let ratio = chain_rates[2] / chain_rates[0];
    let scaling = (5.0..=20.0).contains(&ratio);
    verdict(
        pass && scaling,
        format!(
            "max rate/delta {:.2} ({}), chain rates {:?}, ratio 0.01/0.001 = {ratio:.2}",
            worst.0, worst.1, chain_rates
        ),
    )
}

fn oracle_equivalence() -> Verdict {
    let samples = 1_000_000u64;
    let mut instances: Vec<(String, Vec<u64>, GapEstimates, f64)> = Vec::new();
    for m in [8usize, 12] {
        let a = chain(m);
        instances.push((format!("chain{m}"), a.clone(), GapEstimates::from_counts(&a), 0.2));
    }
    for (i, m) in [6usize, 10, 14].into_iter().enumerate() {
        let a = random_gaps(m, 200, 800, mix(5, i as u64));
        let n = a.iter().sum::<u64>() as usize;
        let b = perturbed(&a, 0.9, 1.0, n, mix(5, i as u64));
        instances.push((format!("random{m}"), a, b, 0.3));
    }
    let mut worst_z = 0.0f64;
    let mut mismatches = Vec::new();
    let mut bound_failures = Vec::new();
    for (idx, (name, a, b, delta)) in instances.iter().enumerate() {
        let m = a.len();
        let n = a.iter().sum::<u64>() as usize + m;
        let cfg = AlignConfig::natural(1.0, n).unwrap();
        let ocfg = OracleConfig::for_length(m);
        let dist = enumerate_outcomes(a, b, *delta, &cfg, &ocfg).unwrap();
        let freq = (0..samples)
            .into_par_iter()
            .fold(BTreeMap::<Outcome, u64>::new, |mut acc, r| {
                let run = simulate_process(a, b, *delta, &cfg, &mut stream(mix(50, idx as u64), r)).unwrap();
                *acc.entry(Outcome::of(run.final_value(), m)).or_default() += 1;
                acc
            })
            .reduce(BTreeMap::new, |mut x, y| {
                for (k, v) in y {
                    *x.entry(k).or_default() += v;
                }
                x
            });
        let mut outcomes: Vec<Outcome> = dist.probabilities().keys().copied().collect();
        outcomes.extend(freq.keys().copied());
        outcomes.sort();
        outcomes.dedup();
        for o in outcomes {
            let p = dist.probability(o);
            let observed = *freq.get(&o).unwrap_or(&0) as f64 / samples as f64;
            let sigma = (p * (1.0 - p) / samples as f64).sqrt();
            let diff = (observed - p).abs();
            if sigma == 0.0 {
                if diff > 0.0 {
                    mismatches.push(format!("{name}:{o}"));
                }
                continue;
            }
            worst_z = worst_z.max(diff / sigma);
            if diff > 4.0 * sigma {
                mismatches.push(format!("{name}:{o}"));
            }
        }
        let report = check_pk_bound(a, b, 1e-7, &cfg, &ocfg).unwrap();
        if !report.all_pass() {
            bound_failures.push(name.clone());
        }
    }
    verdict(
        mismatches.is_empty() && bound_failures.is_empty(),
        format!(
            "{} instances, worst |z| = {worst_z:.2}, mismatches {mismatches:?}, p_k bound failures {bound_failures:?}",
            instances.len()
        ),
    )
}

/// Padded desk instance with coarse estimates learned from simulated traces.
fn fine_setup(seed: u64) -> (SeparatedString, GapEstimates, AlignConfig) {
    let x = desk_instance(seed);
    let cfg = desk_config(DESK_DELTA, DESK_L, DESK_N);
    let mut source = SimulatedSource::new(&x, DESK_L, ChannelParams::new(DESK_DELTA, seed).unwrap());
    let b = coarse_estimate(&mut source, x.t(), &cfg).unwrap().b;
    (x.padded(DESK_L as u64), b, cfg.align)
}

fn fine_sample_distribution() -> Verdict {
    let (padded, b, cfg) = fine_setup(mix(6, 0));
    let b_rev = b.reversed();
    let t = padded.t();
    let m = t / 2;
    let params = ChannelParams::new(DESK_DELTA, mix(60, 0)).unwrap();
    let mut samples: Vec<f64> = Vec::new();
    let mut k = 0u64;
    while samples.len() < 10_000 {
        let batch: Vec<Option<f64>> = (k..k + 2_000)
            .into_par_iter()
            .map(|i| {
                let s = sample_runs(&padded, &params, &mut stream(params.seed, i));
                accepted_matches(&s.profile, t, &b, &b_rev, &cfg)
                    .into_iter()
                    .find(|&(mm, _)| mm == m)
                    .map(|(_, q)| s.profile.gaps()[q] as f64)
            })
            .collect();
        samples.extend(batch.into_iter().flatten());
        k += 2_000;
    }
    let count = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / count;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    let a_m = padded.gaps()[m] as f64;
    let (mu, sigma2) = ((1.0 - DESK_DELTA) * a_m, a_m * DESK_DELTA * (1.0 - DESK_DELTA));
    let se = (sigma2 / count).sqrt();
    let mean_ok = (mean - mu).abs() <= 3.0 * se;
    let var_ok = (var - sigma2).abs() <= 0.2 * sigma2;
    verdict(
        mean_ok && var_ok,
        format!(
            "m = {m}, {} samples from {k} traces: mean {mean:.3} vs {mu:.3} ({:.2} SE), variance {var:.2} vs {sigma2:.2} ({:+.1}%)",
            samples.len(),
            (mean - mu) / se,
            100.0 * (var / sigma2 - 1.0)
        ),
    )
}

fn acceptance_soundness() -> Verdict {
    let (padded, b, cfg) = fine_setup(mix(7, 0));
    let b_rev = b.reversed();
    let t = padded.t();
    let params = ChannelParams::new(DESK_DELTA, mix(70, 0)).unwrap();
    let (mut accepted, mut wrong, mut k) = (0usize, 0usize, 0u64);
    while accepted < 100_000 {
        let (a, w) = (k..k + 1_000)
            .into_par_iter()
            .map(|i| {
                let s = sample_runs(&padded, &params, &mut stream(params.seed, i));
                let kept = s.kept_ones();
                let m_tilde = s.profile.m_tilde();
                let origin = |q: usize| {
                    if q == 0 {
                        0
                    } else if q == m_tilde + 1 {
                        t + 1
                    } else {
                        kept[q - 1]
                    }
                };
                let pairs = accepted_matches(&s.profile, t, &b, &b_rev, &cfg);
                let bad = pairs
                    .iter()
                    .filter(|&&(m, q)| origin(q) != m || origin(q + 1) != m + 1)
                    .count();
                (pairs.len(), bad)
            })
            .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
        accepted += a;
        wrong += w;
        k += 1_000;
    }
    verdict(
        wrong == 0,
        format!("{wrong} misidentified among {accepted} accepted pairs from {k} traces"),
    )
}

fn t_estimation() -> Verdict {
    let exact = (0..100u64)
        .into_par_iter()
        .filter(|&seed| {
            let x = desk_instance(mix(8, seed));
            let mut source = SimulatedSource::new(&x, DESK_L, ChannelParams::new(DESK_DELTA, mix(80, seed)).unwrap());
            let profiles = source.draw(10_000).unwrap();
            estimate_t(&profiles, DESK_DELTA).unwrap() == x.t()
        })
        .count();
    verdict(exact >= 99, format!("t exact in {exact} of 100 runs"))
}

fn catalan_suite() -> Verdict {
    let mut failures = Vec::new();
    for (k, &c) in [1u32, 1, 2, 5, 14].iter().enumerate() {
        if catalan(k as u32) != BigUint::from(c) {
            failures.push(format!("value {k}"));
        }
    }
    for k in 0..=20u32 {
        let sum: BigUint = (0..=k).map(|i| catalan(i) * catalan(k - i)).sum();
        if catalan(k + 1) != sum {
            failures.push(format!("recurrence {k}"));
        }
    }
    for k in 1..=30u32 {
        let (c, next) = (catalan(k), catalan(k + 1));
        if next < &c * 2u32 || next > &c * 4u32 {
            failures.push(format!("ratio {k}"));
        }
    }
    verdict(
        failures.is_empty(),
        format!("values, recurrence to 20, ratios 1..=30; failures {failures:?}"),
    )
}

type Criterion = (u32, &'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 9] = [
    (1, "exact recovery at zero noise", exact_recovery_zero_noise),
    (2, "end-to-end Monte Carlo", end_to_end_monte_carlo),
    (3, "never ahead", never_ahead),
    (4, "behind bound", behind_bound),
    (5, "oracle equivalence", oracle_equivalence),
    (6, "fine sample distribution", fine_sample_distribution),
    (7, "acceptance soundness", acceptance_soundness),
    (8, "t estimation", t_estimation),
    (9, "Catalan suite", catalan_suite),
];

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {id} [{}] {name}: {} ({:.1}s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
