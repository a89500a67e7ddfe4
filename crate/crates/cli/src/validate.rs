//! Invariant and oracle suites behind `septrace validate`.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rand::Rng;
use rayon::prelude::*;
use septrace::alignment::simulate_process;
use septrace::bits::random_separated;
use septrace::channel::sample_runs;
use septrace::estimation::{accepted_matches, coarse_estimate, SimulatedSource};
use septrace::oracle::{catalan, check_pk_bound, enumerate_outcomes};
use septrace::rng::{mix, stream};
use septrace::{
    AlignConfig, BitString, ChannelParams, GapEstimates, OracleConfig, Outcome, PipelineConfig, SeparatedString,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

pub const SUITES: [&str; 6] = [
    "catalan",
    "never-ahead",
    "behind-bound",
    "oracle",
    "ones-count",
    "fine-soundness",
];

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub pass: bool,
    pub measured: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn new(checks: Vec<Check>) -> Self {
        Self {
            pass: checks.iter().all(|c| c.pass),
            checks,
        }
    }
}

/// Suite parameters. `delta` and `runs` override each suite's default.
#[derive(Debug, Clone, Copy, Default)]
pub struct SuiteOptions {
    pub delta: Option<f64>,
    pub runs: Option<u64>,
    pub seed: u64,
}

fn check(suite: &str, name: impl Into<String>, pass: bool, measured: Value) -> Check {
    Check {
        suite: suite.into(),
        name: name.into(),
        pass,
        measured,
    }
}

pub fn run_suite(name: &str, opts: &SuiteOptions) -> CliResult<Vec<Check>> {
    match name {
        "catalan" => Ok(catalan_suite()),
        "never-ahead" => never_ahead(opts),
        "behind-bound" => behind_bound(opts),
        "oracle" => oracle(opts),
        "ones-count" => ones_count(opts),
        "fine-soundness" => fine_soundness(opts),
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run_suite(s, opts)?);
            }
            Ok(out)
        }
        other => Err(CliError::Usage(format!(
            "unknown suite {other:?}; expected one of {} or all",
            SUITES.join(", ")
        ))),
    }
}

fn catalan_suite() -> Vec<Check> {
    let values: Vec<String> = (0..=4).map(|k| catalan(k).to_string()).collect();
    let recurrence_ok = (0..=20u32).all(|k| {
        let sum: BigUint = (0..=k).map(|i| catalan(i) * catalan(k - i)).sum();
        catalan(k + 1) == sum
    });
    let ratio_ok = (1..=30u32).all(|k| {
        let (c, next) = (catalan(k), catalan(k + 1));
        next >= &c * 2u32 && next <= &c * 4u32
    });
    vec![
        check("catalan", "values", values == ["1", "1", "2", "5", "14"], json!(values)),
        check("catalan", "recurrence-to-20", recurrence_ok, json!(recurrence_ok)),
        check("catalan", "ratio-bounds-1-30", ratio_ok, json!(ratio_ok)),
    ]
}

fn random_gaps(m: usize, lo: u64, hi: u64, seed: u64) -> Vec<u64> {
    let mut rng = stream(seed, 1);
    (0..m).map(|_| rng.random_range(lo..=hi)).collect()
}

fn chain(m: usize) -> Vec<u64> {
    let mut a = vec![10_000u64];
    a.extend(std::iter::repeat_n(100, m - 1));
    a
}

fn n_of(a: &[u64]) -> usize {
    a.iter().sum::<u64>() as usize + a.len()
}

/// `b_i` within `frac * (c0 / 4) sqrt(a_i ln n)` of `a_i`.
fn perturbed(a: &[u64], frac: f64, n: usize, seed: u64) -> GapEstimates {
    let mut rng = stream(seed, 2);
    let ln = (n as f64).ln();
    let b = a
        .iter()
        .map(|&x| {
            let r = frac / 4.0 * (x as f64 * ln).sqrt();
            x as f64 + rng.random_range(-r..=r)
        })
        .collect();
    GapEstimates::new(b).expect("positive perturbed gaps")
}

fn never_ahead(opts: &SuiteOptions) -> CliResult<Vec<Check>> {
    let delta = opts.delta.unwrap_or(0.05);
    let runs = opts.runs.unwrap_or(10_000);
    let m = 200;
    let instances = 10u64;
    let per = runs.div_ceil(instances);
    let mut ahead = 0u64;
    for inst in 0..instances {
        let a = random_gaps(m, 600, 1_200, mix(opts.seed, inst));
        let n = n_of(&a);
        let cfg = AlignConfig::natural(1.0, n)?;
        let b = perturbed(&a, 0.95, n, mix(opts.seed, inst));
        ahead += (0..per)
            .into_par_iter()
            .map(|r| {
                simulate_process(&a, &b, delta, &cfg, &mut stream(mix(opts.seed ^ 0xa5, inst), r))
                    .map(|run| run.ever_ahead() as u64)
            })
            .sum::<septrace::Result<u64>>()?;
    }
    Ok(vec![check(
        "never-ahead",
        format!("zero-ahead-m{m}"),
        ahead == 0,
        json!({ "ahead": ahead, "runs": per * instances, "delta": delta }),
    )])
}

fn behind_rate(a: &[u64], b: &GapEstimates, delta: f64, cfg: &AlignConfig, runs: u64, seed: u64) -> CliResult<f64> {
    let m = a.len();
    let behind = (0..runs)
        .into_par_iter()
        .map(|r| {
            simulate_process(a, b, delta, cfg, &mut stream(seed, r))
                .map(|run| matches!(Outcome::of(run.final_value(), m), Outcome::Behind(_) | Outcome::Failed) as u64)
        })
        .sum::<septrace::Result<u64>>()?;
    Ok(behind as f64 / runs as f64)
}

fn behind_bound(opts: &SuiteOptions) -> CliResult<Vec<Check>> {
    let delta = opts.delta.unwrap_or(0.01);
    let runs = opts.runs.unwrap_or(100_000);
    let bound = (200.0 * delta).min(1.0);
    let mut instances = vec![("chain".to_string(), chain(11))];
    for i in 0..10u64 {
        instances.push((
            format!("random{i}"),
            random_gaps(20, 600, 1_200, mix(opts.seed, 100 + i)),
        ));
    }
    instances
        .iter()
        .enumerate()
        .map(|(idx, (name, a))| {
            let cfg = AlignConfig::natural(1.0, n_of(a))?;
            let rate = behind_rate(
                a,
                &GapEstimates::from_counts(a),
                delta,
                &cfg,
                runs,
                mix(opts.seed, 200 + idx as u64),
            )?;
            Ok(check(
                "behind-bound",
                name.clone(),
                rate <= bound,
                json!({ "behind_rate": rate, "bound": bound, "delta": delta, "runs": runs }),
            ))
        })
        .collect()
}

fn oracle(opts: &SuiteOptions) -> CliResult<Vec<Check>> {
    let samples = opts.runs.unwrap_or(100_000);
    let mut instances: Vec<(String, Vec<u64>, GapEstimates, f64)> = Vec::new();
    for m in [8usize, 12] {
        let a = chain(m);
        let b = GapEstimates::from_counts(&a);
        instances.push((format!("chain{m}"), a, b, opts.delta.unwrap_or(0.2)));
    }
    for (i, m) in [6usize, 10, 14].into_iter().enumerate() {
        let a = random_gaps(m, 200, 800, mix(opts.seed, 300 + i as u64));
        let b = perturbed(&a, 0.9, n_of(&a), mix(opts.seed, 300 + i as u64));
        instances.push((format!("random{m}"), a, b, opts.delta.unwrap_or(0.3)));
    }
    let mut checks = Vec::new();
    for (idx, (name, a, b, delta)) in instances.iter().enumerate() {
        let m = a.len();
        let cfg = AlignConfig::natural(1.0, n_of(a))?;
        let ocfg = OracleConfig::for_length(m);
        let dist = enumerate_outcomes(a, b, *delta, &cfg, &ocfg)?;
        let freq = (0..samples)
            .into_par_iter()
            .map(|r| {
                simulate_process(a, b, *delta, &cfg, &mut stream(mix(opts.seed, 400 + idx as u64), r))
                    .map(|run| Outcome::of(run.final_value(), m))
            })
            .collect::<septrace::Result<Vec<Outcome>>>()?
            .into_iter()
            .fold(BTreeMap::<Outcome, u64>::new(), |mut acc, o| {
                *acc.entry(o).or_default() += 1;
                acc
            });
        let mut worst_z = 0.0f64;
        let mut agree = true;
        let mut outcomes: Vec<Outcome> = dist.probabilities().keys().chain(freq.keys()).copied().collect();
        outcomes.sort();
        outcomes.dedup();
        for o in outcomes {
            let p = dist.probability(o);
            let observed = *freq.get(&o).unwrap_or(&0) as f64 / samples as f64;
            let sigma = (p * (1.0 - p) / samples as f64).sqrt();
            let diff = (observed - p).abs();
            if sigma == 0.0 {
                agree &= diff == 0.0;
            } else {
                worst_z = worst_z.max(diff / sigma);
                agree &= diff <= 4.0 * sigma;
            }
        }
        checks.push(check(
            "oracle",
            format!("{name}-monte-carlo"),
            agree,
            json!({ "worst_z": worst_z, "samples": samples, "delta": delta, "total": dist.total() }),
        ));
        let report = check_pk_bound(a, b, 1e-7, &cfg, &ocfg)?;
        checks.push(check(
            "oracle",
            format!("{name}-pk-bound"),
            report.all_pass(),
            serde_json::to_value(&report).unwrap_or(Value::Null),
        ));
    }
    Ok(checks)
}

fn ones_count(opts: &SuiteOptions) -> CliResult<Vec<Check>> {
    let delta = opts.delta.unwrap_or(0.05);
    let traces = opts.runs.unwrap_or(10_000);
    let x = random_separated(20_000, 600, 30, &mut stream(opts.seed, 500))?;
    let t = x.t() as f64;
    let params = ChannelParams::new(delta, mix(opts.seed, 501))?;
    let counts: Vec<f64> = (0..traces)
        .into_par_iter()
        .map(|i| sample_runs(&x, &params, &mut stream(params.seed, i)).profile.m_tilde() as f64)
        .collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let (mu, sigma2) = (t * (1.0 - delta), t * delta * (1.0 - delta));
    let se = (sigma2 / n).sqrt();
    Ok(vec![
        check(
            "ones-count",
            "mean",
            (mean - mu).abs() <= 4.0 * se,
            json!({ "mean": mean, "expected": mu, "standard_error": se }),
        ),
        check(
            "ones-count",
            "variance",
            sigma2 == 0.0 && var == 0.0 || (var - sigma2).abs() <= 0.1 * sigma2,
            json!({ "variance": var, "expected": sigma2 }),
        ),
    ])
}

fn fine_soundness(opts: &SuiteOptions) -> CliResult<Vec<Check>> {
    let delta = opts.delta.unwrap_or(0.05);
    let traces = opts.runs.unwrap_or(10_000);
    let (n, l) = (20_000usize, 600usize);
    let x = random_separated(n, l, 30, &mut stream(opts.seed, 600))?;
    let cfg = PipelineConfig {
        align: AlignConfig::natural(1.0, n + 2 * l)?,
        delta,
        pad: l,
        coarse_reps: 64,
        fine_traces: 1,
        t_traces: 1,
        min_success_fraction: 0.6,
        expected_len: Some(n),
    };
    let mut source = SimulatedSource::new(&x, l, ChannelParams::new(delta, mix(opts.seed, 601))?);
    let b = coarse_estimate(&mut source, x.t(), &cfg)?.b;
    let b_rev = b.reversed();
    let padded = x.padded(l as u64);
    let t = padded.t();
    let params = ChannelParams::new(delta, mix(opts.seed, 602))?;
    let (accepted, wrong) = (0..traces)
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
            let pairs = accepted_matches(&s.profile, t, &b, &b_rev, &cfg.align);
            let bad = pairs
                .iter()
                .filter(|&&(m, q)| origin(q) != m || origin(q + 1) != m + 1)
                .count();
            (pairs.len() as u64, bad as u64)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(vec![check(
        "fine-soundness",
        "zero-misidentified",
        wrong == 0 && accepted > 0,
        json!({ "accepted": accepted, "misidentified": wrong, "traces": traces, "delta": delta }),
    )])
}

/// Checks a string file: characters, and separation when `l` is given.
pub fn validate_string(bits: &BitString, l: Option<usize>) -> Vec<Check> {
    let x = SeparatedString::from_bits(bits);
    let mut checks = vec![check(
        "string",
        "ascii-bits",
        true,
        json!({ "n": bits.len(), "t": x.t(), "min_interior_gap": x.separation() }),
    )];
    if let Some(l) = l {
        checks.push(check(
            "string",
            format!("separated-{l}"),
            x.is_separated(l as u64),
            json!({ "L": l, "min_interior_gap": x.separation() }),
        ));
    }
    checks
}
