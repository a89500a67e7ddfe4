//! Simulated reconstruction experiments and their reports.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use septrace::bits::random_separated;
use septrace::estimation::{reconstruct_observed, SimulatedSource, Stage};
use septrace::rng::{mix, stream};
use septrace::{AlignConfig, ChannelParams, LogBase, PipelineConfig, Reconstruction, SeparatedString, TraceSource};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    /// Number of ones; `n / (2 (L + 1))` when absent.
    #[serde(default)]
    pub t: Option<usize>,
    pub delta: f64,
    pub master_seed: u64,
    pub coarse_reps: usize,
    pub fine_traces: usize,
    pub t_traces: usize,
    pub c0: f64,
    #[serde(default)]
    pub log_base: LogBase,
    pub repetitions: usize,
    #[serde(default = "default_min_success")]
    pub min_success_fraction: f64,
    #[serde(default)]
    pub out: Option<std::path::PathBuf>,
    #[serde(default)]
    pub report: Option<std::path::PathBuf>,
}

fn default_min_success() -> f64 {
    0.6
}

pub fn default_t(n: usize, l: usize) -> usize {
    n / (2 * (l + 1))
}

impl ExperimentConfig {
    pub fn t(&self) -> usize {
        self.t.unwrap_or_else(|| default_t(self.n, self.l))
    }

    pub fn validate(&self) -> CliResult<()> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.n == 0 {
            return usage("n must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.delta) {
            return usage(format!("delta = {} must lie in [0, 1)", self.delta));
        }
        if self.coarse_reps == 0 || self.fine_traces == 0 || self.t_traces == 0 || self.repetitions == 0 {
            return usage("trace budgets and repetitions must all be at least 1".into());
        }
        let t = self.t();
        if t * (self.l + 1) > self.n {
            return Err(septrace::Error::Infeasible {
                n: self.n,
                l: self.l,
                t,
            }
            .into());
        }
        self.pipeline().validate()?;
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            align: AlignConfig {
                c0: self.c0,
                n_ref: (self.n + 2 * self.l).max(2),
                log_base: self.log_base,
            },
            delta: self.delta,
            pad: self.l,
            coarse_reps: self.coarse_reps,
            fine_traces: self.fine_traces,
            t_traces: self.t_traces,
            min_success_fraction: self.min_success_fraction,
            expected_len: Some(self.n),
        }
    }

    /// Traces one repetition draws when every stage runs.
    pub fn trace_budget(&self) -> usize {
        self.t_traces + self.coarse_reps * (self.t() + 1) + self.fine_traces
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    pub repetition: usize,
    pub seed: u64,
    pub success: bool,
    /// `t-estimation`, `coarse`, `fine`, `unpad`, `length-check` or `mismatch`.
    pub failing_stage: Option<String>,
    pub failing_m: Option<usize>,
    pub error: Option<String>,
    pub t_true: Option<usize>,
    pub t_estimated: Option<usize>,
    /// Edit distance between the recovered and the true string.
    pub edit_distance: Option<usize>,
    /// `|b_m - (1 - delta) a_m| / sqrt(a_m)` over the padded gaps.
    pub coarse_errors: Vec<f64>,
    /// Accepted fraction of the fine batch, per gap.
    pub fine_acceptance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub repetitions: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub max_coarse_error: Option<f64>,
    pub mean_fine_acceptance: Option<f64>,
}

impl Aggregate {
    pub fn of(records: &[RepetitionRecord]) -> Self {
        let successes = records.iter().filter(|r| r.success).count();
        let coarse = records.iter().flat_map(|r| r.coarse_errors.iter().copied());
        let fine: Vec<f64> = records.iter().flat_map(|r| r.fine_acceptance.iter().copied()).collect();
        Aggregate {
            repetitions: records.len(),
            successes,
            success_rate: if records.is_empty() {
                0.0
            } else {
                successes as f64 / records.len() as f64
            },
            max_coarse_error: coarse.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v)))),
            mean_fine_acceptance: (!fine.is_empty()).then(|| fine.iter().sum::<f64>() / fine.len() as f64),
        }
    }
}

/// Wall-clock seconds, kept apart from everything that must be reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub stages: Vec<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// `simulated` or `file`.
    pub source: String,
    pub config: Option<ExperimentConfig>,
    pub pipeline: PipelineConfig,
    pub records: Vec<RepetitionRecord>,
    pub aggregate: Aggregate,
    pub timing: Timing,
}

fn stage_name(stage: Stage) -> &'static str {
    match stage {
        Stage::TEstimation => "t-estimation",
        Stage::Coarse => "coarse",
        Stage::Fine => "fine",
        Stage::Unpad => "unpad",
        Stage::Done => "done",
    }
}

/// Result of one pipeline run, compared against a reference when available.
pub struct RunOutcome {
    pub record: RepetitionRecord,
    pub stages: BTreeMap<String, f64>,
    pub recovered: Option<Reconstruction>,
}

/// Runs the pipeline on `source`, timing each stage.
pub fn run_pipeline<S: TraceSource + ?Sized>(
    source: &mut S,
    cfg: &PipelineConfig,
    truth: Option<&SeparatedString>,
    repetition: usize,
    seed: u64,
) -> RunOutcome {
    let mut stages = BTreeMap::new();
    let mut current: Option<(Stage, Instant)> = None;
    let mut last_stage = Stage::TEstimation;
    let result = reconstruct_observed(source, cfg, |stage| {
        if let Some((prev, started)) = current.take() {
            stages.insert(stage_name(prev).to_string(), started.elapsed().as_secs_f64());
        }
        last_stage = stage;
        if stage != Stage::Done {
            current = Some((stage, Instant::now()));
        }
    });
    if let Some((prev, started)) = current {
        stages.insert(stage_name(prev).to_string(), started.elapsed().as_secs_f64());
    }
    let mut record = RepetitionRecord {
        repetition,
        seed,
        success: false,
        failing_stage: None,
        failing_m: None,
        error: None,
        t_true: truth.map(SeparatedString::t),
        t_estimated: None,
        edit_distance: None,
        coarse_errors: Vec::new(),
        fine_acceptance: Vec::new(),
    };
    match &result {
        Ok(r) => {
            record.t_estimated = Some(r.t);
            record.fine_acceptance = r
                .fine
                .accepted
                .iter()
                .map(|&a| a as f64 / cfg.fine_traces as f64)
                .collect();
            match truth {
                Some(x) => {
                    record.success = r.gaps == x.gaps();
                    record.edit_distance = Some(edit_distance(r.bits.to_string().as_bytes(), x.to_string().as_bytes()));
                    if !record.success {
                        record.failing_stage = Some("mismatch".into());
                    }
                    if r.t == x.t() {
                        let padded = x.padded(cfg.pad as u64);
                        record.coarse_errors = coarse_errors(r.coarse.b.values(), padded.gaps(), cfg.delta);
                    }
                }
                None => record.success = true,
            }
        }
        Err(e) => {
            record.failing_stage = Some(e.stage().unwrap_or(stage_name(last_stage)).to_string());
            record.failing_m = e.gap_index();
            record.error = Some(e.to_string());
        }
    }
    RunOutcome {
        record,
        stages,
        recovered: result.ok(),
    }
}

pub fn coarse_errors(b: &[f64], a: &[u64], delta: f64) -> Vec<f64> {
    b.iter()
        .zip(a)
        .map(|(&b, &a)| (b - (1.0 - delta) * a as f64).abs() / (a.max(1) as f64).sqrt())
        .collect()
}

/// Hidden string and channel of repetition `rep`.
pub fn repetition_setup(cfg: &ExperimentConfig, rep: usize) -> CliResult<(u64, SeparatedString, ChannelParams)> {
    let seed = mix(cfg.master_seed, rep as u64);
    let x = random_separated(cfg.n, cfg.l, cfg.t(), &mut stream(seed, 0))?;
    let params = ChannelParams::new(cfg.delta, mix(seed, 1))?;
    Ok((seed, x, params))
}

/// Runs every repetition concurrently; the report content does not depend on
/// scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<(ExperimentReport, Vec<Option<Reconstruction>>)> {
    cfg.validate()?;
    let pipeline = cfg.pipeline();
    let start = Instant::now();
    let outcomes = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let (seed, x, params) = repetition_setup(cfg, rep)?;
            let mut source = SimulatedSource::new(&x, cfg.l, params);
            Ok(run_pipeline(&mut source, &pipeline, Some(&x), rep, seed))
        })
        .collect::<CliResult<Vec<RunOutcome>>>()?;
    let mut records = Vec::with_capacity(outcomes.len());
    let mut stages = Vec::with_capacity(outcomes.len());
    let mut recovered = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        records.push(o.record);
        stages.push(o.stages);
        recovered.push(o.recovered);
    }
    let report = ExperimentReport {
        source: "simulated".into(),
        config: Some(cfg.clone()),
        pipeline,
        aggregate: Aggregate::of(&records),
        records,
        timing: Timing {
            total_seconds: start.elapsed().as_secs_f64(),
            stages,
        },
    };
    Ok((report, recovered))
}

/// Levenshtein distance, computed in a diagonal band that doubles until it
/// contains the optimal alignment.
pub fn edit_distance(a: &[u8], b: &[u8]) -> usize {
    if a == b {
        return 0;
    }
    let mut band = a.len().abs_diff(b.len()).max(8);
    loop {
        if let Some(d) = banded_edit_distance(a, b, band) {
            return d;
        }
        band *= 2;
    }
}

/// Distance if it is at most `k`.
fn banded_edit_distance(a: &[u8], b: &[u8], k: usize) -> Option<usize> {
    let (n, m) = (a.len(), b.len());
    if n.abs_diff(m) > k {
        return None;
    }
    const INF: usize = usize::MAX / 2;
    let mut prev = vec![INF; m + 1];
    let mut cur = vec![INF; m + 1];
    for (j, p) in prev.iter_mut().enumerate().take(k.min(m) + 1) {
        *p = j;
    }
    for i in 1..=n {
        let lo = i.saturating_sub(k);
        let hi = (i + k).min(m);
        if lo >= 1 {
            cur[lo - 1] = INF;
        }
        for j in lo..=hi {
            cur[j] = if j == 0 {
                i
            } else {
                let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
                sub.min(prev[j] + 1).min(cur[j - 1] + 1)
            };
        }
        if hi < m {
            cur[hi + 1] = INF;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[m];
    (d <= k).then_some(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn full_edit_distance(a: &[u8], b: &[u8]) -> usize {
        let mut d: Vec<Vec<usize>> = (0..=a.len()).map(|i| vec![i; b.len() + 1]).collect();
        for (j, v) in d[0].iter_mut().enumerate() {
            *v = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
                d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
            }
        }
        d[a.len()][b.len()]
    }

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            n: 2_000,
            l: 100,
            t: None,
            delta: 0.0,
            master_seed: 3,
            coarse_reps: 4,
            fine_traces: 20,
            t_traces: 20,
            c0: 1.0,
            log_base: LogBase::Natural,
            repetitions: 3,
            min_success_fraction: 0.6,
            out: None,
            report: None,
        }
    }

    #[test]
    fn edit_distance_examples() {
        assert_eq!(edit_distance(b"", b""), 0);
        assert_eq!(edit_distance(b"kitten", b"sitting"), 3);
        assert_eq!(edit_distance(b"0000000000000000000001", b"1"), 21);
        assert_eq!(edit_distance(b"0101", b"1010"), 2);
    }

    proptest! {
        #[test]
        fn banded_matches_full_table(
            a in proptest::collection::vec(0u8..2, 0..60),
            b in proptest::collection::vec(0u8..2, 0..60),
        ) {
            prop_assert_eq!(edit_distance(&a, &b), full_edit_distance(&a, &b));
        }
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = ExperimentConfig { t: Some(5), ..config() };
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"L\":100"));
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), cfg);
    }

    #[test]
    fn config_validation() {
        assert!(config().validate().is_ok());
        assert!(ExperimentConfig {
            t_traces: 0,
            ..config()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig { delta: 1.0, ..config() }.validate().is_err());
        assert!(ExperimentConfig {
            t: Some(50),
            ..config()
        }
        .validate()
        .is_err());
        assert_eq!(config().t(), 9);
        assert_eq!(config().trace_budget(), 20 + 4 * 10 + 20);
    }

    #[test]
    fn noiseless_experiment_succeeds() {
        let (report, recovered) = run_experiment(&config()).unwrap();
        assert_eq!(report.aggregate.successes, 3);
        assert!(report.records.iter().all(|r| r.edit_distance == Some(0)));
        assert!(report.records.iter().all(|r| r.coarse_errors.iter().all(|&e| e == 0.0)));
        assert!(recovered.iter().all(Option::is_some));
        assert_eq!(report.aggregate, Aggregate::of(&report.records));
    }

    #[test]
    fn experiment_is_deterministic() {
        let cfg = ExperimentConfig {
            delta: 0.05,
            fine_traces: 2_000,
            coarse_reps: 16,
            t_traces: 500,
            ..config()
        };
        let (a, _) = run_experiment(&cfg).unwrap();
        let (b, _) = run_experiment(&cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.aggregate, b.aggregate);
    }

    #[test]
    fn failures_name_stage_and_gap() {
        // Far too few coarse traces for the quorum with heavy deletion.
        let cfg = ExperimentConfig {
            delta: 0.5,
            coarse_reps: 1,
            fine_traces: 1,
            t_traces: 1,
            repetitions: 4,
            ..config()
        };
        let (report, _) = run_experiment(&cfg).unwrap();
        assert!(report.aggregate.successes < 4);
        for r in report.records.iter().filter(|r| !r.success) {
            assert!(r.failing_stage.is_some());
        }
    }
}
