//! `septrace`: generate L-separated strings, sample traces, reconstruct,
//! sweep parameters and run validation suites.
//!
//! Exit codes: 0 success, 1 algorithmic failure, 2 usage or I/O error.

mod error;
mod experiment;
mod files;
mod sweep;
mod validate;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use septrace::bits::random_separated;
use septrace::channel::{sample_padded_trace, sample_trace};
use septrace::estimation::ReplaySource;
use septrace::rng::stream;
use septrace::{AlignConfig, BitString, ChannelParams, LogBase, PipelineConfig, SeparatedString, TraceGapProfile};

use crate::error::{CliError, CliResult};
use crate::experiment::{
    coarse_errors, default_t, run_experiment, run_pipeline, Aggregate, ExperimentConfig, ExperimentReport, Timing,
};
use crate::files::{read_string, read_traces, string_file, trace_file, write_output, TraceHeader};

#[derive(Parser)]
#[command(name = "septrace", version, about = "Trace reconstruction of L-separated strings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random L-separated string.
    Gen(GenArgs),
    /// Sample traces of a string through the deletion channel.
    Trace(TraceArgs),
    /// Reconstruct from a trace file, or run simulated experiments.
    Reconstruct(ReconstructArgs),
    /// Sweep success rates over a grid of delta, L and c0.
    Sweep(SweepArgs),
    /// Run validation suites, or check a string file.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long = "L")]
    l: usize,
    /// Number of ones [default: n / (2 (L + 1))].
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// String file; stdout when absent. A `<out>.meta.json` sidecar is
    /// written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    /// String file.
    input: PathBuf,
    #[arg(long)]
    delta: f64,
    /// Number of traces.
    #[arg(long, default_value_t = 1)]
    traces: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pad the string with L zeros on both sides before sampling.
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Trace file. Without it, hidden strings are simulated from the
    /// parameters below.
    input: Option<PathBuf>,
    /// Experiment configuration (JSON); replaces the parameter flags except
    /// --out and --report.
    #[arg(long, conflicts_with = "input")]
    config: Option<PathBuf>,
    /// Write the effective experiment configuration here.
    #[arg(long)]
    save_config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    /// Deletion probability; a trace file's header value takes precedence.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Traces in the fine batch [default: 100000, or the whole file].
    #[arg(long)]
    traces: Option<usize>,
    /// Traces for counting the ones [default: 10000, or the whole file].
    #[arg(long)]
    t_traces: Option<usize>,
    #[arg(long, default_value_t = 64)]
    coarse_reps: usize,
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    #[arg(long, default_value = "natural")]
    log_base: LogBase,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 0.6)]
    min_success_fraction: f64,
    /// Recovered string file (first repetition for simulated runs).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Expected string; the exit code is 1 unless it is recovered exactly.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    n: usize,
    /// Comma-separated deletion probabilities.
    #[arg(long, value_delimiter = ',', required = true)]
    delta: Vec<f64>,
    /// Comma-separated separations.
    #[arg(long = "L", value_delimiter = ',', required = true)]
    l: Vec<usize>,
    /// Comma-separated threshold multipliers.
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    c0: Vec<f64>,
    /// Number of ones [default: n / (2 (L + 1)) per cell].
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    traces: usize,
    #[arg(long, default_value_t = 10_000)]
    t_traces: usize,
    #[arg(long, default_value_t = 64)]
    coarse_reps: usize,
    #[arg(long, default_value = "natural")]
    log_base: LogBase,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    /// CSV file; existing rows are kept and their cells skipped.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// One of catalan, never-ahead, behind-bound, oracle, ones-count,
    /// fine-soundness, all.
    #[arg(required_unless_present = "string")]
    suite: Option<String>,
    /// Check a string file instead of running a suite.
    #[arg(long, conflicts_with = "suite")]
    string: Option<PathBuf>,
    /// Separation to check with --string.
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    /// Runs, samples or traces per suite.
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn gen(args: GenArgs) -> CliResult<()> {
    let t = args.t.unwrap_or_else(|| default_t(args.n, args.l));
    let x = random_separated(args.n, args.l, t, &mut stream(args.seed, 0))?;
    write_output(args.out.as_deref(), &string_file(&x.to_bits()))?;
    if let Some(out) = &args.out {
        let meta = serde_json::json!({
            "n": args.n,
            "L": args.l,
            "t": t,
            "seed": args.seed,
            "gaps": x.gaps(),
        });
        let mut sidecar = out.clone().into_os_string();
        sidecar.push(".meta.json");
        write_output(Some(Path::new(&sidecar)), &to_json(&meta))?;
    }
    Ok(())
}

fn trace(args: TraceArgs) -> CliResult<()> {
    let bits = read_string(&args.input)?;
    let x = SeparatedString::from_bits(&bits);
    let params = ChannelParams::new(args.delta, args.seed)?;
    let traces: Vec<BitString> = (0..args.traces as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(args.seed, i);
            match args.l {
                Some(pad) => sample_padded_trace(&x, pad, &params, &mut rng).bits,
                None => sample_trace(&x, &params, &mut rng).bits,
            }
        })
        .collect();
    let header = TraceHeader {
        n: bits.len(),
        delta: args.delta,
        seed: args.seed,
        count: args.traces,
        pad: args.l,
    };
    write_output(args.out.as_deref(), &trace_file(&header, &traces))
}

fn reference(path: Option<&Path>) -> CliResult<Option<SeparatedString>> {
    path.map(|p| read_string(p).map(|b| SeparatedString::from_bits(&b)))
        .transpose()
}

fn reconstruct_file(args: &ReconstructArgs, input: &Path) -> CliResult<bool> {
    let (header, traces) = read_traces(input)?;
    if let Some(d) = args.delta {
        if d != header.delta {
            log::warn!("--delta {d} ignored; the trace file header says delta={}", header.delta);
        }
    }
    let pad = header.pad.unwrap_or(0);
    let profiles: Vec<TraceGapProfile> = traces.iter().map(TraceGapProfile::from).collect();
    let count = profiles.len();
    let pipeline = PipelineConfig {
        align: AlignConfig::new(args.c0, (header.n + 2 * pad).max(2), args.log_base)?,
        delta: header.delta,
        pad,
        coarse_reps: args.coarse_reps,
        fine_traces: args.traces.unwrap_or(count),
        t_traces: args.t_traces.unwrap_or(count),
        min_success_fraction: args.min_success_fraction,
        expected_len: Some(header.n),
    };
    let needed = pipeline.t_traces.max(pipeline.fine_traces);
    if needed > count {
        log::warn!("a stage asks for {needed} traces but the file holds {count}; traces will be reused");
    }
    let truth = reference(args.reference.as_deref())?;
    let mut source = ReplaySource::new(profiles)?;
    let start = std::time::Instant::now();
    let outcome = run_pipeline(&mut source, &pipeline, truth.as_ref(), 0, header.seed);
    let records = vec![outcome.record];
    let report = ExperimentReport {
        source: "file".into(),
        config: None,
        pipeline,
        aggregate: Aggregate::of(&records),
        records,
        timing: Timing {
            total_seconds: start.elapsed().as_secs_f64(),
            stages: vec![outcome.stages],
        },
    };
    if let Some(r) = &outcome.recovered {
        write_output(args.out.as_deref(), &string_file(&r.bits))?;
    }
    let sink = if args.out.is_none() && outcome.recovered.is_some() && args.report.is_none() {
        // The recovered string already went to stdout.
        None
    } else {
        Some(args.report.as_deref())
    };
    if let Some(path) = sink {
        write_output(path, &to_json(&report))?;
    }
    report_failures(&report);
    Ok(report.aggregate.successes == report.aggregate.repetitions)
}

fn experiment_config(args: &ReconstructArgs) -> CliResult<ExperimentConfig> {
    if let Some(path) = &args.config {
        let text = files::read_to_string(path)?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.to_string()))?;
        if args.out.is_some() {
            cfg.out.clone_from(&args.out);
        }
        if args.report.is_some() {
            cfg.report.clone_from(&args.report);
        }
        return Ok(cfg);
    }
    let need = |name: &str| CliError::Usage(format!("--{name} is required without a trace file or --config"));
    Ok(ExperimentConfig {
        n: args.n.ok_or_else(|| need("n"))?,
        l: args.l.ok_or_else(|| need("L"))?,
        t: args.t,
        delta: args.delta.ok_or_else(|| need("delta"))?,
        master_seed: args.seed,
        coarse_reps: args.coarse_reps,
        fine_traces: args.traces.unwrap_or(100_000),
        t_traces: args.t_traces.unwrap_or(10_000),
        c0: args.c0,
        log_base: args.log_base,
        repetitions: args.reps,
        min_success_fraction: args.min_success_fraction,
        out: args.out.clone(),
        report: args.report.clone(),
    })
}

fn report_failures(report: &ExperimentReport) {
    for r in report.records.iter().filter(|r| !r.success) {
        let at = r.failing_m.map(|m| format!(" at m = {m}")).unwrap_or_default();
        let why = r
            .error
            .as_deref()
            .unwrap_or("recovered string differs from the reference");
        eprintln!(
            "repetition {}: failed in stage {}{at}: {why}",
            r.repetition,
            r.failing_stage.as_deref().unwrap_or("?")
        );
    }
}

fn reconstruct_simulated(args: &ReconstructArgs) -> CliResult<bool> {
    let cfg = experiment_config(args)?;
    if let Some(path) = &args.save_config {
        write_output(Some(path), &to_json(&cfg))?;
    }
    let (mut report, recovered) = run_experiment(&cfg)?;
    if let Some(truth) = reference(args.reference.as_deref())? {
        // An external reference replaces the simulated string of repetition 0.
        if let (Some(record), Some(r)) = (report.records.first_mut(), recovered.first().and_then(Option::as_ref)) {
            record.success = r.gaps == truth.gaps();
            record.edit_distance = Some(experiment::edit_distance(
                r.bits.to_string().as_bytes(),
                truth.to_string().as_bytes(),
            ));
            record.failing_stage = (!record.success).then(|| "mismatch".to_string());
            record.coarse_errors = coarse_errors(r.coarse.b.values(), truth.padded(cfg.l as u64).gaps(), cfg.delta);
            report.aggregate = Aggregate::of(&report.records);
        }
    }
    if let (Some(out), Some(Some(r))) = (cfg.out.as_deref(), recovered.first()) {
        write_output(Some(out), &string_file(&r.bits))?;
    }
    write_output(cfg.report.as_deref(), &to_json(&report))?;
    report_failures(&report);
    Ok(report.aggregate.successes == report.aggregate.repetitions)
}

fn reconstruct(args: ReconstructArgs) -> CliResult<()> {
    let ok = match &args.input {
        Some(input) => reconstruct_file(&args, input)?,
        None => reconstruct_simulated(&args)?,
    };
    if ok {
        Ok(())
    } else {
        Err(CliError::Failed("reconstruction failed".into()))
    }
}

fn sweep(args: SweepArgs) -> CliResult<()> {
    let base = ExperimentConfig {
        n: args.n,
        l: args.l[0],
        t: args.t,
        delta: args.delta[0],
        master_seed: args.seed,
        coarse_reps: args.coarse_reps,
        fine_traces: args.traces,
        t_traces: args.t_traces,
        c0: args.c0[0],
        log_base: args.log_base,
        repetitions: args.reps,
        min_success_fraction: 0.6,
        out: None,
        report: None,
    };
    let grid = sweep::Grid {
        deltas: args.delta,
        ls: args.l,
        c0s: args.c0,
        t: args.t,
    };
    let rows = sweep::run_sweep(&base, &grid, &args.out)?;
    log::info!("{} cells computed", rows.len());
    Ok(())
}

fn validate(args: ValidateArgs) -> CliResult<()> {
    let checks = match (&args.string, &args.suite) {
        (Some(path), _) => validate::validate_string(&read_string(path)?, args.l),
        (None, Some(suite)) => validate::run_suite(
            suite,
            &validate::SuiteOptions {
                delta: args.delta,
                runs: args.runs,
                seed: args.seed,
            },
        )?,
        (None, None) => return Err(CliError::Usage("a suite name or --string is required".into())),
    };
    let report = validate::ValidationReport::new(checks);
    write_output(args.out.as_deref(), &to_json(&report))?;
    if report.pass {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        Err(CliError::Failed(format!("failed checks: {}", failed.join(", "))))
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("SEPTRACE_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("SEPTRACE_THREADS={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Trace(a) => trace(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Sweep(a) => sweep(a),
        Command::Validate(a) => validate(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
