//! WebAssembly entry points for the browser demo. Every export returns a
//! JSON string; errors surface as JavaScript exceptions.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use septrace::alignment::align_path;
use septrace::bits::random_separated;
use septrace::channel::sample_runs;
use septrace::estimation::{accepted_matches, reconstruct, SimulatedSource};
use septrace::oracle::enumerate_outcomes;
use septrace::rng::{mix, stream};
use septrace::{AlignConfig, ChannelParams, GapEstimates, OracleConfig, Outcome, PipelineConfig, SeparatedString};

/// Largest instance the behind-probability curve enumerates.
pub const MAX_CURVE_GAPS: usize = 16;

fn parse_gaps(text: &str) -> septrace::Result<Vec<u64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| septrace::Error::InvalidParameter(format!("{s:?} is not a gap length")))
        })
        .collect()
}

/// One trace of `x`, the forward alignment path against `b = (1 - delta) a`,
/// and which runs pass the forward/backward check.
pub fn align_view_json(x: &str, delta: f64, seed: u64, c0: f64) -> septrace::Result<Value> {
    let bits = x.trim().parse()?;
    let x = SeparatedString::from_bits(&bits);
    let params = ChannelParams::new(delta, seed)?;
    let sample = sample_runs(&x, &params, &mut stream(seed, 0));
    let b = GapEstimates::new(x.gaps().iter().map(|&g| (1.0 - delta) * g as f64).collect())?;
    let cfg = AlignConfig::natural(c0, x.len().max(2))?;
    let path = align_path(&sample.profile, &b, &cfg);
    let accepted = accepted_matches(&sample.profile, x.t(), &b, &b.reversed(), &cfg);
    Ok(json!({
        "gaps": x.gaps(),
        "trace_gaps": sample.profile.gaps(),
        "kept_ones": sample.kept_ones(),
        "path": path.values(),
        "stalled": path.stalled(),
        "accepted": accepted,
        "threshold_scale": cfg.scale(),
    }))
}

/// Exact probability of finishing at least one step behind, and of each
/// outcome, over a log-spaced grid of deletion probabilities.
pub fn behind_curve_json(gaps: &str, points: usize, c0: f64) -> septrace::Result<Value> {
    let a = parse_gaps(gaps)?;
    if a.is_empty() || a.contains(&0) {
        return Err(septrace::Error::InvalidParameter("gaps must be positive".into()));
    }
    let b = GapEstimates::from_counts(&a);
    let n = a.iter().sum::<u64>() as usize + a.len();
    let cfg = AlignConfig::natural(c0, n.max(2))?;
    let ocfg = OracleConfig {
        k_window: a.len(),
        max_m: MAX_CURVE_GAPS,
    };
    let base = enumerate_outcomes(&a, &b, 0.0, &cfg, &ocfg)?;
    let points = points.clamp(2, 200);
    let (lo, hi) = (1e-4f64.ln(), 0.5f64.ln());
    let curve: Vec<Value> = (0..points)
        .map(|i| {
            let delta = (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp();
            let d = base.at_delta(delta);
            json!({
                "delta": delta,
                "behind": d.behind_at_least(1),
                "exact": d.probability(Outcome::Exact),
                "failed": d.probability(Outcome::Failed),
            })
        })
        .collect();
    Ok(json!({ "m": a.len(), "curve": curve }))
}

/// Full pipeline on a random instance.
pub fn reconstruct_json(n: usize, l: usize, t: usize, delta: f64, seed: u64, traces: usize) -> septrace::Result<Value> {
    let x = random_separated(n, l, t, &mut stream(seed, 0))?;
    let cfg = PipelineConfig {
        align: AlignConfig::natural(1.0, (n + 2 * l).max(2))?,
        delta,
        pad: l,
        coarse_reps: 64,
        fine_traces: traces.max(1),
        t_traces: traces.clamp(1, 10_000),
        min_success_fraction: 0.6,
        expected_len: Some(n),
    };
    let mut source = SimulatedSource::new(&x, l, ChannelParams::new(delta, mix(seed, 1))?);
    let (recovered, error, t_est, accepted) = match reconstruct(&mut source, &cfg) {
        Ok(r) => (Some(r.gaps), None, Some(r.t), r.fine.accepted),
        Err(e) => (None, Some(e.to_string()), None, Vec::new()),
    };
    Ok(json!({
        "gaps": x.gaps(),
        "recovered": recovered,
        "success": recovered.as_deref() == Some(x.gaps()),
        "error": error,
        "t_estimated": t_est,
        "accepted": accepted,
        "traces_drawn": source.drawn(),
    }))
}

fn to_js(result: septrace::Result<Value>) -> Result<String, JsError> {
    result.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn align_view(x: &str, delta: f64, seed: u32, c0: f64) -> Result<String, JsError> {
    to_js(align_view_json(x, delta, seed.into(), c0))
}

#[wasm_bindgen]
pub fn behind_curve(gaps: &str, points: usize, c0: f64) -> Result<String, JsError> {
    to_js(behind_curve_json(gaps, points, c0))
}

#[wasm_bindgen]
pub fn reconstruct_instance(
    n: usize,
    l: usize,
    t: usize,
    delta: f64,
    seed: u32,
    traces: usize,
) -> Result<String, JsError> {
    to_js(reconstruct_json(n, l, t, delta, seed.into(), traces))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn align_view_without_noise() {
        let v = align_view_json("0010000100000100", 0.0, 1, 1.0).unwrap();
        assert_eq!(v["trace_gaps"], json!([2, 4, 5, 2]));
        assert_eq!(v["path"], json!([0, 1, 2, 3, 4]));
        assert_eq!(v["accepted"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn behind_curve_is_monotone_on_chain() {
        let v = behind_curve_json("10000, 100, 100, 100, 100, 100", 20, 1.0).unwrap();
        let curve = v["curve"].as_array().unwrap();
        assert_eq!(curve.len(), 20);
        let behind: Vec<f64> = curve.iter().map(|p| p["behind"].as_f64().unwrap()).collect();
        assert!(behind.windows(2).all(|w| w[0] <= w[1] + 1e-15));
        assert!(behind[0] > 0.0 && behind[0] < 2e-4);
    }

    #[test]
    fn behind_curve_rejects_bad_input() {
        assert!(behind_curve_json("3, x", 5, 1.0).is_err());
        assert!(behind_curve_json("3, 0", 5, 1.0).is_err());
        assert!(behind_curve_json(&vec!["5"; 17].join(","), 5, 1.0).is_err());
    }

    #[test]
    fn small_reconstruction() {
        let v = reconstruct_json(3_000, 250, 8, 0.05, 3, 20_000).unwrap();
        assert_eq!(v["success"], true, "{v}");
        assert!(reconstruct_json(10, 4, 3, 0.0, 0, 10)
            .unwrap_err()
            .to_string()
            .contains("infeasible"));
    }
}
