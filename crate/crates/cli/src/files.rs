//! String and trace file formats.
//!
//! A string file holds one line of ASCII `0`/`1`. A trace file starts with a
//! header line
//!
//! ```text
//! # n=<n> delta=<delta> seed=<seed> count=<N> [pad=<L>]
//! ```
//!
//! followed by exactly `N` lines, one trace each (possibly empty).

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use septrace::BitString;

use crate::error::{CliError, CliResult};

pub fn read_to_string(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Writes `contents` to `path` via a temporary file in the same directory,
/// or to stdout when `path` is `None`.
pub fn write_output(path: Option<&Path>, contents: &str) -> CliResult<()> {
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        return out
            .write_all(contents.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| CliError::io("<stdout>", e));
    };
    let file_name = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    std::fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn parse_string(path: &Path, text: &str) -> CliResult<BitString> {
    let mut lines = text.lines();
    let line = lines.next().unwrap_or("");
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(CliError::parse(path, "a string file must contain a single line"));
    }
    line.trim_end()
        .parse()
        .map_err(|e: septrace::Error| CliError::parse(path, e.to_string()))
}

pub fn read_string(path: &Path) -> CliResult<BitString> {
    parse_string(path, &read_to_string(path)?)
}

pub fn string_file(bits: &BitString) -> String {
    format!("{bits}\n")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceHeader {
    pub n: usize,
    pub delta: f64,
    pub seed: u64,
    pub count: usize,
    pub pad: Option<usize>,
}

impl fmt::Display for TraceHeader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "# n={} delta={} seed={} count={}",
            self.n, self.delta, self.seed, self.count
        )?;
        if let Some(pad) = self.pad {
            write!(f, " pad={pad}")?;
        }
        Ok(())
    }
}

impl TraceHeader {
    pub fn parse(path: &Path, line: &str) -> CliResult<Self> {
        let err = |m: String| CliError::parse(path, m);
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| err("trace file must start with a '#' header line".into()))?;
        let mut fields = BTreeMap::new();
        for item in body.split_whitespace() {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| err(format!("malformed header field {item:?}")))?;
            fields.insert(k, v);
        }
        fn get<T: std::str::FromStr>(
            fields: &BTreeMap<&str, &str>,
            key: &str,
            err: &dyn Fn(String) -> CliError,
        ) -> CliResult<Option<T>> {
            fields
                .get(key)
                .map(|v| v.parse().map_err(|_| err(format!("bad header value {key}={v}"))))
                .transpose()
        }
        let need = |key: &str| err(format!("header is missing {key}="));
        Ok(TraceHeader {
            n: get(&fields, "n", &err)?.ok_or_else(|| need("n"))?,
            delta: get(&fields, "delta", &err)?.ok_or_else(|| need("delta"))?,
            seed: get(&fields, "seed", &err)?.ok_or_else(|| need("seed"))?,
            count: get(&fields, "count", &err)?.ok_or_else(|| need("count"))?,
            pad: get(&fields, "pad", &err)?,
        })
    }
}

pub fn trace_file(header: &TraceHeader, traces: &[BitString]) -> String {
    let mut out = String::with_capacity(traces.iter().map(|t| t.len() + 1).sum::<usize>() + 64);
    out.push_str(&header.to_string());
    out.push('\n');
    for t in traces {
        out.push_str(&t.to_string());
        out.push('\n');
    }
    out
}

pub fn parse_traces(path: &Path, text: &str) -> CliResult<(TraceHeader, Vec<BitString>)> {
    let mut lines = text.lines();
    let header = TraceHeader::parse(path, lines.next().unwrap_or(""))?;
    let traces = lines
        .by_ref()
        .take(header.count)
        .enumerate()
        .map(|(i, l)| {
            l.trim_end()
                .parse()
                .map_err(|e: septrace::Error| CliError::parse(path, format!("trace {}: {e}", i + 1)))
        })
        .collect::<CliResult<Vec<BitString>>>()?;
    if traces.len() != header.count {
        return Err(CliError::parse(
            path,
            format!(
                "header announces {} traces but the file has {}",
                header.count,
                traces.len()
            ),
        ));
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(CliError::parse(
            path,
            format!("more than {} traces in the file", header.count),
        ));
    }
    Ok((header, traces))
}

pub fn read_traces(path: &Path) -> CliResult<(TraceHeader, Vec<BitString>)> {
    parse_traces(path, &read_to_string(path)?)
}
