//! Trace reconstruction for L-separated binary strings.
//!
//! A string is *L-separated* when every pair of consecutive ones has at
//! least `L` zeros between them. Such a string is fully described by its
//! run lengths `a_0, ..., a_t` (see [`SeparatedString`]). The crate provides
//!
//! - the deletion channel and trace sampling ([`channel`]),
//! - the left-to-right alignment procedure and the abstract alignment
//!   process used to analyse it ([`alignment`]),
//! - coarse (median) and fine (forward/backward cross-checked averaging)
//!   gap estimation and the end-to-end reconstruction ([`estimation`]),
//! - an exact enumeration oracle for alignment outcome probabilities
//!   together with Catalan arithmetic ([`oracle`]).
//!
//! All randomness flows through [`rng::stream`], so every experiment is
//! reproducible from a single master seed.

pub mod alignment;
pub mod bits;
pub mod channel;
mod error;
pub mod estimation;
pub mod oracle;
mod par;
pub mod rng;

pub use alignment::{AlignConfig, AlignOutcome, GapEstimates, LogBase, Outcome, ProcessRun, Reach};
pub use bits::{BitString, PrefixSums, SeparatedString};
pub use channel::{ChannelParams, RunSample, Trace, TraceGapProfile};
pub use error::{Error, Result};
pub use estimation::{PipelineConfig, Reconstruction, TraceSource};
pub use oracle::{BehindDistribution, OracleConfig};

/// Worst-case deletion probability for which the asymptotic guarantees are
/// stated. Larger values are allowed but logged.
pub const DELTA_BOUND: f64 = 1.0 / 3.0e6;
