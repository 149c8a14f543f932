//! Refined integro-local approximation for `P(S_n ∈ [x, x+Δ))` where `S_n` is a
//! sum of `n` i.i.d. standardized non-lattice variables, together with the
//! machinery needed to check it numerically:
//!
//! * [`dist_zoo`]: standardized test distributions with exact ch.f.'s and moments.
//! * [`edgeworth`]: the Stone term, the one-term refinement and the Edgeworth CDF.
//! * [`inversion`]: smoothed ch.f. inversion, sandwich brackets and region diagnostics.
//! * [`oracles`]: FFT convolution and Monte Carlo ground truth with error certificates.
//! * [`harness`]: sup-error sweeps, log-log rate fits and the atom-floor study.
//! * [`records`]: sweep configuration files and the CSV record format.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dist_zoo;
pub mod edgeworth;
pub mod error;
pub mod harness;
pub mod inversion;
pub mod oracles;
mod par;
pub mod records;

pub use dist_zoo::{builtin, CramerScan, DistributionSpec};
pub use edgeworth::{ApproxBreakdown, CumulantSet, IntervalQuery};
pub use error::{Error, Result};
pub use oracles::{ErrorKind, OracleEstimate};
