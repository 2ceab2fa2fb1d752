//! Differencing of build logs.
//!
//! [`script::cidiff`] pairs the lines of a passing and a failing log and
//! labels every line as unchanged, updated, added, deleted, moved-unchanged
//! or moved-updated. [`script::lcs_diff`] is the classic line diff used as
//! its baseline, and [`baselines`] holds the flag-only approaches.

pub mod baselines;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod lcs;
pub mod log;
pub mod script;
pub mod seeds;
pub mod similarity;
pub mod synth;

pub use error::{Error, Result};
pub use log::Log;
pub use script::{cidiff, lcs_diff, ActionKind, EditScript};
pub use similarity::SimilarityParams;
