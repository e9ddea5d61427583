//! Cross-validation selection among competing regression procedures.
//!
//! The crate provides the candidate procedures (polynomial least squares,
//! the constant models, a GCV-tuned penalized spline and a local linear
//! smoother), the split schedules and selection rules of single-split,
//! averaging and voting cross validation, the exact multifold analysis of the
//! nested mean models, finite-sample diagnostics, and a seeded Monte Carlo
//! harness that tabulates selection frequencies.

pub mod cv;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod prop1;
pub mod rng;
pub mod scenario;

pub use cv::{
    cv_criterion, make_splits, run_selection, select_averaging, select_single, select_voting, Scheme, SchemeKind,
    SelectionOutcome, SelectionRule, SplitPlan, SplitSchedule,
};
pub use error::{Error, Result};
pub use estimators::{FittedModel, ProcedureKind, ProcedureSpec};
pub use rng::Stream;
pub use scenario::{Sample, Scenario};
