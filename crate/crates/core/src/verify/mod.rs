//! Manufactured-solution studies, invariant checks, growth audits and
//! structural-stability experiments for perturbed problem sequences.
//!
//! Operations that need several independent solves come in two forms: a plain
//! sequential one and a `*_with` variant that hands the batch of problems to a
//! caller-supplied runner, so a front end can solve them concurrently.

mod convex_suite;
mod growth;
mod invariants;
mod mms;
mod mosco;

use alloc::string::String;
use alloc::vec::Vec;

use crate::cascade::{self, CascadeParams, StageResult};
use crate::error::Result;
use crate::problem::ProblemSpec;

pub use convex_suite::{convex_suite, scalar_fixed_point_oracle, SUITE_EXPONENTS, SUITE_LAMBDAS};
pub use growth::{growth_audit, GrowthReport, GrowthRow, GROWTH_LABELS};
pub use invariants::{
    chain_rule_sum, corrupt, invariant_suite, negative_control, InvariantReport, NegativeControl,
};
pub use mms::{
    derived_forcing, mms_plan, mms_run, mms_run_with, ExactSolution, MmsLevel, MmsMode, MmsSpec,
    MmsTable,
};
pub use mosco::{
    mosco_experiment, mosco_experiment_with, mosco_instance, MoscoKind, MoscoRow,
    MoscoSequenceSpec, MoscoTable,
};

/// One named check: `value ≤ bound` passes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub note: Option<String>,
}

impl Check {
    pub fn new(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound,
            passed: value <= bound,
            note: None,
        }
    }

    pub fn failed(name: &str, note: String) -> Self {
        Check {
            name: name.into(),
            value: f64::NAN,
            bound: f64::NAN,
            passed: false,
            note: Some(note),
        }
    }
}

/// Solves every problem in turn with [`cascade::solve`].
pub fn solve_sequential(specs: &[ProblemSpec], params: &CascadeParams) -> Vec<Result<StageResult>> {
    specs.iter().map(|s| cascade::solve(s, params)).collect()
}
