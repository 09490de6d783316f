//! Exact evaluation and verification of information-theoretic
//! generalization bounds on finite learning problems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod golden;
pub mod measures;
pub mod numeric;
pub mod prob;
pub mod problem;
pub mod verify;

pub use bounds::{evaluate, Analysis, BoundError, BoundId, BoundParams, BoundQuery, BoundResult};
pub use measures::{InfoProfile, MeasureError, MeasureReport};
pub use prob::{Alphabet, FiniteDistribution, JointModel, PosteriorKernel, ProbError};
pub use problem::{LearningProblem, ProblemError, ProblemSpec, Setup};
pub use verify::{CoverageReport, McEstimate, Verifier, VerifyError};
