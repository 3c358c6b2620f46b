//! Latency-constrained operation search.
//!
//! Given per-layer tables of candidate ops (loss delta relative to the teacher
//! op, latency cost), find replacement architectures that minimise the summed
//! loss delta under a latency budget, optionally K of them with bounded
//! pairwise overlap.
//!
//! - [`model`]: instance and selection types, objective/cost/overlap
//! - [`lut_io`]: JSON instance and report files, LUT aggregation, pool restriction
//! - [`solver`]: exact branch-and-bound and the K-diverse loop
//! - [`proxy_eval`]: ranking, Kendall tau-b, op histograms
//! - [`baselines`]: seeded random search under the budget
//! - [`synthetic`]: seeded random instances

pub mod baselines;
pub mod error;
pub mod lut_io;
pub mod model;
pub mod proxy_eval;
pub mod solver;
pub mod synthetic;

pub use error::{Error, Result, Violation};
pub use model::{
    budget_from_ratio, cost, objective, overlap, validate_instance, Budget, CandidateOp, LayerTable,
    SearchInstance, Selection,
};
pub use solver::{solve, solve_k_diverse, SolveReport, SolveResult, SolveStatus, SolverConfig};
