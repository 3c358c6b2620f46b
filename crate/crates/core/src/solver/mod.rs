//! Exact solver for the latency-constrained op selection program:
//!
//! ```text
//! minimize   sum_i delta_i(z_i)
//! subject to sum_i cost_i(z_i) <= budget
//!            exactly one op per layer
//!            overlap(z, p) <= overlap_limit   for every prior solution p
//! ```
//!
//! Branch-and-bound specialised to the multiple-choice knapsack structure,
//! bounded by the LP relaxation of the residual knapsack (see [`lp_bound`]).

mod bound;
mod frontier;
mod grid;
mod search;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{cost, objective, Budget, SearchInstance, Selection};

pub use bound::lp_bound;
pub use frontier::dominance_frontier;
pub use grid::CostGrid;

use bound::Problem;
use search::{SearchOutcome, SearchParams};

pub const DEFAULT_COST_SCALE: u64 = 1000;
pub const DEFAULT_OVERLAP_FRACTION: f64 = 0.7;
/// Upper end of the number of diverse solutions the CLI will search for.
pub const MAX_K: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub time_limit_s: f64,
    /// Integer cost units per millisecond.
    pub cost_scale: u64,
    /// Absolute objective gap at which a subtree may be abandoned; 0 proves optimality.
    pub gap_tolerance: f64,
    pub node_limit: Option<u64>,
    /// Worker threads; 0 means one per available core.
    pub threads: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            time_limit_s: 60.0,
            cost_scale: DEFAULT_COST_SCALE,
            gap_tolerance: 0.0,
            node_limit: None,
            threads: 1,
        }
    }
}

impl SolverConfig {
    fn check(&self) -> Result<()> {
        if !(self.time_limit_s > 0.0) {
            return Err(Error::InvalidInput(format!(
                "time_limit_s must be positive, got {}",
                self.time_limit_s
            )));
        }
        if self.cost_scale < 1 {
            return Err(Error::InvalidInput("cost_scale must be at least 1".into()));
        }
        if !(self.gap_tolerance >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "gap_tolerance must be non-negative, got {}",
                self.gap_tolerance
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> CostGrid {
        CostGrid::new(self.cost_scale)
    }

    fn resolved_threads(&self) -> usize {
        match self.threads {
            0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            n => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    Timeout,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Timeout => "timeout",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Empty when the status carries no solution.
    pub selection: Selection,
    pub objective: f64,
    pub cost_ms: f64,
    pub status: SolveStatus,
    pub gap: f64,
    pub nodes_explored: u64,
}

/// One solution as recorded in a report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportedSolution {
    pub selection: Selection,
    pub objective: f64,
    pub cost_ms: f64,
    pub status: SolveStatus,
    pub gap: f64,
}

impl From<&SolveResult> for ReportedSolution {
    fn from(r: &SolveResult) -> Self {
        Self {
            selection: r.selection.clone(),
            objective: r.objective,
            cost_ms: r.cost_ms,
            status: r.status,
            gap: r.gap,
        }
    }
}

/// Solutions of the K-diverse loop in the order they were found. Later
/// solutions may have larger objectives than earlier ones.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub instance: String,
    pub budget_ms: f64,
    pub overlap_limit: usize,
    pub solutions: Vec<ReportedSolution>,
    pub wall_time_s: f64,
}

/// Report plus the result of every iteration, including the one that ended the loop.
#[derive(Debug, Clone)]
pub struct KDiverseRun {
    pub report: SolveReport,
    pub iterations: Vec<SolveResult>,
}

impl KDiverseRun {
    /// Status of the iteration that stopped the loop early, if any.
    pub fn stopped_by(&self) -> Option<SolveStatus> {
        self.iterations
            .last()
            .map(|r| r.status)
            .filter(|s| !s.has_solution())
    }
}

/// `floor(fraction * n)` with a guard against representation error.
pub fn overlap_limit_for(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

fn check_inputs(
    instance: &SearchInstance,
    budget: Budget,
    prior: &[Selection],
    overlap_limit: usize,
    config: &SolverConfig,
) -> Result<()> {
    config.check()?;
    let violations = crate::model::validate_instance(instance);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    if budget.limit.is_nan() || budget.limit < 0.0 {
        return Err(Error::InvalidInput(format!("invalid budget {}", budget.limit)));
    }
    if overlap_limit > instance.num_layers() {
        return Err(Error::InvalidInput(format!(
            "overlap_limit {overlap_limit} exceeds layer count {}",
            instance.num_layers()
        )));
    }
    for p in prior {
        p.check(instance)?;
    }
    Ok(())
}

fn run_search(
    instance: &SearchInstance,
    budget: Budget,
    prior: &[Selection],
    overlap_limit: usize,
    config: &SolverConfig,
    trace: bool,
) -> Result<(SolveResult, SearchOutcome)> {
    check_inputs(instance, budget, prior, overlap_limit, config)?;
    let start = Instant::now();
    let deadline = start
        .checked_add(Duration::from_secs_f64(config.time_limit_s.min(1e9)))
        .unwrap_or(start + Duration::from_secs(u32::MAX as u64));
    let problem = Problem::new(instance, budget, config.grid());
    let priors: Vec<Vec<usize>> = prior.iter().map(|p| p.0.clone()).collect();
    let params = SearchParams {
        priors: &priors,
        overlap_limit,
        gap_tolerance: config.gap_tolerance,
        deadline,
        node_limit: config.node_limit,
        threads: config.resolved_threads(),
        trace,
    };
    let outcome = search::run(&problem, &params);

    let result = match &outcome.incumbent {
        None => SolveResult {
            selection: Selection::new(Vec::new()),
            objective: f64::NAN,
            cost_ms: f64::NAN,
            status: if outcome.aborted {
                SolveStatus::Timeout
            } else {
                SolveStatus::Infeasible
            },
            gap: f64::INFINITY,
            nodes_explored: outcome.nodes,
        },
        Some(c) => {
            let selection = Selection::new(c.choices.clone());
            let obj = objective(instance, &selection)?;
            let gap = (obj - outcome.open_bound).max(0.0);
            let proven = !outcome.aborted && outcome.open_bound == f64::INFINITY;
            let (status, gap) = if proven || gap == 0.0 {
                (SolveStatus::Optimal, 0.0)
            } else {
                (SolveStatus::Feasible, gap)
            };
            SolveResult {
                objective: obj,
                cost_ms: cost(instance, &selection)?,
                selection,
                status,
                gap,
                nodes_explored: outcome.nodes,
            }
        }
    };
    Ok((result, outcome))
}

/// One iteration of the K-diverse loop: the best selection within `budget`
/// whose overlap with each of `prior` is at most `overlap_limit`.
///
/// Equal-objective optima are ordered by lower cost (in grid units), then by
/// the lexicographically smallest choice vector. Infeasibility and timeouts
/// are statuses, not errors.
pub fn solve(
    instance: &SearchInstance,
    budget: Budget,
    prior: &[Selection],
    overlap_limit: usize,
    config: &SolverConfig,
) -> Result<SolveResult> {
    run_search(instance, budget, prior, overlap_limit, config, false).map(|(r, _)| r)
}

/// Every node visited by a single-threaded search with its bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchTraceNode {
    pub fixed: Vec<Option<usize>>,
    pub bound: f64,
}

/// [`solve`] that also records the search tree. Forces one thread.
pub fn solve_traced(
    instance: &SearchInstance,
    budget: Budget,
    prior: &[Selection],
    overlap_limit: usize,
    config: &SolverConfig,
) -> Result<(SolveResult, Vec<SearchTraceNode>)> {
    let config = SolverConfig {
        threads: 1,
        ..config.clone()
    };
    let (result, outcome) = run_search(instance, budget, prior, overlap_limit, &config, true)?;
    let trace = outcome
        .trace
        .into_iter()
        .map(|t| SearchTraceNode {
            fixed: t.fixed,
            bound: t.bound,
        })
        .collect();
    Ok((result, trace))
}

/// Solves `k` times, each round constrained against all earlier solutions.
/// Stops at the first round without a solution.
pub fn solve_k_diverse(
    instance: &SearchInstance,
    budget: Budget,
    k: usize,
    overlap_fraction: f64,
    config: &SolverConfig,
) -> Result<SolveReport> {
    solve_k_diverse_run(instance, budget, k, overlap_fraction, config, |_, _| {}).map(|r| r.report)
}

/// [`solve_k_diverse`] with a callback after each round and per-round results.
pub fn solve_k_diverse_run<F>(
    instance: &SearchInstance,
    budget: Budget,
    k: usize,
    overlap_fraction: f64,
    config: &SolverConfig,
    mut on_round: F,
) -> Result<KDiverseRun>
where
    F: FnMut(usize, &SolveResult),
{
    if k < 1 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&overlap_fraction) {
        return Err(Error::InvalidInput(format!(
            "overlap fraction must be in [0, 1], got {overlap_fraction}"
        )));
    }
    let start = Instant::now();
    let overlap_limit = overlap_limit_for(overlap_fraction, instance.num_layers());
    let mut found: Vec<Selection> = Vec::new();
    let mut iterations = Vec::new();
    let mut solutions = Vec::new();

    for round in 0..k {
        let r = solve(instance, budget, &found, overlap_limit, config)?;
        on_round(round, &r);
        let keep_going = r.status.has_solution();
        if keep_going {
            found.push(r.selection.clone());
            solutions.push(ReportedSolution::from(&r));
        }
        iterations.push(r);
        if !keep_going {
            break;
        }
    }

    Ok(KDiverseRun {
        report: SolveReport {
            instance: instance.name.clone(),
            budget_ms: budget.limit,
            overlap_limit,
            solutions,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        iterations,
    })
}
