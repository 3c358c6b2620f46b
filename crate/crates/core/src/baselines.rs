//! Random architectures under a latency budget.
//!
//! Each sample draws every layer's op uniformly and rejects draws over the
//! budget. Sample `i` uses its own ChaCha8 stream seeded with `seed ^ i`
//! (`rand_core`'s `seed_from_u64`), so serial and parallel runs produce the
//! same population. Feasibility uses the solver's cost grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{cost_unchecked, objective_unchecked, Budget, SearchInstance, Selection};
use crate::solver::{CostGrid, DEFAULT_COST_SCALE};

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub seed: u64,
    pub max_attempts_per_sample: u64,
    pub cost_scale: u64,
}

impl SamplerConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_attempts_per_sample: 10_000,
            cost_scale: DEFAULT_COST_SCALE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationEntry {
    pub sample_index: usize,
    pub selection: Selection,
    pub objective: f64,
    pub cost_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomSearch {
    pub best: PopulationEntry,
    /// Accepted samples in index order.
    pub population: Vec<PopulationEntry>,
    /// Samples that hit the attempt limit.
    pub failures: usize,
}

impl RandomSearch {
    pub fn objectives(&self) -> Vec<f64> {
        self.population.iter().map(|e| e.objective).collect()
    }

    /// CSV with header `sample_index,objective,cost_ms`.
    pub fn population_csv(&self) -> String {
        let mut out = String::from("sample_index,objective,cost_ms\n");
        for e in &self.population {
            out.push_str(&format!("{},{},{}\n", e.sample_index, e.objective, e.cost_ms));
        }
        out
    }
}

fn check(instance: &SearchInstance, config: &SamplerConfig) -> Result<()> {
    if config.max_attempts_per_sample < 1 {
        return Err(Error::InvalidInput("max_attempts_per_sample must be at least 1".into()));
    }
    if config.cost_scale < 1 {
        return Err(Error::InvalidInput("cost_scale must be at least 1".into()));
    }
    let violations = crate::model::validate_instance(instance);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    Ok(())
}

fn draw(instance: &SearchInstance, units: &[Vec<i64>], budget: i64, seed: u64, max: u64) -> Result<Selection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut choices = vec![0usize; instance.num_layers()];
    for _ in 0..max {
        let mut total = 0i64;
        for (i, layer) in instance.layers.iter().enumerate() {
            let j = rng.gen_range(0..layer.ops.len());
            choices[i] = j;
            total += units[i][j];
        }
        if total <= budget {
            return Ok(Selection::new(choices));
        }
    }
    Err(Error::SamplingFailure { attempts: max })
}

fn unit_costs(instance: &SearchInstance, grid: CostGrid) -> Vec<Vec<i64>> {
    instance
        .layers
        .iter()
        .map(|l| l.ops.iter().map(|o| grid.units(o.cost)).collect())
        .collect()
}

/// One uniformly drawn selection within `budget`, retried until it fits.
pub fn sample_feasible(instance: &SearchInstance, budget: Budget, config: &SamplerConfig) -> Result<Selection> {
    check(instance, config)?;
    let grid = CostGrid::new(config.cost_scale);
    let units = unit_costs(instance, grid);
    draw(
        instance,
        &units,
        grid.budget_units(budget.limit),
        config.seed,
        config.max_attempts_per_sample,
    )
}

/// `n_samples` independent draws; the best is picked with the solver's
/// tie-break (objective, cost units, choices).
pub fn random_search(
    instance: &SearchInstance,
    budget: Budget,
    n_samples: usize,
    config: &SamplerConfig,
) -> Result<RandomSearch> {
    check(instance, config)?;
    if n_samples < 1 {
        return Err(Error::InvalidInput("n_samples must be at least 1".into()));
    }
    let grid = CostGrid::new(config.cost_scale);
    let units = unit_costs(instance, grid);
    let budget_units = grid.budget_units(budget.limit);

    let draws: Vec<Result<Selection>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            draw(
                instance,
                &units,
                budget_units,
                config.seed ^ i as u64,
                config.max_attempts_per_sample,
            )
        })
        .collect();

    let mut population = Vec::with_capacity(n_samples);
    let mut failures = 0;
    for (i, d) in draws.into_iter().enumerate() {
        match d {
            Ok(selection) => population.push(PopulationEntry {
                sample_index: i,
                objective: objective_unchecked(instance, selection.choices()),
                cost_ms: cost_unchecked(instance, selection.choices()),
                selection,
            }),
            Err(Error::SamplingFailure { .. }) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    if population.is_empty() {
        return Err(Error::SamplingFailure {
            attempts: config.max_attempts_per_sample * n_samples as u64,
        });
    }

    let key_cost = |e: &PopulationEntry| -> i64 {
        e.selection
            .choices()
            .iter()
            .enumerate()
            .map(|(i, &j)| units[i][j])
            .sum()
    };
    let best = population
        .iter()
        .min_by(|a, b| {
            a.objective
                .total_cmp(&b.objective)
                .then(key_cost(a).cmp(&key_cost(b)))
                .then_with(|| a.selection.cmp(&b.selection))
        })
        .cloned()
        .expect("non-empty population");

    Ok(RandomSearch {
        best,
        population,
        failures,
    })
}
