//! Seeded random instances for tests, benchmarks and demos.
//!
//! Layer `i` holds `teacher` (delta 0, cost in `[1, 10)` ms), `identity`
//! (near-zero cost) and `ops - 2` generic ops whose cost is a uniform fraction
//! of the teacher's and whose delta is uniform in `[0, 1)`. Generic ops are
//! tagged alternately `efn` / `vit`. Costs are rounded to whole microseconds,
//! the resolution of the default solver cost grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{CandidateOp, LayerTable, SearchInstance};

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub layers: usize,
    /// Ops per layer including teacher and identity.
    pub ops: usize,
    /// Upper end of generic op cost as a multiple of the teacher cost.
    pub max_cost_ratio: f64,
    /// Fraction of generic ops whose delta is drawn from `[-0.1, 0)` instead.
    pub negative_fraction: f64,
}

impl SyntheticConfig {
    pub fn new(layers: usize, ops: usize) -> Self {
        Self {
            layers,
            ops,
            max_cost_ratio: 1.2,
            negative_fraction: 0.0,
        }
    }
}

pub fn random_instance(cfg: &SyntheticConfig, seed: u64) -> SearchInstance {
    assert!(cfg.layers >= 1 && cfg.ops >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = (0..cfg.layers)
        .map(|i| {
            let teacher_cost = micros(rng.gen_range(1.0..10.0));
            let mut ops = vec![CandidateOp::new("teacher", 0.0, teacher_cost)];
            if cfg.ops >= 2 {
                ops.push(
                    CandidateOp::new("identity", rng.gen_range(0.05..1.0), micros(rng.gen_range(0.005..0.05)))
                        .with_tags(["skip"]),
                );
            }
            for j in 2..cfg.ops {
                let cost = micros(teacher_cost * rng.gen_range(0.0..cfg.max_cost_ratio));
                let delta = if rng.gen_bool(cfg.negative_fraction) {
                    rng.gen_range(-0.1..0.0)
                } else {
                    rng.gen_range(0.0..1.0)
                };
                let tag = if j % 2 == 1 { "efn" } else { "vit" };
                ops.push(CandidateOp::new(format!("op{j}"), delta, cost).with_tags([tag]));
            }
            LayerTable {
                layer_index: i,
                ops,
                teacher_index: 0,
            }
        })
        .collect();
    SearchInstance::new(format!("synthetic-n{}-m{}-s{seed}", cfg.layers, cfg.ops), layers)
        .expect("generator emits valid instances")
}

fn micros(ms: f64) -> f64 {
    (ms * 1000.0).round() / 1000.0
}
