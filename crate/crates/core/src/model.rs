//! Problem and solution types shared by every other module.
//!
//! Scores are stored as loss deltas relative to the teacher op of each layer,
//! so the teacher entry is always zero and the all-teacher selection has
//! objective exactly `0`. Costs are latencies in milliseconds.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

/// Unit of every `cost` field in the data model.
pub const COST_UNIT: &str = "ms";

/// Tolerance on the teacher entry's `score_delta`.
pub const TEACHER_DELTA_TOL: f64 = 1e-9;

/// One candidate replacement for a teacher layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateOp {
    pub op_id: String,
    pub score_delta: f64,
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

impl CandidateOp {
    pub fn new(op_id: impl Into<String>, score_delta: f64, cost: f64) -> Self {
        Self {
            op_id: op_id.into(),
            score_delta,
            cost,
            tags: Vec::new(),
        }
    }

    pub fn with_tags<I, S>(mut self, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.tags = tags.into_iter().map(Into::into).collect();
        self
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t == tag)
    }
}

/// Candidate ops for one teacher layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTable {
    pub layer_index: usize,
    pub ops: Vec<CandidateOp>,
    pub teacher_index: usize,
}

impl LayerTable {
    pub fn teacher(&self) -> &CandidateOp {
        &self.ops[self.teacher_index]
    }

    pub fn min_cost(&self) -> f64 {
        self.ops.iter().map(|o| o.cost).fold(f64::INFINITY, f64::min)
    }

    pub fn position(&self, op_id: &str) -> Option<usize> {
        self.ops.iter().position(|o| o.op_id == op_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchInstance {
    pub name: String,
    pub layers: Vec<LayerTable>,
}

impl SearchInstance {
    /// Builds an instance and rejects it if any invariant fails.
    pub fn new(name: impl Into<String>, layers: Vec<LayerTable>) -> Result<Self> {
        let instance = Self {
            name: name.into(),
            layers,
        };
        let violations = validate_instance(&instance);
        if violations.is_empty() {
            Ok(instance)
        } else {
            Err(Error::Validation(violations))
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Total LUT latency of the unmodified teacher.
    pub fn teacher_cost(&self) -> f64 {
        self.layers.iter().map(|l| l.teacher().cost).sum()
    }

    pub fn teacher_selection(&self) -> Selection {
        Selection::new(self.layers.iter().map(|l| l.teacher_index).collect())
    }

    /// Lower bound on the cost of any selection.
    pub fn min_total_cost(&self) -> f64 {
        self.layers.iter().map(LayerTable::min_cost).sum()
    }

    /// Number of candidate ops per layer.
    pub fn pool_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.ops.len()).collect()
    }

    pub fn op(&self, layer: usize, index: usize) -> &CandidateOp {
        &self.layers[layer].ops[index]
    }
}

/// One architecture: the chosen op index at every layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Selection(pub Vec<usize>);

impl Selection {
    pub fn new(choices: Vec<usize>) -> Self {
        Self(choices)
    }

    pub fn choices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks one-choice-per-layer and index ranges against `instance`.
    pub fn check(&self, instance: &SearchInstance) -> Result<()> {
        if self.0.len() != instance.layers.len() {
            return Err(Error::LengthMismatch {
                expected: instance.layers.len(),
                got: self.0.len(),
            });
        }
        for (layer, (&index, table)) in self.0.iter().zip(&instance.layers).enumerate() {
            if index >= table.ops.len() {
                return Err(Error::InvalidSelection {
                    layer,
                    index,
                    ops: table.ops.len(),
                });
            }
        }
        Ok(())
    }

    /// Space-separated choice list, used in CSV output.
    pub fn to_compact_string(&self) -> String {
        self.0
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl From<Vec<usize>> for Selection {
    fn from(choices: Vec<usize>) -> Self {
        Self(choices)
    }
}

/// Latency budget in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub limit: f64,
}

impl Budget {
    pub fn new(limit: f64) -> Result<Self> {
        if limit.is_nan() || limit < 0.0 {
            return Err(Error::InvalidInput(format!(
                "budget must be non-negative, got {limit}"
            )));
        }
        Ok(Self { limit })
    }

    pub fn unlimited() -> Self {
        Self {
            limit: f64::INFINITY,
        }
    }
}

/// Returns every invariant violation in `instance`; empty means valid.
pub fn validate_instance(instance: &SearchInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    if instance.layers.is_empty() {
        out.push(Violation {
            layer: None,
            field: "layers",
            message: "instance has no layers".into(),
        });
        return out;
    }

    let mut teacher_ok = true;
    for (pos, layer) in instance.layers.iter().enumerate() {
        let at = Some(pos);
        if layer.layer_index != pos {
            out.push(Violation {
                layer: at,
                field: "layer_index",
                message: format!("expected {pos}, found {}", layer.layer_index),
            });
        }
        if layer.ops.is_empty() {
            out.push(Violation {
                layer: at,
                field: "ops",
                message: "no candidate ops".into(),
            });
            teacher_ok = false;
            continue;
        }
        if layer.teacher_index >= layer.ops.len() {
            out.push(Violation {
                layer: at,
                field: "teacher_index",
                message: format!(
                    "index {} out of range ({} ops)",
                    layer.teacher_index,
                    layer.ops.len()
                ),
            });
            teacher_ok = false;
        } else {
            let delta = layer.ops[layer.teacher_index].score_delta;
            if !(delta.abs() <= TEACHER_DELTA_TOL) {
                out.push(Violation {
                    layer: at,
                    field: "score_delta",
                    message: format!(
                        "teacher op {:?} has score_delta {delta}, expected 0",
                        layer.ops[layer.teacher_index].op_id
                    ),
                });
            }
        }

        let mut seen = HashSet::new();
        for op in &layer.ops {
            if !seen.insert(op.op_id.as_str()) {
                out.push(Violation {
                    layer: at,
                    field: "op_id",
                    message: format!("duplicate op_id {:?}", op.op_id),
                });
            }
            if !op.score_delta.is_finite() {
                out.push(Violation {
                    layer: at,
                    field: "score_delta",
                    message: format!("op {:?} has non-finite score_delta", op.op_id),
                });
            }
            if !(op.cost.is_finite() && op.cost >= 0.0) {
                out.push(Violation {
                    layer: at,
                    field: "cost",
                    message: format!("op {:?} has invalid cost {}", op.op_id, op.cost),
                });
            }
        }
    }

    if teacher_ok {
        let total = instance.teacher_cost();
        if !(total > 0.0) {
            out.push(Violation {
                layer: None,
                field: "cost",
                message: format!("teacher cost must be positive, got {total}"),
            });
        }
    }
    out
}

/// Proxy objective: sum of the chosen ops' loss deltas, accumulated in layer order.
pub fn objective(instance: &SearchInstance, sel: &Selection) -> Result<f64> {
    sel.check(instance)?;
    Ok(objective_unchecked(instance, sel.choices()))
}

pub(crate) fn objective_unchecked(instance: &SearchInstance, choices: &[usize]) -> f64 {
    instance
        .layers
        .iter()
        .zip(choices)
        .map(|(l, &j)| l.ops[j].score_delta)
        .sum()
}

/// Total latency of a selection in milliseconds.
pub fn cost(instance: &SearchInstance, sel: &Selection) -> Result<f64> {
    sel.check(instance)?;
    Ok(cost_unchecked(instance, sel.choices()))
}

pub(crate) fn cost_unchecked(instance: &SearchInstance, choices: &[usize]) -> f64 {
    instance
        .layers
        .iter()
        .zip(choices)
        .map(|(l, &j)| l.ops[j].cost)
        .sum()
}

/// Number of layers where both selections chose the same op index.
pub fn overlap(a: &Selection, b: &Selection) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.0.iter().zip(&b.0).filter(|(x, y)| x == y).count())
}

/// Budget as a fraction of the teacher's LUT latency, e.g. `0.25` for a 4x target speedup.
pub fn budget_from_ratio(instance: &SearchInstance, ratio: f64) -> Result<Budget> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidRatio(ratio));
    }
    Ok(Budget {
        limit: ratio * instance.teacher_cost(),
    })
}
