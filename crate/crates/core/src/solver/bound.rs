//! LP relaxation bound for the residual multiple-choice knapsack.
//!
//! Each free layer starts at its cheapest hull point; hull segments from all
//! free layers are then taken in order of steepest delta decrease per cost unit
//! until the residual budget runs out, the last one fractionally. Overlap
//! constraints are dropped, which can only lower the bound.
//!
//! Inside the search the bound may also be given ops that are forbidden at
//! free layers (the op of a prior solution whose overlap allowance is used
//! up). Layers whose hull touches a forbidden op get a hull rebuilt from the
//! allowed ops; this is implied by the constraints, so it stays admissible.

use std::cmp::Ordering;

use super::frontier::{frontier, lower_hull};
use super::grid::CostGrid;
use crate::model::{Budget, SearchInstance, Selection};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Segment {
    pub layer: usize,
    pub cost: i64,
    pub delta: f64,
}

/// Instance preprocessed onto the cost grid.
#[derive(Debug)]
pub(crate) struct Problem {
    pub cost: Vec<Vec<i64>>,
    pub delta: Vec<Vec<f64>>,
    pub min_cost: Vec<i64>,
    /// Ops of each layer by ascending delta, ties by index.
    pub child_order: Vec<Vec<usize>>,
    /// Hull op indices per layer, cheapest first.
    pub hull: Vec<Vec<usize>>,
    /// All hull segments, steepest first.
    pub segments: Vec<Segment>,
    pub on_hull: Vec<Vec<bool>>,
    /// Ops of each layer by (cost, delta, index).
    pub by_cost: Vec<Vec<usize>>,
    pub budget: i64,
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LpBound {
    pub value: f64,
    /// Layer left fractional by the greedy, with its fill fraction in (0, 1).
    pub fractional: Option<(usize, f64)>,
}

impl LpBound {
    pub const INFEASIBLE: LpBound = LpBound {
        value: f64::INFINITY,
        fractional: None,
    };
}

impl Problem {
    pub fn new(instance: &SearchInstance, budget: Budget, grid: CostGrid) -> Self {
        let n = instance.layers.len();
        let mut cost = Vec::with_capacity(n);
        let mut delta = Vec::with_capacity(n);
        let mut min_cost = Vec::with_capacity(n);
        let mut child_order = Vec::with_capacity(n);
        let mut hull = Vec::with_capacity(n);
        let mut segments = Vec::new();
        let mut on_hull = Vec::with_capacity(n);
        let mut by_cost = Vec::with_capacity(n);
        let mut scale = 1.0f64;

        for (i, layer) in instance.layers.iter().enumerate() {
            let c: Vec<i64> = layer.ops.iter().map(|o| grid.units(o.cost)).collect();
            let d: Vec<f64> = layer.ops.iter().map(|o| o.score_delta).collect();
            let mut order: Vec<usize> = (0..d.len()).collect();
            order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
            let h = lower_hull(&frontier(&c, &d), &c, &d);
            segments.extend(hull_segments(i, &h, &c, &d));
            let mut flags = vec![false; c.len()];
            for &j in &h {
                flags[j] = true;
            }
            on_hull.push(flags);
            let mut bc: Vec<usize> = (0..c.len()).collect();
            bc.sort_by(|&a, &b| c[a].cmp(&c[b]).then(d[a].total_cmp(&d[b])).then(a.cmp(&b)));
            by_cost.push(bc);
            scale += d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            min_cost.push(*c.iter().min().expect("validated layers are non-empty"));
            cost.push(c);
            delta.push(d);
            child_order.push(order);
            hull.push(h);
        }

        segments.sort_by(steepest_first);

        Self {
            cost,
            delta,
            min_cost,
            child_order,
            hull,
            segments,
            on_hull,
            by_cost,
            budget: grid.budget_units(budget.limit),
            eps: 1e-9 * scale,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.cost.len()
    }

    /// Bound over all completions of `fixed` within the budget.
    pub fn bound(&self, fixed: &[Option<usize>]) -> LpBound {
        self.bound_excluding(fixed, &[])
    }

    /// Rebuilt hulls for free layers whose hull touches a forbidden op.
    /// `forbidden` is sorted by layer. `None` if some layer has no allowed op.
    fn restrict(&self, fixed: &[Option<usize>], forbidden: &[(usize, usize)]) -> Option<Vec<Restricted>> {
        let mut out = Vec::new();
        for group in forbidden.chunk_by(|a, b| a.0 == b.0) {
            let layer = group[0].0;
            if fixed[layer].is_some() || !group.iter().any(|&(_, j)| self.on_hull[layer][j]) {
                continue;
            }
            let banned = |j: usize| group.iter().any(|&(_, f)| f == j);
            let (c, d) = (&self.cost[layer], &self.delta[layer]);
            let mut front = Vec::new();
            let mut best = f64::INFINITY;
            for &j in &self.by_cost[layer] {
                if !banned(j) && d[j] < best {
                    best = d[j];
                    front.push(j);
                }
            }
            if front.is_empty() {
                return None;
            }
            let hull = lower_hull(&front, c, d);
            let mut segments = hull_segments(layer, &hull, c, d);
            segments.sort_by(steepest_first);
            out.push(Restricted { layer, hull, segments });
        }
        Some(out)
    }

    /// Greedy over free layers; calls `take` for each fully taken segment.
    /// Returns the LP value and the fractional layer, or `None` when even the
    /// cheapest completion is over budget.
    fn greedy(
        &self,
        fixed: &[Option<usize>],
        restricted: &[Restricted],
        mut take: impl FnMut(usize),
    ) -> Option<(f64, Option<(usize, f64)>)> {
        let start = |i: usize| -> usize {
            match restricted.iter().find(|r| r.layer == i) {
                Some(r) => r.hull[0],
                None => self.hull[i][0],
            }
        };
        let mut value = 0.0;
        let mut residual = self.budget;
        for (i, f) in fixed.iter().enumerate() {
            let j = f.unwrap_or_else(|| start(i));
            value += self.delta[i][j];
            residual -= self.cost[i][j];
        }
        if residual < 0 {
            return None;
        }

        if restricted.is_empty() {
            for s in self.segments.iter().filter(|s| fixed[s.layer].is_none()) {
                if s.cost <= residual {
                    residual -= s.cost;
                    value += s.delta;
                    take(s.layer);
                } else {
                    let theta = residual as f64 / s.cost as f64;
                    value += theta * s.delta;
                    let fractional = if residual > 0 { Some((s.layer, theta)) } else { None };
                    return Some((value, fractional));
                }
            }
            return Some((value, None));
        }

        let mut extra: Vec<Segment> = restricted.iter().flat_map(|r| r.segments.iter().copied()).collect();
        extra.sort_by(steepest_first);
        let skip = |s: &Segment| fixed[s.layer].is_some() || restricted.iter().any(|r| r.layer == s.layer);
        let mut base = self.segments.iter().filter(|s| !skip(s)).peekable();
        let mut extra = extra.into_iter().peekable();
        loop {
            let s = match (base.peek(), extra.peek()) {
                (None, None) => break,
                (Some(_), None) => *base.next().unwrap(),
                (None, Some(_)) => extra.next().unwrap(),
                (Some(a), Some(b)) => {
                    if steepest_first(a, b) == Ordering::Greater {
                        extra.next().unwrap()
                    } else {
                        *base.next().unwrap()
                    }
                }
            };
            if s.cost <= residual {
                residual -= s.cost;
                value += s.delta;
                take(s.layer);
            } else {
                let theta = residual as f64 / s.cost as f64;
                value += theta * s.delta;
                let fractional = if residual > 0 { Some((s.layer, theta)) } else { None };
                return Some((value, fractional));
            }
        }
        Some((value, None))
    }

    /// Bound with `forbidden` ops (sorted by layer) removed from free layers.
    pub fn bound_excluding(&self, fixed: &[Option<usize>], forbidden: &[(usize, usize)]) -> LpBound {
        let Some(restricted) = self.restrict(fixed, forbidden) else {
            return LpBound::INFEASIBLE;
        };
        match self.greedy(fixed, &restricted, |_| {}) {
            None => LpBound::INFEASIBLE,
            Some((value, fractional)) => LpBound { value, fractional },
        }
    }

    /// Integral completion that follows the LP greedy and rounds the
    /// fractional layer down. Always within budget when the bound is finite.
    pub fn lp_vertex(&self, fixed: &[Option<usize>], forbidden: &[(usize, usize)]) -> Option<Vec<usize>> {
        let restricted = self.restrict(fixed, forbidden)?;
        let mut pos = vec![0usize; self.num_layers()];
        self.greedy(fixed, &restricted, |layer| pos[layer] += 1)?;
        Some(
            fixed
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    f.unwrap_or_else(|| match restricted.iter().find(|r| r.layer == i) {
                        Some(r) => r.hull[pos[i]],
                        None => self.hull[i][pos[i]],
                    })
                })
                .collect(),
        )
    }
}

struct Restricted {
    layer: usize,
    hull: Vec<usize>,
    segments: Vec<Segment>,
}

fn hull_segments(layer: usize, hull: &[usize], cost: &[i64], delta: &[f64]) -> Vec<Segment> {
    hull.windows(2)
        .map(|w| Segment {
            layer,
            cost: cost[w[1]] - cost[w[0]],
            delta: delta[w[1]] - delta[w[0]],
        })
        .collect()
}

/// Most negative delta per cost unit first; ties by layer. Within one layer
/// hull slopes strictly increase, so a layer's segments stay in hull order.
fn steepest_first(a: &Segment, b: &Segment) -> Ordering {
    let ra = a.delta / a.cost as f64;
    let rb = b.delta / b.cost as f64;
    ra.partial_cmp(&rb)
        .unwrap_or(Ordering::Equal)
        .then(a.layer.cmp(&b.layer))
}

/// Admissible lower bound on the objective of every completion of `fixed`
/// that fits `budget`, on the default cost grid. Returns `+inf` when no
/// completion fits. `prior` and `overlap_limit` are accepted for interface
/// symmetry with [`super::solve`]; the overlap constraints are relaxed away.
pub fn lp_bound(
    instance: &SearchInstance,
    budget: Budget,
    fixed: &[Option<usize>],
    _prior: &[Selection],
    _overlap_limit: usize,
) -> f64 {
    assert_eq!(fixed.len(), instance.layers.len(), "one slot per layer");
    let problem = Problem::new(instance, budget, CostGrid::new(super::DEFAULT_COST_SCALE));
    problem.bound(fixed).value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::objective;
    use crate::synthetic::{random_instance, SyntheticConfig};

    #[test]
    fn fully_fixed_is_exact() {
        let inst = random_instance(&SyntheticConfig::new(5, 4), 11);
        let choices = vec![1, 0, 3, 2, 1];
        let fixed: Vec<_> = choices.iter().map(|&j| Some(j)).collect();
        let b = lp_bound(&inst, Budget::unlimited(), &fixed, &[], 5);
        let exact = objective(&inst, &Selection::new(choices)).unwrap();
        assert!((b - exact).abs() < 1e-12);
    }

    #[test]
    fn unlimited_budget_gives_separable_minimum() {
        let inst = random_instance(&SyntheticConfig::new(6, 5), 3);
        let b = lp_bound(&inst, Budget::unlimited(), &[None; 6], &[], 6);
        let expected: f64 = inst
            .layers
            .iter()
            .map(|l| l.ops.iter().map(|o| o.score_delta).fold(f64::INFINITY, f64::min))
            .sum();
        assert!((b - expected).abs() < 1e-12, "{b} vs {expected}");
    }

    #[test]
    fn over_budget_prefix_is_infinite() {
        let inst = random_instance(&SyntheticConfig::new(3, 4), 3);
        let b = lp_bound(&inst, Budget { limit: 0.0 }, &[Some(0), None, None], &[], 3);
        assert_eq!(b, f64::INFINITY);
    }

    #[test]
    fn vertex_fits_budget_and_respects_fixed() {
        let inst = random_instance(&SyntheticConfig::new(6, 5), 9);
        let budget = Budget {
            limit: 0.5 * inst.teacher_cost(),
        };
        let grid = CostGrid::new(super::super::DEFAULT_COST_SCALE);
        let p = Problem::new(&inst, budget, grid);
        let fixed = [None, Some(2), None, None, Some(0), None];
        let v = p.lp_vertex(&fixed, &[]).unwrap();
        assert_eq!(v[1], 2);
        assert_eq!(v[4], 0);
        let units: i64 = v.iter().enumerate().map(|(i, &j)| p.cost[i][j]).sum();
        assert!(units <= p.budget);
        let vertex_obj: f64 = v.iter().enumerate().map(|(i, &j)| p.delta[i][j]).sum();
        assert!(p.bound(&fixed).value <= vertex_obj + 1e-12);
    }
}

#[cfg(test)]
mod exclusion_tests {
    use super::*;
    use crate::synthetic::{random_instance, SyntheticConfig};

    /// Excluding ops must give the same bound as deleting them.
    #[test]
    fn exclusion_equals_removing_the_ops() {
        for seed in 0..30 {
            let inst = random_instance(&SyntheticConfig::new(5, 6), seed);
            let budget = Budget {
                limit: 0.45 * inst.teacher_cost(),
            };
            let grid = CostGrid::new(super::super::DEFAULT_COST_SCALE);
            let p = Problem::new(&inst, budget, grid);
            // forbid the cheapest hull op of layers 1 and 3
            let forbidden = vec![(1, p.hull[1][0]), (3, p.hull[3][0])];
            let fixed = [None, None, Some(2), None, None];

            let mut reduced = inst.clone();
            for &(l, j) in &forbidden {
                reduced.layers[l].ops.remove(j);
            }
            let q = Problem::new(&reduced, budget, grid);
            let a = p.bound_excluding(&fixed, &forbidden).value;
            let b = q.bound(&fixed).value;
            assert!((a - b).abs() < 1e-12 || (a.is_infinite() && b.is_infinite()), "seed {seed}: {a} vs {b}");
            assert!(a >= p.bound(&fixed).value - 1e-12);
        }
    }
}
