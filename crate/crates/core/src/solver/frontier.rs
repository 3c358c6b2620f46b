use std::cmp::Ordering;

use crate::model::LayerTable;

/// Indices of the ops of `layer` not dominated on (cost, score_delta), sorted
/// by cost ascending with strictly decreasing delta. Op `a` dominates `b` when
/// it is no worse on both and strictly better on one; of several identical
/// points only the lowest index is kept.
///
/// Only the LP bound uses this. Dominated ops stay selectable in the integer
/// search because overlap constraints can force them.
pub fn dominance_frontier(layer: &LayerTable) -> Vec<usize> {
    let costs: Vec<f64> = layer.ops.iter().map(|o| o.cost).collect();
    let deltas: Vec<f64> = layer.ops.iter().map(|o| o.score_delta).collect();
    frontier(&costs, &deltas)
}

pub(crate) fn frontier<C: Copy + PartialOrd>(costs: &[C], deltas: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| {
        costs[a]
            .partial_cmp(&costs[b])
            .unwrap_or(Ordering::Equal)
            .then(deltas[a].total_cmp(&deltas[b]))
            .then(a.cmp(&b))
    });
    let mut out = Vec::new();
    let mut best = f64::INFINITY;
    for j in order {
        if deltas[j] < best {
            best = deltas[j];
            out.push(j);
        }
    }
    out
}

/// Lower convex hull of a frontier (as returned by [`frontier`]) over integer
/// costs. Collinear interior points are dropped so slopes strictly increase.
pub(crate) fn lower_hull(front: &[usize], costs: &[i64], deltas: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(front.len());
    for &j in front {
        // equal cost: the later frontier point has the lower delta
        if let Some(&last) = hull.last() {
            if costs[last] == costs[j] {
                hull.pop();
            }
        }
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let ab = (deltas[b] - deltas[a]) * (costs[j] - costs[a]) as f64;
            let ac = (deltas[j] - deltas[a]) * (costs[b] - costs[a]) as f64;
            // drop b when it lies on or above segment a-j
            if ab >= ac {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(j);
    }
    hull
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::layer;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equal_delta_higher_cost_is_dominated() {
        let l = layer(0, &[("teacher", 0.5, 1.0), ("b", 0.5, 2.0)]);
        assert_eq!(dominance_frontier(&l), vec![0]);
    }

    #[test]
    fn decreasing_frontier_is_unchanged() {
        let l = layer(
            0,
            &[("a", 0.9, 0.1), ("b", 0.5, 1.0), ("teacher", 0.0, 3.0), ("c", 0.2, 2.0)],
        );
        assert_eq!(dominance_frontier(&l), vec![0, 1, 3, 2]);
    }

    fn dominated_quadratic(costs: &[f64], deltas: &[f64], j: usize) -> bool {
        (0..costs.len()).any(|k| {
            k != j
                && costs[k] <= costs[j]
                && deltas[k] <= deltas[j]
                && (costs[k] < costs[j] || deltas[k] < deltas[j] || k < j)
        })
    }

    #[test]
    fn matches_pairwise_oracle_on_random_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            // coarse grid so ties actually happen
            let costs: Vec<f64> = (0..20).map(|_| rng.gen_range(0..8) as f64 * 0.5).collect();
            let deltas: Vec<f64> = (0..20).map(|_| rng.gen_range(0..8) as f64 * 0.125).collect();
            let mut expected: Vec<usize> = (0..20)
                .filter(|&j| !dominated_quadratic(&costs, &deltas, j))
                .collect();
            expected.sort_by(|&a, &b| costs[a].partial_cmp(&costs[b]).unwrap());
            assert_eq!(frontier(&costs, &deltas), expected);
        }
    }

    #[test]
    fn hull_drops_points_above_the_chord() {
        let costs = [0, 10, 20, 30];
        let deltas = [1.0, 0.8, 0.2, 0.1];
        // (10, 0.8) lies above the chord from (0,1) to (20,0.2)
        assert_eq!(lower_hull(&[0, 1, 2, 3], &costs, &deltas), vec![0, 2, 3]);
        // collinear middle point is removed too
        let deltas = [1.0, 0.5, 0.0, -0.1];
        assert_eq!(lower_hull(&[0, 1, 2, 3], &costs, &deltas), vec![0, 2, 3]);
    }
}
