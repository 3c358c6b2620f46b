//! Brute-force reference implementations. Deliberately naive and independent
//! of the solver code paths.
#![allow(dead_code)]

use lana_core::{SearchInstance, Selection};

pub const SCALE: f64 = 1000.0;

pub fn units(cost_ms: f64) -> i64 {
    (cost_ms * SCALE).round_ties_even() as i64
}

pub fn budget_units(limit_ms: f64) -> i64 {
    if limit_ms.is_infinite() {
        return i64::MAX / 4;
    }
    let x = limit_ms * SCALE;
    (x + x.abs() * 1e-12 + 1e-9).floor() as i64
}

/// Every selection in mixed-radix order (first layer most significant).
pub fn all_selections(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &m in sizes {
        let mut next = Vec::with_capacity(out.len() * m);
        for prefix in &out {
            for j in 0..m {
                let mut p = prefix.clone();
                p.push(j);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Calls `f` on every selection in the same order as [`all_selections`].
pub fn for_each_selection(sizes: &[usize], mut f: impl FnMut(&[usize])) {
    if sizes.iter().any(|&m| m == 0) {
        return;
    }
    let mut s = vec![0usize; sizes.len()];
    loop {
        f(&s);
        let mut i = sizes.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            s[i] += 1;
            if s[i] < sizes[i] {
                break;
            }
            s[i] = 0;
        }
    }
}

pub fn obj(inst: &SearchInstance, choices: &[usize]) -> f64 {
    let mut total = 0.0;
    for (i, &j) in choices.iter().enumerate() {
        total += inst.layers[i].ops[j].score_delta;
    }
    total
}

pub fn cost_units(inst: &SearchInstance, choices: &[usize]) -> i64 {
    let mut total = 0;
    for (i, &j) in choices.iter().enumerate() {
        total += units(inst.layers[i].ops[j].cost);
    }
    total
}

pub fn overlap(a: &[usize], b: &[usize]) -> usize {
    let mut n = 0;
    for i in 0..a.len() {
        if a[i] == b[i] {
            n += 1;
        }
    }
    n
}

pub fn feasible(inst: &SearchInstance, choices: &[usize], budget_ms: f64, prior: &[Selection], limit: usize) -> bool {
    cost_units(inst, choices) <= budget_units(budget_ms)
        && prior.iter().all(|p| overlap(&p.0, choices) <= limit)
}

/// Optimum under the (objective, cost units, lexicographic) order.
pub fn brute_force(
    inst: &SearchInstance,
    budget_ms: f64,
    prior: &[Selection],
    limit: usize,
) -> Option<(Vec<usize>, f64)> {
    let mut best: Option<(Vec<usize>, f64, i64)> = None;
    for_each_selection(&inst.pool_sizes(), |s| {
        if !feasible(inst, s, budget_ms, prior, limit) {
            return;
        }
        let o = obj(inst, s);
        let c = cost_units(inst, s);
        let better = match &best {
            None => true,
            Some((bs, bo, bc)) => o < *bo || (o == *bo && (c < *bc || (c == *bc && s < bs.as_slice()))),
        };
        if better {
            best = Some((s.to_vec(), o, c));
        }
    });
    best.map(|(s, o, _)| (s, o))
}

/// Minimum objective over completions of a partial assignment.
pub fn brute_force_completion(
    inst: &SearchInstance,
    fixed: &[Option<usize>],
    budget_ms: f64,
    prior: &[Selection],
    limit: usize,
) -> f64 {
    let sizes: Vec<usize> = fixed
        .iter()
        .zip(inst.pool_sizes())
        .map(|(f, m)| if f.is_some() { 1 } else { m })
        .collect();
    let mut best = f64::INFINITY;
    for_each_selection(&sizes, |s| {
        let full: Vec<usize> = s
            .iter()
            .zip(fixed)
            .map(|(&j, f)| f.unwrap_or(j))
            .collect();
        if feasible(inst, &full, budget_ms, prior, limit) {
            best = best.min(obj(inst, &full));
        }
    });
    best
}

/// Kendall tau-b by counting every pair.
pub fn tau_b_pairs(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tx += 1;
            }
            if dy == 0.0 {
                ty += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                if (dx > 0.0) == (dy > 0.0) {
                    c += 1;
                } else {
                    d += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    (c - d) as f64 / (((n0 - tx) as f64) * ((n0 - ty) as f64)).sqrt()
}
