//! Ranking, rank correlation and op statistics over sets of architectures.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{cost, objective, SearchInstance, Selection};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankKey {
    Proxy,
    Measured,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub selection: Selection,
    pub proxy_objective: f64,
    pub cost_ms: f64,
    pub measured: Option<f64>,
    /// Position in the caller's input list.
    pub input_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedCandidates {
    pub key: RankKey,
    pub entries: Vec<RankedEntry>,
}

/// Orders architectures by measured score when given, otherwise by proxy
/// objective; ties go to lower cost, then the lexicographically smaller choices.
pub fn rank_candidates(
    instance: &SearchInstance,
    solutions: &[Selection],
    measured: Option<&[f64]>,
) -> Result<RankedCandidates> {
    if let Some(m) = measured {
        if m.len() != solutions.len() {
            return Err(Error::LengthMismatch {
                expected: solutions.len(),
                got: m.len(),
            });
        }
        if m.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidInput("measured score is NaN".into()));
        }
    }
    let mut entries = solutions
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(RankedEntry {
                selection: s.clone(),
                proxy_objective: objective(instance, s)?,
                cost_ms: cost(instance, s)?,
                measured: measured.map(|m| m[i]),
                input_index: i,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let key = if measured.is_some() {
        RankKey::Measured
    } else {
        RankKey::Proxy
    };
    let primary = |e: &RankedEntry| match key {
        RankKey::Measured => e.measured.unwrap_or(f64::NAN),
        RankKey::Proxy => e.proxy_objective,
    };
    entries.sort_by(|a, b| {
        primary(a)
            .total_cmp(&primary(b))
            .then(a.cost_ms.total_cmp(&b.cost_ms))
            .then_with(|| a.selection.cmp(&b.selection))
    });
    Ok(RankedCandidates { key, entries })
}

/// Kendall's tau-b, tie-corrected, in O(n log n) (Knight's algorithm).
///
/// `(C - D) / sqrt((n0 - tx) * (n0 - ty))` with `n0 = n(n-1)/2` and `tx`,
/// `ty` the pairs tied in `x` and in `y`. Undefined, and an error, when
/// either input is entirely tied.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "kendall tau needs at least 2 values, got {n}"
        )));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("kendall tau input contains NaN".into()));
    }
    // -0.0 and 0.0 must tie
    let x: Vec<f64> = x.iter().map(|v| v + 0.0).collect();
    let y: Vec<f64> = y.iter().map(|v| v + 0.0).collect();

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let n0 = (n * (n - 1) / 2) as u64;
    let tied_x = tied_pairs(&idx, |a, b| x[a] == x[b]);
    let tied_xy = tied_pairs(&idx, |a, b| x[a] == x[b] && y[a] == y[b]);

    let mut buf = vec![0usize; n];
    let swaps = merge_count(&mut idx, &mut buf, &y);
    let tied_y = tied_pairs(&idx, |a, b| y[a] == y[b]);

    if tied_x == n0 {
        return Err(Error::AllTied("x"));
    }
    if tied_y == n0 {
        return Err(Error::AllTied("y"));
    }
    let c_minus_d = n0 as i64 - tied_x as i64 - tied_y as i64 + tied_xy as i64 - 2 * swaps as i64;
    Ok(c_minus_d as f64 / (((n0 - tied_x) as f64) * ((n0 - tied_y) as f64)).sqrt())
}

/// Pairs within runs of equal neighbours in an already grouped order.
fn tied_pairs(order: &[usize], eq: impl Fn(usize, usize) -> bool) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in order.windows(2) {
        if eq(w[0], w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Stable merge sort of `idx` by `key`, returning the number of strict inversions.
fn merge_count(idx: &mut [usize], buf: &mut [usize], key: &[f64]) -> u64 {
    let n = idx.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut idx[..mid], &mut buf[..mid], key)
        + merge_count(&mut idx[mid..], &mut buf[mid..], key);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if key[idx[j]].total_cmp(&key[idx[i]]) == Ordering::Less {
            buf[k] = idx[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = idx[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&idx[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&idx[j..n]);
    idx.copy_from_slice(&buf[..n]);
    swaps
}

/// How often each op_id was chosen across all (solution, layer) slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpHistogram {
    pub counts: BTreeMap<String, usize>,
    pub total_slots: usize,
}

impl OpHistogram {
    /// `(op_id, count, fraction)` by descending count, then op_id.
    pub fn rows(&self) -> Vec<(&str, usize, f64)> {
        let mut rows: Vec<_> = self
            .counts
            .iter()
            .map(|(k, &c)| (k.as_str(), c, c as f64 / self.total_slots.max(1) as f64))
            .collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        rows
    }
}

pub fn selection_histogram(instance: &SearchInstance, solutions: &[Selection]) -> Result<OpHistogram> {
    let mut counts = BTreeMap::new();
    for s in solutions {
        s.check(instance)?;
        for (layer, &j) in instance.layers.iter().zip(s.choices()) {
            *counts.entry(layer.ops[j].op_id.clone()).or_insert(0) += 1;
        }
    }
    Ok(OpHistogram {
        counts,
        total_slots: solutions.len() * instance.num_layers(),
    })
}

/// Architectures evaluated at one budget ratio with their measured scores.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetGroup {
    pub ratio: f64,
    pub architectures: Vec<(Selection, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetTau {
    pub ratio: f64,
    pub count: usize,
    pub tau: f64,
}

/// Tau-b between proxy objective and measured score, per budget and pooled
/// over all budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub per_budget: Vec<BudgetTau>,
    pub pooled: f64,
}

pub fn proxy_correlation_report(
    instance: &SearchInstance,
    groups: &[BudgetGroup],
) -> Result<CorrelationReport> {
    let mut all_proxy = Vec::new();
    let mut all_measured = Vec::new();
    let mut per_budget = Vec::with_capacity(groups.len());
    for g in groups {
        if g.architectures.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "ratio {}: need at least 2 architectures, got {}",
                g.ratio,
                g.architectures.len()
            )));
        }
        let proxy = g
            .architectures
            .iter()
            .map(|(s, _)| objective(instance, s))
            .collect::<Result<Vec<_>>>()?;
        let measured: Vec<f64> = g.architectures.iter().map(|(_, m)| *m).collect();
        per_budget.push(BudgetTau {
            ratio: g.ratio,
            count: proxy.len(),
            tau: kendall_tau(&proxy, &measured)?,
        });
        all_proxy.extend(proxy);
        all_measured.extend(measured);
    }
    let pooled = kendall_tau(&all_proxy, &all_measured)?;
    Ok(CorrelationReport { per_budget, pooled })
}
