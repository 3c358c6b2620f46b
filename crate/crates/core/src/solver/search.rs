//! Depth-first branch-and-bound over op choices.
//!
//! The root's children are independent tasks handed to workers in order; all
//! workers share one incumbent. A node is pruned only when its bound exceeds
//! the incumbent by more than the float tolerance, so the tie-break-minimal
//! optimum is reached whatever the discovery order.

use std::cmp::Ordering;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Mutex;
use std::time::Instant;

use super::bound::{LpBound, Problem};

/// Candidate solution ordered by (objective, cost units, choices).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Candidate {
    pub objective: f64,
    pub cost: i64,
    pub choices: Vec<usize>,
}

impl Candidate {
    pub fn cmp_key(&self, other: &Self) -> Ordering {
        self.objective
            .total_cmp(&other.objective)
            .then(self.cost.cmp(&other.cost))
            .then_with(|| self.choices.cmp(&other.choices))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TraceNode {
    pub fixed: Vec<Option<usize>>,
    pub bound: f64,
}

pub(crate) struct SearchParams<'a> {
    pub priors: &'a [Vec<usize>],
    pub overlap_limit: usize,
    pub gap_tolerance: f64,
    pub deadline: Instant,
    pub node_limit: Option<u64>,
    pub threads: usize,
    pub trace: bool,
}

pub(crate) struct SearchOutcome {
    pub incumbent: Option<Candidate>,
    /// Smallest bound among subtrees left unexplored (limits or gap tolerance).
    pub open_bound: f64,
    pub aborted: bool,
    pub nodes: u64,
    pub trace: Vec<TraceNode>,
}

struct Shared<'a> {
    problem: &'a Problem,
    params: &'a SearchParams<'a>,
    // f64 bits of the incumbent objective
    best_bits: AtomicU64,
    incumbent: Mutex<Option<Candidate>>,
    nodes: AtomicU64,
    stop: AtomicBool,
}

impl Shared<'_> {
    fn best(&self) -> f64 {
        f64::from_bits(self.best_bits.load(AtomicOrdering::Acquire))
    }

    fn offer(&self, choices: Vec<usize>) {
        let p = self.problem;
        let objective: f64 = choices
            .iter()
            .enumerate()
            .map(|(i, &j)| p.delta[i][j])
            .sum();
        if objective > self.best() + p.eps {
            return;
        }
        let cost = choices.iter().enumerate().map(|(i, &j)| p.cost[i][j]).sum();
        let cand = Candidate {
            objective,
            cost,
            choices,
        };
        let mut inc = self.incumbent.lock().expect("incumbent lock");
        let better = match inc.as_ref() {
            None => true,
            Some(cur) => cand.cmp_key(cur) == Ordering::Less,
        };
        if better {
            let best = self.best().min(cand.objective);
            self.best_bits.store(best.to_bits(), AtomicOrdering::Release);
            *inc = Some(cand);
        }
    }
}

enum Verdict {
    Keep,
    Prune,
    /// Pruned by the gap tolerance; the bound still counts toward the gap.
    Tolerated,
}

struct Worker<'s, 'a> {
    shared: &'s Shared<'a>,
    fixed: Vec<Option<usize>>,
    fixed_cost: i64,
    free_min_cost: i64,
    matches: Vec<usize>,
    local_nodes: u64,
    open_bound: f64,
    trace: Option<Vec<TraceNode>>,
}

impl<'s, 'a> Worker<'s, 'a> {
    fn new(shared: &'s Shared<'a>) -> Self {
        let p = shared.problem;
        Self {
            shared,
            fixed: vec![None; p.num_layers()],
            fixed_cost: 0,
            free_min_cost: p.min_cost.iter().sum(),
            matches: vec![0; shared.params.priors.len()],
            local_nodes: 0,
            open_bound: f64::INFINITY,
            trace: shared.params.trace.then(Vec::new),
        }
    }

    fn verdict(&mut self, bound: f64) -> Verdict {
        let best = self.shared.best();
        let eps = self.shared.problem.eps;
        if bound > best + eps {
            return Verdict::Prune;
        }
        let tol = self.shared.params.gap_tolerance;
        if tol > 0.0 && bound > best - tol {
            return Verdict::Tolerated;
        }
        Verdict::Keep
    }

    fn stopped(&mut self) -> bool {
        let shared = self.shared;
        if shared.stop.load(AtomicOrdering::Relaxed) {
            return true;
        }
        self.local_nodes += 1;
        let total = shared.nodes.fetch_add(1, AtomicOrdering::Relaxed) + 1;
        let over_nodes = shared.params.node_limit.is_some_and(|l| total > l);
        let over_time = self.local_nodes % 256 == 0 && Instant::now() >= shared.params.deadline;
        if over_nodes || over_time {
            shared.stop.store(true, AtomicOrdering::Relaxed);
            return true;
        }
        false
    }

    fn can_take(&self, layer: usize, op: usize) -> bool {
        let p = self.shared.problem;
        let params = self.shared.params;
        let cost = self.fixed_cost + p.cost[layer][op] + self.free_min_cost - p.min_cost[layer];
        if cost > p.budget {
            return false;
        }
        params
            .priors
            .iter()
            .zip(&self.matches)
            .all(|(prior, &m)| m + usize::from(prior[layer] == op) <= params.overlap_limit)
    }

    fn fix(&mut self, layer: usize, op: usize) {
        let p = self.shared.problem;
        self.fixed[layer] = Some(op);
        self.fixed_cost += p.cost[layer][op];
        self.free_min_cost -= p.min_cost[layer];
        for (prior, m) in self.shared.params.priors.iter().zip(&mut self.matches) {
            *m += usize::from(prior[layer] == op);
        }
    }

    fn unfix(&mut self, layer: usize, op: usize) {
        let p = self.shared.problem;
        self.fixed[layer] = None;
        self.fixed_cost -= p.cost[layer][op];
        self.free_min_cost += p.min_cost[layer];
        for (prior, m) in self.shared.params.priors.iter().zip(&mut self.matches) {
            *m -= usize::from(prior[layer] == op);
        }
    }

    fn overlap_ok(&self, choices: &[usize]) -> bool {
        let limit = self.shared.params.overlap_limit;
        self.shared
            .params
            .priors
            .iter()
            .all(|prior| prior.iter().zip(choices).filter(|(a, b)| a == b).count() <= limit)
    }

    /// Ops ruled out at free layers because a prior's overlap allowance is
    /// used up, sorted by layer.
    fn forbidden(&self) -> Vec<(usize, usize)> {
        let params = self.shared.params;
        let mut out = Vec::new();
        for (prior, &m) in params.priors.iter().zip(&self.matches) {
            if m >= params.overlap_limit {
                self.push_free(prior, usize::MAX, &mut out);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    fn push_free(&self, prior: &[usize], except: usize, out: &mut Vec<(usize, usize)>) {
        for (layer, f) in self.fixed.iter().enumerate() {
            if f.is_none() && layer != except {
                out.push((layer, prior[layer]));
            }
        }
    }

    /// Layer to branch on and its surviving children `(op, bound)` in
    /// ascending-delta order. Also offers the node's LP vertex as a candidate.
    fn expand(&mut self, bound: LpBound) -> Option<(usize, Vec<(usize, LpBound)>)> {
        let p = self.shared.problem;
        let params = self.shared.params;
        let forbidden = self.forbidden();
        if let Some(vertex) = p.lp_vertex(&self.fixed, &forbidden) {
            if self.overlap_ok(&vertex) {
                self.shared.offer(vertex);
            }
        }
        // an integral LP leaves no fractional layer: take the lowest free one
        let layer = match bound.fractional {
            Some((layer, _)) => layer,
            None => self.fixed.iter().position(Option::is_none)?,
        };
        let mut children = Vec::new();
        for &op in &p.child_order[layer] {
            if !self.can_take(layer, op) {
                continue;
            }
            // priors that this choice saturates
            let mut extra = Vec::new();
            for (prior, &m) in params.priors.iter().zip(&self.matches) {
                if prior[layer] == op && m + 1 == params.overlap_limit {
                    self.push_free(prior, layer, &mut extra);
                }
            }
            let b = if extra.is_empty() {
                self.fixed[layer] = Some(op);
                let b = p.bound_excluding(&self.fixed, &forbidden);
                self.fixed[layer] = None;
                b
            } else {
                extra.extend_from_slice(&forbidden);
                extra.sort_unstable();
                extra.dedup();
                self.fixed[layer] = Some(op);
                let b = p.bound_excluding(&self.fixed, &extra);
                self.fixed[layer] = None;
                b
            };
            match self.verdict(b.value) {
                Verdict::Keep => children.push((op, b)),
                Verdict::Tolerated => self.open_bound = self.open_bound.min(b.value),
                Verdict::Prune => {}
            }
        }
        Some((layer, children))
    }

    /// Returns false when the search was stopped inside this subtree.
    fn explore(&mut self, bound: LpBound) -> bool {
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceNode {
                fixed: self.fixed.clone(),
                bound: bound.value,
            });
        }
        if self.stopped() {
            self.open_bound = self.open_bound.min(bound.value);
            return false;
        }
        let Some((layer, children)) = self.expand(bound) else {
            // every layer fixed
            self.shared.offer(self.fixed.iter().map(|f| f.unwrap()).collect());
            return true;
        };
        self.descend(layer, &children)
    }

    fn descend(&mut self, layer: usize, children: &[(usize, LpBound)]) -> bool {
        for (k, &(op, b)) in children.iter().enumerate() {
            match self.verdict(b.value) {
                Verdict::Prune => continue,
                Verdict::Tolerated => {
                    self.open_bound = self.open_bound.min(b.value);
                    continue;
                }
                Verdict::Keep => {}
            }
            self.fix(layer, op);
            let finished = self.explore(b);
            self.unfix(layer, op);
            if !finished {
                for &(_, rest) in &children[k + 1..] {
                    self.open_bound = self.open_bound.min(rest.value);
                }
                return false;
            }
        }
        true
    }
}

pub(crate) fn run(problem: &Problem, params: &SearchParams<'_>) -> SearchOutcome {
    let shared = Shared {
        problem,
        params,
        best_bits: AtomicU64::new(f64::INFINITY.to_bits()),
        incumbent: Mutex::new(None),
        nodes: AtomicU64::new(0),
        stop: AtomicBool::new(false),
    };

    let mut root = Worker::new(&shared);
    let root_bound = problem.bound_excluding(&root.fixed, &root.forbidden());
    if root_bound.value == f64::INFINITY {
        return SearchOutcome {
            incumbent: None,
            open_bound: f64::INFINITY,
            aborted: false,
            nodes: 0,
            trace: Vec::new(),
        };
    }

    let mut aborted = false;
    let mut open_bound = f64::INFINITY;
    let mut trace = Vec::new();

    if root.stopped() {
        aborted = true;
        open_bound = root_bound.value;
    } else if let Some((layer, children)) = root.expand(root_bound) {
        if params.trace {
            trace.push(TraceNode {
                fixed: root.fixed.clone(),
                bound: root_bound.value,
            });
        }
        let next = AtomicUsize::new(0);
        let work = |w: &mut Worker<'_, '_>| -> bool {
            let mut ok = true;
            loop {
                let k = next.fetch_add(1, AtomicOrdering::Relaxed);
                let Some(&(op, b)) = children.get(k) else { break };
                if !ok {
                    w.open_bound = w.open_bound.min(b.value);
                    continue;
                }
                ok = w.descend(layer, &[(op, b)]);
            }
            ok
        };

        let threads = params.threads.max(1).min(children.len().max(1));
        let mut results = Vec::new();
        if threads == 1 {
            let ok = work(&mut root);
            results.push((ok, root.open_bound, root.trace.take()));
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = (0..threads)
                    .map(|_| {
                        let shared = &shared;
                        let work = &work;
                        scope.spawn(move || {
                            let mut w = Worker::new(shared);
                            let ok = work(&mut w);
                            (ok, w.open_bound, w.trace.take())
                        })
                    })
                    .collect();
                for h in handles {
                    results.push(h.join().expect("search worker panicked"));
                }
            });
            open_bound = open_bound.min(root.open_bound);
        }
        for (ok, ob, t) in results {
            aborted |= !ok;
            open_bound = open_bound.min(ob);
            trace.extend(t.unwrap_or_default());
        }
    } else {
        unreachable!("root has free layers");
    }

    SearchOutcome {
        incumbent: shared.incumbent.into_inner().expect("incumbent lock"),
        open_bound,
        aborted,
        nodes: shared.nodes.load(AtomicOrdering::Relaxed),
        trace,
    }
}
