mod common;

use lana_core::lut_io::{aggregate_samples, parse_instance, restrict_pool, write_instance, MeasurementSample, Metric};
use lana_core::model::{budget_from_ratio, cost, objective, overlap};
use lana_core::proxy_eval::{kendall_tau, rank_candidates, selection_histogram};
use lana_core::synthetic::{random_instance, SyntheticConfig};
use lana_core::{solve, Budget, SearchInstance, Selection, SolverConfig};
use proptest::prelude::*;

fn instance_strategy() -> impl Strategy<Value = SearchInstance> {
    (1usize..8, 1usize..7, any::<u64>(), 0.0..0.5f64).prop_map(|(n, m, seed, neg)| {
        let mut cfg = SyntheticConfig::new(n, m);
        cfg.negative_fraction = neg;
        random_instance(&cfg, seed)
    })
}

fn selection_for(inst: &SearchInstance, raw: &[usize]) -> Selection {
    Selection::new(
        inst.layers
            .iter()
            .zip(raw.iter().cycle())
            .map(|(l, &r)| r % l.ops.len())
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn instance_round_trip(inst in instance_strategy()) {
        let text = write_instance(&inst);
        prop_assert_eq!(parse_instance(&text).unwrap(), inst.clone());
        prop_assert_eq!(write_instance(&inst), text);
    }

    #[test]
    fn objective_and_cost_are_additive(
        inst in instance_strategy(),
        raw in prop::collection::vec(0usize..16, 1..8),
        split in 0usize..8,
    ) {
        let sel = selection_for(&inst, &raw);
        let k = split.min(inst.num_layers());
        let part = |range: std::ops::Range<usize>| {
            let layers = inst.layers[range.clone()]
                .iter()
                .enumerate()
                .map(|(i, l)| lana_core::LayerTable { layer_index: i, ..l.clone() })
                .collect();
            let sub = SearchInstance { name: "part".into(), layers };
            let s = Selection::new(sel.0[range].to_vec());
            (objective(&sub, &s).unwrap(), cost(&sub, &s).unwrap())
        };
        let (o1, c1) = part(0..k);
        let (o2, c2) = part(k..inst.num_layers());
        prop_assert!((objective(&inst, &sel).unwrap() - (o1 + o2)).abs() < 1e-9);
        prop_assert!((cost(&inst, &sel).unwrap() - (c1 + c2)).abs() < 1e-9);
        prop_assert!((objective(&inst, &sel).unwrap() - common::obj(&inst, &sel.0)).abs() < 1e-12);
    }

    #[test]
    fn overlap_is_symmetric_and_bounded(
        inst in instance_strategy(),
        a in prop::collection::vec(0usize..16, 1..8),
        b in prop::collection::vec(0usize..16, 1..8),
    ) {
        let (sa, sb) = (selection_for(&inst, &a), selection_for(&inst, &b));
        let n = inst.num_layers();
        let ab = overlap(&sa, &sb).unwrap();
        prop_assert_eq!(ab, overlap(&sb, &sa).unwrap());
        prop_assert!(ab <= n);
        prop_assert_eq!(ab == n, sa == sb);
        prop_assert_eq!(ab, common::overlap(&sa.0, &sb.0));
    }

    #[test]
    fn aggregation_ignores_order(mut values in prop::collection::vec(-1e3..1e3f64, 1..20), rot in 0usize..20) {
        let sample = |v: Vec<f64>| MeasurementSample {
            op_id: "x".into(), layer_index: 0, metric: Metric::LatencyMs, values: v,
        };
        let a = aggregate_samples(&[sample(values.clone())]).unwrap();
        let k = rot % values.len();
        values.rotate_left(k);
        values.reverse();
        let b = aggregate_samples(&[sample(values.clone())]).unwrap();
        prop_assert_eq!(&a, &b);
        values.sort_by(f64::total_cmp);
        prop_assert_eq!(*a.values().next().unwrap(), values[(values.len() - 1) / 2]);
    }

    #[test]
    fn restriction_keeps_retained_ops_unchanged(inst in instance_strategy(), tag_pick in any::<bool>()) {
        let tag = if tag_pick { "efn" } else { "vit" };
        let r = restrict_pool(&inst, |op| op.op_id == "teacher" || op.has_tag(tag)).unwrap();
        for (orig, kept) in inst.layers.iter().zip(&r.layers) {
            let expected = orig.ops.iter().filter(|o| o.has_tag(tag)).count() + 1;
            prop_assert_eq!(kept.ops.len(), expected);
            for op in &kept.ops {
                prop_assert!(orig.ops.contains(op));
            }
            prop_assert_eq!(&kept.teacher().op_id, "teacher");
        }
    }

    #[test]
    fn tau_invariant_under_increasing_transforms(
        x in prop::collection::vec(-100i32..100, 2..40),
        y in prop::collection::vec(-100i32..100, 2..40),
    ) {
        let n = x.len().min(y.len());
        let xf: Vec<f64> = x[..n].iter().map(|&v| v as f64).collect();
        let yf: Vec<f64> = y[..n].iter().map(|&v| v as f64).collect();
        let all_tied = |v: &[f64]| v.iter().all(|&a| a == v[0]);
        prop_assume!(!all_tied(&xf) && !all_tied(&yf));
        let t = kendall_tau(&xf, &yf).unwrap();
        prop_assert!((-1.0..=1.0).contains(&t));
        let tx: Vec<f64> = xf.iter().map(|v| (v / 50.0).exp()).collect();
        let ty: Vec<f64> = yf.iter().map(|v| v * 3.0 + 7.0).collect();
        prop_assert_eq!(kendall_tau(&tx, &ty).unwrap(), t);
        prop_assert_eq!(t, common::tau_b_pairs(&xf, &yf));
        prop_assert_eq!(kendall_tau(&xf, &xf).unwrap(), 1.0);
    }

    #[test]
    fn rank_order_ignores_input_order(
        inst in instance_strategy(),
        raws in prop::collection::vec(prop::collection::vec(0usize..16, 1..8), 1..12),
        shift in 0usize..12,
    ) {
        let sols: Vec<Selection> = raws.iter().map(|r| selection_for(&inst, r)).collect();
        let mut shuffled = sols.clone();
        let k = shift % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        let a: Vec<_> = rank_candidates(&inst, &sols, None).unwrap().entries.into_iter().map(|e| e.selection).collect();
        let b: Vec<_> = rank_candidates(&inst, &shuffled, None).unwrap().entries.into_iter().map(|e| e.selection).collect();
        prop_assert_eq!(a, b);
        let h = selection_histogram(&inst, &sols).unwrap();
        prop_assert_eq!(h.counts.values().sum::<usize>(), sols.len() * inst.num_layers());
    }
}

#[test]
fn budget_and_overlap_monotonicity() {
    let cfg = SolverConfig::default();
    for seed in 0..40u64 {
        let inst = random_instance(&SyntheticConfig::new(7, 5), seed);
        let mut last = f64::INFINITY;
        for ratio in [0.2, 0.3, 0.45, 0.6, 0.8, 1.0] {
            let r = solve(&inst, budget_from_ratio(&inst, ratio).unwrap(), &[], 7, &cfg).unwrap();
            let o = if r.status.has_solution() { r.objective } else { f64::INFINITY };
            assert!(o <= last, "seed {seed} ratio {ratio}");
            last = o;
        }
        let budget = budget_from_ratio(&inst, 0.5).unwrap();
        let first = solve(&inst, budget, &[], 7, &cfg).unwrap();
        if !first.status.has_solution() {
            continue;
        }
        let prior = [first.selection];
        let mut last = f64::INFINITY;
        for limit in 0..=7 {
            let r = solve(&inst, budget, &prior, limit, &cfg).unwrap();
            let o = if r.status.has_solution() { r.objective } else { f64::INFINITY };
            assert!(o <= last, "seed {seed} limit {limit}");
            last = o;
        }
    }
}

#[test]
fn unlimited_budget_takes_per_layer_minimum() {
    let inst = random_instance(&SyntheticConfig::new(9, 6), 4);
    let r = solve(&inst, Budget::unlimited(), &[], 9, &SolverConfig::default()).unwrap();
    let expected: f64 = inst
        .layers
        .iter()
        .map(|l| l.ops.iter().map(|o| o.score_delta).fold(f64::INFINITY, f64::min))
        .sum();
    assert!((r.objective - expected).abs() < 1e-12);
}
