use chrono::{Duration, TimeZone, Utc};
use proptest::prelude::*;

use decical::decision::{aggregate, bayes_action, decide_case, DecisionRecord, GroupBy, Weighting};
use decical::diagnostics::{crps_ensemble, pit_value_seeded, CrpsEstimator};
use decical::tasks::{
    frost_cost, heat_cost, wind_cost, FrostTaskParams, HeatTaskParams, WindTaskParams, MAX_COST,
};
use decical::CostFunction;

/// Lowest mean cost over all actions, first id on ties; sums in input order.
fn brute_argmin(members: &[f64], cf: &CostFunction) -> usize {
    let costs: Vec<f64> = (0..cf.n_actions())
        .map(|a| members.iter().map(|&y| cf.cost(a, y).unwrap()).sum::<f64>() / members.len() as f64)
        .collect();
    let mut best = 0;
    for a in 1..costs.len() {
        if costs[a] < costs[best] - 1e-12 * costs[best].abs().max(1.0) {
            best = a;
        }
    }
    best
}

fn frost_strategy() -> impl Strategy<Value = CostFunction> {
    (-5.0..5.0f64, 0.05..0.95f64)
        .prop_map(|(theta, cost_ratio)| frost_cost(&FrostTaskParams { theta, cost_ratio }).unwrap())
}

fn any_task() -> impl Strategy<Value = CostFunction> {
    prop_oneof![
        frost_strategy(),
        (15.0..35.0f64, 0.05..0.95f64).prop_map(|(theta, cost_ratio)| {
            heat_cost(&HeatTaskParams { theta, cost_ratio }).unwrap()
        }),
        (1.0..6.0f64).prop_map(|u| wind_cost(&WindTaskParams::new(u)).unwrap()),
    ]
}

/// Members shaped for the task's outcome scale.
fn members_for(cf: &CostFunction) -> BoxedStrategy<Vec<f64>> {
    if cf.n_actions() > 2 {
        prop::collection::vec(0.0..1.0f64, 2..40).boxed()
    } else {
        prop::collection::vec(-10.0..40.0f64, 2..40).boxed()
    }
}

fn record(i: usize, e: f64, o: f64) -> DecisionRecord {
    DecisionRecord {
        init_time: Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap() + Duration::days((i / 6) as i64),
        lead_hours: if i.is_multiple_of(2) { 24 } else { 48 },
        lat: 50.0 + (i % 3) as f64,
        lon: 1.0,
        action: 0,
        expected_cost: e,
        observed_cost: o,
        cost_gap: (e - o).abs(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn bayes_matches_brute_force(
        (cf, members) in any_task().prop_flat_map(|cf| { let m = members_for(&cf); (Just(cf), m) })
    ) {
        let (a, e) = bayes_action(&members, &cf).unwrap();
        prop_assert_eq!(a, brute_argmin(&members, &cf));
        let direct = members.iter().map(|&y| cf.cost(a, y).unwrap()).sum::<f64>() / members.len() as f64;
        prop_assert!((e - direct).abs() < 1e-12);
    }

    #[test]
    fn scaling_costs_keeps_action(
        cf in frost_strategy(),
        members in prop::collection::vec(-10.0..10.0f64, 2..30),
        k in 0.1..20.0f64,
    ) {
        let (a, e) = bayes_action(&members, &cf).unwrap();
        let (ak, ek) = bayes_action(&members, &cf.scaled(k).unwrap()).unwrap();
        prop_assert_eq!(a, ak);
        prop_assert!((ek - k * e).abs() <= 1e-9 * (1.0 + k * e));
    }

    #[test]
    fn member_order_is_irrelevant(
        (cf, members) in any_task().prop_flat_map(|cf| { let m = members_for(&cf); (Just(cf), m) }),
        rot in 0usize..40,
    ) {
        let mut shuffled = members.clone();
        shuffled.reverse();
        let r = rot % shuffled.len();
        shuffled.rotate_left(r);
        prop_assert_eq!(bayes_action(&members, &cf).unwrap(), bayes_action(&shuffled, &cf).unwrap());
    }

    #[test]
    fn gap_is_bounded(
        cf in frost_strategy(),
        members in prop::collection::vec(-10.0..10.0f64, 2..30),
        y in -20.0..20.0f64,
    ) {
        let (_, e, o) = decide_case(&members, y, &cf, None).unwrap();
        prop_assert!((0.0..=MAX_COST).contains(&e));
        prop_assert!((0.0..=MAX_COST).contains(&o));
        prop_assert!((e - o).abs() <= e.max(o));
    }

    #[test]
    fn heat_mirrors_frost(
        theta in -5.0..5.0f64,
        c in 0.05..0.95f64,
        t in -15.0..15.0f64,
    ) {
        let f = frost_cost(&FrostTaskParams { theta, cost_ratio: c }).unwrap();
        let h = heat_cost(&HeatTaskParams { theta: -theta, cost_ratio: c }).unwrap();
        for a in 0..2 {
            prop_assert!((f.cost(a, t).unwrap() - h.cost(a, -t).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_ignores_record_order(
        costs in prop::collection::vec((0.0..10.0f64, 0.0..10.0f64), 1..60),
        seed in any::<u64>(),
    ) {
        let records: Vec<_> = costs.iter().enumerate().map(|(i, &(e, o))| record(i, e, o)).collect();
        let mut shuffled = records.clone();
        // deterministic Fisher-Yates from an LCG
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        for g in [GroupBy::Lead, GroupBy::LeadAndPoint] {
            for w in [Weighting::Uniform, Weighting::CosineLatitude] {
                prop_assert_eq!(aggregate(&records, g, w).unwrap(), aggregate(&shuffled, g, w).unwrap());
            }
        }
    }

    #[test]
    fn crps_translation_and_scale(
        members in prop::collection::vec(-5.0..5.0f64, 2..40),
        y in -8.0..8.0f64,
        shift in -100.0..100.0f64,
        k in 0.1..10.0f64,
    ) {
        for est in [CrpsEstimator::Fair, CrpsEstimator::Nrg] {
            let base = crps_ensemble(&members, y, est).unwrap();
            let moved: Vec<f64> = members.iter().map(|m| m + shift).collect();
            let scaled: Vec<f64> = members.iter().map(|m| m * k).collect();
            prop_assert!((crps_ensemble(&moved, y + shift, est).unwrap() - base).abs() < 1e-9);
            prop_assert!((crps_ensemble(&scaled, y * k, est).unwrap() - k * base).abs() < 1e-9 * (1.0 + k));
        }
    }

    #[test]
    fn fair_crps_never_exceeds_nrg(
        members in prop::collection::vec(-5.0..5.0f64, 2..40),
        y in -8.0..8.0f64,
    ) {
        let fair = crps_ensemble(&members, y, CrpsEstimator::Fair).unwrap();
        let nrg = crps_ensemble(&members, y, CrpsEstimator::Nrg).unwrap();
        prop_assert!(fair >= 0.0);
        prop_assert!(fair <= nrg + 1e-12);
    }

    #[test]
    fn pit_is_deterministic_and_in_range(
        members in prop::collection::vec(-5.0..5.0f64, 1..40),
        y in -8.0..8.0f64,
        case in any::<u64>(),
        seed in any::<u64>(),
    ) {
        let a = pit_value_seeded(&members, y, case, seed).unwrap();
        let b = pit_value_seeded(&members, y, case, seed).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        prop_assert!((0.0..=1.0).contains(&a));
        let below = members.iter().filter(|&&m| m < y).count() as f64;
        let n = members.len() as f64 + 1.0;
        let equal = members.iter().filter(|&&m| m == y).count() as f64;
        prop_assert!(a >= below / n && a <= (below + 1.0 + equal) / n);
    }
}
