use std::cell::Cell;

use foe::analysis::{general_prior_bound, regret, uniform_prior_bound};
use foe::environments::{oblivious_worst_case, AdaptiveEnvironment, AdaptiveRule, ObliviousEnvironment};
use foe::master::{self, uniform};
use foe::{ConstantRates, ExpertFamily, MasterState, RngContract, Schedule};
use proptest::prelude::*;

#[test]
fn feedback_is_requested_once_for_the_chosen_expert() {
    let f = ExpertFamily::from_weights(&[0.4, 0.3, 0.2, 0.1], 2.0).unwrap();
    let mut m = MasterState::new(&f, Schedule::entering_bounded(), RngContract::new(3));
    for _ in 0..2000 {
        let calls = Cell::new(0);
        let asked = Cell::new(usize::MAX);
        let o = m
            .step(|i| {
                calls.set(calls.get() + 1);
                asked.set(i);
                0.5
            })
            .unwrap();
        assert_eq!(calls.get(), 1);
        assert_eq!(asked.get(), o.chosen);
        assert!(o.chosen < f.active_count(o.round));
    }
}

#[test]
fn entering_experts_never_look_better_than_the_prefix() {
    let f = ExpertFamily::from_weights(&[0.5, 0.25, 0.125], 2.0).unwrap();
    let mut m = MasterState::new(&f, Schedule::entering_bounded(), RngContract::new(1));
    // prefixes[t] = sum of caps over rounds 1..=t
    let mut prefixes = vec![0.0];
    for _ in 0..500 {
        let t = m.round();
        let cap = f.estimated_loss_cap(t, &Schedule::entering_bounded());
        m.step(|_| 1.0).unwrap();
        prefixes.push(prefixes[t as usize - 1] + cap);
        for (i, c) in m.cum_est_loss().iter().enumerate() {
            let tau = f.expert(i).entering_time() as usize;
            assert!(*c >= prefixes[tau - 1], "expert {i} at round {t}");
        }
        let prefix = prefixes[t as usize];
        assert!((m.inactive_sum() - prefix).abs() <= 1e-9 * prefix);
    }
    assert_eq!(m.active_count(), 3);
}

#[test]
fn uniform_family_collapses_to_the_uniform_algorithm() {
    for seed in 0..5 {
        let f = ExpertFamily::uniform(6).unwrap();
        let general = master::run(&f, Schedule::bounded_losses(), &mut oblivious_worst_case(6, 0.1, seed).unwrap(), 1000, seed).unwrap();
        let direct = uniform::run(6, Schedule::bounded_losses(), &mut oblivious_worst_case(6, 0.1, seed).unwrap(), 1000, RngContract::new(seed)).unwrap();
        for (a, b) in general.iter().zip(&direct) {
            assert_eq!(a.chosen, b.chosen);
            assert_eq!(a.explored, b.explored);
            assert_eq!(a.master_loss, b.master_loss);
            assert!((a.estimate_applied - b.estimate_applied).abs() <= 1e-12 * b.estimate_applied.max(1.0));
        }
    }
}

#[test]
fn reruns_are_identical() {
    let f = ExpertFamily::uniform(4).unwrap();
    let run = || {
        let mut env = AdaptiveEnvironment::new(4, AdaptiveRule::PunishFrequent).unwrap();
        master::run(&f, Schedule::growing_losses(), &mut env, 3000, 17).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn mimicking_master_has_zero_regret() {
    let f = ExpertFamily::uniform(1).unwrap();
    let mut env = ObliviousEnvironment::from_matrix(vec![vec![0.3], vec![0.9]]).unwrap();
    let rec = master::run(&f, ConstantRates::new(0.5, 0.1, 1.0).unwrap(), &mut env, 100, 0).unwrap();
    assert_eq!(regret(&rec, 0).unwrap().regret, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bound_terms_are_nonnegative_and_sum_to_total(n in 1usize..30, horizon in 1u64..3000, growing in any::<bool>()) {
        let s = if growing { Schedule::growing_losses() } else { Schedule::bounded_losses() };
        let r = uniform_prior_bound(n, &s, horizon).unwrap();
        for term in [r.complexity, r.entry_cost, r.perturbation, r.exploration, r.azuma_estimated, r.azuma_realized, r.expectation_tail] {
            prop_assert!(term >= 0.0);
        }
        let sum = r.complexity + r.entry_cost + r.perturbation + r.exploration + r.azuma_estimated + r.azuma_realized;
        prop_assert!((r.total - sum).abs() <= 1e-12 * sum);
    }

    #[test]
    fn general_bound_terms_are_consistent(w in proptest::collection::vec(0.01f64..1.0, 1..6), horizon in 1u64..2000, pick in 0usize..6) {
        let mass: f64 = w.iter().sum();
        let weights: Vec<f64> = w.iter().map(|x| x / mass).collect();
        let f = ExpertFamily::from_weights(&weights, 2.0).unwrap();
        let i = pick % f.len();
        let r = general_prior_bound(&f, &Schedule::entering_bounded(), horizon, i).unwrap();
        let sum = r.complexity + r.entry_cost + r.perturbation + r.exploration + r.azuma_estimated + r.azuma_realized;
        prop_assert!((r.total - sum).abs() <= 1e-12 * sum);
        prop_assert_eq!(r.comparator_entered, f.expert(i).entering_time() <= horizon);
    }

    #[test]
    fn chosen_expert_is_always_active(seed in any::<u64>(), alpha in 0.5f64..3.0) {
        let f = ExpertFamily::from_weights(&[0.4, 0.3, 0.2, 0.1], alpha).unwrap();
        let mut env = ObliviousEnvironment::from_matrix(vec![vec![0.1, 0.9, 0.5, 0.0]]).unwrap();
        let rec = master::run(&f, Schedule::entering_bounded(), &mut env, 300, seed).unwrap();
        let mut cum = 0.0;
        for r in &rec {
            prop_assert!(r.chosen < f.active_count(r.round));
            prop_assert!(r.estimate_applied <= r.estimate_cap * (1.0 + 1e-12));
            cum += r.master_loss;
            prop_assert_eq!(cum, r.cumulative_master_loss);
        }
    }
}
