mod common;

use std::sync::Arc;

use flexmarl::marl::{
    discretize_state, evaluate, select_action, td_update, train, AdvantageReward, CountReward, ExperienceTuple,
    HouseholdScenario, LearningParams, MarginalReward, QTable, Registry, RewardRule, SourceKind, StrategyConfig,
    Structure, Tables, ToyScenario, TotalReward,
};
use flexmarl::profiles::{generate_synthetic_bank, SyntheticConfig};
use flexmarl::rng::rng_for;
use flexmarl::Error;
use proptest::prelude::*;
use rand::Rng as _;

fn tuple(s: usize, a: usize, r: f64, next: Option<usize>) -> ExperienceTuple {
    ExperienceTuple {
        agent: 0,
        state: s,
        action: a,
        reward: r,
        marginal: Some(r),
        next_state: next,
        source: SourceKind::Optimisation,
    }
}

fn tables() -> Tables {
    TotalReward.new_tables(3, 10)
}

#[test]
fn single_positive_and_negative_updates() {
    let p = LearningParams::default();
    let mut t = tables();
    TotalReward.update(&mut t, &tuple(0, 0, 0.0, Some(1)), &p).unwrap();
    assert!(t.q.values().iter().all(|&v| v == 0.0));

    TotalReward.update(&mut t, &tuple(1, 2, 1.0, Some(0)), &p).unwrap();
    assert!((t.q.get(1, 2) - 0.01).abs() < 1e-15);

    let mut t = tables();
    TotalReward.update(&mut t, &tuple(1, 2, -1.0, None), &p).unwrap();
    assert!((t.q.get(1, 2) + 0.005).abs() < 1e-15);
}

#[test]
fn next_state_value_is_discounted() {
    let p = LearningParams::default();
    let mut q = QTable::new(2, 3);
    q.set(1, 2, 2.0);
    let delta = td_update(&mut q, &tuple(0, 1, 0.5, Some(1)), 0.5, &p);
    assert!((delta - (0.5 + 0.99 * 2.0)).abs() < 1e-15);
    assert!((q.get(0, 1) - 0.01 * delta).abs() < 1e-15);
}

#[test]
fn advantage_moves_by_the_q_gap() {
    let p = LearningParams::default();
    let mut total = QTable::new(3, 10);
    total.set(0, 4, 0.5);
    total.set(0, 9, 0.2);
    let mut adv = QTable::new(3, 10);
    AdvantageReward::advantage_update(&mut adv, &total, &tuple(0, 4, 0.0, None), &p);
    assert!((adv.get(0, 4) - 0.01 * 0.3).abs() < 1e-15);

    // the passive action's advantage is pulled to zero
    adv.set(0, 9, 0.4);
    AdvantageReward::advantage_update(&mut adv, &total, &tuple(0, 9, 0.0, None), &p);
    assert!(adv.get(0, 9) < 0.4);
}

#[test]
fn advantage_rule_keeps_a_total_table() {
    let p = LearningParams::default();
    let mut t = AdvantageReward.new_tables(3, 10);
    AdvantageReward.update(&mut t, &tuple(0, 3, 1.0, None), &p).unwrap();
    let total = t.aux.as_ref().unwrap();
    assert!((total.get(0, 3) - 0.01).abs() < 1e-15);
    assert!((t.q.get(0, 3) - 0.01 * 0.01).abs() < 1e-15);
}

#[test]
fn marginal_rule_requires_the_marginal() {
    let p = LearningParams::default();
    let mut t = tables();
    let mut x = tuple(0, 0, 1.0, None);
    x.marginal = Some(-2.0);
    MarginalReward.update(&mut t, &x, &p).unwrap();
    assert!((t.q.get(0, 0) + 0.01).abs() < 1e-15);
    x.marginal = None;
    assert!(MarginalReward.update(&mut t, &x, &p).is_err());
}

#[test]
fn counts_need_optimiser_experience() {
    let p = LearningParams::default();
    let mut t = CountReward.new_tables(3, 10);
    for _ in 0..7 {
        CountReward.update(&mut t, &tuple(2, 5, 0.0, None), &p).unwrap();
    }
    assert_eq!(t.q.get(2, 5), 7.0);
    assert_eq!(t.q.values().iter().sum::<f64>(), 7.0);
    let mut env = tuple(2, 5, 0.0, None);
    env.source = SourceKind::Environment;
    assert!(matches!(CountReward.update(&mut t, &env, &p), Err(Error::Unsupported(_))));

    let mut q = QTable::new(1, 4);
    q.set(0, 1, 3.0);
    q.set(0, 3, 3.0);
    assert_eq!(q.argmax(0), 1);
}

#[test]
fn state_buckets() {
    assert_eq!(discretize_state(0.25, 0.10, 0.40, 3), 1);
    assert_eq!(discretize_state(0.40, 0.10, 0.40, 3), 2);
    assert_eq!(discretize_state(0.10, 0.10, 0.40, 3), 0);
    assert_eq!(discretize_state(0.3, 0.3, 0.3, 3), 0);
}

#[test]
fn greedy_selection_and_uniform_exploration() {
    let mut rng = rng_for(1, &[]);
    let mut q = QTable::new(1, 10);
    assert_eq!(select_action(&q, 0, 0.0, &mut rng), 0);
    q.set(0, 6, 0.1);
    assert_eq!(select_action(&q, 0, 0.0, &mut rng), 6);

    let n = 10_000;
    let mut freq = [0usize; 10];
    for _ in 0..n {
        freq[select_action(&q, 0, 1.0, &mut rng)] += 1;
    }
    let p = 0.1;
    let se = (n as f64 * p * (1.0 - p)).sqrt();
    for f in freq {
        assert!((f as f64 - n as f64 * p).abs() < 3.0 * se, "{freq:?}");
    }
}

#[test]
fn strategy_names() {
    let te = StrategyConfig::parse("TE").unwrap();
    assert_eq!(te.structure, Structure::Centralised);
    assert_eq!((te.source.as_str(), te.reward.as_str()), ("environment", "total"));
    let mo = StrategyConfig::parse("MO").unwrap();
    assert_eq!(mo.structure, Structure::Distributed);
    assert_eq!(StrategyConfig::parse("mo-c").unwrap().label(), "MO-c");
    assert_eq!(StrategyConfig::parse("TE-c").unwrap().label(), "TE");
    assert!(StrategyConfig::parse("XX").is_err());
    assert!(StrategyConfig::parse("TE-q").is_err());
    assert_eq!(StrategyConfig::all().len(), 7);

    let reg = Registry::default();
    for s in StrategyConfig::all() {
        reg.resolve(&s).unwrap();
    }
    let bad = StrategyConfig::new("environment", "count", Structure::Centralised);
    assert!(matches!(reg.resolve(&bad), Err(Error::Config(_))));
}

/// Random toy with a unique best action per state.
fn toy(seed: u64, n_states: usize, n_actions: usize) -> ToyScenario {
    let mut rng = rng_for(seed, &[99]);
    let rewards = (0..n_states)
        .map(|_| {
            let best = rng.random_range(0..n_actions);
            (0..n_actions)
                .map(|a| if a == best { rng.random_range(0.5..1.0) } else { -rng.random_range(0.2..1.0) })
                .collect()
        })
        .collect();
    ToyScenario { rewards }
}

/// Best policy by enumerating every action map.
fn brute_force(toy: &ToyScenario) -> Vec<usize> {
    let (n_s, n_a) = (toy.rewards.len(), toy.rewards[0].len());
    let mut best = (f64::NEG_INFINITY, vec![]);
    for code in 0..n_a.pow(n_s as u32) {
        let policy: Vec<usize> = (0..n_s).map(|s| code / n_a.pow(s as u32) % n_a).collect();
        let ret: f64 = policy.iter().enumerate().map(|(s, &a)| toy.rewards[s][a]).sum();
        if ret > best.0 {
            best = (ret, policy);
        }
    }
    best.1
}

#[test]
fn total_reward_learns_the_toy_optimum() {
    let params = LearningParams {
        epochs: 500,
        n_states: 2,
        ..LearningParams::default()
    };
    let reg = Registry::default();
    let te = StrategyConfig::parse("TE").unwrap();
    let mut hits = 0;
    for seed in 0..10 {
        let t = toy(seed, 2, 10);
        let out = train(&te, &reg, &t, &params, seed).unwrap();
        let learned: Vec<usize> = (0..2).map(|s| out.learner.policy(0).argmax(s)).collect();
        if learned == brute_force(&t) {
            hits += 1;
        }
    }
    assert!(hits >= 9, "{hits}/10");
}

#[test]
fn zero_exploration_starts_from_the_tie_rule() {
    let params = LearningParams {
        epochs: 1,
        epsilon: 0.0,
        n_states: 2,
        ..LearningParams::default()
    };
    let t = toy(3, 2, 10);
    let reg = Registry::default();
    let te = StrategyConfig::parse("TE").unwrap();
    let a = train(&te, &reg, &t, &params, 1).unwrap();
    let b = train(&te, &reg, &t, &params, 2).unwrap();
    assert_eq!(a.trajectory, b.trajectory);
}

fn small_scenario(n_agents: usize, params: &LearningParams, seed: u64) -> HouseholdScenario {
    let mut rng = rng_for(seed, &[7]);
    let banks = generate_synthetic_bank(&SyntheticConfig::default(), &mut rng).unwrap();
    HouseholdScenario::synthetic(
        Arc::new(common::params()),
        &banks,
        &[common::tou_grid(24)],
        n_agents,
        params,
        seed,
    )
    .unwrap()
}

#[test]
fn passive_policy_saves_exactly_nothing() {
    let params = LearningParams {
        epochs: 3,
        ..LearningParams::default()
    };
    let sc = small_scenario(3, &params, 5);
    for epoch in 0..3 {
        let e = evaluate(&sc, epoch, |_, _| 9).unwrap();
        assert_eq!(e.savings, 0.0);
        assert_eq!(e.deltas.net(), 0.0);
    }
}

#[test]
fn component_deltas_add_up_to_savings() {
    let params = LearningParams {
        epochs: 2,
        ..LearningParams::default()
    };
    let sc = small_scenario(2, &params, 8);
    let e = evaluate(&sc, 1, |i, s| (i + 3 * s) % 10).unwrap();
    assert!((e.deltas.net() - e.savings).abs() < 1e-9);
    let c = e.constraints.unwrap();
    assert!(c.balance < 1e-9 && c.worst < 1e-6);
}

#[test]
fn count_training_ingests_one_tuple_per_agent_step() {
    let params = LearningParams {
        epochs: 3,
        ..LearningParams::default()
    };
    let sc = small_scenario(2, &params, 9);
    let reg = Registry::default();
    for name in ["CO", "CO-c"] {
        let out = train(&StrategyConfig::parse(name).unwrap(), &reg, &sc, &params, 1).unwrap();
        let sum: f64 = out.learner.tables().iter().flat_map(|t| t.q.values()).sum();
        assert_eq!(sum, (2 * 24 * 2 * 3) as f64);
        assert_eq!(out.tuples, 2 * 24 * 2 * 3);
    }
}

#[test]
fn table_shape_is_independent_of_agent_count() {
    let params = LearningParams {
        epochs: 1,
        ..LearningParams::default()
    };
    let reg = Registry::default();
    for n in [1, 4] {
        let sc = small_scenario(n, &params, 2);
        for name in ["TE", "ME-d", "AO"] {
            let out = train(&StrategyConfig::parse(name).unwrap(), &reg, &sc, &params, 3).unwrap();
            for t in out.learner.tables() {
                assert_eq!((t.q.n_states(), t.q.n_actions()), (3, 10));
                assert!(t.q.is_finite());
            }
            for rec in &out.trajectory {
                for (t, row) in rec.evaluation.actions.iter().enumerate() {
                    let s = flexmarl::marl::discretize_day(&common::tou_grid(24).cost, 3)[t];
                    for (i, &a) in row.iter().enumerate() {
                        assert_eq!(a, out.learner.policy(i).argmax(s));
                    }
                }
            }
        }
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let params = LearningParams {
        epochs: 3,
        ..LearningParams::default()
    };
    let sc = small_scenario(3, &params, 4);
    let reg = Registry::default();
    for name in ["TE", "ME", "MO"] {
        let s = StrategyConfig::parse(name).unwrap();
        let a = train(&s, &reg, &sc, &params, 11).unwrap();
        let b = train(&s, &reg, &sc, &params, 11).unwrap();
        assert_eq!(a.trajectory, b.trajectory, "{name}");
        assert_eq!(a.learner.tables(), b.learner.tables());
    }
    let te = StrategyConfig::parse("TE").unwrap();
    let a = train(&te, &reg, &sc, &params, 1).unwrap();
    let b = train(&te, &reg, &sc, &params, 2).unwrap();
    assert_eq!(a.trajectory.len(), b.trajectory.len());
    assert_ne!(a.learner.tables(), b.learner.tables());
}

proptest! {
    #[test]
    fn negative_updates_are_beta_times_positive(mag in 1e-6f64..1e3, q0 in -10.0f64..10.0) {
        let p = LearningParams::default();
        let up = td_update(&mut { let mut q = QTable::new(1, 2); q.set(0, 0, q0); q }, &tuple(0, 0, q0 + mag, None), q0 + mag, &p);
        prop_assert!((up - mag).abs() <= 1e-9 * mag.max(1.0));
        let step = |delta: f64| p.rate(delta) * delta;
        prop_assert_eq!(step(-mag).abs(), p.beta * step(mag).abs());
    }

    #[test]
    fn advantage_greedy_ignores_row_shifts(row in prop::collection::vec(-5.0f64..5.0, 10), shift in -100.0f64..100.0, a in 0usize..10) {
        let p = LearningParams::default();
        let mut total = QTable::new(1, 10);
        let mut shifted = QTable::new(1, 10);
        for (i, v) in row.iter().enumerate() {
            total.set(0, i, *v);
            shifted.set(0, i, v + shift);
        }
        let mut adv1 = QTable::new(1, 10);
        let mut adv2 = QTable::new(1, 10);
        AdvantageReward::advantage_update(&mut adv1, &total, &tuple(0, a, 0.0, None), &p);
        AdvantageReward::advantage_update(&mut adv2, &shifted, &tuple(0, a, 0.0, None), &p);
        prop_assert!((adv1.get(0, a) - adv2.get(0, a)).abs() < 1e-9);
    }
}
