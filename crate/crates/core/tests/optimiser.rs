mod common;

use std::sync::Arc;

use flexmarl::env::{
    baseline_day, check_trace, schedules_from_trace, simulate_day, BatteryParams, DayInputs, FlexParams, GridParams,
    HouseholdParams, RewardBreakdown,
};
use flexmarl::optimiser::{
    build_problem, extract_steps, kkt_residuals, solve_day, solver_by_name, write_schedule_csv, ClarabelSolver,
    KktResiduals, OptimalSchedule, STEP_VARS,
};
use flexmarl::profiles::DayProfile;
use flexmarl::thermal::ComfortSchedule;
use flexmarl::Error;
use proptest::prelude::*;

/// Household whose only decision is the battery: no flexible load, a comfort
/// band wide enough that heating is never needed.
fn battery_only(battery: BatteryParams) -> HouseholdParams {
    let mut p = common::params();
    p.battery = battery;
    p.flex = FlexParams { share: 0.0, n_flex: 5 };
    p.comfort = ComfortSchedule {
        target: 18.0,
        setback: 18.0,
        tolerance: 40.0,
        windows: vec![],
    };
    p.initial_temp = 18.0;
    p
}

fn toy_battery() -> BatteryParams {
    BatteryParams {
        capacity: 10.0,
        min_level: 0.0,
        initial: 5.0,
        max_charge: 5.0,
        ..BatteryParams::default()
    }
}

fn solve(params: HouseholdParams, day: DayInputs) -> OptimalSchedule {
    let problem = build_problem(Arc::new(params), Arc::new(day)).unwrap();
    solve_day(&problem, &ClarabelSolver::default()).unwrap()
}

/// Cost of the two-step toy when `y` kWh are charged at step 0 and
/// discharged at step 1 (negative `y` reverses the direction).
fn toy_cost(prices: [f64; 2], y: f64, b: &BatteryParams, g: &GridParams) -> f64 {
    let k = g.loss_coefficient();
    let mut cost = 0.0;
    for (t, flow) in [y, -y].into_iter().enumerate() {
        let (bi, bo) = (flow.max(0.0), (-flow).max(0.0));
        let p = 1.0 + bi / b.eta_ch - b.eta_dis * bo;
        cost += prices[t] * (p + k * p * p) + g.distribution_charge * (-p).max(0.0) + b.storage_cost * (bi + bo);
    }
    cost
}

#[test]
fn two_step_toy_matches_enumeration() {
    for prices in [[1.0, 10.0], [10.0, 1.0]] {
        let b = toy_battery();
        let mut grid = GridParams::flat(2, 1.0);
        grid.cost = prices.to_vec();
        grid.emissions_cost = vec![0.0; 2];
        let day = DayInputs {
            profiles: vec![DayProfile::flat(2, 1.0, 18.0)],
            grid: grid.clone(),
        };
        let s = solve(battery_only(b), day);

        let (mut best_y, mut best) = (0.0, f64::INFINITY);
        for i in -50_000..=50_000 {
            let y = i as f64 * 1e-4;
            let c = toy_cost(prices, y, &b, &grid);
            if c < best {
                best = c;
                best_y = y;
            }
        }
        assert!((s.objective - best).abs() < 1e-6, "{} vs {best}", s.objective);
        assert!((-s.total.total - best).abs() < 1e-6);
        let y = s.agents[0].b_in[0] - s.agents[0].b_out[0];
        assert!((y - best_y).abs() < 2e-3, "{y} vs {best_y}");
        if prices[0] < prices[1] {
            assert!(y > 0.0);
        } else {
            assert!(y < 0.0);
        }
    }
}

#[test]
fn flat_prices_without_trips_leave_the_battery_idle() {
    let p = battery_only(BatteryParams::default());
    let day = DayInputs {
        profiles: vec![DayProfile::flat(24, 0.7, 10.0); 2],
        grid: GridParams::flat(24, 0.2),
    };
    let s = solve(p, day);
    let throughput: f64 = s.agents.iter().flat_map(|a| a.b_in.iter().chain(&a.b_out)).sum();
    assert!(throughput < 1e-6, "throughput {throughput}");
}

#[test]
fn variable_count_without_flexible_loads() {
    let mut p = common::params();
    p.flex.share = 0.0;
    for n in [1, 3] {
        let day = common::synthetic_day(n, 11);
        let problem = build_problem(Arc::new(p.clone()), day).unwrap();
        assert_eq!(STEP_VARS, 8);
        assert_eq!(problem.qp.n, 8 * 24 * n + 24);
    }
}

#[test]
fn flexible_columns_follow_the_deadlines() {
    let p = common::params();
    let day = DayInputs {
        profiles: vec![DayProfile::flat(24, 1.0, 5.0)],
        grid: GridParams::flat(24, 0.2),
    };
    let problem = build_problem(Arc::new(p), Arc::new(day)).unwrap();
    // deadlines t + 5 clipped to 23: 19 full windows of 6, then 5, 4, 3, 2, 1
    let expected = 19 * 6 + 5 + 4 + 3 + 2 + 1;
    assert_eq!(problem.layout.flexible[0].len(), expected);
    assert_eq!(problem.qp.n, 8 * 24 + expected + 24);
}

#[test]
fn impossible_trip_is_reported_before_solving() {
    let mut prof = DayProfile::flat(24, 0.5, 5.0);
    prof.ev_at_home[3] = false;
    prof.ev_demand[3] = 80.0;
    let day = DayInputs {
        profiles: vec![prof],
        grid: GridParams::flat(24, 0.2),
    };
    let err = build_problem(Arc::new(common::params()), Arc::new(day)).unwrap_err();
    assert!(matches!(err, Error::InfeasibleEvSchedule { agent: 0, .. }), "{err}");
}

#[test]
fn unknown_backend_is_a_config_error() {
    assert!(solver_by_name("clarabel").is_ok());
    assert!(matches!(solver_by_name("gurobi"), Err(Error::Config(_))));
}

#[test]
fn residuals_are_recomputed_from_problem_data() {
    let params = Arc::new(common::params());
    let day = common::synthetic_day(2, 21);
    let problem = build_problem(params, day).unwrap();
    let backend = solver_by_name("clarabel").unwrap();
    let sol = backend.solve(&problem.qp).unwrap();
    let r = kkt_residuals(&problem.qp, &sol.x, &sol.z);
    assert!(r.max() < 1e-6, "{r:?}");
    // a perturbed point is no longer optimal
    let mut x = sol.x.clone();
    x[problem.layout.p(0, 0)] += 1.0;
    let bad = kkt_residuals(&problem.qp, &x, &sol.z);
    assert!(bad.primal > 0.5);
    assert_eq!(KktResiduals::default().max(), 0.0);
}

#[test]
fn schedule_csv_has_a_row_per_household_step() {
    let s = solve(
        battery_only(toy_battery()),
        DayInputs {
            profiles: vec![DayProfile::flat(3, 1.0, 18.0); 2],
            grid: GridParams::flat(3, 0.2),
        },
    );
    let mut buf = Vec::new();
    write_schedule_csv(&mut buf, &s).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    assert!(text.starts_with("agent,step,energy"));
}

#[test]
fn passive_schedule_projects_onto_the_passive_action() {
    let params = Arc::new(common::params());
    let day = common::synthetic_day(2, 33);
    let trace = baseline_day(params.clone(), day.clone()).unwrap();
    let problem = build_problem(params, day).unwrap();
    let schedule = OptimalSchedule {
        agents: schedules_from_trace(&trace),
        import: trace.steps.iter().map(|s| s.reward.import).collect(),
        steps: trace.steps.iter().map(|s| s.reward).collect(),
        total: trace.total,
        objective: -trace.total.total,
        residuals: KktResiduals::default(),
        constraints: Default::default(),
    };
    for n_actions in [2, 5, 10] {
        let steps = extract_steps(&problem, &schedule, n_actions).unwrap();
        assert_eq!(steps.len(), 2 * 24);
        for s in &steps {
            assert!(s.distance < 1e-9, "agent {} step {}: {}", s.agent, s.t, s.distance);
            // the household is already passive
            assert!(s.marginal.abs() < 1e-9);
        }
        // no earlier action reproduces the passive charge at the start of the day
        assert!(steps.iter().any(|s| s.action == n_actions - 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn optimum_dominates_every_policy(seed in 0u64..1000, n in 1usize..4, psis in prop::collection::vec(0.0f64..=1.0, 72)) {
        let params = Arc::new(common::params());
        let day = common::synthetic_day(n, seed);
        let problem = build_problem(params.clone(), day.clone()).unwrap();
        let s = solve_day(&problem, &ClarabelSolver::default()).unwrap();
        prop_assert!(s.residuals.max() < 1e-6, "{:?}", s.residuals);
        prop_assert!(s.constraints.worst() < 1e-6 && s.constraints.balance < 1e-6);
        prop_assert!((s.objective + s.total.total).abs() < 1e-6 * (1.0 + s.objective.abs()));

        let base = baseline_day(params.clone(), day.clone()).unwrap();
        prop_assert!(s.total.total >= base.total.total - 1e-6);
        let random = simulate_day(params.clone(), day.clone(), |i, t| psis[(i * 24 + t) % psis.len()]).unwrap();
        prop_assert!(check_trace(&params, &day, &random).worst() < 1e-6);
        prop_assert!(s.total.total >= random.total.total - 1e-6);

        let steps = extract_steps(&problem, &s, 10).unwrap();
        prop_assert_eq!(steps.len(), n * 24);
        let per_step: f64 = steps.iter().filter(|x| x.agent == 0).map(|x| x.reward).sum();
        prop_assert!((per_step - s.total.total).abs() < 1e-9);
        prop_assert!(steps.iter().all(|x| x.action < 10));
        let summed = RewardBreakdown::sum(&s.steps);
        prop_assert!((summed.total - s.total.total).abs() < 1e-12);
    }
}
