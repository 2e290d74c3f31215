use std::ops::Range;
use std::sync::Arc;

use crate::env::{DayInputs, DayPlan, HouseholdParams};
use crate::{Error, Result};

/// Variables of one household at one step, in layout order.
pub const STEP_VARS: usize = 8;

/// Column positions of every decision variable.
#[derive(Debug, Clone, PartialEq)]
pub struct VarLayout {
    pub n_agents: usize,
    pub horizon: usize,
    agent_base: Vec<usize>,
    /// Per agent: `(demand step, consumption step, column)` of each partial
    /// consumption of a flexible load.
    pub flexible: Vec<Vec<(usize, usize, usize)>>,
    g_base: usize,
    pub n_vars: usize,
}

impl VarLayout {
    fn col(&self, i: usize, t: usize, k: usize) -> usize {
        self.agent_base[i] + STEP_VARS * t + k
    }
    pub fn b_in(&self, i: usize, t: usize) -> usize {
        self.col(i, t, 0)
    }
    pub fn b_out(&self, i: usize, t: usize) -> usize {
        self.col(i, t, 1)
    }
    pub fn h(&self, i: usize, t: usize) -> usize {
        self.col(i, t, 2)
    }
    pub fn p(&self, i: usize, t: usize) -> usize {
        self.col(i, t, 3)
    }
    /// Export auxiliary, `x ≥ max(−p, 0)`.
    pub fn x(&self, i: usize, t: usize) -> usize {
        self.col(i, t, 4)
    }
    /// Battery level at the end of step `t`.
    pub fn e_next(&self, i: usize, t: usize) -> usize {
        self.col(i, t, 5)
    }
    pub fn t_mass_next(&self, i: usize, t: usize) -> usize {
        self.col(i, t, 6)
    }
    pub fn t_air_next(&self, i: usize, t: usize) -> usize {
        self.col(i, t, 7)
    }
    pub fn g(&self, t: usize) -> usize {
        self.g_base + t
    }
}

/// Constraint row groups, used to name the violated family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    EnergyBalance,
    BatteryDynamics,
    TerminalLevel,
    MassTemperature,
    AirTemperature,
    FlexibleDemand,
    GridBalance,
    ChargeLimits,
    DischargeLimits,
    Heating,
    Export,
    BatteryBounds,
    Comfort,
    FlexibleConsumption,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::EnergyBalance => "energy balance",
            Family::BatteryDynamics => "battery dynamics",
            Family::TerminalLevel => "terminal battery level",
            Family::MassTemperature => "mass temperature",
            Family::AirTemperature => "air temperature",
            Family::FlexibleDemand => "flexible demand",
            Family::GridBalance => "grid balance",
            Family::ChargeLimits => "charge limits",
            Family::DischargeLimits => "discharge limits",
            Family::Heating => "heating",
            Family::Export => "export",
            Family::BatteryBounds => "battery bounds",
            Family::Comfort => "comfort",
            Family::FlexibleConsumption => "flexible consumption",
        }
    }
}

/// Sparse convex QP: minimise `½xᵀPx + qᵀx` subject to `A_eq x = b_eq` and
/// `A_in x ≤ b_in`. Equality rows come first in `a`/`b`; `p` holds the
/// upper triangle only.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QpData {
    pub n: usize,
    pub p: Vec<(usize, usize, f64)>,
    pub q: Vec<f64>,
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub n_eq: usize,
    pub n_ineq: usize,
}

/// The day-horizon problem of a community.
#[derive(Debug, Clone)]
pub struct DayProblem {
    pub params: Arc<HouseholdParams>,
    pub day: Arc<DayInputs>,
    pub plans: Vec<DayPlan>,
    pub layout: VarLayout,
    pub qp: QpData,
    pub families: Vec<(Family, Range<usize>)>,
}

impl DayProblem {
    pub fn family_of_row(&self, row: usize) -> Family {
        self.families
            .iter()
            .find(|(_, r)| r.contains(&row))
            .map(|(f, _)| *f)
            .expect("every row belongs to a family")
    }
}

struct Rows {
    a: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    families: Vec<(Family, Range<usize>)>,
}

impl Rows {
    fn push(&mut self, family: Family, coeffs: &[(usize, f64)], rhs: f64) {
        let r = self.b.len();
        for &(c, v) in coeffs {
            if v != 0.0 {
                self.a.push((r, c, v));
            }
        }
        self.b.push(rhs);
        match self.families.last_mut() {
            Some((f, range)) if *f == family && range.end == r => range.end = r + 1,
            _ => self.families.push((family, r..r + 1)),
        }
    }
}

/// Assembles the day problem.
///
/// Infeasible EV schedules or comfort bands are reported before any solve.
pub fn build_problem(params: Arc<HouseholdParams>, day: Arc<DayInputs>) -> Result<DayProblem> {
    params.validate()?;
    day.validate()?;
    let n_agents = day.n_agents();
    let horizon = day.horizon();
    if n_agents == 0 || horizon == 0 {
        return Err(Error::Invalid("empty day problem".into()));
    }
    let plans = day
        .profiles
        .iter()
        .enumerate()
        .map(|(i, p)| DayPlan::new(&params, p, i))
        .collect::<Result<Vec<_>>>()?;

    let share = params.flex.share;
    let mut agent_base = Vec::with_capacity(n_agents);
    let mut flexible = Vec::with_capacity(n_agents);
    let mut next = 0;
    for prof in &day.profiles {
        agent_base.push(next);
        next += STEP_VARS * horizon;
        let mut cols = Vec::new();
        for td in 0..horizon {
            if share * prof.household_demand[td] > 0.0 {
                for tc in td..=params.flex.deadline(td, horizon) {
                    cols.push((td, tc, next));
                    next += 1;
                }
            }
        }
        flexible.push(cols);
    }
    let g_base = next;
    let layout = VarLayout {
        n_agents,
        horizon,
        agent_base,
        flexible,
        g_base,
        n_vars: g_base + horizon,
    };
    let l = &layout;
    let b = &params.battery;
    let k = &params.kappa;

    let mut rows = Rows {
        a: Vec::new(),
        b: Vec::new(),
        families: Vec::new(),
    };
    for (i, prof) in day.profiles.iter().enumerate() {
        for t in 0..horizon {
            let mut coeffs = vec![
                (l.p(i, t), 1.0),
                (l.h(i, t), -1.0),
                (l.b_in(i, t), -1.0 / b.eta_ch),
                (l.b_out(i, t), b.eta_dis),
            ];
            coeffs.extend(l.flexible[i].iter().filter(|f| f.1 == t).map(|f| (f.2, -1.0)));
            let fixed = (1.0 - share) * prof.household_demand[t];
            rows.push(Family::EnergyBalance, &coeffs, fixed - prof.pv_generation[t]);
        }
    }
    for (i, prof) in day.profiles.iter().enumerate() {
        for t in 0..horizon {
            let mut coeffs = vec![(l.e_next(i, t), 1.0), (l.b_in(i, t), -1.0), (l.b_out(i, t), 1.0)];
            let mut rhs = -prof.ev_demand[t];
            if t == 0 {
                rhs += b.initial;
            } else {
                coeffs.push((l.e_next(i, t - 1), -1.0));
            }
            rows.push(Family::BatteryDynamics, &coeffs, rhs);
        }
    }
    for i in 0..n_agents {
        rows.push(Family::TerminalLevel, &[(l.e_next(i, horizon - 1), 1.0)], b.initial);
    }
    for (family, row, tm_next) in [
        (Family::MassTemperature, &k.mass, VarLayout::t_mass_next as fn(&VarLayout, usize, usize) -> usize),
        (Family::AirTemperature, &k.air, VarLayout::t_air_next),
    ] {
        for (i, prof) in day.profiles.iter().enumerate() {
            for t in 0..horizon {
                let mut coeffs = vec![(tm_next(l, i, t), 1.0), (l.h(i, t), -row[4])];
                let mut rhs = row[0] + row[2] * prof.external_temp[t] + row[3] * prof.solar_gain[t];
                if t == 0 {
                    rhs += row[1] * params.initial_temp;
                } else {
                    coeffs.push((l.t_mass_next(i, t - 1), -row[1]));
                }
                rows.push(family, &coeffs, rhs);
            }
        }
    }
    for (i, prof) in day.profiles.iter().enumerate() {
        for td in 0..horizon {
            let cols: Vec<(usize, f64)> = l.flexible[i]
                .iter()
                .filter(|f| f.0 == td)
                .map(|f| (f.2, 1.0))
                .collect();
            if !cols.is_empty() {
                rows.push(Family::FlexibleDemand, &cols, share * prof.household_demand[td]);
            }
        }
    }
    for t in 0..horizon {
        let mut coeffs = vec![(l.g(t), 1.0)];
        coeffs.extend((0..n_agents).map(|i| (l.p(i, t), -1.0)));
        rows.push(Family::GridBalance, &coeffs, 0.0);
    }
    let n_eq = rows.b.len();

    for (i, prof) in day.profiles.iter().enumerate() {
        for t in 0..horizon {
            let mu = if prof.ev_at_home[t] { 1.0 } else { 0.0 };
            rows.push(Family::ChargeLimits, &[(l.b_in(i, t), -1.0)], 0.0);
            rows.push(Family::ChargeLimits, &[(l.b_in(i, t), 1.0)], mu * b.max_charge);
            rows.push(Family::DischargeLimits, &[(l.b_out(i, t), -1.0)], 0.0);
            rows.push(Family::DischargeLimits, &[(l.b_out(i, t), 1.0)], mu * b.capacity);
            rows.push(Family::Heating, &[(l.h(i, t), -1.0)], 0.0);
            rows.push(Family::Export, &[(l.x(i, t), -1.0)], 0.0);
            rows.push(Family::Export, &[(l.x(i, t), -1.0), (l.p(i, t), -1.0)], 0.0);
            if t + 1 < horizon {
                let mu_next = if prof.ev_at_home[t + 1] { 1.0 } else { 0.0 };
                rows.push(Family::BatteryBounds, &[(l.e_next(i, t), 1.0)], b.capacity);
                rows.push(Family::BatteryBounds, &[(l.e_next(i, t), -1.0)], -(mu_next * b.min_level));
            }
            let band = &plans[i].band;
            rows.push(Family::Comfort, &[(l.t_air_next(i, t), 1.0)], band.upper[t]);
            rows.push(Family::Comfort, &[(l.t_air_next(i, t), -1.0)], -band.lower[t]);
        }
        for &(_, _, col) in &l.flexible[i] {
            rows.push(Family::FlexibleConsumption, &[(col, -1.0)], 0.0);
        }
    }
    let n_ineq = rows.b.len() - n_eq;

    let grid = &day.grid;
    let loss = grid.loss_coefficient();
    let mut q = vec![0.0; l.n_vars];
    let mut p = Vec::with_capacity(horizon);
    for t in 0..horizon {
        q[l.g(t)] = grid.cost[t];
        if loss > 0.0 {
            p.push((l.g(t), l.g(t), 2.0 * grid.cost[t] * loss));
        }
        for i in 0..n_agents {
            q[l.x(i, t)] = grid.distribution_charge;
            q[l.b_in(i, t)] = b.storage_cost;
            q[l.b_out(i, t)] = b.storage_cost;
        }
    }

    Ok(DayProblem {
        qp: QpData {
            n: l.n_vars,
            p,
            q,
            a: rows.a,
            b: rows.b,
            n_eq,
            n_ineq,
        },
        params,
        day,
        plans,
        layout,
        families: rows.families,
    })
}
