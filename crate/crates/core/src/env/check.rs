//! Constraint evaluation that recomputes everything from the day inputs,
//! independent of the action mapping and of the solver.

use super::episode::{DayInputs, DayTrace};
use super::params::HouseholdParams;

/// Decisions and trajectories of one household over a day.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AgentSchedule {
    /// Length `T + 1`.
    pub energy: Vec<f64>,
    pub t_mass: Vec<f64>,
    pub t_air: Vec<f64>,
    /// Length `T`.
    pub b_in: Vec<f64>,
    pub b_out: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub p: Vec<f64>,
    /// Flexible consumption as `(demand step, consumption step, kWh)`.
    pub flexible: Vec<(usize, usize, f64)>,
}

/// Largest violation found per constraint family (0 when satisfied).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConstraintReport {
    pub balance: f64,
    pub battery_dynamics: f64,
    pub battery_bounds: f64,
    pub gating: f64,
    pub terminal: f64,
    pub flexibility: f64,
    pub comfort: f64,
    pub thermal_dynamics: f64,
    pub nonnegativity: f64,
    /// Largest `min(b_in, b_out)`.
    pub simultaneous: f64,
}

impl ConstraintReport {
    pub fn merge(&mut self, o: &ConstraintReport) {
        self.balance = self.balance.max(o.balance);
        self.battery_dynamics = self.battery_dynamics.max(o.battery_dynamics);
        self.battery_bounds = self.battery_bounds.max(o.battery_bounds);
        self.gating = self.gating.max(o.gating);
        self.terminal = self.terminal.max(o.terminal);
        self.flexibility = self.flexibility.max(o.flexibility);
        self.comfort = self.comfort.max(o.comfort);
        self.thermal_dynamics = self.thermal_dynamics.max(o.thermal_dynamics);
        self.nonnegativity = self.nonnegativity.max(o.nonnegativity);
        self.simultaneous = self.simultaneous.max(o.simultaneous);
    }

    /// Largest violation over every family except the energy balance and
    /// simultaneous charge/discharge.
    pub fn worst(&self) -> f64 {
        [
            self.battery_dynamics,
            self.battery_bounds,
            self.gating,
            self.terminal,
            self.flexibility,
            self.comfort,
            self.thermal_dynamics,
            self.nonnegativity,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Name of the worst family and its violation.
    pub fn worst_family(&self) -> (&'static str, f64) {
        [
            ("balance", self.balance),
            ("battery dynamics", self.battery_dynamics),
            ("battery bounds", self.battery_bounds),
            ("charge gating", self.gating),
            ("terminal level", self.terminal),
            ("flexibility windows", self.flexibility),
            ("comfort", self.comfort),
            ("thermal dynamics", self.thermal_dynamics),
            ("non-negativity", self.nonnegativity),
        ]
        .into_iter()
        .fold(("none", 0.0), |a, b| if b.1 > a.1 { b } else { a })
    }
}

fn over(x: f64) -> f64 {
    x.max(0.0)
}

/// Evaluates every constraint of one household's schedule.
pub fn check_agent(params: &HouseholdParams, day: &DayInputs, agent: usize, s: &AgentSchedule) -> ConstraintReport {
    let prof = &day.profiles[agent];
    let b = &params.battery;
    let k = &params.kappa;
    let n = day.horizon();
    let mut r = ConstraintReport::default();
    let mut flex_total = vec![0.0; n];
    let mut flex_at = vec![0.0; n];
    for &(td, tc, x) in &s.flexible {
        r.nonnegativity = r.nonnegativity.max(over(-x));
        let deadline = params.flex.deadline(td, n);
        if tc < td || tc > deadline {
            r.flexibility = r.flexibility.max(x.abs());
        }
        flex_total[td] += x;
        flex_at[tc] += x;
    }
    r.terminal = (s.energy[n] - b.initial).abs().max((s.energy[0] - b.initial).abs());
    r.thermal_dynamics = (s.t_mass[0] - params.initial_temp)
        .abs()
        .max((s.t_air[0] - params.initial_temp).abs());
    for t in 0..n {
        let mu = if prof.ev_at_home[t] { 1.0 } else { 0.0 };
        let (bi, bo) = (s.b_in[t], s.b_out[t]);
        let bal = s.p[t] - (s.c[t] + s.h[t] + bi / b.eta_ch - b.eta_dis * bo - prof.pv_generation[t]);
        r.balance = r.balance.max(bal.abs());
        let next = s.energy[t] + bi - bo - prof.ev_demand[t];
        r.battery_dynamics = r.battery_dynamics.max((s.energy[t + 1] - next).abs());
        r.battery_bounds = r
            .battery_bounds
            .max(over(mu * b.min_level - s.energy[t]))
            .max(over(s.energy[t] - b.capacity));
        r.gating = r
            .gating
            .max(over(bi - mu * b.max_charge))
            .max(over(bo - mu * b.capacity));
        r.nonnegativity = [bi, bo, s.h[t], s.c[t], s.energy[t + 1]]
            .into_iter()
            .fold(r.nonnegativity, |m, v| m.max(over(-v)));
        r.simultaneous = r.simultaneous.max(bi.min(bo).max(0.0));

        let share = params.flex.share;
        let d = prof.household_demand[t];
        r.flexibility = r
            .flexibility
            .max((flex_total[t] - share * d).abs())
            .max((s.c[t] - (1.0 - share) * d - flex_at[t]).abs());

        let (te, phi, h) = (prof.external_temp[t], prof.solar_gain[t], s.h[t]);
        let tm = s.t_mass[t];
        let mass = k.mass[0] + k.mass[1] * tm + k.mass[2] * te + k.mass[3] * phi + k.mass[4] * h;
        let air = k.air[0] + k.air[1] * tm + k.air[2] * te + k.air[3] * phi + k.air[4] * h;
        r.thermal_dynamics = r
            .thermal_dynamics
            .max((s.t_mass[t + 1] - mass).abs())
            .max((s.t_air[t + 1] - air).abs());
        let sp = params.comfort.setpoint(t + 1);
        let tol = params.comfort.tolerance;
        r.comfort = r
            .comfort
            .max(over(sp - tol - s.t_air[t + 1]))
            .max(over(s.t_air[t + 1] - sp - tol));
    }
    r
}

/// Converts a simulated day into per-household schedules.
pub fn schedules_from_trace(trace: &DayTrace) -> Vec<AgentSchedule> {
    let n_agents = trace.states[0].len();
    (0..n_agents)
        .map(|i| {
            let mut s = AgentSchedule::default();
            for st in trace.states.iter().map(|row| &row[i]) {
                s.energy.push(st.energy);
                s.t_mass.push(st.thermal.t_mass);
                s.t_air.push(st.thermal.t_air);
            }
            for (t, step) in trace.steps.iter().enumerate() {
                let d = &step.decisions[i];
                s.b_in.push(d.b_in);
                s.b_out.push(d.b_out);
                s.h.push(d.h);
                s.c.push(d.c);
                s.p.push(d.p);
                let q = &trace.states[t][i].queue;
                for (e, x) in q.entries.iter().zip(&d.flex_served) {
                    if *x != 0.0 {
                        s.flexible.push((e.demand_step, t, *x));
                    }
                }
            }
            s
        })
        .collect()
}

/// Checks every household of a simulated day.
pub fn check_trace(params: &HouseholdParams, day: &DayInputs, trace: &DayTrace) -> ConstraintReport {
    let mut r = ConstraintReport::default();
    for (i, s) in schedules_from_trace(trace).iter().enumerate() {
        r.merge(&check_agent(params, day, i, s));
    }
    r
}
