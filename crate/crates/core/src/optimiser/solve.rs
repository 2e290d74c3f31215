use std::fmt;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use super::problem::{DayProblem, Family, QpData};
use crate::env::{check_agent, step_system, AgentSchedule, ConstraintReport, Decisions, RewardBreakdown};
use crate::{Error, Result};

/// Largest residual accepted from a backend.
pub const RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    PrimalInfeasible,
    DualInfeasible,
    /// Iteration or time limit, or numerical trouble.
    Stopped,
}

impl fmt::Display for QpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            QpStatus::Solved => "solved",
            QpStatus::PrimalInfeasible => "primal infeasible",
            QpStatus::DualInfeasible => "dual infeasible",
            QpStatus::Stopped => "stopped",
        };
        f.write_str(s)
    }
}

/// Backend output. `z` holds the multipliers of every row, non-negative on
/// inequality rows; on infeasibility it is the certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub status: QpStatus,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub iterations: u32,
}

/// A convex QP backend.
pub trait QpSolver: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, qp: &QpData) -> Result<QpSolution>;
}

/// Interior-point backend.
#[derive(Debug, Clone)]
pub struct ClarabelSolver {
    pub max_iter: u32,
    pub tolerance: f64,
}

impl Default for ClarabelSolver {
    fn default() -> Self {
        ClarabelSolver {
            max_iter: 200,
            tolerance: 1e-10,
        }
    }
}

fn csc(rows: usize, cols: usize, trip: &[(usize, usize, f64)]) -> CscMatrix<f64> {
    let i: Vec<usize> = trip.iter().map(|e| e.0).collect();
    let j: Vec<usize> = trip.iter().map(|e| e.1).collect();
    let v: Vec<f64> = trip.iter().map(|e| e.2).collect();
    CscMatrix::new_from_triplets(rows, cols, i, j, v)
}

impl QpSolver for ClarabelSolver {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn solve(&self, qp: &QpData) -> Result<QpSolution> {
        let m = qp.n_eq + qp.n_ineq;
        let p = csc(qp.n, qp.n, &qp.p);
        let a = csc(m, qp.n, &qp.a);
        let cones: Vec<SupportedConeT<f64>> = [
            (qp.n_eq > 0).then_some(SupportedConeT::ZeroConeT(qp.n_eq)),
            (qp.n_ineq > 0).then_some(SupportedConeT::NonnegativeConeT(qp.n_ineq)),
        ]
        .into_iter()
        .flatten()
        .collect();
        let settings = DefaultSettings {
            verbose: false,
            max_iter: self.max_iter,
            tol_gap_abs: self.tolerance,
            tol_gap_rel: self.tolerance,
            tol_feas: self.tolerance,
            presolve_enable: false,
            ..DefaultSettings::default()
        };
        let mut solver = DefaultSolver::new(&p, &qp.q, &a, &qp.b, &cones, settings)
            .map_err(|e| Error::Invalid(format!("QP setup failed: {e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => QpStatus::Solved,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => QpStatus::PrimalInfeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => QpStatus::DualInfeasible,
            _ => QpStatus::Stopped,
        };
        Ok(QpSolution {
            status,
            x: sol.x.clone(),
            z: sol.z.clone(),
            iterations: sol.iterations,
        })
    }
}

/// Backends selectable by name.
pub fn solver_names() -> &'static [&'static str] {
    &["clarabel"]
}

pub fn solver_by_name(name: &str) -> Result<Box<dyn QpSolver>> {
    match name {
        "clarabel" => Ok(Box::new(ClarabelSolver::default())),
        other => Err(Error::Config(format!(
            "unknown QP backend '{other}' (available: {})",
            solver_names().join(", ")
        ))),
    }
}

/// Optimality residuals, recomputed from the problem data.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    /// Largest equality or inequality violation.
    pub primal: f64,
    /// Largest component of `Px + q + Aᵀz`, plus any negative multiplier.
    pub dual: f64,
    /// Largest `|z_i · slack_i|` on inequality rows.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.complementarity)
    }
}

fn row_values(qp: &QpData, x: &[f64]) -> Vec<f64> {
    let mut ax = vec![0.0; qp.b.len()];
    for &(r, c, v) in &qp.a {
        ax[r] += v * x[c];
    }
    ax
}

pub fn kkt_residuals(qp: &QpData, x: &[f64], z: &[f64]) -> KktResiduals {
    let ax = row_values(qp, x);
    let mut res = KktResiduals::default();
    for r in 0..qp.b.len() {
        let gap = ax[r] - qp.b[r];
        if r < qp.n_eq {
            res.primal = res.primal.max(gap.abs());
        } else {
            res.primal = res.primal.max(gap);
            res.dual = res.dual.max(-z[r]);
            res.complementarity = res.complementarity.max((z[r] * gap).abs());
        }
    }
    let mut grad = qp.q.clone();
    for &(i, j, v) in &qp.p {
        grad[i] += v * x[j];
        if i != j {
            grad[j] += v * x[i];
        }
    }
    for &(r, c, v) in &qp.a {
        grad[c] += v * z[r];
    }
    res.dual = grad.iter().fold(res.dual, |m, g| m.max(g.abs()));
    res
}

/// Optimal day schedule of the whole community.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSchedule {
    pub agents: Vec<AgentSchedule>,
    /// Net community import per step.
    pub import: Vec<f64>,
    /// System reward per step, recomputed from the schedule.
    pub steps: Vec<RewardBreakdown>,
    pub total: RewardBreakdown,
    /// Solver objective (a cost, so `≈ −total.total`).
    pub objective: f64,
    pub residuals: KktResiduals,
    pub constraints: ConstraintReport,
}

impl OptimalSchedule {
    pub fn decisions(&self, agent: usize, t: usize) -> Decisions {
        let s = &self.agents[agent];
        Decisions {
            b_in: s.b_in[t],
            b_out: s.b_out[t],
            h: s.h[t],
            c: s.c[t],
            p: s.p[t],
            flex_served: Vec::new(),
        }
    }
}

fn objective(qp: &QpData, x: &[f64]) -> f64 {
    let lin: f64 = qp.q.iter().zip(x).map(|(q, x)| q * x).sum();
    let quad: f64 = qp
        .p
        .iter()
        .map(|&(i, j, v)| if i == j { 0.5 * v * x[i] * x[i] } else { v * x[i] * x[j] })
        .sum();
    lin + quad
}

/// Family carrying the largest share of an infeasibility certificate.
fn certificate_family(problem: &DayProblem, z: &[f64]) -> Family {
    let mut best = (Family::EnergyBalance, -1.0);
    for (family, rows) in &problem.families {
        let mass: f64 = z[rows.clone()].iter().map(|v| v.abs()).sum();
        if mass > best.1 {
            best = (*family, mass);
        }
    }
    best.0
}

/// Solves the day problem and checks the result independently.
pub fn solve_day(problem: &DayProblem, solver: &dyn QpSolver) -> Result<OptimalSchedule> {
    let qp = &problem.qp;
    let sol = solver.solve(qp)?;
    match sol.status {
        QpStatus::Solved => {}
        QpStatus::PrimalInfeasible => {
            let family = certificate_family(problem, &sol.z);
            return Err(Error::Infeasible {
                family: family.name().into(),
                detail: format!("{} reports no feasible schedule", solver.name()),
            });
        }
        status => {
            let r = kkt_residuals(qp, &sol.x, &sol.z);
            return Err(Error::Solver {
                status: status.to_string(),
                primal: r.primal,
                dual: r.dual,
            });
        }
    }
    let residuals = kkt_residuals(qp, &sol.x, &sol.z);
    if residuals.primal > RESIDUAL_TOL || residuals.dual > RESIDUAL_TOL {
        return Err(Error::Solver {
            status: "inaccurate".into(),
            primal: residuals.primal,
            dual: residuals.dual,
        });
    }

    let schedule = to_schedule(problem, &sol.x, residuals)?;
    Ok(schedule)
}

fn to_schedule(problem: &DayProblem, x: &[f64], residuals: KktResiduals) -> Result<OptimalSchedule> {
    let l = &problem.layout;
    let params = &problem.params;
    let day = &problem.day;
    let n = l.horizon;
    let share = params.flex.share;
    let agents: Vec<AgentSchedule> = (0..l.n_agents)
        .map(|i| {
            let prof = &day.profiles[i];
            let mut s = AgentSchedule {
                energy: vec![params.battery.initial],
                t_mass: vec![params.initial_temp],
                t_air: vec![params.initial_temp],
                ..AgentSchedule::default()
            };
            let mut flex_at = vec![0.0; n];
            for &(td, tc, col) in &l.flexible[i] {
                flex_at[tc] += x[col];
                s.flexible.push((td, tc, x[col]));
            }
            for t in 0..n {
                s.energy.push(x[l.e_next(i, t)]);
                s.t_mass.push(x[l.t_mass_next(i, t)]);
                s.t_air.push(x[l.t_air_next(i, t)]);
                s.b_in.push(x[l.b_in(i, t)]);
                s.b_out.push(x[l.b_out(i, t)]);
                s.h.push(x[l.h(i, t)]);
                s.c.push((1.0 - share) * prof.household_demand[t] + flex_at[t]);
                s.p.push(x[l.p(i, t)]);
            }
            s
        })
        .collect();

    let mut constraints = ConstraintReport::default();
    for (i, s) in agents.iter().enumerate() {
        constraints.merge(&check_agent(params, day, i, s));
    }
    if constraints.balance > RESIDUAL_TOL || constraints.worst() > RESIDUAL_TOL {
        let (family, v) = constraints.worst_family();
        return Err(Error::Solver {
            status: format!("schedule violates {family} by {v:.3e}"),
            primal: residuals.primal,
            dual: residuals.dual,
        });
    }

    let mut out = OptimalSchedule {
        agents,
        import: (0..n).map(|t| x[l.g(t)]).collect(),
        steps: Vec::with_capacity(n),
        total: RewardBreakdown::default(),
        objective: objective(&problem.qp, x),
        residuals,
        constraints,
    };
    for t in 0..n {
        let decisions: Vec<Decisions> = (0..l.n_agents).map(|i| out.decisions(i, t)).collect();
        out.steps
            .push(step_system(&decisions, &day.grid, params.battery.storage_cost, t));
    }
    out.total = RewardBreakdown::sum(&out.steps);
    Ok(out)
}
