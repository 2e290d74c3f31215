//! Day-ahead optimal scheduling of the community as a sparse convex QP.
//!
//! The problem covers battery, heating, flexible loads and net imports of
//! every household over the day, with the quadratic grid losses coupling
//! them. Backends implement [`QpSolver`]; the solution is checked against
//! the environment constraints and can be projected onto the action grid
//! to serve as learning experience.

mod extract;
mod problem;
mod solve;

use std::io::Write;

pub use extract::{extract_steps, reconstruct_state, ScheduledStep};
pub use problem::{build_problem, DayProblem, Family, QpData, VarLayout, STEP_VARS};
pub use solve::{
    kkt_residuals, solve_day, solver_by_name, solver_names, ClarabelSolver, KktResiduals, OptimalSchedule,
    QpSolution, QpSolver, QpStatus, RESIDUAL_TOL,
};

use crate::Result;

/// Writes one row per household step.
pub fn write_schedule_csv<W: Write>(writer: W, schedule: &OptimalSchedule) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "agent", "step", "energy", "t_mass", "t_air", "b_in", "b_out", "h", "c", "p", "reward",
    ])?;
    for (i, s) in schedule.agents.iter().enumerate() {
        for t in 0..s.p.len() {
            let row = [
                s.energy[t + 1],
                s.t_mass[t + 1],
                s.t_air[t + 1],
                s.b_in[t],
                s.b_out[t],
                s.h[t],
                s.c[t],
                s.p[t],
                schedule.steps[t].total,
            ];
            let mut rec = vec![i.to_string(), t.to_string()];
            rec.extend(row.iter().map(|v| format!("{v:.6}")));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| crate::Error::io("schedule", e))?;
    Ok(())
}
