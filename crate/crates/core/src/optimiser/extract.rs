use super::problem::DayProblem;
use super::solve::OptimalSchedule;
use crate::env::mapping::decisions_at;
use crate::env::{flexibility, psi_grid, step_system, ActionContext, Decisions, FlexEntry, FlexQueue, HouseholdState};
use crate::thermal::ThermalState;
use crate::Result;

/// One household step of an optimal schedule expressed in action space.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledStep {
    pub agent: usize,
    pub t: usize,
    /// State reconstructed from the schedule.
    pub state: HouseholdState,
    /// Index into the ψ grid whose decisions are closest to the schedule.
    pub action: usize,
    /// L1 distance between the schedule and the chosen action's decisions.
    pub distance: f64,
    /// System reward of the step under the schedule.
    pub reward: f64,
    /// `reward` minus the reward with this household passive.
    pub marginal: f64,
}

/// State of `agent` at the start of step `t` under the schedule, clamped
/// into the look-ahead bounds so the action mapping accepts it.
pub fn reconstruct_state(problem: &DayProblem, schedule: &OptimalSchedule, agent: usize, t: usize) -> HouseholdState {
    let params = &problem.params;
    let prof = &problem.day.profiles[agent];
    let plan = &problem.plans[agent];
    let s = &schedule.agents[agent];
    let horizon = problem.layout.horizon;
    let share = params.flex.share;

    let energy = s.energy[t].clamp(plan.floors[t], plan.ceilings[t].max(plan.floors[t]));
    let t_mass = s.t_mass[t].min(plan.mass_ceilings[t]);
    let mut entries = Vec::new();
    for td in 0..=t {
        let demand = share * prof.household_demand[td];
        if demand <= 0.0 {
            continue;
        }
        let deadline = params.flex.deadline(td, horizon);
        if td < t && deadline < t {
            continue;
        }
        let served: f64 = s
            .flexible
            .iter()
            .filter(|f| f.0 == td && f.1 < t)
            .map(|f| f.2)
            .sum();
        let remaining = (demand - served).max(0.0);
        if td == t || remaining > 1e-12 {
            entries.push(FlexEntry {
                remaining,
                demand_step: td,
                deadline,
            });
        }
    }
    HouseholdState {
        t,
        energy,
        thermal: ThermalState {
            t_mass,
            t_air: s.t_air[t],
        },
        queue: FlexQueue {
            fixed: (1.0 - share) * prof.household_demand[t],
            entries,
        },
    }
}

/// Projects every household step of the schedule onto the `n_actions` grid.
///
/// Ties in distance go to the lower action index. Steps are ordered
/// agent-major, then by time.
pub fn extract_steps(problem: &DayProblem, schedule: &OptimalSchedule, n_actions: usize) -> Result<Vec<ScheduledStep>> {
    let grid = psi_grid(n_actions);
    let horizon = problem.layout.horizon;
    let n_agents = problem.layout.n_agents;
    let storage_cost = problem.params.battery.storage_cost;
    let mut out = Vec::with_capacity(horizon * n_agents);
    for agent in 0..n_agents {
        let ctx = ActionContext {
            params: &problem.params,
            profile: &problem.day.profiles[agent],
            plan: &problem.plans[agent],
            agent,
        };
        for t in 0..horizon {
            let state = reconstruct_state(problem, schedule, agent, t);
            let f = flexibility(&state, &ctx)?;
            let target = schedule.decisions(agent, t);
            let mut best = (0, f64::INFINITY);
            for (a, &psi) in grid.iter().enumerate() {
                let d = decisions_at(psi, &f, &state, &ctx);
                let dist = d.l1(&target);
                if dist < best.1 {
                    best = (a, dist);
                }
            }
            let mut others: Vec<Decisions> = (0..n_agents).map(|j| schedule.decisions(j, t)).collect();
            others[agent] = decisions_at(1.0, &f, &state, &ctx);
            let passive = step_system(&others, &problem.day.grid, storage_cost, t);
            let reward = schedule.steps[t].total;
            out.push(ScheduledStep {
                agent,
                t,
                state,
                action: best.0,
                distance: best.1,
                reward,
                marginal: reward - passive.total,
            });
        }
    }
    Ok(out)
}
