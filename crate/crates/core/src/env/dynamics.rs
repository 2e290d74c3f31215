use super::mapping::ActionContext;
use super::params::{GridParams, HouseholdParams};
use super::state::{Decisions, FlexEntry, FlexQueue, HouseholdState, RewardBreakdown};
use crate::profiles::DayProfile;
use crate::thermal::{step_thermal, ThermalState};
use crate::{Error, Result};

const TOL: f64 = 1e-7;

/// Queue at step `t`: carried entries plus the demand arriving at `t`.
fn enqueue(
    mut entries: Vec<FlexEntry>,
    params: &HouseholdParams,
    profile: &DayProfile,
    t: usize,
) -> FlexQueue {
    let d = profile.household_demand[t];
    let share = params.flex.share;
    let flexible = share * d;
    if flexible > 0.0 {
        entries.push(FlexEntry {
            remaining: flexible,
            demand_step: t,
            deadline: params.flex.deadline(t, profile.horizon()),
        });
    }
    FlexQueue {
        fixed: d - flexible,
        entries,
    }
}

pub fn initial_state(params: &HouseholdParams, profile: &DayProfile) -> HouseholdState {
    HouseholdState {
        t: 0,
        energy: params.battery.initial,
        thermal: ThermalState::uniform(params.initial_temp),
        queue: enqueue(Vec::new(), params, profile, 0),
    }
}

/// Advances one household by a step.
///
/// The decisions must already respect the battery, comfort and deadline
/// constraints; a violation is reported as an internal contract error.
pub fn step_household(
    state: &HouseholdState,
    dec: &Decisions,
    ctx: &ActionContext<'_>,
) -> Result<HouseholdState> {
    let t = state.t;
    let prof = ctx.profile;
    let plan = ctx.plan;
    let violation = |m: String| Err(Error::Invalid(format!("contract violation, agent {} step {t}: {m}", ctx.agent)));

    let mu = prof.ev_at_home[t];
    let b = &ctx.params.battery;
    if dec.b_in < -TOL || dec.b_out < -TOL || dec.h < -TOL || dec.c < -TOL {
        return violation(format!("negative decision {dec:?}"));
    }
    if !mu && (dec.b_in > TOL || dec.b_out > TOL) {
        return violation("battery used while the car is away".into());
    }
    if dec.b_in > b.max_charge + TOL {
        return violation(format!("charge {} above limit", dec.b_in));
    }
    let energy = state.energy + dec.b_in - dec.b_out - prof.ev_demand[t];
    if energy < plan.floors[t + 1] - TOL || energy > plan.ceilings[t + 1] + TOL {
        return violation(format!(
            "battery {energy} outside [{}, {}]",
            plan.floors[t + 1],
            plan.ceilings[t + 1]
        ));
    }
    let thermal = step_thermal(
        &ctx.params.kappa,
        state.thermal,
        prof.external_temp[t],
        prof.solar_gain[t],
        dec.h,
    );
    if thermal.t_air < plan.band.lower[t] - 1e-6 || thermal.t_air > plan.band.upper[t] + 1e-6 {
        return violation(format!("air temperature {} outside comfort band", thermal.t_air));
    }
    if dec.flex_served.len() != state.queue.entries.len() {
        return violation("flexible service does not match the queue".into());
    }

    let mut carried = Vec::with_capacity(state.queue.entries.len());
    for (e, served) in state.queue.entries.iter().zip(&dec.flex_served) {
        let remaining = e.remaining - served;
        if remaining < -TOL {
            return violation("flexible load over-served".into());
        }
        if e.deadline <= t {
            if remaining > TOL {
                return violation(format!("flexible load demanded at {} missed its deadline", e.demand_step));
            }
            continue;
        }
        if remaining > 1e-12 {
            carried.push(FlexEntry { remaining, ..*e });
        }
    }
    let next_t = t + 1;
    let queue = if next_t < prof.horizon() {
        enqueue(carried, ctx.params, prof, next_t)
    } else {
        FlexQueue::default()
    };
    Ok(HouseholdState {
        t: next_t,
        energy,
        thermal,
        queue,
    })
}

/// System cost of one step.
pub fn step_system(decisions: &[Decisions], grid: &GridParams, storage_cost: f64, t: usize) -> RewardBreakdown {
    let g: f64 = decisions.iter().map(|d| d.p).sum();
    let losses = grid.loss_coefficient() * g * g;
    let cg = grid.cost[t];
    let grid_cost = cg * (g + losses);
    let emissions = grid.emissions_cost[t] / cg * grid_cost;
    let distribution = grid.distribution_charge * decisions.iter().map(|d| (-d.p).max(0.0)).sum::<f64>();
    let storage = storage_cost * decisions.iter().map(|d| d.b_in + d.b_out).sum::<f64>();
    RewardBreakdown {
        grid: grid_cost,
        emissions,
        distribution,
        storage,
        total: -(grid_cost + distribution + storage),
        import: g,
        losses,
    }
}
