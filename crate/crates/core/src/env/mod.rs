//! Household and community dynamics.
//!
//! Each household owns an EV battery, electric heating and a partly
//! deferrable load. A single action `ψ ∈ [0, 1]` per step is mapped to
//! battery, heating and consumption decisions; the community then pays grid
//! (with losses and emissions), distribution and storage costs.

mod check;
mod dynamics;
mod episode;
pub(crate) mod mapping;
mod params;
mod plan;
mod state;

pub use check::{check_agent, check_trace, schedules_from_trace, AgentSchedule, ConstraintReport};
pub use dynamics::{initial_state, step_household, step_system};
pub use episode::{baseline_day, simulate_day, DayEnv, DayInputs, DayTrace, StepRecord};
pub use mapping::{flexibility, map_action, ActionContext, Flexibility};
pub use params::{BatteryParams, FlexParams, GridParams, HouseholdParams};
pub use plan::{battery_reservation, DayPlan};
pub use state::{Decisions, FlexEntry, FlexQueue, HouseholdState, RewardBreakdown};

/// The ψ values of an action grid with `n` entries, `a / (n − 1)`.
pub fn psi_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n).map(|a| a as f64 / (n - 1) as f64).collect(),
    }
}
