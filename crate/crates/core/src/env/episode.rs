use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::dynamics::{initial_state, step_household, step_system};
use super::mapping::{map_action, ActionContext};
use super::params::{GridParams, HouseholdParams};
use super::plan::DayPlan;
use super::state::{Decisions, HouseholdState, RewardBreakdown};
use crate::profiles::DayProfile;
use crate::{Error, Result};

/// Exogenous inputs of one day for the whole community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayInputs {
    pub profiles: Vec<DayProfile>,
    pub grid: GridParams,
}

impl DayInputs {
    pub fn horizon(&self) -> usize {
        self.grid.horizon()
    }

    pub fn n_agents(&self) -> usize {
        self.profiles.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        for p in &self.profiles {
            p.validate()?;
            if p.horizon() != self.horizon() {
                return Err(Error::Invalid("profile and grid horizons differ".into()));
            }
        }
        Ok(())
    }
}

/// Outcome of one community step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub decisions: Vec<Decisions>,
    pub reward: RewardBreakdown,
}

/// One day of the community, stepped with per-agent ψ values.
#[derive(Debug, Clone)]
pub struct DayEnv {
    params: Arc<HouseholdParams>,
    day: Arc<DayInputs>,
    plans: Arc<Vec<DayPlan>>,
    states: Vec<HouseholdState>,
    t: usize,
}

impl DayEnv {
    pub fn new(params: Arc<HouseholdParams>, day: Arc<DayInputs>) -> Result<Self> {
        day.validate()?;
        let plans = day
            .profiles
            .iter()
            .enumerate()
            .map(|(i, p)| DayPlan::new(&params, p, i))
            .collect::<Result<Vec<_>>>()?;
        let states = day.profiles.iter().map(|p| initial_state(&params, p)).collect();
        Ok(DayEnv {
            params,
            day,
            plans: Arc::new(plans),
            states,
            t: 0,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn done(&self) -> bool {
        self.t >= self.day.horizon()
    }

    pub fn states(&self) -> &[HouseholdState] {
        &self.states
    }

    pub fn plans(&self) -> &[DayPlan] {
        &self.plans
    }

    pub fn day(&self) -> &DayInputs {
        &self.day
    }

    pub fn params(&self) -> &HouseholdParams {
        &self.params
    }

    pub fn context(&self, agent: usize) -> ActionContext<'_> {
        ActionContext {
            params: &self.params,
            profile: &self.day.profiles[agent],
            plan: &self.plans[agent],
            agent,
        }
    }

    pub fn decide(&self, agent: usize, psi: f64) -> Result<Decisions> {
        map_action(psi, &self.states[agent], &self.context(agent))
    }

    pub fn system_reward(&self, decisions: &[Decisions]) -> RewardBreakdown {
        step_system(decisions, &self.day.grid, self.params.battery.storage_cost, self.t)
    }

    /// Reward of this step if `agent` had played `psi` while the others kept
    /// their decisions.
    pub fn counterfactual(&self, decisions: &[Decisions], agent: usize, psi: f64) -> Result<RewardBreakdown> {
        let mut alt = decisions.to_vec();
        alt[agent] = self.decide(agent, psi)?;
        Ok(self.system_reward(&alt))
    }

    /// Applies precomputed decisions.
    pub fn apply(&mut self, decisions: Vec<Decisions>) -> Result<StepRecord> {
        if self.done() {
            return Err(Error::Invalid("day already finished".into()));
        }
        let reward = self.system_reward(&decisions);
        let next = (0..self.states.len())
            .map(|i| step_household(&self.states[i], &decisions[i], &self.context(i)))
            .collect::<Result<Vec<_>>>()?;
        self.states = next;
        self.t += 1;
        Ok(StepRecord { decisions, reward })
    }

    pub fn step(&mut self, psis: &[f64]) -> Result<StepRecord> {
        if psis.len() != self.states.len() {
            return Err(Error::Invalid(format!(
                "{} actions for {} agents",
                psis.len(),
                self.states.len()
            )));
        }
        let decisions = psis
            .iter()
            .enumerate()
            .map(|(i, &psi)| self.decide(i, psi))
            .collect::<Result<Vec<_>>>()?;
        self.apply(decisions)
    }
}

/// Full record of a simulated day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayTrace {
    /// `states[t][i]`, for `t` in `0..=T`.
    pub states: Vec<Vec<HouseholdState>>,
    pub steps: Vec<StepRecord>,
    pub total: RewardBreakdown,
}

/// Runs a day with `policy(agent, t) -> ψ`.
pub fn simulate_day(
    params: Arc<HouseholdParams>,
    day: Arc<DayInputs>,
    mut policy: impl FnMut(usize, usize) -> f64,
) -> Result<DayTrace> {
    let mut env = DayEnv::new(params, day)?;
    let mut states = vec![env.states().to_vec()];
    let mut steps = Vec::new();
    while !env.done() {
        let t = env.t();
        let psis: Vec<f64> = (0..env.states().len()).map(|i| policy(i, t)).collect();
        steps.push(env.step(&psis)?);
        states.push(env.states().to_vec());
    }
    let total = RewardBreakdown::sum(steps.iter().map(|s| &s.reward));
    Ok(DayTrace { states, steps, total })
}

/// Every agent passive (ψ = 1) for the whole day.
pub fn baseline_day(params: Arc<HouseholdParams>, day: Arc<DayInputs>) -> Result<DayTrace> {
    simulate_day(params, day, |_, _| 1.0)
}
