use std::sync::Arc;

use super::qtable::{discretize_day, LearningParams};
use super::rules::{ExperienceTuple, SourceKind};
use crate::env::{
    check_trace, psi_grid, DayEnv, DayInputs, DayPlan, DayTrace, GridParams, HouseholdParams, HouseholdState,
    RewardBreakdown, StepRecord,
};
use crate::optimiser::{build_problem, extract_steps, solve_day, ClarabelSolver, QpSolver};
use crate::profiles::{DayProfile, SyntheticBanks};
use crate::rng::{label, rng_for};
use crate::{Error, Result};

/// Outcome of one joint step.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStep {
    pub reward: RewardBreakdown,
    /// Per agent, when requested.
    pub marginal: Option<Vec<f64>>,
}

/// A running day.
pub trait Episode {
    fn n_agents(&self) -> usize;
    fn t(&self) -> usize;
    fn done(&self) -> bool;
    /// Observed state index of `agent` at the current step.
    fn state(&self, agent: usize) -> usize;
    fn step(&mut self, actions: &[usize], marginal: bool) -> Result<EpisodeStep>;
    /// Largest constraint violation over the steps taken, for scenarios
    /// that track physical constraints.
    fn violation(&self) -> Option<ConstraintSummary> {
        None
    }
}

/// Worst energy balance residual and worst other violation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConstraintSummary {
    pub balance: f64,
    pub worst: f64,
    pub family: &'static str,
}

/// Source of training and evaluation days for a fixed agent count.
pub trait Scenario: Send + Sync {
    fn n_agents(&self) -> usize;
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn horizon(&self) -> usize;
    fn training_episode(&self, epoch: usize, episode: usize) -> Result<Box<dyn Episode + '_>>;
    fn evaluation_episode(&self, epoch: usize) -> Result<Box<dyn Episode + '_>>;

    /// Experience from an optimal schedule of the training day, agent-major.
    fn optimal_experience(&self, _epoch: usize, _episode: usize) -> Result<Vec<ExperienceTuple>> {
        Err(Error::Unsupported("this scenario has no optimiser".into()))
    }
}

/// Single-agent scenario visiting states `0, 1, …` in order, with a fixed
/// reward per state-action pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyScenario {
    pub rewards: Vec<Vec<f64>>,
}

struct ToyEpisode<'a> {
    rewards: &'a [Vec<f64>],
    t: usize,
}

impl Episode for ToyEpisode<'_> {
    fn n_agents(&self) -> usize {
        1
    }
    fn t(&self) -> usize {
        self.t
    }
    fn done(&self) -> bool {
        self.t >= self.rewards.len()
    }
    fn state(&self, _: usize) -> usize {
        self.t
    }
    fn step(&mut self, actions: &[usize], marginal: bool) -> Result<EpisodeStep> {
        if self.done() {
            return Err(Error::Invalid("episode finished".into()));
        }
        let row = &self.rewards[self.t];
        let r = row[actions[0]];
        let passive = row[row.len() - 1];
        self.t += 1;
        Ok(EpisodeStep {
            reward: RewardBreakdown {
                total: r,
                ..Default::default()
            },
            marginal: marginal.then(|| vec![r - passive]),
        })
    }
}

impl Scenario for ToyScenario {
    fn n_agents(&self) -> usize {
        1
    }
    fn n_states(&self) -> usize {
        self.rewards.len()
    }
    fn n_actions(&self) -> usize {
        self.rewards[0].len()
    }
    fn horizon(&self) -> usize {
        self.rewards.len()
    }
    fn training_episode(&self, _: usize, _: usize) -> Result<Box<dyn Episode + '_>> {
        Ok(Box::new(ToyEpisode {
            rewards: &self.rewards,
            t: 0,
        }))
    }
    fn evaluation_episode(&self, e: usize) -> Result<Box<dyn Episode + '_>> {
        self.training_episode(e, 0)
    }
}

/// Days of a community of households.
pub struct HouseholdScenario {
    params: Arc<HouseholdParams>,
    training: Vec<Arc<DayInputs>>,
    evaluation: Vec<Arc<DayInputs>>,
    n_states: usize,
    n_actions: usize,
    episodes: usize,
    solver: Arc<dyn QpSolver>,
}

impl std::fmt::Debug for HouseholdScenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HouseholdScenario")
            .field("n_agents", &self.n_agents())
            .field("training_days", &self.training.len())
            .field("evaluation_days", &self.evaluation.len())
            .field("solver", &self.solver.name())
            .finish()
    }
}

/// Draws `n_days` feasible days per agent from its own chain.
fn chain_days(
    params: &HouseholdParams,
    banks: &SyntheticBanks,
    n_agents: usize,
    n_days: usize,
    seed: u64,
    stream: &str,
) -> Result<Vec<Vec<DayProfile>>> {
    let mut days = vec![Vec::with_capacity(n_agents); n_days];
    for agent in 0..n_agents {
        let mut rng = rng_for(seed, &[label(stream), agent as u64]);
        let mut chain = banks.start_chain(&mut rng)?;
        let mut d = 0;
        let mut rejected = 0;
        while d < n_days {
            let prof = banks.next_day(&mut chain, &mut rng)?;
            match DayPlan::new(params, &prof, agent) {
                Ok(_) => {
                    days[d].push(prof);
                    d += 1;
                }
                Err(e @ (Error::InfeasibleEvSchedule { .. } | Error::InfeasibleComfort { .. })) => {
                    rejected += 1;
                    if rejected > 10 * n_days + 100 {
                        return Err(e);
                    }
                    log::debug!("skipping generated day: {e}");
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(days)
}

impl HouseholdScenario {
    /// Training day `epoch * episodes + episode` (cycled) feeds each
    /// training episode; evaluation day `epoch` (cycled) each evaluation.
    pub fn new(
        params: Arc<HouseholdParams>,
        training: Vec<Arc<DayInputs>>,
        evaluation: Vec<Arc<DayInputs>>,
        learning: &LearningParams,
        solver: Arc<dyn QpSolver>,
    ) -> Result<Self> {
        learning.validate()?;
        params.validate()?;
        let first = training
            .first()
            .ok_or_else(|| Error::Config("no training days".into()))?;
        if evaluation.is_empty() {
            return Err(Error::Config("no evaluation days".into()));
        }
        let n_agents = first.n_agents();
        for day in training.iter().chain(&evaluation) {
            day.validate()?;
            if day.n_agents() != n_agents || n_agents == 0 {
                return Err(Error::Invalid("days differ in agent count".into()));
            }
        }
        Ok(HouseholdScenario {
            params,
            training,
            evaluation,
            n_states: learning.n_states,
            n_actions: learning.n_actions,
            episodes: learning.episodes,
            solver,
        })
    }

    /// Synthetic days for every training episode and one held-out day per
    /// epoch. Each agent follows its own Markov chain; day `d` uses
    /// `grids[d % grids.len()]`. Days on which an agent's trips cannot be met
    /// are redrawn.
    pub fn synthetic(
        params: Arc<HouseholdParams>,
        banks: &SyntheticBanks,
        grids: &[GridParams],
        n_agents: usize,
        learning: &LearningParams,
        seed: u64,
    ) -> Result<Self> {
        learning.validate()?;
        let training_days = learning.epochs * learning.episodes;
        let evaluation_days = learning.epochs;
        if grids.is_empty() || n_agents == 0 {
            return Err(Error::Config("need grid series and at least one agent".into()));
        }
        let wrap = |days: Vec<Vec<DayProfile>>| {
            days.into_iter()
                .enumerate()
                .map(|(d, profiles)| {
                    Arc::new(DayInputs {
                        profiles,
                        grid: grids[d % grids.len()].clone(),
                    })
                })
                .collect::<Vec<_>>()
        };
        let training = wrap(chain_days(&params, banks, n_agents, training_days, seed, "training")?);
        let evaluation = wrap(chain_days(&params, banks, n_agents, evaluation_days, seed, "evaluation")?);
        Self::new(
            params,
            training,
            evaluation,
            learning,
            Arc::new(ClarabelSolver::default()),
        )
    }

    pub fn with_solver(mut self, solver: Arc<dyn QpSolver>) -> Self {
        self.solver = solver;
        self
    }

    pub fn params(&self) -> &Arc<HouseholdParams> {
        &self.params
    }

    pub fn training_day(&self, epoch: usize, episode: usize) -> &Arc<DayInputs> {
        &self.training[(epoch * self.episodes + episode) % self.training.len()]
    }

    pub fn evaluation_day(&self, epoch: usize) -> &Arc<DayInputs> {
        &self.evaluation[epoch % self.evaluation.len()]
    }

    pub fn training_days(&self) -> &[Arc<DayInputs>] {
        &self.training
    }

    pub fn evaluation_days(&self) -> &[Arc<DayInputs>] {
        &self.evaluation
    }

    fn episode(&self, day: &Arc<DayInputs>) -> Result<HouseholdEpisode> {
        HouseholdEpisode::new(self.params.clone(), day.clone(), self.n_states, self.n_actions)
    }

    /// Experience extracted from the optimal schedule of `day`.
    pub fn day_experience(&self, day: &Arc<DayInputs>) -> Result<Vec<ExperienceTuple>> {
        let problem = build_problem(self.params.clone(), day.clone())?;
        let schedule = solve_day(&problem, self.solver.as_ref())?;
        let buckets = discretize_day(&day.grid.cost, self.n_states);
        let horizon = day.horizon();
        Ok(extract_steps(&problem, &schedule, self.n_actions)?
            .into_iter()
            .map(|s| ExperienceTuple {
                agent: s.agent,
                state: buckets[s.t],
                action: s.action,
                reward: s.reward,
                marginal: Some(s.marginal),
                next_state: (s.t + 1 < horizon).then(|| buckets[s.t + 1]),
                source: SourceKind::Optimisation,
            })
            .collect())
    }
}

impl Scenario for HouseholdScenario {
    fn n_agents(&self) -> usize {
        self.training[0].n_agents()
    }
    fn n_states(&self) -> usize {
        self.n_states
    }
    fn n_actions(&self) -> usize {
        self.n_actions
    }
    fn horizon(&self) -> usize {
        self.training[0].horizon()
    }
    fn training_episode(&self, epoch: usize, episode: usize) -> Result<Box<dyn Episode + '_>> {
        Ok(Box::new(self.episode(self.training_day(epoch, episode))?))
    }
    fn evaluation_episode(&self, epoch: usize) -> Result<Box<dyn Episode + '_>> {
        Ok(Box::new(self.episode(self.evaluation_day(epoch))?))
    }
    fn optimal_experience(&self, epoch: usize, episode: usize) -> Result<Vec<ExperienceTuple>> {
        self.day_experience(self.training_day(epoch, episode))
    }
}

/// A household day driven by discrete actions.
pub struct HouseholdEpisode {
    env: DayEnv,
    buckets: Vec<usize>,
    psi: Vec<f64>,
    states: Vec<Vec<HouseholdState>>,
    steps: Vec<StepRecord>,
}

impl HouseholdEpisode {
    pub fn new(params: Arc<HouseholdParams>, day: Arc<DayInputs>, n_states: usize, n_actions: usize) -> Result<Self> {
        let buckets = discretize_day(&day.grid.cost, n_states);
        let env = DayEnv::new(params, day)?;
        let states = vec![env.states().to_vec()];
        Ok(HouseholdEpisode {
            env,
            buckets,
            psi: psi_grid(n_actions),
            states,
            steps: Vec::new(),
        })
    }

    pub fn trace(&self) -> DayTrace {
        DayTrace {
            states: self.states.clone(),
            steps: self.steps.clone(),
            total: RewardBreakdown::sum(self.steps.iter().map(|s| &s.reward)),
        }
    }
}

impl Episode for HouseholdEpisode {
    fn n_agents(&self) -> usize {
        self.env.states().len()
    }
    fn t(&self) -> usize {
        self.env.t()
    }
    fn done(&self) -> bool {
        self.env.done()
    }
    fn state(&self, _: usize) -> usize {
        self.buckets[self.env.t()]
    }
    fn step(&mut self, actions: &[usize], marginal: bool) -> Result<EpisodeStep> {
        if actions.len() != self.n_agents() {
            return Err(Error::Invalid("one action per agent expected".into()));
        }
        let decisions = actions
            .iter()
            .enumerate()
            .map(|(i, &a)| self.env.decide(i, self.psi[a]))
            .collect::<Result<Vec<_>>>()?;
        let marginal = if marginal {
            let total = self.env.system_reward(&decisions).total;
            Some(
                (0..decisions.len())
                    .map(|i| Ok(total - self.env.counterfactual(&decisions, i, 1.0)?.total))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        let rec = self.env.apply(decisions)?;
        let reward = rec.reward;
        self.steps.push(rec);
        self.states.push(self.env.states().to_vec());
        Ok(EpisodeStep { reward, marginal })
    }
    fn violation(&self) -> Option<ConstraintSummary> {
        let r = check_trace(self.env.params(), self.env.day(), &self.trace());
        let (family, worst) = r.worst_family();
        Some(ConstraintSummary {
            balance: r.balance,
            worst: r.worst(),
            family: if worst > 0.0 { family } else { "none" },
        })
    }
}
