use serde::{Deserialize, Serialize};

use super::qtable::LearningParams;
use super::scenario::{ConstraintSummary, Scenario};
use super::strategy::{Learner, Registry, StrategyConfig};
use crate::env::RewardBreakdown;
use crate::rng::{label, rng_for};
use crate::{Error, Result};

/// Cost reductions against the passive baseline, pence per agent-hour.
/// Positive values are savings; `grid` includes `emissions`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostDeltas {
    pub grid: f64,
    pub distribution: f64,
    pub storage: f64,
    pub emissions: f64,
}

impl CostDeltas {
    pub fn net(&self) -> f64 {
        self.grid + self.distribution + self.storage
    }
}

/// Greedy evaluation of one day against the passive baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Pence per agent-hour.
    pub savings: f64,
    pub deltas: CostDeltas,
    pub reward: RewardBreakdown,
    pub baseline: RewardBreakdown,
    /// `actions[t][agent]`.
    pub actions: Vec<Vec<usize>>,
    pub constraints: Option<ConstraintSummary>,
}

fn run_policy(
    scenario: &dyn Scenario,
    epoch: usize,
    mut policy: impl FnMut(usize, usize) -> usize,
) -> Result<(RewardBreakdown, Vec<Vec<usize>>, Option<ConstraintSummary>)> {
    let mut ep = scenario.evaluation_episode(epoch)?;
    let n = scenario.n_agents();
    let mut total = RewardBreakdown::default();
    let mut actions = Vec::new();
    while !ep.done() {
        let a: Vec<usize> = (0..n).map(|i| policy(i, ep.state(i))).collect();
        total.add(&ep.step(&a, false)?.reward);
        actions.push(a);
    }
    Ok((total, actions, ep.violation()))
}

/// Plays `policy(agent, state) -> action` on the evaluation day of `epoch`
/// and on the same day with every agent passive.
pub fn evaluate(scenario: &dyn Scenario, epoch: usize, policy: impl FnMut(usize, usize) -> usize) -> Result<Evaluation> {
    let passive = scenario.n_actions() - 1;
    let (reward, actions, constraints) = run_policy(scenario, epoch, policy)?;
    let (baseline, _, _) = run_policy(scenario, epoch, |_, _| passive)?;
    let scale = 100.0 / (scenario.n_agents() * scenario.horizon()) as f64;
    Ok(Evaluation {
        savings: (reward.total - baseline.total) * scale,
        deltas: CostDeltas {
            grid: (baseline.grid - reward.grid) * scale,
            distribution: (baseline.distribution - reward.distribution) * scale,
            storage: (baseline.storage - reward.storage) * scale,
            emissions: (baseline.emissions - reward.emissions) * scale,
        },
        reward,
        baseline,
        actions,
        constraints,
    })
}

/// One epoch's evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub evaluation: Evaluation,
    /// Tuples applied during the epoch.
    pub tuples: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub strategy: StrategyConfig,
    pub trajectory: Vec<EpochRecord>,
    pub learner: Learner,
    pub tuples: usize,
}

impl TrainOutcome {
    /// Mean savings over the last `k` epochs.
    pub fn final_mean(&self, k: usize) -> f64 {
        let tail = &self.trajectory[self.trajectory.len().saturating_sub(k)..];
        tail.iter().map(|r| r.evaluation.savings).sum::<f64>() / tail.len().max(1) as f64
    }
}

/// Explore, update and evaluate for `params.epochs` epochs.
pub fn train(
    strategy: &StrategyConfig,
    registry: &Registry,
    scenario: &dyn Scenario,
    params: &LearningParams,
    seed: u64,
) -> Result<TrainOutcome> {
    params.validate()?;
    if scenario.n_actions() != params.n_actions {
        return Err(Error::Config("scenario and learning parameters disagree on the action count".into()));
    }
    let (rule, source) = registry.resolve(strategy)?;
    let mut learner = Learner::new(
        rule,
        strategy.structure,
        scenario.n_agents(),
        scenario.n_states(),
        scenario.n_actions(),
    );
    let mut rng = rng_for(seed, &[label("explore")]);
    let mut trajectory = Vec::with_capacity(params.epochs);
    let mut total = 0;
    for epoch in 0..params.epochs {
        let tuples = source.collect(scenario, &learner, epoch, params, &mut rng)?;
        learner.update(&tuples, params)?;
        total += tuples.len();
        let evaluation = evaluate(scenario, epoch, |i, s| learner.policy(i).argmax(s))?;
        trajectory.push(EpochRecord {
            epoch,
            evaluation,
            tuples: tuples.len(),
        });
    }
    Ok(TrainOutcome {
        strategy: strategy.clone(),
        trajectory,
        learner,
        tuples: total,
    })
}
