use serde::{Deserialize, Serialize};

use super::qtable::{LearningParams, QTable};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SourceKind {
    Environment,
    Optimisation,
}

/// One `(s, a, r, s')` transition of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperienceTuple {
    pub agent: usize,
    pub state: usize,
    pub action: usize,
    /// Total system reward of the step, £.
    pub reward: f64,
    /// Reward minus the reward with this agent passive.
    pub marginal: Option<f64>,
    /// `None` at the last step of the day.
    pub next_state: Option<usize>,
    pub source: SourceKind,
}

/// Tables maintained by one learner. `q` drives action selection; `aux`
/// holds a supporting table when the rule needs one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tables {
    pub q: QTable,
    pub aux: Option<QTable>,
}

/// A Q-table update rule.
pub trait RewardRule: Send + Sync {
    fn name(&self) -> &str;

    fn new_tables(&self, n_states: usize, n_actions: usize) -> Tables {
        Tables {
            q: QTable::new(n_states, n_actions),
            aux: None,
        }
    }

    /// Whether tuples must carry a marginal reward.
    fn needs_marginal(&self) -> bool {
        false
    }

    fn update(&self, tables: &mut Tables, tuple: &ExperienceTuple, params: &LearningParams) -> Result<()>;
}

/// Hysteretic temporal-difference step towards `target`.
pub fn td_update(q: &mut QTable, tuple: &ExperienceTuple, reward: f64, params: &LearningParams) -> f64 {
    let next = tuple.next_state.map_or(0.0, |s| q.max(s));
    let delta = reward + params.gamma * next - q.get(tuple.state, tuple.action);
    q.add(tuple.state, tuple.action, params.rate(delta) * delta);
    delta
}

/// Learns from the instantaneous total system reward.
#[derive(Debug, Clone, Copy, Default)]
pub struct TotalReward;

impl RewardRule for TotalReward {
    fn name(&self) -> &str {
        "total"
    }

    fn update(&self, tables: &mut Tables, tuple: &ExperienceTuple, params: &LearningParams) -> Result<()> {
        td_update(&mut tables.q, tuple, tuple.reward, params);
        Ok(())
    }
}

/// Learns from the reward difference against the agent playing passive.
#[derive(Debug, Clone, Copy, Default)]
pub struct MarginalReward;

impl RewardRule for MarginalReward {
    fn name(&self) -> &str {
        "marginal"
    }

    fn needs_marginal(&self) -> bool {
        true
    }

    fn update(&self, tables: &mut Tables, tuple: &ExperienceTuple, params: &LearningParams) -> Result<()> {
        let r = tuple
            .marginal
            .ok_or_else(|| Error::Invalid(format!("tuple of agent {} has no marginal reward", tuple.agent)))?;
        td_update(&mut tables.q, tuple, r, params);
        Ok(())
    }
}

/// Learns the advantage of an action over the passive one, read from a
/// total-reward table updated alongside.
#[derive(Debug, Clone, Copy, Default)]
pub struct AdvantageReward;

impl AdvantageReward {
    /// Advantage step given an up-to-date total-reward table.
    pub fn advantage_update(adv: &mut QTable, total: &QTable, tuple: &ExperienceTuple, params: &LearningParams) -> f64 {
        let (s, a) = (tuple.state, tuple.action);
        let default = total.n_actions() - 1;
        let delta = (total.get(s, a) - total.get(s, default)) - adv.get(s, a);
        adv.add(s, a, params.rate(delta) * delta);
        delta
    }
}

impl RewardRule for AdvantageReward {
    fn name(&self) -> &str {
        "advantage"
    }

    fn new_tables(&self, n_states: usize, n_actions: usize) -> Tables {
        Tables {
            q: QTable::new(n_states, n_actions),
            aux: Some(QTable::new(n_states, n_actions)),
        }
    }

    fn update(&self, tables: &mut Tables, tuple: &ExperienceTuple, params: &LearningParams) -> Result<()> {
        let total = tables.aux.as_mut().expect("advantage tables carry a total-reward table");
        td_update(total, tuple, tuple.reward, params);
        Self::advantage_update(&mut tables.q, total, tuple, params);
        Ok(())
    }
}

/// Counts how often the optimiser picks each state-action pair.
#[derive(Debug, Clone, Copy, Default)]
pub struct CountReward;

impl RewardRule for CountReward {
    fn name(&self) -> &str {
        "count"
    }

    fn update(&self, tables: &mut Tables, tuple: &ExperienceTuple, _: &LearningParams) -> Result<()> {
        if tuple.source != SourceKind::Optimisation {
            return Err(Error::Unsupported(
                "count updates need optimisation-sourced experience".into(),
            ));
        }
        tables.q.add(tuple.state, tuple.action, 1.0);
        Ok(())
    }
}
