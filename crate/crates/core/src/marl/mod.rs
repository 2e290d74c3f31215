//! Tabular hysteretic Q-learning for the community.
//!
//! Agents observe the grid-cost bucket of the current step and pick one of
//! a few ψ levels. A strategy combines an experience source (simulated
//! rollouts or optimal schedules), a reward rule and a table structure;
//! rules and sources are trait objects looked up by name in a [`Registry`].

mod qtable;
mod rules;
mod scenario;
mod strategy;
mod train;

pub use qtable::{discretize_day, discretize_state, select_action, LearningParams, QTable};
pub use rules::{
    td_update, AdvantageReward, CountReward, ExperienceTuple, MarginalReward, RewardRule, SourceKind, Tables,
    TotalReward,
};
pub use scenario::{ConstraintSummary, Episode, EpisodeStep, HouseholdEpisode, HouseholdScenario, Scenario, ToyScenario};
pub use strategy::{EnvironmentSource, ExperienceSource, Learner, OptimisationSource, Registry, StrategyConfig, Structure};
pub use train::{evaluate, train, CostDeltas, EpochRecord, Evaluation, TrainOutcome};

use std::io::Write;

use crate::Result;

/// Writes `state,action,value,visits` rows of a table.
pub fn write_qtable_csv<W: Write>(writer: W, q: &QTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["state", "action", "value", "visits"])?;
    for s in 0..q.n_states() {
        for a in 0..q.n_actions() {
            w.write_record([s.to_string(), a.to_string(), format!("{:.9e}", q.get(s, a)), q.count(s, a).to_string()])?;
        }
    }
    w.flush().map_err(|e| crate::Error::io("q-table", e))?;
    Ok(())
}
