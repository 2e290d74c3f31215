use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::qtable::{select_action, LearningParams, QTable};
use super::rules::{AdvantageReward, CountReward, ExperienceTuple, MarginalReward, RewardRule, SourceKind, Tables, TotalReward};
use super::scenario::Scenario;
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Structure {
    /// One table per agent, fed by its own experience.
    Distributed,
    /// One shared table fed by every agent.
    Centralised,
}

/// Where a strategy's experience comes from.
pub trait ExperienceSource: Send + Sync {
    fn name(&self) -> &str;
    fn kind(&self) -> SourceKind;

    /// Experience for one epoch, ordered agent-major, then by episode and
    /// time.
    fn collect(
        &self,
        scenario: &dyn Scenario,
        learner: &Learner,
        epoch: usize,
        params: &LearningParams,
        rng: &mut Rng,
    ) -> Result<Vec<ExperienceTuple>>;
}

/// ε-greedy rollouts in the simulated environment.
#[derive(Debug, Clone, Copy, Default)]
pub struct EnvironmentSource;

impl ExperienceSource for EnvironmentSource {
    fn name(&self) -> &str {
        "environment"
    }

    fn kind(&self) -> SourceKind {
        SourceKind::Environment
    }

    fn collect(
        &self,
        scenario: &dyn Scenario,
        learner: &Learner,
        epoch: usize,
        params: &LearningParams,
        rng: &mut Rng,
    ) -> Result<Vec<ExperienceTuple>> {
        let n = scenario.n_agents();
        let marginal = learner.rule().needs_marginal();
        let mut per_agent: Vec<Vec<ExperienceTuple>> = vec![Vec::new(); n];
        for episode in 0..params.episodes {
            let mut ep = scenario.training_episode(epoch, episode)?;
            while !ep.done() {
                let states: Vec<usize> = (0..n).map(|i| ep.state(i)).collect();
                let actions: Vec<usize> = (0..n)
                    .map(|i| select_action(learner.policy(i), states[i], params.epsilon, rng))
                    .collect();
                let step = ep.step(&actions, marginal)?;
                let done = ep.done();
                for i in 0..n {
                    per_agent[i].push(ExperienceTuple {
                        agent: i,
                        state: states[i],
                        action: actions[i],
                        reward: step.reward.total,
                        marginal: step.marginal.as_ref().map(|m| m[i]),
                        next_state: (!done).then(|| ep.state(i)),
                        source: SourceKind::Environment,
                    });
                }
            }
        }
        Ok(per_agent.into_iter().flatten().collect())
    }
}

/// Day-ahead optimal schedules of the training days.
#[derive(Debug, Clone, Copy, Default)]
pub struct OptimisationSource;

impl ExperienceSource for OptimisationSource {
    fn name(&self) -> &str {
        "optimisation"
    }

    fn kind(&self) -> SourceKind {
        SourceKind::Optimisation
    }

    fn collect(
        &self,
        scenario: &dyn Scenario,
        _: &Learner,
        epoch: usize,
        params: &LearningParams,
        _: &mut Rng,
    ) -> Result<Vec<ExperienceTuple>> {
        let mut per_agent: Vec<Vec<ExperienceTuple>> = vec![Vec::new(); scenario.n_agents()];
        for episode in 0..params.episodes {
            for tuple in scenario.optimal_experience(epoch, episode)? {
                per_agent[tuple.agent].push(tuple);
            }
        }
        Ok(per_agent.into_iter().flatten().collect())
    }
}

/// Named reward rules and experience sources.
#[derive(Clone)]
pub struct Registry {
    rules: BTreeMap<String, Arc<dyn RewardRule>>,
    sources: BTreeMap<String, Arc<dyn ExperienceSource>>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Registry {
            rules: BTreeMap::new(),
            sources: BTreeMap::new(),
        };
        r.register_rule(Arc::new(TotalReward));
        r.register_rule(Arc::new(MarginalReward));
        r.register_rule(Arc::new(AdvantageReward));
        r.register_rule(Arc::new(CountReward));
        r.register_source(Arc::new(EnvironmentSource));
        r.register_source(Arc::new(OptimisationSource));
        r
    }
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("rules", &self.rules.keys().collect::<Vec<_>>())
            .field("sources", &self.sources.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Registry {
    pub fn register_rule(&mut self, rule: Arc<dyn RewardRule>) {
        self.rules.insert(rule.name().to_string(), rule);
    }

    pub fn register_source(&mut self, source: Arc<dyn ExperienceSource>) {
        self.sources.insert(source.name().to_string(), source);
    }

    pub fn rule(&self, name: &str) -> Result<Arc<dyn RewardRule>> {
        self.rules.get(name).cloned().ok_or_else(|| {
            Error::Config(format!(
                "unknown reward rule '{name}' (known: {})",
                self.rules.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    pub fn source(&self, name: &str) -> Result<Arc<dyn ExperienceSource>> {
        self.sources.get(name).cloned().ok_or_else(|| {
            Error::Config(format!(
                "unknown experience source '{name}' (known: {})",
                self.sources.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    /// Resolves a strategy into trait objects, rejecting invalid pairings.
    pub fn resolve(&self, s: &StrategyConfig) -> Result<(Arc<dyn RewardRule>, Arc<dyn ExperienceSource>)> {
        let rule = self.rule(&s.reward)?;
        let source = self.source(&s.source)?;
        if rule.name() == "count" && source.kind() != SourceKind::Optimisation {
            return Err(Error::Config("the count rule needs optimisation experience".into()));
        }
        Ok((rule, source))
    }
}

/// Experience source, reward rule and table structure of a strategy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub source: String,
    pub reward: String,
    pub structure: Structure,
}

const ACRONYMS: [(&str, &str, &str); 7] = [
    ("TE", "total", "environment"),
    ("ME", "marginal", "environment"),
    ("AE", "advantage", "environment"),
    ("TO", "total", "optimisation"),
    ("MO", "marginal", "optimisation"),
    ("AO", "advantage", "optimisation"),
    ("CO", "count", "optimisation"),
];

impl StrategyConfig {
    pub fn new(source: &str, reward: &str, structure: Structure) -> Self {
        StrategyConfig {
            source: source.into(),
            reward: reward.into(),
            structure,
        }
    }

    /// Parses `TE`, `MO-d`, `CO-c`, … Without a suffix environment
    /// strategies are centralised and optimisation strategies distributed.
    pub fn parse(name: &str) -> Result<Self> {
        let (head, suffix) = match name.split_once('-') {
            Some((h, s)) => (h, Some(s)),
            None => (name, None),
        };
        let head = head.trim().to_ascii_uppercase();
        let &(_, reward, source) = ACRONYMS
            .iter()
            .find(|(a, _, _)| *a == head)
            .ok_or_else(|| Error::Config(format!("unknown strategy '{name}'")))?;
        let structure = match suffix.map(|s| s.trim().to_ascii_lowercase()) {
            None if source == "environment" => Structure::Centralised,
            None => Structure::Distributed,
            Some(s) if s == "c" => Structure::Centralised,
            Some(s) if s == "d" => Structure::Distributed,
            Some(s) => return Err(Error::Config(format!("unknown structure suffix '-{s}' in '{name}'"))),
        };
        Ok(StrategyConfig::new(source, reward, structure))
    }

    /// Acronym, with a suffix when the structure is not the default.
    pub fn label(&self) -> String {
        let head = ACRONYMS
            .iter()
            .find(|(_, r, s)| *r == self.reward && *s == self.source)
            .map(|(a, _, _)| a.to_string())
            .unwrap_or_else(|| format!("{}/{}", self.reward, self.source));
        let default = if self.source == "environment" {
            Structure::Centralised
        } else {
            Structure::Distributed
        };
        match (self.structure == default, self.structure) {
            (true, _) => head,
            (false, Structure::Centralised) => format!("{head}-c"),
            (false, Structure::Distributed) => format!("{head}-d"),
        }
    }

    pub fn all() -> Vec<StrategyConfig> {
        ACRONYMS
            .iter()
            .map(|(a, _, _)| StrategyConfig::parse(a).expect("built-in acronym"))
            .collect()
    }
}

impl fmt::Display for StrategyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Tables of every agent (or the shared one) under a reward rule.
#[derive(Clone)]
pub struct Learner {
    rule: Arc<dyn RewardRule>,
    structure: Structure,
    tables: Vec<Tables>,
}

impl fmt::Debug for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Learner")
            .field("rule", &self.rule.name())
            .field("structure", &self.structure)
            .field("tables", &self.tables)
            .finish()
    }
}

impl Learner {
    pub fn new(rule: Arc<dyn RewardRule>, structure: Structure, n_agents: usize, n_states: usize, n_actions: usize) -> Self {
        let n_tables = match structure {
            Structure::Distributed => n_agents,
            Structure::Centralised => 1,
        };
        let tables = (0..n_tables).map(|_| rule.new_tables(n_states, n_actions)).collect();
        Learner { rule, structure, tables }
    }

    pub fn rule(&self) -> &dyn RewardRule {
        self.rule.as_ref()
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    fn slot(&self, agent: usize) -> usize {
        match self.structure {
            Structure::Distributed => agent,
            Structure::Centralised => 0,
        }
    }

    /// Table that drives the actions of `agent`.
    pub fn policy(&self, agent: usize) -> &QTable {
        &self.tables[self.slot(agent)].q
    }

    pub fn tables(&self) -> &[Tables] {
        &self.tables
    }

    /// Applies tuples in the given order.
    pub fn update(&mut self, tuples: &[ExperienceTuple], params: &LearningParams) -> Result<()> {
        for t in tuples {
            let slot = self.slot(t.agent);
            let table = self
                .tables
                .get_mut(slot)
                .ok_or_else(|| Error::Invalid(format!("tuple for unknown agent {}", t.agent)))?;
            self.rule.update(table, t, params)?;
        }
        Ok(())
    }
}
