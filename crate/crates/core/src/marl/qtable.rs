use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::{Error, Result};

/// Fixed-size `|S| × |A|` table of estimates with visit counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
    counts: Vec<u64>,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        assert!(n_states > 0 && n_actions > 0, "empty Q-table");
        QTable {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
            counts: vec![0; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn idx(&self, s: usize, a: usize) -> usize {
        assert!(s < self.n_states && a < self.n_actions, "({s}, {a}) outside the table");
        s * self.n_actions + a
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[self.idx(s, a)]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        let i = self.idx(s, a);
        self.values[i] = v;
    }

    /// Adds `dv` to the entry and counts the visit.
    pub fn add(&mut self, s: usize, a: usize, dv: f64) {
        let i = self.idx(s, a);
        self.values[i] += dv;
        self.counts[i] += 1;
    }

    pub fn count(&self, s: usize, a: usize) -> u64 {
        self.counts[self.idx(s, a)]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        let i = self.idx(s, 0);
        &self.values[i..i + self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Greedy action, ties to the lowest index.
    pub fn argmax(&self, s: usize) -> usize {
        let row = self.row(s);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s)[self.argmax(s)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// ε-greedy selection. With `epsilon == 0` no random number is drawn.
pub fn select_action(q: &QTable, s: usize, epsilon: f64, rng: &mut Rng) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..q.n_actions())
    } else {
        q.argmax(s)
    }
}

/// Learning constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningParams {
    pub gamma: f64,
    pub alpha: f64,
    /// Hysteretic reduction applied to negative updates.
    pub beta: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub episodes: usize,
    pub repetitions: usize,
    pub n_states: usize,
    pub n_actions: usize,
}

impl Default for LearningParams {
    fn default() -> Self {
        LearningParams {
            gamma: 0.99,
            alpha: 0.01,
            beta: 0.5,
            epsilon: 0.5,
            epochs: 50,
            episodes: 2,
            repetitions: 10,
            n_states: 3,
            n_actions: 10,
        }
    }
}

impl LearningParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad("beta must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if self.epochs == 0 || self.episodes == 0 || self.repetitions == 0 {
            return bad("epochs, episodes and repetitions must be positive");
        }
        if self.n_states == 0 || self.n_actions < 2 {
            return bad("need at least one state and two actions");
        }
        Ok(())
    }

    /// Step size for a temporal difference `delta`.
    pub fn rate(&self, delta: f64) -> f64 {
        if delta > 0.0 {
            self.alpha
        } else {
            self.alpha * self.beta
        }
    }

    /// Index of the passive action `ψ = 1`.
    pub fn default_action(&self) -> usize {
        self.n_actions - 1
    }
}

/// Bucket of `cost` among `n` equal intervals of `[min, max]`; the top edge
/// belongs to the last bucket and a flat day maps to bucket 0.
pub fn discretize_state(cost: f64, min: f64, max: f64, n: usize) -> usize {
    if !(max > min) || n <= 1 {
        return 0;
    }
    let x = ((cost - min) / (max - min)).clamp(0.0, 1.0);
    ((x * n as f64).floor() as usize).min(n - 1)
}

/// Buckets of a whole day's cost series.
pub fn discretize_day(costs: &[f64], n: usize) -> Vec<usize> {
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    costs.iter().map(|&c| discretize_state(c, min, max, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buckets() {
        assert_eq!(discretize_state(0.10, 0.10, 0.40, 3), 0);
        assert_eq!(discretize_state(0.25, 0.10, 0.40, 3), 1);
        assert_eq!(discretize_state(0.40, 0.10, 0.40, 3), 2);
        assert_eq!(discretize_day(&[0.2; 5], 3), vec![0; 5]);
    }

    #[test]
    fn ties_go_low() {
        let mut q = QTable::new(2, 4);
        assert_eq!(q.argmax(1), 0);
        q.set(1, 2, 1.0);
        q.set(1, 3, 1.0);
        assert_eq!(q.argmax(1), 2);
    }
}
