use serde::{Deserialize, Serialize};

use crate::thermal::ThermalState;

/// Outstanding part of a flexible load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlexEntry {
    pub remaining: f64,
    pub demand_step: usize,
    pub deadline: usize,
}

/// Flexible loads waiting to be served, ordered by deadline, plus the fixed
/// demand of the current step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlexQueue {
    pub fixed: f64,
    pub entries: Vec<FlexEntry>,
}

impl FlexQueue {
    /// Energy that must be consumed at step `t`.
    pub fn due(&self, t: usize) -> f64 {
        self.fixed
            + self
                .entries
                .iter()
                .filter(|e| e.deadline <= t)
                .map(|e| e.remaining)
                .sum::<f64>()
    }

    /// Energy that may still be deferred past step `t`.
    pub fn deferrable(&self, t: usize) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.deadline > t)
            .map(|e| e.remaining)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdState {
    pub t: usize,
    /// Battery level E at the start of step `t`, kWh.
    pub energy: f64,
    pub thermal: ThermalState,
    pub queue: FlexQueue,
}

/// Decisions of one household for one step, all in kWh.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Decisions {
    pub b_in: f64,
    pub b_out: f64,
    pub h: f64,
    /// Household consumption, fixed plus flexible.
    pub c: f64,
    /// Net import; negative when exporting.
    pub p: f64,
    /// Amount served from each queue entry, in queue order.
    pub flex_served: Vec<f64>,
}

impl Decisions {
    /// L1 distance over `(b_in, b_out, h, c)`.
    pub fn l1(&self, other: &Decisions) -> f64 {
        (self.b_in - other.b_in).abs()
            + (self.b_out - other.b_out).abs()
            + (self.h - other.h).abs()
            + (self.c - other.c).abs()
    }
}

/// System cost of one step, £. `emissions` is the carbon part of `grid`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub grid: f64,
    pub emissions: f64,
    pub distribution: f64,
    pub storage: f64,
    pub total: f64,
    /// Net community import g, kWh.
    pub import: f64,
    /// Grid losses ε, kWh.
    pub losses: f64,
}

impl RewardBreakdown {
    pub fn add(&mut self, o: &RewardBreakdown) {
        self.grid += o.grid;
        self.emissions += o.emissions;
        self.distribution += o.distribution;
        self.storage += o.storage;
        self.total += o.total;
        self.import += o.import;
        self.losses += o.losses;
    }

    pub fn sum<'a>(items: impl IntoIterator<Item = &'a RewardBreakdown>) -> RewardBreakdown {
        let mut acc = RewardBreakdown::default();
        for r in items {
            acc.add(r);
        }
        acc
    }
}
