use serde::{Deserialize, Serialize};

use crate::thermal::{ComfortSchedule, ThermalCoefficients};
use crate::{Error, Result};

/// EV battery, one per household.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryParams {
    /// Ē, kWh.
    pub capacity: f64,
    /// E̲, kWh; applies while the car is plugged in.
    pub min_level: f64,
    /// E₀, kWh; also the required level at the end of the day.
    pub initial: f64,
    /// b̄_in, kWh per step.
    pub max_charge: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    /// C_s, £ per kWh of throughput.
    pub storage_cost: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        let eta = 0.87f64.sqrt();
        BatteryParams {
            capacity: 75.0,
            min_level: 7.5,
            initial: 37.5,
            max_charge: 22.0,
            eta_ch: eta,
            eta_dis: eta,
            storage_cost: 20.0 / 1000.0 * 0.78,
        }
    }
}

impl BatteryParams {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.min_level
            && self.min_level <= self.initial
            && self.initial <= self.capacity
            && self.capacity.is_finite()
            && self.max_charge >= 0.0
            && self.eta_ch > 0.0
            && self.eta_ch <= 1.0
            && self.eta_dis > 0.0
            && self.eta_dis <= 1.0
            && self.storage_cost >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid battery parameters {self:?}")))
        }
    }
}

/// Grid cost series of one day and network constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    /// C_g^t, £/kWh: price plus carbon intensity times social cost of carbon.
    pub cost: Vec<f64>,
    /// Carbon part of `cost`, £/kWh.
    pub emissions_cost: Vec<f64>,
    /// C_d, £/kWh exported.
    pub distribution_charge: f64,
    /// R, Ω.
    pub resistance: f64,
    /// V, volts.
    pub voltage: f64,
}

impl GridParams {
    pub fn flat(horizon: usize, cost: f64) -> Self {
        GridParams {
            cost: vec![cost; horizon],
            emissions_cost: vec![0.0; horizon],
            distribution_charge: 0.01,
            resistance: 0.084,
            voltage: 415.0,
        }
    }

    /// Losses per squared kWh: `ε = k·g²` for `g` in kWh over an hour.
    pub fn loss_coefficient(&self) -> f64 {
        self.resistance * 1000.0 / (self.voltage * self.voltage)
    }

    pub fn horizon(&self) -> usize {
        self.cost.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.cost.len() != self.emissions_cost.len() {
            return Err(Error::Invalid("grid cost and emissions series differ in length".into()));
        }
        if let Some(c) = self.cost.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::Invalid(format!("grid cost must be positive, got {c}")));
        }
        if self
            .emissions_cost
            .iter()
            .zip(&self.cost)
            .any(|(e, c)| !(*e >= 0.0 && e <= c))
        {
            return Err(Error::Invalid("emissions cost must lie in [0, C_g]".into()));
        }
        if !(self.distribution_charge >= 0.0 && self.resistance >= 0.0 && self.voltage > 0.0) {
            return Err(Error::Invalid("invalid network constants".into()));
        }
        Ok(())
    }
}

/// Deferrable share of household demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlexParams {
    pub share: f64,
    /// Steps a flexible load may be deferred past its demand step.
    pub n_flex: usize,
}

impl Default for FlexParams {
    fn default() -> Self {
        FlexParams { share: 0.1, n_flex: 5 }
    }
}

impl FlexParams {
    pub fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.share) {
            Ok(())
        } else {
            Err(Error::Config(format!("flexible share {} outside [0, 1]", self.share)))
        }
    }

    /// Last step at which a load demanded at `t` may be consumed.
    pub fn deadline(&self, t: usize, horizon: usize) -> usize {
        (t + self.n_flex).min(horizon - 1)
    }
}

/// Parameters shared by every household.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdParams {
    pub battery: BatteryParams,
    pub flex: FlexParams,
    pub kappa: ThermalCoefficients,
    pub comfort: ComfortSchedule,
    /// Mass and air temperature at the start of each day, °C.
    pub initial_temp: f64,
}

impl HouseholdParams {
    pub fn validate(&self) -> Result<()> {
        self.battery.validate()?;
        self.flex.validate()?;
        self.kappa.validate()?;
        self.comfort.validate()?;
        if !self.initial_temp.is_finite() {
            return Err(Error::Config("initial temperature must be finite".into()));
        }
        Ok(())
    }
}
