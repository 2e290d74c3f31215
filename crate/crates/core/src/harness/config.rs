use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::{BatteryParams, FlexParams, HouseholdParams};
use crate::marl::{LearningParams, StrategyConfig};
use crate::optimiser::solver_by_name;
use crate::profiles::SyntheticConfig;
use crate::thermal::{derive_kappa, BuildingParams, ComfortSchedule};
use crate::{Error, Result};

/// Home battery (EV) settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryConfig {
    /// kWh.
    pub capacity: f64,
    /// Minimum level while plugged in, kWh.
    pub min_level: f64,
    /// Level at the start and end of every day, kWh.
    pub initial: f64,
    /// Maximum charge per step, kWh.
    pub max_charge: f64,
    /// Split evenly between charging and discharging.
    pub round_trip_efficiency: f64,
    /// Depreciation per MWh of throughput, USD.
    pub depreciation_usd_per_mwh: f64,
    /// £ per USD. Absolute savings shift with this rate.
    pub usd_to_gbp: f64,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            capacity: 75.0,
            min_level: 7.5,
            initial: 37.5,
            max_charge: 22.0,
            round_trip_efficiency: 0.87,
            depreciation_usd_per_mwh: 20.0,
            usd_to_gbp: 0.78,
        }
    }
}

impl BatteryConfig {
    pub fn params(&self) -> Result<BatteryParams> {
        if !(self.round_trip_efficiency > 0.0 && self.round_trip_efficiency <= 1.0) {
            return Err(Error::Config("round-trip efficiency must lie in (0, 1]".into()));
        }
        if !(self.depreciation_usd_per_mwh >= 0.0 && self.usd_to_gbp > 0.0) {
            return Err(Error::Config("battery depreciation and exchange rate must be non-negative".into()));
        }
        let eta = self.round_trip_efficiency.sqrt();
        let b = BatteryParams {
            capacity: self.capacity,
            min_level: self.min_level,
            initial: self.initial,
            max_charge: self.max_charge,
            eta_ch: eta,
            eta_dis: eta,
            storage_cost: self.depreciation_usd_per_mwh / 1000.0 * self.usd_to_gbp,
        };
        b.validate()?;
        Ok(b)
    }
}

/// Network and carbon settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Charge on exports, £/kWh.
    pub distribution_charge: f64,
    /// Ω.
    pub resistance: f64,
    /// V.
    pub voltage: f64,
    /// £ per tonne of CO₂.
    pub social_cost_of_carbon: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            distribution_charge: 0.01,
            resistance: 0.084,
            voltage: 415.0,
            social_cost_of_carbon: 70.0,
        }
    }
}

/// Price and carbon-intensity series. Without a CSV file a two-level
/// time-of-use day is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesConfig {
    /// CSV with header `hour,price,intensity`, one row per step; several
    /// consecutive days are cycled over.
    pub csv: Option<PathBuf>,
    /// £/kWh.
    pub peak_price: f64,
    pub offpeak_price: f64,
    /// kg CO₂ per kWh.
    pub peak_intensity: f64,
    pub offpeak_intensity: f64,
    /// Half-open off-peak hour windows.
    pub offpeak_hours: Vec<(usize, usize)>,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig {
            csv: None,
            peak_price: 0.16,
            offpeak_price: 0.08,
            peak_intensity: 0.25,
            offpeak_intensity: 0.15,
            offpeak_hours: vec![(0, 7)],
        }
    }
}

/// Measured profiles replacing parts of the synthetic generator.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Household demand CSV (`id,date,day_type,h00..h23`).
    pub load_csv: Option<PathBuf>,
    /// PV generation CSV, same layout.
    pub pv_csv: Option<PathBuf>,
}

/// Everything a run needs. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub agents: Vec<usize>,
    pub strategies: Vec<String>,
    /// Parallel cells; 0 uses every core.
    pub workers: usize,
    pub qp_backend: String,
    /// Epochs averaged for the aggregates.
    pub final_epochs: usize,
    /// Initial building temperature, °C.
    pub initial_temp: f64,
    /// Internal heat gains, W per m² of floor.
    pub internal_gains: f64,
    pub learning: LearningParams,
    pub battery: BatteryConfig,
    pub grid: GridConfig,
    pub series: SeriesConfig,
    pub building: BuildingParams,
    pub comfort: ComfortSchedule,
    pub flex: FlexParams,
    pub synthetic: SyntheticConfig,
    pub data: DataConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 0,
            agents: vec![1, 3, 5, 10],
            strategies: ["TE", "ME", "AE", "TO", "MO", "AO", "CO"].map(String::from).to_vec(),
            workers: 0,
            qp_backend: "clarabel".into(),
            final_epochs: 10,
            initial_temp: 17.0,
            internal_gains: 3.5,
            learning: LearningParams::default(),
            battery: BatteryConfig::default(),
            grid: GridConfig::default(),
            series: SeriesConfig::default(),
            building: BuildingParams::default(),
            comfort: ComfortSchedule::default(),
            flex: FlexParams::default(),
            synthetic: SyntheticConfig::default(),
            data: DataConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths resolve against its folder.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.series.csv, &mut cfg.data.load_csv, &mut cfg.data.pv_csv].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn household(&self) -> Result<HouseholdParams> {
        let p = HouseholdParams {
            battery: self.battery.params()?,
            flex: self.flex,
            kappa: derive_kappa(&self.building, self.internal_gains)?,
            comfort: self.comfort.clone(),
            initial_temp: self.initial_temp,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn strategy_configs(&self) -> Result<Vec<StrategyConfig>> {
        let mut out: Vec<StrategyConfig> = Vec::new();
        for s in &self.strategies {
            let c = StrategyConfig::parse(s)?;
            if !out.contains(&c) {
                out.push(c);
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<Arc<HouseholdParams>> {
        if self.agents.is_empty() || self.agents.contains(&0) {
            return Err(Error::Config("agent counts must be positive".into()));
        }
        if self.strategy_configs()?.is_empty() {
            return Err(Error::Config("no strategies selected".into()));
        }
        if self.final_epochs == 0 {
            return Err(Error::Config("final_epochs must be positive".into()));
        }
        if !(self.internal_gains >= 0.0) {
            return Err(Error::Config("internal gains must be non-negative".into()));
        }
        let g = &self.grid;
        if !(g.distribution_charge >= 0.0 && g.resistance >= 0.0 && g.voltage > 0.0 && g.social_cost_of_carbon >= 0.0) {
            return Err(Error::Config("grid settings must be non-negative with positive voltage".into()));
        }
        self.learning.validate()?;
        self.synthetic.validate()?;
        self.comfort.validate()?;
        self.building.validate()?;
        solver_by_name(&self.qp_backend)?;
        let registry = crate::marl::Registry::default();
        for s in self.strategy_configs()? {
            registry.resolve(&s)?;
        }
        Ok(Arc::new(self.household()?))
    }
}
