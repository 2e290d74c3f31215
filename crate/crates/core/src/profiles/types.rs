use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, STEPS_PER_DAY};

const PROB_TOL: f64 = 1e-9;

/// Exogenous inputs of one household over one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayProfile {
    /// EV consumption while travelling, kWh per step.
    pub ev_demand: Vec<f64>,
    pub ev_at_home: Vec<bool>,
    /// Household electric demand, kWh per step.
    pub household_demand: Vec<f64>,
    /// PV generation, kWh per step.
    pub pv_generation: Vec<f64>,
    /// External temperature, °C.
    pub external_temp: Vec<f64>,
    /// Solar heat gains, W.
    pub solar_gain: Vec<f64>,
}

impl DayProfile {
    pub fn horizon(&self) -> usize {
        self.household_demand.len()
    }

    /// A day with no EV use, no PV, constant demand and temperature.
    pub fn flat(horizon: usize, demand: f64, t_ext: f64) -> Self {
        DayProfile {
            ev_demand: vec![0.0; horizon],
            ev_at_home: vec![true; horizon],
            household_demand: vec![demand; horizon],
            pv_generation: vec![0.0; horizon],
            external_temp: vec![t_ext; horizon],
            solar_gain: vec![0.0; horizon],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.horizon();
        let lens = [
            self.ev_demand.len(),
            self.ev_at_home.len(),
            self.pv_generation.len(),
            self.external_temp.len(),
            self.solar_gain.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::Invalid(format!(
                "profile series lengths differ: demand {n}, others {lens:?}"
            )));
        }
        for (name, s) in [
            ("ev_demand", &self.ev_demand),
            ("household_demand", &self.household_demand),
            ("pv_generation", &self.pv_generation),
        ] {
            if let Some(v) = s.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::Invalid(format!("{name} has invalid entry {v}")));
            }
        }
        if self
            .external_temp
            .iter()
            .chain(&self.solar_gain)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Invalid("non-finite weather entry".into()));
        }
        for t in 0..n {
            if self.ev_demand[t] > 0.0 && self.ev_at_home[t] {
                return Err(Error::Invalid(format!(
                    "EV consumes {} kWh at step {t} while plugged in",
                    self.ev_demand[t]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayType {
    Weekday,
    Weekend,
}

impl DayType {
    pub const ALL: [DayType; 2] = [DayType::Weekday, DayType::Weekend];

    /// Day 0 is a Monday.
    pub fn of_day(day: usize) -> Self {
        if day % 7 >= 5 {
            DayType::Weekend
        } else {
            DayType::Weekday
        }
    }

    pub fn index(self) -> usize {
        match self {
            DayType::Weekday => 0,
            DayType::Weekend => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DayType::Weekday => "weekday",
            DayType::Weekend => "weekend",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "weekday" | "wd" | "0" => Some(DayType::Weekday),
            "weekend" | "we" | "1" => Some(DayType::Weekend),
            _ => None,
        }
    }
}

/// Key of a bank of normalised profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BankKey {
    Cluster { cluster: usize, day_type: DayType },
    /// Calendar month, 1 to 12.
    Month(u8),
}

impl fmt::Display for BankKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BankKey::Cluster { cluster, day_type } => {
                write!(f, "cluster {cluster} ({})", day_type.as_str())
            }
            BankKey::Month(m) => write!(f, "month {m}"),
        }
    }
}

/// Behaviour clusters per day type and the day-to-day transition matrices
/// `p(k' | k, w, w')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    /// Normalised 24-step centroid shapes, indexed by `DayType::index()`.
    pub centroids: [Vec<Vec<f64>>; 2],
    /// `transitions[w][w'][k][k']`.
    pub transitions: [[Vec<Vec<f64>>; 2]; 2],
    /// Clusters whose shapes are all zero (e.g. no travel); exempt from the
    /// unit-sum centroid check.
    pub empty_clusters: [Vec<usize>; 2],
}

impl ClusterModel {
    pub fn n_clusters(&self, w: DayType) -> usize {
        self.centroids[w.index()].len()
    }

    pub fn transition_row(&self, k: usize, from: DayType, to: DayType) -> Option<&[f64]> {
        self.transitions[from.index()][to.index()]
            .get(k)
            .map(|r| r.as_slice())
    }

    pub fn validate(&self) -> Result<()> {
        for w in DayType::ALL {
            let cents = &self.centroids[w.index()];
            if cents.is_empty() {
                return Err(Error::Invalid(format!("no clusters for {}", w.as_str())));
            }
            for (k, c) in cents.iter().enumerate() {
                if self.empty_clusters[w.index()].contains(&k) {
                    continue;
                }
                let s: f64 = c.iter().sum();
                if (s - 1.0).abs() > PROB_TOL {
                    return Err(Error::Invalid(format!(
                        "centroid {k} ({}) sums to {s}",
                        w.as_str()
                    )));
                }
            }
            for w2 in DayType::ALL {
                let m = &self.transitions[w.index()][w2.index()];
                if m.len() != cents.len() {
                    return Err(Error::Invalid("transition matrix row count mismatch".into()));
                }
                for row in m {
                    if row.len() != self.n_clusters(w2) {
                        return Err(Error::Invalid(
                            "transition matrix column count mismatch".into(),
                        ));
                    }
                    check_distribution(row)?;
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn check_distribution(row: &[f64]) -> Result<()> {
    if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::Invalid(format!("invalid probability in row {row:?}")));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > PROB_TOL {
        return Err(Error::Invalid(format!("probability row sums to {s}")));
    }
    Ok(())
}

/// Gamma-distributed residual shifted to zero mean:
/// `x = Γ(shape, scale) − shape·scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaResidual {
    pub shape: f64,
    pub scale: f64,
}

impl GammaResidual {
    pub fn mean_shift(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn std_dev(&self) -> f64 {
        self.shape.sqrt() * self.scale
    }
}

/// Day-to-day evolution of the scaling factor `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScalingModel {
    /// `λ' = λ + x` with a zero-mean gamma residual per bank transition.
    GammaResidual {
        pairs: BTreeMap<(BankKey, BankKey), GammaResidual>,
        default: GammaResidual,
        /// Sampled values are clipped into `[lower, upper]`; `lower ≥ 0`.
        lower: f64,
        upper: f64,
    },
    /// Transition probabilities between discrete `λ` intervals, conditioned
    /// on the bank transition; sparse rows fall back to `marginal`.
    DiscreteMatrix {
        /// Interval edges, length `n + 1`, increasing.
        edges: Vec<f64>,
        pairs: BTreeMap<(BankKey, BankKey), Vec<Vec<f64>>>,
        marginal: Vec<Vec<f64>>,
    },
}

impl ScalingModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            ScalingModel::GammaResidual {
                pairs,
                default,
                lower,
                upper,
            } => {
                for g in pairs.values().chain(std::iter::once(default)) {
                    if !(g.shape > 0.0 && g.scale >= 0.0) {
                        return Err(Error::Invalid(format!("invalid gamma residual {g:?}")));
                    }
                }
                if !(*lower >= 0.0 && upper >= lower) {
                    return Err(Error::Invalid(format!(
                        "invalid scaling bounds [{lower}, {upper}]"
                    )));
                }
            }
            ScalingModel::DiscreteMatrix {
                edges,
                pairs,
                marginal,
            } => {
                let n = edges.len().saturating_sub(1);
                if n == 0 || edges.windows(2).any(|w| w[1] <= w[0]) || edges[0] < 0.0 {
                    return Err(Error::Invalid("interval edges must increase from ≥ 0".into()));
                }
                if marginal.len() != n {
                    return Err(Error::Invalid("marginal matrix size mismatch".into()));
                }
                for row in marginal {
                    if row.len() != n {
                        return Err(Error::Invalid("marginal row size mismatch".into()));
                    }
                    check_distribution(row)?;
                }
                for m in pairs.values() {
                    if m.len() != n {
                        return Err(Error::Invalid("pair matrix size mismatch".into()));
                    }
                    for row in m {
                        // all-zero rows are sparse cells and use the marginal
                        if row.len() != n {
                            return Err(Error::Invalid("pair row size mismatch".into()));
                        }
                        if row.iter().sum::<f64>() > 0.0 {
                            check_distribution(row)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// One normalised shape and, for EV, the matching at-home mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankProfile {
    pub shape: Vec<f64>,
    pub at_home: Option<Vec<bool>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileBank {
    pub banks: BTreeMap<BankKey, Vec<BankProfile>>,
}

impl ProfileBank {
    pub fn get(&self, key: &BankKey) -> Result<&[BankProfile]> {
        match self.banks.get(key) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(Error::EmptyBank(key.to_string())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, bank) in &self.banks {
            if bank.is_empty() {
                return Err(Error::EmptyBank(key.to_string()));
            }
            for p in bank {
                if p.shape.len() != STEPS_PER_DAY {
                    return Err(Error::Invalid(format!("bank {key}: profile length {}", p.shape.len())));
                }
                let s: f64 = p.shape.iter().sum();
                if p.shape.iter().any(|v| *v < 0.0) || (s > 0.0 && (s - 1.0).abs() > PROB_TOL) {
                    return Err(Error::Invalid(format!("bank {key}: shape not normalised ({s})")));
                }
            }
        }
        Ok(())
    }
}

/// Everything needed to chain one profile component across days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileModel {
    /// Absent for PV, which is banked by month only.
    pub clusters: Option<ClusterModel>,
    pub scaling: ScalingModel,
    pub bank: ProfileBank,
}

impl ProfileModel {
    pub fn validate(&self) -> Result<()> {
        if let Some(c) = &self.clusters {
            c.validate()?;
            for w in DayType::ALL {
                for k in 0..c.n_clusters(w) {
                    self.bank.get(&BankKey::Cluster {
                        cluster: k,
                        day_type: w,
                    })?;
                }
            }
        }
        self.scaling.validate()?;
        self.bank.validate()
    }
}
