use rand::Rng as _;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::types::{BankKey, DayProfile, DayType, ProfileModel, ScalingModel};
use crate::rng::Rng;
use crate::{Error, Result, STEPS_PER_DAY};

/// Position of one profile component in its chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub bank: BankKey,
    pub lambda: f64,
}

/// One sampled day of a single component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentDay {
    pub state: ChainState,
    pub values: Vec<f64>,
    pub at_home: Option<Vec<bool>>,
}

fn sample_index(row: &[f64], rng: &mut Rng) -> usize {
    let mut u: f64 = rng.random();
    for (i, p) in row.iter().enumerate() {
        if u < *p {
            return i;
        }
        u -= p;
    }
    // rounding: fall back to the last positive entry
    row.iter().rposition(|p| *p > 0.0).unwrap_or(row.len() - 1)
}

fn next_bank(current: BankKey, w_next: DayType, model: &ProfileModel, rng: &mut Rng) -> Result<BankKey> {
    match (current, &model.clusters) {
        (BankKey::Cluster { cluster, day_type }, Some(cm)) => {
            let row = cm.transition_row(cluster, day_type, w_next).ok_or_else(|| {
                Error::Invalid(format!("bank {current} is not in the cluster model"))
            })?;
            Ok(BankKey::Cluster {
                cluster: sample_index(row, rng),
                day_type: w_next,
            })
        }
        (BankKey::Month(m), None) => Ok(BankKey::Month(m)),
        _ => Err(Error::Invalid(format!(
            "bank {current} does not match the model kind"
        ))),
    }
}

fn next_lambda(
    lambda: f64,
    from: BankKey,
    to: BankKey,
    scaling: &ScalingModel,
    rng: &mut Rng,
) -> Result<f64> {
    match scaling {
        ScalingModel::GammaResidual {
            pairs,
            default,
            lower,
            upper,
        } => {
            let g = pairs.get(&(from, to)).unwrap_or(default);
            let x = if g.scale == 0.0 {
                0.0
            } else {
                let dist = Gamma::new(g.shape, g.scale)
                    .map_err(|e| Error::Invalid(format!("gamma residual: {e}")))?;
                dist.sample(rng) - g.mean_shift()
            };
            Ok((lambda + x).clamp(*lower, *upper))
        }
        ScalingModel::DiscreteMatrix {
            edges,
            pairs,
            marginal,
        } => {
            let n = edges.len() - 1;
            let i = edges[1..n]
                .iter()
                .position(|e| lambda < *e)
                .unwrap_or(n - 1);
            let row = pairs
                .get(&(from, to))
                .map(|m| m[i].as_slice())
                .filter(|r| r.iter().sum::<f64>() > 0.0)
                .unwrap_or(&marginal[i]);
            let j = sample_index(row, rng);
            Ok(0.5 * (edges[j] + edges[j + 1]))
        }
    }
}

/// Advances one component by a day: next bank from the cluster transition
/// matrix, a uniformly drawn profile from that bank, and a new scaling factor.
pub fn next_day(
    current: &ChainState,
    w_next: DayType,
    model: &ProfileModel,
    rng: &mut Rng,
) -> Result<ComponentDay> {
    let bank = next_bank(current.bank, w_next, model, rng)?;
    let profiles = model.bank.get(&bank)?;
    let picked = &profiles[rng.random_range(0..profiles.len())];
    let lambda = next_lambda(current.lambda, current.bank, bank, &model.scaling, rng)?;
    Ok(ComponentDay {
        state: ChainState { bank, lambda },
        values: picked.shape.iter().map(|v| v * lambda).collect(),
        at_home: picked.at_home.clone(),
    })
}

/// Synthetic external temperature and solar gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeatherModel {
    pub mean_temp: f64,
    pub diurnal_amplitude: f64,
    /// Hour of the daily maximum.
    pub peak_hour: f64,
    /// Standard deviation of the daily offset innovation, °C.
    pub daily_sd: f64,
    /// Day-to-day persistence of the offset, in [0, 1).
    pub persistence: f64,
    /// Peak solar heat gain, W.
    pub solar_peak: f64,
}

impl Default for WeatherModel {
    fn default() -> Self {
        WeatherModel {
            mean_temp: 5.0,
            diurnal_amplitude: 3.0,
            peak_hour: 15.0,
            daily_sd: 1.5,
            persistence: 0.7,
            solar_peak: 0.0,
        }
    }
}

impl WeatherModel {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.mean_temp, self.diurnal_amplitude, self.peak_hour, self.solar_peak]
            .iter()
            .all(|v| v.is_finite())
            && self.daily_sd >= 0.0
            && (0.0..1.0).contains(&self.persistence)
            && self.solar_peak >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid weather model {self:?}")))
        }
    }

    /// Draws the next daily offset and returns the day's series.
    pub fn next_day(&self, offset: &mut f64, rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
        let z: f64 = StandardNormal.sample(rng);
        *offset = self.persistence * *offset + self.daily_sd * z;
        let temp = (0..STEPS_PER_DAY)
            .map(|t| {
                let phase = 2.0 * std::f64::consts::PI * (t as f64 - self.peak_hour) / 24.0;
                self.mean_temp + *offset + self.diurnal_amplitude * phase.cos()
            })
            .collect();
        let solar = (0..STEPS_PER_DAY)
            .map(|t| {
                let x = std::f64::consts::PI * (t as f64 - 8.0) / 8.0;
                if (8..16).contains(&t) {
                    self.solar_peak * x.sin()
                } else {
                    0.0
                }
            })
            .collect();
        (temp, solar)
    }
}

/// Per-household chain over EV, load and PV components plus weather.
#[derive(Debug, Clone)]
pub struct HouseholdChain {
    pub ev: ChainState,
    pub load: ChainState,
    pub pv: ChainState,
    pub weather_offset: f64,
    /// Index of the last generated day; day 0 is a Monday.
    pub day: usize,
}

impl HouseholdChain {
    pub fn new(ev: ChainState, load: ChainState, pv: ChainState) -> Self {
        HouseholdChain {
            ev,
            load,
            pv,
            weather_offset: 0.0,
            day: 0,
        }
    }

    /// Generates the next day for this household.
    pub fn next(
        &mut self,
        ev_model: &ProfileModel,
        load_model: &ProfileModel,
        pv_model: &ProfileModel,
        weather: &WeatherModel,
        rng: &mut Rng,
    ) -> Result<DayProfile> {
        self.day += 1;
        let w = DayType::of_day(self.day);
        let ev = next_day(&self.ev, w, ev_model, rng)?;
        let load = next_day(&self.load, w, load_model, rng)?;
        let pv = next_day(&self.pv, w, pv_model, rng)?;
        let (external_temp, solar_gain) = weather.next_day(&mut self.weather_offset, rng);
        self.ev = ev.state;
        self.load = load.state;
        self.pv = pv.state;
        let ev_at_home = ev
            .at_home
            .unwrap_or_else(|| ev.values.iter().map(|v| *v <= 0.0).collect());
        let day = DayProfile {
            ev_demand: ev.values,
            ev_at_home,
            household_demand: load.values,
            pv_generation: pv.values,
            external_temp,
            solar_gain,
        };
        day.validate()?;
        Ok(day)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::profiles::types::{BankProfile, ClusterModel, GammaResidual, ProfileBank};
    use crate::rng::rng_for;

    fn one_cluster_model(shape: Vec<f64>, scale: f64) -> ProfileModel {
        let mut banks = BTreeMap::new();
        for w in DayType::ALL {
            banks.insert(
                BankKey::Cluster { cluster: 0, day_type: w },
                vec![BankProfile { shape: shape.clone(), at_home: None }],
            );
        }
        ProfileModel {
            clusters: Some(ClusterModel {
                centroids: [vec![shape.clone()], vec![shape.clone()]],
                transitions: std::array::from_fn(|_| std::array::from_fn(|_| vec![vec![1.0]])),
                empty_clusters: [vec![], vec![]],
            }),
            scaling: ScalingModel::GammaResidual {
                pairs: BTreeMap::new(),
                default: GammaResidual { shape: 2.0, scale },
                lower: 0.0,
                upper: f64::INFINITY,
            },
            bank: ProfileBank { banks },
        }
    }

    #[test]
    fn deterministic_chain_scales_profile() {
        let shape: Vec<f64> = (0..24).map(|t| if t == 12 { 1.0 } else { 0.0 }).collect();
        let model = one_cluster_model(shape.clone(), 0.0);
        let mut rng = rng_for(1, &[]);
        let s = ChainState {
            bank: BankKey::Cluster { cluster: 0, day_type: DayType::Weekday },
            lambda: 7.5,
        };
        let d = next_day(&s, DayType::Weekend, &model, &mut rng).unwrap();
        let expect: Vec<f64> = shape.iter().map(|v| v * 7.5).collect();
        assert_eq!(d.values, expect);
        assert_eq!(d.state.lambda, 7.5);
    }

    #[test]
    fn lambda_is_clipped_at_zero() {
        let shape = vec![1.0 / 24.0; 24];
        let model = one_cluster_model(shape, 5.0);
        let mut rng = rng_for(2, &[]);
        let mut s = ChainState {
            bank: BankKey::Cluster { cluster: 0, day_type: DayType::Weekday },
            lambda: 0.0,
        };
        for _ in 0..500 {
            s = next_day(&s, DayType::Weekday, &model, &mut rng).unwrap().state;
            assert!(s.lambda >= 0.0);
        }
    }

    #[test]
    fn discrete_matrix_uses_marginal_for_sparse_rows() {
        let edges = vec![0.0, 1.0, 2.0];
        let from = BankKey::Month(1);
        let mut pairs = BTreeMap::new();
        pairs.insert((from, from), vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        let scaling = ScalingModel::DiscreteMatrix {
            edges,
            pairs,
            marginal: vec![vec![0.0, 1.0], vec![0.0, 1.0]],
        };
        let mut rng = rng_for(3, &[]);
        // row 0 is empty in the pair matrix, so the marginal sends it to 1.5
        assert_eq!(next_lambda(0.2, from, from, &scaling, &mut rng).unwrap(), 1.5);
        assert_eq!(next_lambda(1.7, from, from, &scaling, &mut rng).unwrap(), 0.5);
    }

    #[test]
    fn weather_is_finite_and_cold() {
        let w = WeatherModel::default();
        let mut rng = rng_for(4, &[]);
        let mut off = 0.0;
        let mut total = 0.0;
        for _ in 0..200 {
            let (t, s) = w.next_day(&mut off, &mut rng);
            assert!(s.iter().all(|v| *v == 0.0));
            total += t.iter().sum::<f64>() / 24.0;
        }
        assert!((total / 200.0 - 5.0).abs() < 1.5);
    }
}
