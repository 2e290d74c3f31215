use std::collections::BTreeMap;

use log::warn;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::chain::{ChainState, HouseholdChain, WeatherModel};
use super::cluster::{fit_clusters, fit_transitions, FeatureExtractor};
use super::csv_io::RawProfile;
use super::normalise;
use super::types::{
    BankKey, BankProfile, ClusterModel, DayType, GammaResidual, ProfileBank, ProfileModel,
    ScalingModel,
};
use crate::rng::Rng;
use crate::{Error, Result, STEPS_PER_DAY};

/// Settings of the synthetic profile generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    /// Load clusters per day type.
    pub load_clusters: usize,
    /// EV clusters per day type, including the no-travel cluster.
    pub ev_clusters: usize,
    /// Profiles per bank.
    pub bank_size: usize,
    /// Day-to-day persistence of the scaling factors, in [0, 1]. At 1 the
    /// scaling factors never change.
    pub correlation: f64,
    /// Probability of staying in the same behaviour cluster.
    pub cluster_persistence: f64,
    /// Daily household demand, kWh: mean, lower and upper clip.
    pub load_lambda: [f64; 3],
    /// Daily EV consumption, kWh: mean, lower and upper interval edge.
    pub ev_lambda: [f64; 3],
    /// Daily PV generation, kWh: mean, lower and upper clip.
    pub pv_lambda: [f64; 3],
    /// Relative day-to-day spread of the scaling factors at zero correlation.
    pub lambda_spread: f64,
    /// Shape of the gamma residuals.
    pub gamma_shape: f64,
    /// Intervals of the EV scaling matrix.
    pub ev_intervals: usize,
    /// Multiplier on EV consumption.
    pub ev_consumption_scale: f64,
    /// Relative noise of individual bank profiles around their archetype.
    pub shape_noise: f64,
    /// Calendar month of the PV bank.
    pub month: u8,
    pub weather: WeatherModel,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            load_clusters: 4,
            ev_clusters: 4,
            bank_size: 20,
            correlation: 0.6,
            cluster_persistence: 0.6,
            load_lambda: [9.0, 3.0, 25.0],
            ev_lambda: [8.0, 0.0, 25.0],
            pv_lambda: [2.0, 0.0, 8.0],
            lambda_spread: 0.3,
            gamma_shape: 4.0,
            ev_intervals: 50,
            ev_consumption_scale: 1.0,
            shape_noise: 0.25,
            month: 1,
            weather: WeatherModel::default(),
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.load_clusters == 0 || self.ev_clusters == 0 || self.bank_size == 0 {
            return bad("cluster counts and bank size must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.correlation) || !(0.0..=1.0).contains(&self.cluster_persistence) {
            return bad("correlation and cluster persistence must lie in [0, 1]");
        }
        for (name, l) in [("load", self.load_lambda), ("ev", self.ev_lambda), ("pv", self.pv_lambda)] {
            if !(l[1] >= 0.0 && l[1] <= l[0] && l[0] <= l[2] && l[2].is_finite()) {
                return Err(Error::Config(format!(
                    "{name}_lambda must satisfy 0 ≤ lower ≤ mean ≤ upper, got {l:?}"
                )));
            }
        }
        if self.ev_lambda[2] <= self.ev_lambda[1] {
            return bad("ev_lambda interval range is empty");
        }
        if !(self.lambda_spread >= 0.0 && self.gamma_shape > 0.0 && self.shape_noise >= 0.0) {
            return bad("lambda_spread, gamma_shape and shape_noise must be non-negative");
        }
        if self.ev_intervals == 0 || !(self.ev_consumption_scale >= 0.0) {
            return bad("ev_intervals must be ≥ 1 and ev_consumption_scale ≥ 0");
        }
        if !(1..=12).contains(&self.month) {
            return bad("month must be 1 to 12");
        }
        self.weather.validate()
    }
}

/// The three component models and the weather generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBanks {
    pub ev: ProfileModel,
    pub load: ProfileModel,
    pub pv: ProfileModel,
    pub weather: WeatherModel,
    /// Starting scaling factors of EV, load and PV.
    pub initial_lambda: [f64; 3],
}

impl SyntheticBanks {
    pub fn validate(&self) -> Result<()> {
        self.ev.validate()?;
        self.load.validate()?;
        self.pv.validate()?;
        self.weather.validate()
    }

    /// A fresh household chain starting on a Monday in uniformly drawn clusters.
    pub fn start_chain(&self, rng: &mut Rng) -> Result<HouseholdChain> {
        let start = |model: &ProfileModel, lambda: f64, rng: &mut Rng| -> Result<ChainState> {
            let bank = match &model.clusters {
                Some(cm) => BankKey::Cluster {
                    cluster: rng.random_range(0..cm.n_clusters(DayType::Weekday)),
                    day_type: DayType::Weekday,
                },
                None => *model
                    .bank
                    .banks
                    .keys()
                    .next()
                    .ok_or_else(|| Error::EmptyBank("PV".into()))?,
            };
            Ok(ChainState { bank, lambda })
        };
        let ev = start(&self.ev, self.initial_lambda[0], rng)?;
        let load = start(&self.load, self.initial_lambda[1], rng)?;
        let pv = start(&self.pv, self.initial_lambda[2], rng)?;
        Ok(HouseholdChain::new(ev, load, pv))
    }

    pub fn next_day(&self, chain: &mut HouseholdChain, rng: &mut Rng) -> Result<super::DayProfile> {
        chain.next(&self.ev, &self.load, &self.pv, &self.weather, rng)
    }
}

fn bump(centre: f64, width: f64) -> impl Fn(usize) -> f64 {
    move |t| (-(t as f64 - centre).powi(2) / (2.0 * width * width)).exp()
}

/// Archetype load shapes: base level plus morning and evening bumps.
fn load_archetype(k: usize, w: DayType) -> Vec<f64> {
    let (morning, evening, midday, base) = match (k % 4, w) {
        (0, DayType::Weekday) => (1.0, 1.6, 0.2, 0.35),
        (1, DayType::Weekday) => (0.4, 2.2, 0.1, 0.3),
        (2, DayType::Weekday) => (0.8, 1.0, 0.9, 0.45),
        (3, DayType::Weekday) => (1.4, 1.4, 0.3, 0.25),
        (0, DayType::Weekend) => (0.6, 1.5, 0.8, 0.4),
        (1, DayType::Weekend) => (0.3, 2.0, 0.5, 0.35),
        (2, DayType::Weekend) => (0.5, 0.9, 1.3, 0.45),
        _ => (1.0, 1.2, 0.6, 0.3),
    };
    // clusters past the fourth reuse an archetype with a shifted evening peak
    let shift = (k / 4) as f64;
    let m = bump(8.0, 1.2);
    let e = bump(18.5 + shift, 1.8);
    let d = bump(13.0, 2.0);
    (0..STEPS_PER_DAY)
        .map(|t| {
            let night = if (1..6).contains(&t) { 0.7 } else { 1.0 };
            night * base + morning * m(t) + evening * e(t) + midday * d(t)
        })
        .collect()
}

/// Trip hours of EV archetypes; the car is away and consuming during them.
fn ev_trips(k: usize, w: DayType) -> Vec<(usize, usize)> {
    match (k % 3, w) {
        (0, DayType::Weekday) => vec![(7, 9), (17, 19)],
        (1, DayType::Weekday) => vec![(8, 9), (12, 14), (18, 19)],
        (2, DayType::Weekday) => vec![(6, 8), (16, 19)],
        (0, DayType::Weekend) => vec![(10, 12), (15, 17)],
        (1, DayType::Weekend) => vec![(9, 10), (13, 16)],
        _ => vec![(11, 14), (19, 20)],
    }
}

fn noisy(shape: &[f64], noise: f64, rng: &mut Rng) -> Vec<f64> {
    shape
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(rng);
            v * (noise * z - 0.5 * noise * noise).exp()
        })
        .collect()
}

fn cluster_transitions(n: [usize; 2], stay: f64) -> [[Vec<Vec<f64>>; 2]; 2] {
    std::array::from_fn(|w| {
        std::array::from_fn(|w2| {
            (0..n[w])
                .map(|k| {
                    let m = n[w2];
                    let mut row = vec![(1.0 - stay) / m as f64; m];
                    // persistence only within the same day type
                    if w == w2 {
                        row[k] += stay;
                    } else {
                        row.iter_mut().for_each(|v| *v = 1.0 / m as f64);
                    }
                    row
                })
                .collect()
        })
    })
}

fn gamma_for(mean: f64, cfg: &SyntheticConfig) -> GammaResidual {
    let sd = (1.0 - cfg.correlation) * cfg.lambda_spread * mean;
    GammaResidual {
        shape: cfg.gamma_shape,
        scale: sd / cfg.gamma_shape.sqrt(),
    }
}

/// Builds internally consistent EV, load and PV models from archetype
/// shapes with multiplicative noise.
pub fn generate_synthetic_bank(cfg: &SyntheticConfig, rng: &mut Rng) -> Result<SyntheticBanks> {
    cfg.validate()?;

    let mut load_bank = BTreeMap::new();
    let mut load_centroids: [Vec<Vec<f64>>; 2] = [vec![], vec![]];
    for w in DayType::ALL {
        for k in 0..cfg.load_clusters {
            let arch = load_archetype(k, w);
            let profiles: Vec<BankProfile> = (0..cfg.bank_size)
                .map(|_| BankProfile {
                    shape: normalise(&noisy(&arch, cfg.shape_noise, rng)).expect("positive shape"),
                    at_home: None,
                })
                .collect();
            load_centroids[w.index()].push(mean_shape(&profiles));
            load_bank.insert(BankKey::Cluster { cluster: k, day_type: w }, profiles);
        }
    }
    let load = ProfileModel {
        clusters: Some(ClusterModel {
            centroids: load_centroids,
            transitions: cluster_transitions([cfg.load_clusters; 2], cfg.cluster_persistence),
            empty_clusters: [vec![], vec![]],
        }),
        scaling: ScalingModel::GammaResidual {
            pairs: BTreeMap::new(),
            default: gamma_for(cfg.load_lambda[0], cfg),
            lower: cfg.load_lambda[1],
            upper: cfg.load_lambda[2],
        },
        bank: ProfileBank { banks: load_bank },
    };

    // the last EV cluster of each day type is the no-travel cluster
    let mut ev_bank = BTreeMap::new();
    let mut ev_centroids: [Vec<Vec<f64>>; 2] = [vec![], vec![]];
    let no_travel = cfg.ev_clusters - 1;
    for w in DayType::ALL {
        for k in 0..cfg.ev_clusters {
            let profiles: Vec<BankProfile> = (0..cfg.bank_size)
                .map(|_| {
                    if k == no_travel {
                        return BankProfile {
                            shape: vec![0.0; STEPS_PER_DAY],
                            at_home: Some(vec![true; STEPS_PER_DAY]),
                        };
                    }
                    let mut shape = vec![0.0; STEPS_PER_DAY];
                    let mut home = vec![true; STEPS_PER_DAY];
                    for (a, b) in ev_trips(k, w) {
                        let jitter: i64 = rng.random_range(-1..=1);
                        let a = (a as i64 + jitter).clamp(5, 20) as usize;
                        let b = (b as i64 + jitter).clamp(a as i64 + 1, 21) as usize;
                        for t in a..b {
                            shape[t] = rng.random_range(0.5..1.5);
                            home[t] = false;
                        }
                    }
                    BankProfile {
                        shape: normalise(&shape).expect("trip hours present"),
                        at_home: Some(home),
                    }
                })
                .collect();
            ev_centroids[w.index()].push(mean_shape(&profiles));
            ev_bank.insert(BankKey::Cluster { cluster: k, day_type: w }, profiles);
        }
    }
    let ev_scale = cfg.ev_consumption_scale;
    let edges: Vec<f64> = (0..=cfg.ev_intervals)
        .map(|i| {
            ev_scale
                * (cfg.ev_lambda[1]
                    + (cfg.ev_lambda[2] - cfg.ev_lambda[1]) * i as f64 / cfg.ev_intervals as f64)
        })
        .collect();
    let ev_scaling = if ev_scale > 0.0 {
        ev_matrix(&edges, cfg.ev_lambda[0] * ev_scale, cfg)
    } else {
        ScalingModel::GammaResidual {
            pairs: BTreeMap::new(),
            default: GammaResidual { shape: 1.0, scale: 0.0 },
            lower: 0.0,
            upper: 0.0,
        }
    };
    let ev = ProfileModel {
        clusters: Some(ClusterModel {
            centroids: ev_centroids,
            transitions: cluster_transitions([cfg.ev_clusters; 2], cfg.cluster_persistence),
            empty_clusters: [vec![no_travel], vec![no_travel]],
        }),
        scaling: ev_scaling,
        bank: ProfileBank { banks: ev_bank },
    };

    let pv_arch: Vec<f64> = (0..STEPS_PER_DAY)
        .map(|t| {
            if (8..17).contains(&t) {
                (std::f64::consts::PI * (t as f64 - 7.5) / 9.0).sin().max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    let pv_profiles: Vec<BankProfile> = (0..cfg.bank_size)
        .map(|_| BankProfile {
            shape: normalise(&noisy(&pv_arch, cfg.shape_noise, rng)).expect("daylight hours"),
            at_home: None,
        })
        .collect();
    let pv = ProfileModel {
        clusters: None,
        scaling: ScalingModel::GammaResidual {
            pairs: BTreeMap::new(),
            default: gamma_for(cfg.pv_lambda[0], cfg),
            lower: cfg.pv_lambda[1],
            upper: cfg.pv_lambda[2],
        },
        bank: ProfileBank {
            banks: BTreeMap::from([(BankKey::Month(cfg.month), pv_profiles)]),
        },
    };

    let out = SyntheticBanks {
        ev,
        load,
        pv,
        weather: cfg.weather,
        initial_lambda: [
            nearest_midpoint(&edges, cfg.ev_lambda[0] * ev_scale),
            cfg.load_lambda[0],
            cfg.pv_lambda[0],
        ],
    };
    out.validate()?;
    Ok(out)
}

fn nearest_midpoint(edges: &[f64], x: f64) -> f64 {
    edges
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]))
        .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
        .unwrap_or(x)
}

fn mean_shape(profiles: &[BankProfile]) -> Vec<f64> {
    let mut m = vec![0.0; STEPS_PER_DAY];
    for p in profiles {
        for (a, v) in m.iter_mut().zip(&p.shape) {
            *a += v / profiles.len() as f64;
        }
    }
    m
}

/// Interval transition matrix pulling λ towards `mean` with the configured
/// persistence; a Gaussian kernel over interval midpoints.
fn ev_matrix(edges: &[f64], mean: f64, cfg: &SyntheticConfig) -> ScalingModel {
    let mids: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let n = mids.len();
    let sd = (1.0 - cfg.correlation) * cfg.lambda_spread * mean;
    let marginal: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let target = cfg.correlation * mids[i] + (1.0 - cfg.correlation) * mean;
            if sd <= 0.0 {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                return row;
            }
            let raw: Vec<f64> = mids
                .iter()
                .map(|m| (-(m - target).powi(2) / (2.0 * sd * sd)).exp())
                .collect();
            normalise(&raw).unwrap_or_else(|| {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                row
            })
        })
        .collect();
    ScalingModel::DiscreteMatrix {
        edges: edges.to_vec(),
        pairs: BTreeMap::new(),
        marginal,
    }
}

/// Fits a clustered profile model to measured days.
///
/// Days are normalised by their totals; all-zero days are skipped. Scaling
/// factors follow a pooled mean-shifted gamma fitted by moments to the
/// day-to-day changes of the daily totals.
pub fn fit_profile_model(
    raw: &[RawProfile],
    k: usize,
    features: FeatureExtractor,
    seed: u64,
) -> Result<ProfileModel> {
    let mut by_id: BTreeMap<&str, Vec<&RawProfile>> = BTreeMap::new();
    for r in raw {
        by_id.entry(r.id.as_str()).or_default().push(r);
    }
    for v in by_id.values_mut() {
        v.sort_by_key(|r| r.date);
    }

    let mut fits = Vec::new();
    for w in DayType::ALL {
        let days: Vec<Vec<f64>> = raw
            .iter()
            .filter(|r| r.day_type == w)
            .filter_map(|r| normalise(&r.values))
            .collect();
        let fit = fit_clusters(&days, k, features, seed)?;
        fits.push(fit);
    }
    let mut banks: BTreeMap<BankKey, Vec<BankProfile>> = BTreeMap::new();
    let mut label: BTreeMap<(&str, chrono::NaiveDate), usize> = BTreeMap::new();
    let mut idx = [0usize; 2];
    for r in raw {
        let Some(shape) = normalise(&r.values) else {
            continue;
        };
        let wi = r.day_type.index();
        let a = fits[wi].assignments[idx[wi]];
        idx[wi] += 1;
        label.insert((r.id.as_str(), r.date), a);
        banks
            .entry(BankKey::Cluster { cluster: a, day_type: r.day_type })
            .or_default()
            .push(BankProfile { shape, at_home: None });
    }
    if let Some(key) = (0..k)
        .flat_map(|c| DayType::ALL.map(|w| BankKey::Cluster { cluster: c, day_type: w }))
        .find(|key| !banks.contains_key(key))
    {
        return Err(Error::EmptyBank(key.to_string()));
    }

    let mut sequences = Vec::new();
    let mut diffs = Vec::new();
    let mut max_total: f64 = 0.0;
    for days in by_id.values() {
        let mut seq = Vec::new();
        for pair in days.windows(2) {
            if (pair[1].date - pair[0].date).num_days() == 1 {
                diffs.push(pair[1].total() - pair[0].total());
            }
        }
        for d in days {
            max_total = max_total.max(d.total());
            if let Some(&a) = label.get(&(d.id.as_str(), d.date)) {
                seq.push((a, d.day_type));
            }
        }
        sequences.push(seq);
    }
    let default = gamma_by_moments(&diffs);
    let [c0, c1] = [fits[0].centroids.clone(), fits[1].centroids.clone()];
    let model = ProfileModel {
        clusters: Some(ClusterModel {
            centroids: [c0, c1],
            transitions: fit_transitions(&sequences, [k, k]),
            empty_clusters: [vec![], vec![]],
        }),
        scaling: ScalingModel::GammaResidual {
            pairs: BTreeMap::new(),
            default,
            lower: 0.0,
            upper: 1.5 * max_total,
        },
        bank: ProfileBank { banks },
    };
    model.validate()?;
    Ok(model)
}

/// Method-of-moments gamma for zero-mean residuals: the shape comes from the
/// sample skewness, the scale from the variance.
fn gamma_by_moments(xs: &[f64]) -> GammaResidual {
    if xs.len() < 3 {
        warn!("too few day-to-day changes to fit scaling residuals; using constant scaling");
        return GammaResidual { shape: 1.0, scale: 0.0 };
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    let skew = if var > 0.0 { m3 / var.powf(1.5) } else { 0.0 };
    // a symmetric residual is approximated by a large shape
    let shape = if skew > 0.05 { (2.0 / skew).powi(2) } else { 1600.0 };
    GammaResidual {
        shape,
        scale: (var / shape).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;

    #[test]
    fn default_config_is_consistent() {
        let mut rng = rng_for(11, &[]);
        let banks = generate_synthetic_bank(&SyntheticConfig::default(), &mut rng).unwrap();
        banks.validate().unwrap();
        let mut chain = banks.start_chain(&mut rng).unwrap();
        for _ in 0..60 {
            let d = banks.next_day(&mut chain, &mut rng).unwrap();
            d.validate().unwrap();
            assert!(d.ev_at_home[22] && d.ev_at_home[23] && d.ev_at_home[0]);
        }
    }

    #[test]
    fn full_correlation_freezes_lambda() {
        let cfg = SyntheticConfig { correlation: 1.0, ..Default::default() };
        let mut rng = rng_for(12, &[]);
        let banks = generate_synthetic_bank(&cfg, &mut rng).unwrap();
        let mut chain = banks.start_chain(&mut rng).unwrap();
        let start = (chain.ev.lambda, chain.load.lambda, chain.pv.lambda);
        for _ in 0..30 {
            banks.next_day(&mut chain, &mut rng).unwrap();
            assert_eq!((chain.ev.lambda, chain.load.lambda, chain.pv.lambda), start);
        }
    }

    #[test]
    fn gamma_moments_recover_scale() {
        let xs: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let g = gamma_by_moments(&xs);
        assert!((g.std_dev() - 1.0).abs() < 1e-9);
    }
}
