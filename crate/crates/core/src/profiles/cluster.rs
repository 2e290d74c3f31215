use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::types::DayType;
use crate::rng::rng_for;
use crate::{Error, Result};

/// Feature space used for clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureExtractor {
    /// The profile itself.
    Raw,
    /// Peak magnitude, peak hour, mean 7–10h, mean 17–22h.
    Load,
    /// Values from 6h to 22h.
    Travel,
}

impl FeatureExtractor {
    pub fn extract(self, profile: &[f64]) -> Vec<f64> {
        match self {
            FeatureExtractor::Raw => profile.to_vec(),
            FeatureExtractor::Load => load_features(profile),
            FeatureExtractor::Travel => travel_features(profile),
        }
    }
}

pub fn load_features(p: &[f64]) -> Vec<f64> {
    let (peak_hour, peak) = p
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let span = (p.len().max(2) - 1) as f64;
    let mean = |a: usize, b: usize| {
        let b = b.min(p.len());
        if a >= b {
            0.0
        } else {
            p[a..b].iter().sum::<f64>() / (b - a) as f64
        }
    };
    vec![peak, peak_hour as f64 / span, mean(7, 10), mean(17, 22)]
}

pub fn travel_features(p: &[f64]) -> Vec<f64> {
    p[6.min(p.len())..23.min(p.len())].to_vec()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFit {
    pub assignments: Vec<usize>,
    /// Mean of the member profiles in profile space.
    pub centroids: Vec<Vec<f64>>,
    /// Centroids in feature space.
    pub feature_centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares in feature space.
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centres: &[Vec<f64>]) -> (usize, f64) {
    centres
        .iter()
        .enumerate()
        .map(|(k, c)| (k, sq_dist(x, c)))
        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
}

const RESTARTS: u64 = 8;
const MAX_ITER: usize = 300;

/// K-means (Lloyd) with k-means++ seeding and a fixed number of restarts.
/// The best restart by within-cluster sum of squares wins.
pub fn fit_clusters(
    profiles: &[Vec<f64>],
    k: usize,
    features: FeatureExtractor,
    seed: u64,
) -> Result<ClusterFit> {
    if k == 0 {
        return Err(Error::Invalid("cluster count must be at least 1".into()));
    }
    if profiles.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} profiles for {k} clusters",
            profiles.len()
        )));
    }
    let xs: Vec<Vec<f64>> = profiles.iter().map(|p| features.extract(p)).collect();
    let mut best: Option<(Vec<usize>, Vec<Vec<f64>>, f64)> = None;
    for restart in 0..RESTARTS {
        let (assign, centres, inertia) = lloyd(&xs, k, seed, restart);
        if best.as_ref().is_none_or(|b| inertia < b.2 - 1e-12) {
            best = Some((assign, centres, inertia));
        }
    }
    let (assignments, feature_centroids, inertia) = best.expect("at least one restart");
    let dim = profiles[0].len();
    let mut centroids = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in profiles.iter().zip(&assignments) {
        counts[a] += 1;
        for (c, v) in centroids[a].iter_mut().zip(p) {
            *c += v;
        }
    }
    for (c, n) in centroids.iter_mut().zip(&counts) {
        if *n > 0 {
            c.iter_mut().for_each(|v| *v /= *n as f64);
        }
    }
    Ok(ClusterFit {
        assignments,
        centroids,
        feature_centroids,
        inertia,
    })
}

fn lloyd(xs: &[Vec<f64>], k: usize, seed: u64, restart: u64) -> (Vec<usize>, Vec<Vec<f64>>, f64) {
    let mut rng = rng_for(seed, &[restart]);
    let n = xs.len();
    let mut centres = vec![xs[rng.random_range(0..n)].clone()];
    while centres.len() < k {
        let d: Vec<f64> = xs.iter().map(|x| nearest(x, &centres).1).collect();
        let total: f64 = d.iter().sum();
        let pick = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, di) in d.iter().enumerate() {
                if u < *di {
                    idx = i;
                    break;
                }
                u -= di;
            }
            idx
        };
        centres.push(xs[pick].clone());
    }

    let mut assign = vec![usize::MAX; n];
    for _ in 0..MAX_ITER {
        let mut changed = false;
        for (i, x) in xs.iter().enumerate() {
            let a = nearest(x, &centres).0;
            if a != assign[i] {
                assign[i] = a;
                changed = true;
            }
        }
        let dim = xs[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (x, &a) in xs.iter().zip(&assign) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(x) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // re-seed an empty cluster at the point furthest from its centre
                let far = (0..n)
                    .max_by(|&i, &j| {
                        let di = sq_dist(&xs[i], &centres[assign[i]]);
                        let dj = sq_dist(&xs[j], &centres[assign[j]]);
                        di.total_cmp(&dj).then(j.cmp(&i))
                    })
                    .unwrap_or(0);
                centres[c] = xs[far].clone();
                assign[far] = c;
                changed = true;
            } else {
                centres[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = xs
        .iter()
        .zip(&assign)
        .map(|(x, &a)| sq_dist(x, &centres[a]))
        .sum();
    (assign, centres, inertia)
}

/// Empirical cluster transition matrices from consecutive labelled days.
///
/// `sequences` holds, per household, the `(cluster, day type)` of each
/// consecutive day. Rows with no observations become uniform.
pub fn fit_transitions(
    sequences: &[Vec<(usize, DayType)>],
    n_clusters: [usize; 2],
) -> [[Vec<Vec<f64>>; 2]; 2] {
    let mut counts: [[Vec<Vec<f64>>; 2]; 2] = std::array::from_fn(|w| {
        std::array::from_fn(|w2| vec![vec![0.0; n_clusters[w2]]; n_clusters[w]])
    });
    for seq in sequences {
        for pair in seq.windows(2) {
            let (k, w) = pair[0];
            let (k2, w2) = pair[1];
            counts[w.index()][w2.index()][k][k2] += 1.0;
        }
    }
    for block in counts.iter_mut() {
        for m in block.iter_mut() {
            for row in m.iter_mut() {
                let s: f64 = row.iter().sum();
                if s > 0.0 {
                    row.iter_mut().for_each(|v| *v /= s);
                } else {
                    let n = row.len() as f64;
                    row.iter_mut().for_each(|v| *v = 1.0 / n);
                }
            }
        }
    }
    counts
}
