//! Daily exogenous profiles: EV travel, household load, PV generation and
//! weather, chained from one day to the next with a Markov mechanism.
//!
//! Load and EV shapes are normalised so each day sums to one. A day's profile
//! is a normalised shape drawn from a bank, multiplied by a scaling factor
//! `λ` (the daily total). Banks are keyed by behaviour cluster and day type
//! for load and EV, and by month for PV.

mod chain;
mod cluster;
mod csv_io;
mod synthetic;
mod types;

pub use chain::{next_day, ChainState, ComponentDay, HouseholdChain, WeatherModel};
pub use cluster::{
    fit_clusters, fit_transitions, load_features, travel_features, ClusterFit, FeatureExtractor,
};
pub use csv_io::{load_profiles_csv, read_profiles_csv, write_profiles_csv, RawProfile};
pub use synthetic::{fit_profile_model, generate_synthetic_bank, SyntheticBanks, SyntheticConfig};
pub use types::{
    BankKey, BankProfile, ClusterModel, DayProfile, DayType, GammaResidual, ProfileBank,
    ProfileModel, ScalingModel,
};

/// Scales a shape so it sums to one. Returns `None` for an all-zero shape.
pub fn normalise(values: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = values.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return None;
    }
    Some(values.iter().map(|v| v / total).collect())
}
