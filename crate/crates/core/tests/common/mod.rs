#![allow(dead_code)]

use std::sync::Arc;

use flexmarl::env::{DayInputs, GridParams, HouseholdParams};
use flexmarl::profiles::{generate_synthetic_bank, DayProfile, SyntheticConfig};
use flexmarl::rng::rng_for;
use flexmarl::thermal::{derive_kappa, BuildingParams, ComfortSchedule};

pub fn params() -> HouseholdParams {
    HouseholdParams {
        battery: Default::default(),
        flex: Default::default(),
        kappa: derive_kappa(&BuildingParams::default(), 3.5).unwrap(),
        comfort: ComfortSchedule::default(),
        initial_temp: 17.0,
    }
}

/// Two-level tariff with a carbon part.
pub fn tou_grid(horizon: usize) -> GridParams {
    let mut g = GridParams::flat(horizon, 0.1);
    for t in 0..horizon {
        let price = if (16..20).contains(&t) { 0.25 } else if t < 7 { 0.08 } else { 0.15 };
        let em = 0.07 * (0.2 + 0.05 * ((t as f64) / 4.0).sin());
        g.cost[t] = price + em;
        g.emissions_cost[t] = em;
    }
    g
}

pub fn synthetic_days(n_agents: usize, n_days: usize, seed: u64) -> Vec<Vec<DayProfile>> {
    let mut rng = rng_for(seed, &[0]);
    let banks = generate_synthetic_bank(&SyntheticConfig::default(), &mut rng).unwrap();
    let mut out = vec![Vec::new(); n_days];
    for _ in 0..n_agents {
        let mut chain = banks.start_chain(&mut rng).unwrap();
        for day in out.iter_mut() {
            day.push(banks.next_day(&mut chain, &mut rng).unwrap());
        }
    }
    out
}

pub fn synthetic_day(n_agents: usize, seed: u64) -> Arc<DayInputs> {
    let profiles = synthetic_days(n_agents, 1, seed).remove(0);
    Arc::new(DayInputs {
        grid: tou_grid(profiles[0].horizon()),
        profiles,
    })
}
