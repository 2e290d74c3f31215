use serde::{Deserialize, Serialize};

use super::params::{BatteryParams, HouseholdParams};
use crate::profiles::DayProfile;
use crate::thermal::{mass_ceilings, ComfortBand};
use crate::{Error, Result};

const TOL: f64 = 1e-9;

/// Per-household look-ahead quantities for one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayPlan {
    /// Lowest battery level at the start of each step (index `0..=T`) from
    /// which every later trip and the end-of-day level remain reachable.
    pub floors: Vec<f64>,
    /// Highest battery level at the start of each step from which the
    /// end-of-day level remains reachable.
    pub ceilings: Vec<f64>,
    pub band: ComfortBand,
    /// Highest building mass temperature at the start of each step that
    /// keeps the upper comfort bound reachable.
    pub mass_ceilings: Vec<f64>,
}

/// Backward reservation recursion over EV trips and the terminal level.
pub fn battery_reservation(
    b: &BatteryParams,
    ev_demand: &[f64],
    at_home: &[bool],
) -> (Vec<f64>, Vec<f64>) {
    let n = ev_demand.len();
    let mut floors = vec![b.initial; n + 1];
    let mut ceilings = vec![b.initial; n + 1];
    for t in (0..n).rev() {
        let mu = if at_home[t] { 1.0 } else { 0.0 };
        floors[t] = (mu * b.min_level)
            .max(0.0)
            .max(floors[t + 1] + ev_demand[t] - mu * b.max_charge);
        ceilings[t] = b.capacity.min(ceilings[t + 1] + ev_demand[t] + mu * b.capacity);
    }
    (floors, ceilings)
}

impl DayPlan {
    pub fn new(params: &HouseholdParams, profile: &DayProfile, agent: usize) -> Result<Self> {
        profile.validate()?;
        let b = &params.battery;
        let (floors, ceilings) = battery_reservation(b, &profile.ev_demand, &profile.ev_at_home);
        if floors[0] > b.initial + TOL {
            return Err(Error::InfeasibleEvSchedule {
                agent,
                detail: format!(
                    "trips need {:.3} kWh at the start of the day but only {:.3} kWh is stored",
                    floors[0], b.initial
                ),
            });
        }
        if let Some(t) = (0..floors.len()).find(|&t| floors[t] > ceilings[t] + TOL || floors[t] > b.capacity + TOL) {
            return Err(Error::InfeasibleEvSchedule {
                agent,
                detail: format!(
                    "step {t}: required level {:.3} kWh exceeds reachable {:.3} kWh",
                    floors[t],
                    ceilings[t].min(b.capacity)
                ),
            });
        }
        let horizon = profile.horizon();
        let band = params.comfort.band(horizon);
        let mass = mass_ceilings(&params.kappa, &profile.external_temp, &profile.solar_gain, &band);
        if params.initial_temp > mass[0] + TOL {
            return Err(Error::InfeasibleComfort {
                agent,
                detail: format!(
                    "initial mass temperature {:.2} °C above reachable ceiling {:.2} °C",
                    params.initial_temp, mass[0]
                ),
            });
        }
        Ok(DayPlan {
            floors,
            ceilings,
            band,
            mass_ceilings: mass,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_trips_pin_only_the_end_of_day() {
        let b = BatteryParams::default();
        let (f, c) = battery_reservation(&b, &[0.0; 4], &[true; 4]);
        assert_eq!(f[4], b.initial);
        assert_eq!(c[4], b.initial);
        assert_eq!(f[3], b.min_level.max(b.initial - b.max_charge));
        assert_eq!(c[3], b.capacity);
        assert_eq!(f[0], b.min_level);
    }

    #[test]
    fn trip_raises_earlier_floors() {
        let b = BatteryParams {
            max_charge: 5.0,
            ..Default::default()
        };
        // away at step 2 using 30 kWh, then two plug-in steps before the end
        let (f, _) = battery_reservation(&b, &[0.0, 0.0, 30.0, 0.0, 0.0], &[true, true, false, true, true]);
        // end: 37.5; steps 4, 3 can add 5 each, so 27.5 after the trip
        assert!((f[3] - 27.5).abs() < 1e-12);
        assert!((f[2] - 57.5).abs() < 1e-12);
        assert!((f[1] - 52.5).abs() < 1e-12);
        assert!((f[0] - 47.5).abs() < 1e-12);
    }
}
