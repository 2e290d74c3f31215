use std::io::Read;

use serde::Deserialize;

use super::config::{GridConfig, SeriesConfig};
use crate::env::GridParams;
use crate::{Error, Result};

/// Carbon cost in £/kWh for an intensity in kg/kWh and a social cost of
/// carbon in £/t.
pub fn carbon_cost(intensity: f64, scc_per_tonne: f64) -> f64 {
    intensity * scc_per_tonne / 1000.0
}

fn grid_day(grid: &GridConfig, price: &[f64], intensity: &[f64]) -> Result<GridParams> {
    let emissions: Vec<f64> = intensity.iter().map(|&i| carbon_cost(i, grid.social_cost_of_carbon)).collect();
    let g = GridParams {
        cost: price.iter().zip(&emissions).map(|(p, e)| p + e).collect(),
        emissions_cost: emissions,
        distribution_charge: grid.distribution_charge,
        resistance: grid.resistance,
        voltage: grid.voltage,
    };
    g.validate()?;
    Ok(g)
}

#[derive(Deserialize)]
struct Row {
    hour: usize,
    price: f64,
    intensity: f64,
}

/// Reads `hour,price,intensity` rows and splits them into days.
pub fn read_series_csv<R: Read>(reader: R, grid: &GridConfig, horizon: usize) -> Result<Vec<GridParams>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<Row>().enumerate() {
        let row = rec.map_err(|e| Error::Parse {
            line: i + 2,
            message: e.to_string(),
        })?;
        if row.hour != rows.len() % horizon {
            return Err(Error::Parse {
                line: i + 2,
                message: format!("expected hour {}, found {}", rows.len() % horizon, row.hour),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() || rows.len() % horizon != 0 {
        return Err(Error::Invalid(format!(
            "series has {} rows, not a whole number of {horizon}-step days",
            rows.len()
        )));
    }
    rows.chunks(horizon)
        .map(|day| {
            let price: Vec<f64> = day.iter().map(|r| r.price).collect();
            let intensity: Vec<f64> = day.iter().map(|r| r.intensity).collect();
            grid_day(grid, &price, &intensity)
        })
        .collect()
}

/// Grid cost series for every day: from the CSV when given, otherwise one
/// two-level time-of-use day.
pub fn load_series(series: &SeriesConfig, grid: &GridConfig, horizon: usize) -> Result<Vec<GridParams>> {
    if let Some(path) = &series.csv {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        return read_series_csv(file, grid, horizon);
    }
    for &(a, b) in &series.offpeak_hours {
        if a >= b || b > horizon {
            return Err(Error::Config(format!("off-peak window ({a}, {b}) outside the day")));
        }
    }
    let off = |t: usize| series.offpeak_hours.iter().any(|&(a, b)| (a..b).contains(&t));
    let price: Vec<f64> = (0..horizon)
        .map(|t| if off(t) { series.offpeak_price } else { series.peak_price })
        .collect();
    let intensity: Vec<f64> = (0..horizon)
        .map(|t| if off(t) { series.offpeak_intensity } else { series.peak_intensity })
        .collect();
    Ok(vec![grid_day(grid, &price, &intensity)?])
}
