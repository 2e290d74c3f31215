//! Experiment matrix over strategies, agent counts and repetitions.
//!
//! [`run_matrix`] trains every cell in parallel and [`write_outputs`] lays
//! the results out as:
//!
//! ```text
//! results.csv      one row per (strategy, repetition, epoch, agent count)
//! aggregates.csv   median and quartiles of final-epoch mean savings
//! breakdown.csv    signed shares of the savings per cost component
//! failures.csv     cells that errored, if any
//! config.toml      the effective configuration
//! policies/        Q-tables per trained cell
//! schedules/       optimal schedule of the last evaluation day per cell
//! ```

mod config;
mod report;
mod run;
mod series;

use std::fs;
use std::io::Write;
use std::path::Path;

pub use config::{BatteryConfig, DataConfig, GridConfig, ScenarioConfig, SeriesConfig};
pub use report::{component_shares, cost_breakdown_report, BreakdownRow, ShareUnit, BREAKDOWN_COMPONENTS};
pub use run::{
    build_banks, build_scenario, optimal_savings, percentile, repetition_seed, run_matrix, AggregateRow, CellFailure,
    PolicyDump, ResultsTable, ScheduleDump, TrajectoryRow, OPTIMUM,
};
pub use series::{carbon_cost, load_series, read_series_csv};

use crate::marl::write_qtable_csv;
use crate::optimiser::write_schedule_csv;
use crate::{Error, Result};

pub const RESULTS_HEADER: &str =
    "strategy,repetition,epoch,n_agents,savings_p_per_agent_hour,cg_delta,cd_delta,cs_delta,emissions_delta";
pub const AGGREGATES_HEADER: &str =
    "strategy,n_agents,repetitions,median,p25,p75,cg_delta,cd_delta,cs_delta,emissions_delta";

fn csv_writer<W: Write>(w: W, header: &str) -> Result<csv::Writer<W>> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(header.split(','))?;
    Ok(w)
}

pub fn write_results_csv<W: Write>(w: W, rows: &[TrajectoryRow]) -> Result<()> {
    let mut w = csv_writer(w, RESULTS_HEADER)?;
    for r in rows {
        let d = &r.deltas;
        w.write_record([
            r.strategy.clone(),
            r.repetition.to_string(),
            r.epoch.to_string(),
            r.n_agents.to_string(),
            r.savings.to_string(),
            d.grid.to_string(),
            d.distribution.to_string(),
            d.storage.to_string(),
            d.emissions.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("results", e))
}

pub fn write_aggregates_csv<W: Write>(w: W, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv_writer(w, AGGREGATES_HEADER)?;
    for a in rows {
        let d = &a.deltas;
        w.write_record([
            a.strategy.clone(),
            a.n_agents.to_string(),
            a.repetitions.to_string(),
            a.median.to_string(),
            a.p25.to_string(),
            a.p75.to_string(),
            d.grid.to_string(),
            d.distribution.to_string(),
            d.storage.to_string(),
            d.emissions.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("aggregates", e))
}

pub fn write_breakdown_csv<W: Write>(w: W, rows: &[BreakdownRow]) -> Result<()> {
    let mut w = csv_writer(w, &format!("strategy,n_agents,unit,{}", BREAKDOWN_COMPONENTS.join(",")))?;
    for b in rows {
        w.write_record([
            b.strategy.clone(),
            b.n_agents.to_string(),
            b.unit.as_str().to_string(),
            b.battery.to_string(),
            b.distribution.to_string(),
            b.energy.to_string(),
            b.emissions.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("breakdown", e))
}

pub fn write_failures_csv<W: Write>(w: W, rows: &[CellFailure]) -> Result<()> {
    let mut w = csv_writer(w, "strategy,n_agents,repetition,error")?;
    for f in rows {
        w.write_record([f.strategy.clone(), f.n_agents.to_string(), f.repetition.to_string(), f.error.clone()])?;
    }
    w.flush().map_err(|e| Error::io("failures", e))
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    fs::File::create(path).map(std::io::BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes every output file under `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, cfg: &ScenarioConfig, table: &ResultsTable) -> Result<()> {
    let policies = dir.join("policies");
    let schedules = dir.join("schedules");
    for d in [dir, &policies, &schedules] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    write_results_csv(create(&dir.join("results.csv"))?, &table.rows)?;
    write_aggregates_csv(create(&dir.join("aggregates.csv"))?, &table.aggregates)?;
    write_breakdown_csv(create(&dir.join("breakdown.csv"))?, &cost_breakdown_report(&table.aggregates))?;
    let path = dir.join("config.toml");
    fs::write(&path, cfg.to_toml()).map_err(|e| Error::io(&path, e))?;
    if !table.failures.is_empty() {
        write_failures_csv(create(&dir.join("failures.csv"))?, &table.failures)?;
    }
    for p in &table.policies {
        for (k, t) in p.tables.iter().enumerate() {
            let stem = format!("{}_n{}_r{}_table{}", p.strategy, p.n_agents, p.repetition, k);
            write_qtable_csv(create(&policies.join(format!("{stem}.csv")))?, &t.q)?;
            if let Some(aux) = &t.aux {
                write_qtable_csv(create(&policies.join(format!("{stem}_baseline.csv")))?, aux)?;
            }
        }
    }
    for s in &table.schedules {
        let name = format!("n{}_r{}_day{}.csv", s.n_agents, s.repetition, s.day);
        write_schedule_csv(create(&schedules.join(name))?, &s.schedule)?;
    }
    Ok(())
}
