use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use flexmarl::harness::{
    build_banks, build_scenario, load_series, optimal_savings, run_matrix, write_outputs, ScenarioConfig,
};
use flexmarl::optimiser::{solver_by_name, write_schedule_csv};
use flexmarl::STEPS_PER_DAY;

#[derive(Parser)]
#[command(name = "flexmarl", version, about = "Household flexibility learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every strategy, agent count and repetition and write the results.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated strategy labels, e.g. TE,MO-c.
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<String>>,
        /// Comma-separated agent counts.
        #[arg(long, value_delimiter = ',')]
        agents: Option<Vec<usize>>,
        /// Parallel cells; 0 uses every core.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check a config file and print it with every default filled in.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve one evaluation day centrally and print its schedule as CSV.
    DumpSchedule {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        agents: usize,
        #[arg(long, default_value_t = 0)]
        repetition: usize,
        /// Evaluation day (epoch) index.
        #[arg(long, default_value_t = 0)]
        day: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            out,
            strategies,
            agents,
            workers,
        } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(s) = strategies {
                cfg.strategies = s;
            }
            if let Some(a) = agents {
                cfg.agents = a;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let table = run_matrix(&cfg)?;
            write_outputs(&out, &cfg, &table)?;
            for a in &table.aggregates {
                println!(
                    "{:>8} n={:<3} median {:8.3} p/agent-h  [{:.3}, {:.3}]",
                    a.strategy, a.n_agents, a.median, a.p25, a.p75
                );
            }
            info!("wrote {}", out.display());
            if !table.failures.is_empty() {
                bail!("{} cells failed; see {}", table.failures.len(), out.join("failures.csv").display());
            }
        }
        Command::ValidateConfig { config } => {
            let cfg = load(&config)?;
            cfg.validate()?;
            load_series(&cfg.series, &cfg.grid, STEPS_PER_DAY)?;
            print!("{}", cfg.to_toml());
        }
        Command::DumpSchedule {
            config,
            agents,
            repetition,
            day,
            seed,
            out,
        } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if day >= cfg.learning.epochs {
                bail!("day {day} beyond the {} evaluation days", cfg.learning.epochs);
            }
            let params = cfg.validate()?;
            let grids = load_series(&cfg.series, &cfg.grid, STEPS_PER_DAY)?;
            let banks = build_banks(&cfg, repetition)?;
            let sc = build_scenario(&cfg, params, &grids, &banks, agents, repetition)?;
            let solver = solver_by_name(&cfg.qp_backend)?;
            let (schedule, savings, _) = optimal_savings(&sc, solver.as_ref(), day)?;
            info!("optimal savings {savings:.3} p/agent-h");
            match out {
                Some(p) => {
                    let f = std::fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
                    write_schedule_csv(f, &schedule)?;
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    write_schedule_csv(&mut lock, &schedule)?;
                    lock.flush()?;
                }
            }
        }
    }
    Ok(())
}
