use std::sync::Arc;

use log::{info, warn};
use rayon::prelude::*;

use super::config::ScenarioConfig;
use super::series::load_series;
use crate::env::{baseline_day, GridParams, HouseholdParams};
use crate::marl::{train, CostDeltas, HouseholdScenario, Registry, StrategyConfig, Tables};
use crate::optimiser::{build_problem, solve_day, solver_by_name, OptimalSchedule, QpSolver};
use crate::profiles::{fit_profile_model, generate_synthetic_bank, load_profiles_csv, FeatureExtractor, SyntheticBanks};
use crate::rng::{derive_seed, label, rng_for};
use crate::{Error, Result, STEPS_PER_DAY};

/// Strategy label of the optimiser upper bound in the aggregates.
pub const OPTIMUM: &str = "optimum";

/// One evaluation of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub strategy: String,
    pub repetition: usize,
    pub epoch: usize,
    pub n_agents: usize,
    /// Pence per agent-hour against the passive baseline.
    pub savings: f64,
    pub deltas: CostDeltas,
}

/// Spread of final-epoch mean savings over repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub strategy: String,
    pub n_agents: usize,
    pub repetitions: usize,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    /// Mean final-epoch component savings over repetitions.
    pub deltas: CostDeltas,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub strategy: String,
    pub n_agents: usize,
    pub repetition: usize,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct PolicyDump {
    pub strategy: String,
    pub n_agents: usize,
    pub repetition: usize,
    pub tables: Vec<Tables>,
}

#[derive(Debug, Clone)]
pub struct ScheduleDump {
    pub n_agents: usize,
    pub repetition: usize,
    pub day: usize,
    pub schedule: OptimalSchedule,
}

#[derive(Debug, Clone, Default)]
pub struct ResultsTable {
    pub rows: Vec<TrajectoryRow>,
    pub aggregates: Vec<AggregateRow>,
    pub failures: Vec<CellFailure>,
    pub policies: Vec<PolicyDump>,
    pub schedules: Vec<ScheduleDump>,
}

/// Linear-interpolated percentile, `q` in `[0, 1]`, of unsorted values.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of nothing");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn repetition_seed(seed: u64, repetition: usize) -> u64 {
    derive_seed(seed, &[label("repetition"), repetition as u64])
}

/// Profile generator of a repetition, with measured components swapped in
/// when configured.
pub fn build_banks(cfg: &ScenarioConfig, repetition: usize) -> Result<SyntheticBanks> {
    let seed = repetition_seed(cfg.seed, repetition);
    let mut rng = rng_for(seed, &[label("banks")]);
    let mut banks = generate_synthetic_bank(&cfg.synthetic, &mut rng)?;
    let fit = |path: &std::path::Path, k: usize| -> Result<(crate::profiles::ProfileModel, f64)> {
        let raw = load_profiles_csv(path)?;
        let mean = raw.iter().map(|r| r.total()).sum::<f64>() / raw.len().max(1) as f64;
        Ok((fit_profile_model(&raw, k, FeatureExtractor::Load, seed)?, mean))
    };
    if let Some(p) = &cfg.data.load_csv {
        let (m, mean) = fit(p, cfg.synthetic.load_clusters)?;
        banks.load = m;
        banks.initial_lambda[1] = mean;
    }
    if let Some(p) = &cfg.data.pv_csv {
        let (m, mean) = fit(p, 1)?;
        banks.pv = m;
        banks.initial_lambda[2] = mean;
    }
    banks.validate()?;
    Ok(banks)
}

pub fn build_scenario(
    cfg: &ScenarioConfig,
    params: Arc<HouseholdParams>,
    grids: &[GridParams],
    banks: &SyntheticBanks,
    n_agents: usize,
    repetition: usize,
) -> Result<HouseholdScenario> {
    let solver: Arc<dyn QpSolver> = Arc::from(solver_by_name(&cfg.qp_backend)?);
    let sc = HouseholdScenario::synthetic(
        params,
        banks,
        grids,
        n_agents,
        &cfg.learning,
        repetition_seed(cfg.seed, repetition),
    )?;
    Ok(sc.with_solver(solver))
}

/// Optimal schedule of an evaluation day and its savings against the
/// passive baseline, in pence per agent-hour.
pub fn optimal_savings(sc: &HouseholdScenario, solver: &dyn QpSolver, epoch: usize) -> Result<(OptimalSchedule, f64, CostDeltas)> {
    let day = sc.evaluation_day(epoch).clone();
    let problem = build_problem(sc.params().clone(), day.clone())?;
    let opt = solve_day(&problem, solver)?;
    let base = baseline_day(sc.params().clone(), day.clone())?.total;
    let scale = 100.0 / (day.n_agents() * day.horizon()) as f64;
    let r = &opt.total;
    let deltas = CostDeltas {
        grid: (base.grid - r.grid) * scale,
        distribution: (base.distribution - r.distribution) * scale,
        storage: (base.storage - r.storage) * scale,
        emissions: (base.emissions - r.emissions) * scale,
    };
    let savings = (r.total - base.total) * scale;
    Ok((opt, savings, deltas))
}

enum Cell {
    Train(usize),
    Optimum,
}

struct CellOutput {
    n_agents: usize,
    repetition: usize,
    order: usize,
    strategy: String,
    rows: Vec<TrajectoryRow>,
    policy: Option<PolicyDump>,
    schedule: Option<ScheduleDump>,
}

fn mean_deltas<'a>(it: impl Iterator<Item = &'a CostDeltas>) -> CostDeltas {
    let mut acc = CostDeltas::default();
    let mut n = 0.0;
    for d in it {
        acc.grid += d.grid;
        acc.distribution += d.distribution;
        acc.storage += d.storage;
        acc.emissions += d.emissions;
        n += 1.0;
    }
    if n > 0.0 {
        acc.grid /= n;
        acc.distribution /= n;
        acc.storage /= n;
        acc.emissions /= n;
    }
    acc
}

/// Trains every (strategy, agent count, repetition) cell and the optimiser
/// upper bound. A failing cell is recorded and the rest carry on.
pub fn run_matrix(cfg: &ScenarioConfig) -> Result<ResultsTable> {
    let params = cfg.validate()?;
    let strategies = cfg.strategy_configs()?;
    let grids = load_series(&cfg.series, &cfg.grid, STEPS_PER_DAY)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let reps = cfg.learning.repetitions;
    pool.install(|| run_cells(cfg, params, &strategies, &grids, reps))
}

fn run_cells(
    cfg: &ScenarioConfig,
    params: Arc<HouseholdParams>,
    strategies: &[StrategyConfig],
    grids: &[GridParams],
    reps: usize,
) -> Result<ResultsTable> {
    let banks: Vec<std::result::Result<SyntheticBanks, String>> = (0..reps)
        .into_par_iter()
        .map(|r| build_banks(cfg, r).map_err(|e| e.to_string()))
        .collect();
    let keys: Vec<(usize, usize)> = cfg
        .agents
        .iter()
        .flat_map(|&n| (0..reps).map(move |r| (n, r)))
        .collect();
    let scenarios: Vec<std::result::Result<Arc<HouseholdScenario>, String>> = keys
        .par_iter()
        .map(|&(n, r)| {
            let b = banks[r].as_ref().map_err(Clone::clone)?;
            build_scenario(cfg, params.clone(), grids, b, n, r)
                .map(Arc::new)
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut cells = Vec::new();
    for (k, _) in keys.iter().enumerate() {
        for s in 0..strategies.len() {
            cells.push((k, Cell::Train(s)));
        }
        cells.push((k, Cell::Optimum));
    }
    let registry = Registry::default();
    let epochs = cfg.learning.epochs;
    let final_k = cfg.final_epochs.min(epochs);
    let outputs: Vec<std::result::Result<CellOutput, CellFailure>> = cells
        .par_iter()
        .map(|(k, cell)| {
            let (n, rep) = keys[*k];
            let (name, order) = match cell {
                Cell::Train(s) => (strategies[*s].label(), *s),
                Cell::Optimum => (OPTIMUM.to_string(), strategies.len()),
            };
            let fail = |error: String| CellFailure {
                strategy: name.clone(),
                n_agents: n,
                repetition: rep,
                error,
            };
            let sc = scenarios[*k].as_ref().map_err(|e| fail(e.clone()))?;
            let out = match cell {
                Cell::Train(s) => {
                    let seed = derive_seed(repetition_seed(cfg.seed, rep), &[label(&name)]);
                    let o = train(&strategies[*s], &registry, sc.as_ref(), &cfg.learning, seed)
                        .map_err(|e| fail(e.to_string()))?;
                    let rows = o
                        .trajectory
                        .iter()
                        .map(|rec| TrajectoryRow {
                            strategy: name.clone(),
                            repetition: rep,
                            epoch: rec.epoch,
                            n_agents: n,
                            savings: rec.evaluation.savings,
                            deltas: rec.evaluation.deltas,
                        })
                        .collect();
                    CellOutput {
                        n_agents: n,
                        repetition: rep,
                        order,
                        strategy: name.clone(),
                        rows,
                        policy: Some(PolicyDump {
                            strategy: name.clone(),
                            n_agents: n,
                            repetition: rep,
                            tables: o.learner.tables().to_vec(),
                        }),
                        schedule: None,
                    }
                }
                Cell::Optimum => {
                    let solver = solver_by_name(&cfg.qp_backend).map_err(|e| fail(e.to_string()))?;
                    let mut rows = Vec::new();
                    let mut last = None;
                    for epoch in epochs - final_k..epochs {
                        let (opt, savings, deltas) =
                            optimal_savings(sc, solver.as_ref(), epoch).map_err(|e| fail(e.to_string()))?;
                        rows.push(TrajectoryRow {
                            strategy: name.clone(),
                            repetition: rep,
                            epoch,
                            n_agents: n,
                            savings,
                            deltas,
                        });
                        last = Some(ScheduleDump {
                            n_agents: n,
                            repetition: rep,
                            day: epoch,
                            schedule: opt,
                        });
                    }
                    CellOutput {
                        n_agents: n,
                        repetition: rep,
                        order,
                        strategy: name.clone(),
                        rows,
                        policy: None,
                        schedule: last,
                    }
                }
            };
            info!("finished {name} with {n} agents, repetition {rep}");
            Ok(out)
        })
        .collect();

    let mut table = ResultsTable::default();
    let mut done: Vec<CellOutput> = Vec::new();
    for o in outputs {
        match o {
            Ok(c) => done.push(c),
            Err(f) => {
                warn!(
                    "{} with {} agents, repetition {} failed: {}",
                    f.strategy, f.n_agents, f.repetition, f.error
                );
                table.failures.push(f);
            }
        }
    }
    done.sort_by_key(|c| (c.n_agents, c.order, c.repetition));

    for &n in &cfg.agents {
        for order in 0..=strategies.len() {
            let group: Vec<&CellOutput> = done.iter().filter(|c| c.n_agents == n && c.order == order).collect();
            if group.is_empty() {
                continue;
            }
            let finals: Vec<(f64, CostDeltas)> = group
                .iter()
                .map(|c| {
                    let tail = &c.rows[c.rows.len().saturating_sub(final_k)..];
                    let m = tail.iter().map(|r| r.savings).sum::<f64>() / tail.len() as f64;
                    (m, mean_deltas(tail.iter().map(|r| &r.deltas)))
                })
                .collect();
            let means: Vec<f64> = finals.iter().map(|f| f.0).collect();
            table.aggregates.push(AggregateRow {
                strategy: group[0].strategy.clone(),
                n_agents: n,
                repetitions: group.len(),
                median: percentile(&means, 0.5),
                p25: percentile(&means, 0.25),
                p75: percentile(&means, 0.75),
                deltas: mean_deltas(finals.iter().map(|f| &f.1)),
            });
        }
    }
    for c in done {
        if c.strategy != OPTIMUM {
            table.rows.extend(c.rows);
        }
        table.policies.extend(c.policy);
        table.schedules.extend(c.schedule);
    }
    Ok(table)
}
