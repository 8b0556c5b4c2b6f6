//! Paired Monte Carlo evaluation over an `(eta, mu)` grid.
//!
//! For every cell and replica a graph `G` is generated, then simulated once
//! without recommendations (`G'_0`) and once with the recommender under test
//! (`G'_l`). Both arms use the same dynamics seed. The effect of the
//! recommender on a metric is the mean of `m(G'_l) - m(G'_0)`, and its
//! significance is a two-sample KS test between `{m(G'_0) - m(G)}` and
//! `{m(G'_l) - m(G)}`.

mod export;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{self, Intervention, InterventionStrategy, SimulationConfig};
use crate::graph::OpinionGraph;
use crate::metrics;
use crate::netgen::{self, NetgenConfig};
use crate::stats::{self, derive_seed, rng_stream, KsResult};
use crate::{Error, Result};

pub use export::{
    read_aggregate_csv, read_long_csv, read_sweep_csv, sweep_csv, AggregateRow, ExportFormat, LongRow,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Nci,
    Rwc,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Nci, Metric::Rwc];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Nci => "nci",
            Metric::Rwc => "rwc",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nci" => Ok(Metric::Nci),
            "rwc" => Ok(Metric::Rwc),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub eta_values: Vec<f64>,
    pub mu_values: Vec<f64>,
    pub replicas: usize,
    pub master_seed: u64,
    /// Template; `mu`, `eta` and `seed` are set per replica.
    pub netgen: NetgenConfig,
    /// Template; `seed` is set per replica. Its recommender is the one under
    /// test.
    pub simulation: SimulationConfig,
    pub metrics: Vec<Metric>,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
}

impl GridConfig {
    pub const DESK_REPLICAS: usize = 50;
    pub const PAPER_REPLICAS: usize = 500;

    pub fn new(netgen: NetgenConfig, simulation: SimulationConfig, master_seed: u64) -> Self {
        Self {
            eta_values: vec![0.2, 0.4, 0.6, 0.8],
            mu_values: vec![0.05, 0.35, 0.65, 0.95],
            replicas: Self::DESK_REPLICAS,
            master_seed,
            netgen,
            simulation,
            metrics: Metric::ALL.to_vec(),
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, values) in [("eta_values", &self.eta_values), ("mu_values", &self.mu_values)] {
            if values.is_empty() {
                return Err(Error::InvalidArgument(format!("{name} is empty")));
            }
            if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1]")));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!("{name} must be strictly ascending")));
            }
        }
        if self.replicas < 5 {
            return Err(Error::InvalidArgument(format!(
                "replicas must be >= 5 for the KS test (got {})",
                self.replicas
            )));
        }
        if self.metrics.is_empty() {
            return Err(Error::InvalidArgument("no metrics selected".into()));
        }
        self.netgen.validate()?;
        self.simulation.validate()
    }

    fn recommender_name(&self) -> String {
        self.simulation
            .recommender
            .map(|r| r.kind.name().to_string())
            .unwrap_or_else(|| "none".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub replica: usize,
    /// Seed of the generated graph.
    pub seed: u64,
    pub m_initial: f64,
    pub m_null: f64,
    pub m_rec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub metric: Metric,
    pub records: Vec<ReplicaRecord>,
    /// Mean of `m_rec - m_null` over replicas.
    pub delta: f64,
    pub ks: KsResult,
    pub significance: String,
}

impl MetricResult {
    pub fn from_records(metric: Metric, records: Vec<ReplicaRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidArgument("no replica records".into()));
        }
        let delta =
            records.iter().map(|r| r.m_rec - r.m_null).sum::<f64>() / records.len() as f64;
        let null: Vec<f64> = records.iter().map(|r| r.m_null - r.m_initial).collect();
        let rec: Vec<f64> = records.iter().map(|r| r.m_rec - r.m_initial).collect();
        let ks = stats::ks_two_sample(&null, &rec)?;
        Ok(Self {
            metric,
            records,
            delta,
            significance: stats::significance(ks.p_value).to_string(),
            ks,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub eta: f64,
    pub mu: f64,
    pub metrics: Vec<MetricResult>,
}

impl CellResult {
    pub fn metric(&self, metric: Metric) -> Option<&MetricResult> {
        self.metrics.iter().find(|m| m.metric == metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub odm: String,
    pub recommender: String,
    pub master_seed: u64,
    pub replicas: usize,
    pub cells: Vec<CellResult>,
}

impl GridReport {
    pub fn cell(&self, eta: f64, mu: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.eta == eta && c.mu == mu)
    }
}

#[derive(Debug)]
struct NullArm {
    graph: OpinionGraph,
}

/// Null-arm results shared between evaluations that differ only in the
/// recommender, the susceptibility, rewiring or intervention settings.
#[derive(Debug, Default)]
pub struct NullArmCache {
    arms: Mutex<HashMap<String, Arc<NullArm>>>,
}

impl NullArmCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.arms.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Everything the null arm depends on.
#[derive(Serialize)]
struct NullKey<'a> {
    master_seed: u64,
    replica: usize,
    netgen: &'a NetgenConfig,
    odm: &'a crate::odm::OpinionModel,
    steps: usize,
    interactions_per_step: usize,
}

fn evaluate<R: rand::Rng + ?Sized>(
    metric: Metric,
    g: &OpinionGraph,
    sim: &SimulationConfig,
    rng: &mut R,
) -> Result<f64> {
    match metric {
        Metric::Nci => Ok(metrics::nci(g, sim.nci_neighborhood).value),
        Metric::Rwc => metrics::rwc(g, &sim.rwc, rng),
    }
}

fn evaluate_all(
    metrics: &[Metric],
    g: &OpinionGraph,
    sim: &SimulationConfig,
    master_seed: u64,
    replica: usize,
    tag: &str,
) -> Result<Vec<f64>> {
    metrics
        .iter()
        .map(|&m| {
            let mut rng = rng_stream(master_seed, replica as u64, &format!("{tag}-{}", m.name()));
            evaluate(m, g, sim, &mut rng)
        })
        .collect()
}

struct Task {
    cell: usize,
    eta: f64,
    mu: f64,
    replica: usize,
}

fn replica_configs(cfg: &GridConfig, task: &Task) -> (NetgenConfig, SimulationConfig) {
    let netgen = NetgenConfig {
        mu: task.mu,
        eta: task.eta,
        seed: derive_seed(cfg.master_seed, task.replica as u64, "gen"),
        ..cfg.netgen.clone()
    };
    let simulation = SimulationConfig {
        seed: derive_seed(cfg.master_seed, task.replica as u64, "dynamics"),
        ..cfg.simulation.clone()
    };
    (netgen, simulation)
}

fn run_replica(cfg: &GridConfig, cache: &NullArmCache, task: &Task) -> Result<Vec<ReplicaRecord>> {
    let (netgen_cfg, sim_cfg) = replica_configs(cfg, task);
    let key = serde_json::to_string(&NullKey {
        master_seed: cfg.master_seed,
        replica: task.replica,
        netgen: &netgen_cfg,
        odm: &sim_cfg.odm,
        steps: sim_cfg.steps(),
        interactions_per_step: sim_cfg.interactions_per_step,
    })
    .map_err(|e| Error::Serialization(e.to_string()))?;

    let graph = netgen::generate(&netgen_cfg)?;
    let cached = cache.arms.lock().expect("cache lock").get(&key).cloned();
    let null_arm = match cached {
        Some(arm) => arm,
        None => {
            let null = engine::run(&graph, &sim_cfg.null_model())?;
            let arm = Arc::new(NullArm { graph: null.graph });
            cache.arms.lock().expect("cache lock").insert(key, arm.clone());
            arm
        }
    };
    let rec = engine::run(&graph, &sim_cfg)?;

    let (master, k) = (cfg.master_seed, task.replica);
    let initial = evaluate_all(&cfg.metrics, &graph, &sim_cfg, master, k, "initial")?;
    let null = evaluate_all(&cfg.metrics, &null_arm.graph, &sim_cfg, master, k, "final")?;
    let rec = evaluate_all(&cfg.metrics, &rec.graph, &sim_cfg, master, k, "final")?;
    Ok(cfg
        .metrics
        .iter()
        .enumerate()
        .map(|(i, _)| ReplicaRecord {
            replica: k,
            seed: netgen_cfg.seed,
            m_initial: initial[i],
            m_null: null[i],
            m_rec: rec[i],
        })
        .collect())
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))
}

fn run_cells(cfg: &GridConfig, cells: &[(f64, f64)], cache: &NullArmCache) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let tasks: Vec<Task> = cells
        .iter()
        .enumerate()
        .flat_map(|(cell, &(eta, mu))| {
            (0..cfg.replicas).map(move |replica| Task {
                cell,
                eta,
                mu,
                replica,
            })
        })
        .collect();
    let pool = thread_pool(cfg.workers)?;
    let results: Vec<Result<Vec<ReplicaRecord>>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| {
                run_replica(cfg, cache, task).map_err(|e| Error::Replica {
                    eta: task.eta,
                    mu: task.mu,
                    replica: task.replica,
                    seed: derive_seed(cfg.master_seed, task.replica as u64, "gen"),
                    source: Box::new(e),
                })
            })
            .collect()
    });

    let mut per_cell: Vec<Vec<Vec<ReplicaRecord>>> = vec![Vec::new(); cells.len()];
    for (task, result) in tasks.iter().zip(results) {
        per_cell[task.cell].push(result?);
    }
    cells
        .iter()
        .zip(per_cell)
        .map(|(&(eta, mu), replicas)| {
            let metrics = cfg
                .metrics
                .iter()
                .enumerate()
                .map(|(i, &m)| MetricResult::from_records(m, replicas.iter().map(|r| r[i]).collect()))
                .collect::<Result<Vec<_>>>()?;
            Ok(CellResult { eta, mu, metrics })
        })
        .collect()
}

/// Evaluates one `(eta, mu)` cell.
pub fn run_cell(eta: f64, mu: f64, cfg: &GridConfig) -> Result<CellResult> {
    run_cell_cached(eta, mu, cfg, &NullArmCache::new())
}

pub fn run_cell_cached(eta: f64, mu: f64, cfg: &GridConfig, cache: &NullArmCache) -> Result<CellResult> {
    Ok(run_cells(cfg, &[(eta, mu)], cache)?.remove(0))
}

/// Evaluates every cell of the grid.
pub fn run_grid(cfg: &GridConfig) -> Result<GridReport> {
    run_grid_cached(cfg, &NullArmCache::new())
}

pub fn run_grid_cached(cfg: &GridConfig, cache: &NullArmCache) -> Result<GridReport> {
    let cells: Vec<(f64, f64)> = cfg
        .eta_values
        .iter()
        .flat_map(|&eta| cfg.mu_values.iter().map(move |&mu| (eta, mu)))
        .collect();
    Ok(GridReport {
        odm: cfg.simulation.odm.name().to_string(),
        recommender: cfg.recommender_name(),
        master_seed: cfg.master_seed,
        replicas: cfg.replicas,
        cells: run_cells(cfg, &cells, cache)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub strategy: InterventionStrategy,
    pub xi: f64,
    pub metric: Metric,
    pub delta: f64,
    pub p_value: f64,
}

/// Δm as a function of the intervention probability for each strategy, at a
/// single cell.
pub fn intervention_sweep(
    cfg: &GridConfig,
    eta: f64,
    mu: f64,
    strategies: &[InterventionStrategy],
    xi_values: &[f64],
    cache: &NullArmCache,
) -> Result<Vec<SweepRow>> {
    if let Some(bad) = xi_values.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::InvalidArgument(format!("xi {bad} outside [0, 1]")));
    }
    let mut rows = Vec::new();
    for &strategy in strategies {
        for &xi in xi_values {
            let mut point = cfg.clone();
            point.simulation.intervention = Some(Intervention {
                probability: xi,
                strategy,
            });
            let cell = run_cell_cached(eta, mu, &point, cache)?;
            for m in &cell.metrics {
                rows.push(SweepRow {
                    strategy,
                    xi,
                    metric: m.metric,
                    delta: m.delta,
                    p_value: m.ks.p_value,
                });
            }
        }
    }
    Ok(rows)
}
