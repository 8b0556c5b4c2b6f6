use std::fs;
use std::path::{Path, PathBuf};

use prodsim_core::engine::{self, SimulationConfig};
use prodsim_core::harness::{self, GridConfig, GridReport, NullArmCache};
use prodsim_core::metrics::{self, RwcConfig};
use prodsim_core::netgen::{self, NetgenConfig};
use prodsim_core::stats::{derive_seed, rng_stream};
use prodsim_core::OpinionGraph;
use serde_json::json;
use toml::Value;

use crate::config::{Settings, SEED_ENV};
use crate::{CliError, Common};

fn settings(common: &Common) -> Result<Settings, CliError> {
    let env_seed = std::env::var(SEED_ENV).ok();
    let mut s = Settings::resolve(common.config.as_deref(), env_seed.as_deref(), &common.set)?;
    if let Some(seed) = common.seed {
        s.set("seed", Value::Integer(seed as i64))?;
    }
    if let Some(workers) = common.workers {
        s.set("workers", Value::Integer(workers as i64))?;
    }
    if common.paper_scale {
        s.set("replicas", Value::Integer(GridConfig::PAPER_REPLICAS as i64))?;
    }
    Ok(s)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn output_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn manifest(s: &Settings, subcommand: &str) -> String {
    s.to_toml(&format!(
        "prodsim {} {subcommand}\nresolved configuration; rerun with -c on this file",
        env!("CARGO_PKG_VERSION")
    ))
}

/// Generator settings for replica 0 of the master seed, as in the grid.
fn initial_netgen(s: &Settings) -> NetgenConfig {
    NetgenConfig {
        seed: derive_seed(s.seed(), 0, "gen"),
        ..s.netgen()
    }
}

fn check_netgen(cfg: &NetgenConfig) -> Result<(), CliError> {
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))
}

pub fn generate(common: &Common, output: &Path) -> Result<(), CliError> {
    let s = settings(common)?;
    let cfg = initial_netgen(&s);
    check_netgen(&cfg)?;
    let g = netgen::generate(&cfg)?;
    write(output, &g.to_text())?;
    let mut manifest_path = output.as_os_str().to_owned();
    manifest_path.push(".manifest.toml");
    write(&PathBuf::from(manifest_path), &manifest(&s, "generate"))?;
    log::info!("wrote {} ({} nodes, {} arcs)", output.display(), g.node_count(), g.arc_count());
    Ok(())
}

fn rwc_value(g: &OpinionGraph, cfg: &RwcConfig, seed: u64, tag: &str) -> Option<f64> {
    let mut rng = rng_stream(seed, 0, tag);
    match metrics::rwc(g, cfg, &mut rng) {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("{e}");
            None
        }
    }
}

pub fn simulate(common: &Common, dir: &Path) -> Result<(), CliError> {
    let s = settings(common)?;
    let netgen_cfg = initial_netgen(&s);
    check_netgen(&netgen_cfg)?;
    let sim_cfg = SimulationConfig {
        seed: derive_seed(s.seed(), 0, "dynamics"),
        ..s.simulation()?
    };
    output_dir(dir)?;

    let initial = netgen::generate(&netgen_cfg)?;
    let out = engine::run(&initial, &sim_cfg)?;
    let trace = &out.trace;

    let rwc_cfg = &sim_cfg.rwc;
    let summary = json!({
        "odm": sim_cfg.odm.name(),
        "recommender": sim_cfg.recommender.map(|r| r.kind.name()).unwrap_or("none"),
        "steps": sim_cfg.steps(),
        "max_recommendations": trace.max_recommendations,
        "recommendations_used": trace.counters.accepted,
        "budget_exhausted_at": trace.budget_exhausted_at,
        "alpha": trace.alpha,
        "counters": trace.counters,
        "initial": {
            "nci": metrics::nci(&initial, sim_cfg.nci_neighborhood).value,
            "rwc": rwc_value(&initial, rwc_cfg, s.seed(), "initial-rwc"),
        },
        "final": {
            "nci": metrics::nci(&out.graph, sim_cfg.nci_neighborhood).value,
            "rwc": rwc_value(&out.graph, rwc_cfg, s.seed(), "final-rwc"),
        },
    });
    let summary = serde_json::to_string_pretty(&summary).expect("summary serializes");

    write(&dir.join("final_graph.txt"), &out.graph.to_text())?;
    write(&dir.join("trace.csv"), &trace.to_csv())?;
    write(&dir.join("summary.json"), &(summary + "\n"))?;
    write(&dir.join("manifest.toml"), &manifest(&s, "simulate"))?;
    Ok(())
}

fn print_report(report: &GridReport) {
    for row in report.aggregate_rows() {
        println!(
            "eta={} mu={} {}: delta={:+.4} p={:.3e}{}",
            row.eta, row.mu, row.metric, row.delta, row.p_value, row.significance
        );
    }
}

pub fn grid(common: &Common, dir: &Path) -> Result<(), CliError> {
    let s = settings(common)?;
    let cfg = s.grid()?;
    check_netgen(&cfg.netgen)?;
    output_dir(dir)?;
    let report = harness::run_grid(&cfg)?;
    write(&dir.join("replicas.csv"), &report.long_csv()?)?;
    write(&dir.join("aggregate.csv"), &report.aggregate_csv()?)?;
    write(&dir.join("report.json"), &(report.to_json()? + "\n"))?;
    write(&dir.join("manifest.toml"), &manifest(&s, "grid"))?;
    print_report(&report);
    Ok(())
}

pub fn metrics(common: &Common, path: &Path, csv: bool) -> Result<(), CliError> {
    let s = settings(common)?;
    let rwc_cfg = s.rwc();
    rwc_cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let neighborhood = s.neighborhood()?;
    let g = OpinionGraph::load(path)?;
    let nci = metrics::nci(&g, neighborhood).value;
    let rwc = rwc_value(&g, &rwc_cfg, s.seed(), "metrics-rwc");
    let rwc_text = rwc.map(|v| format!("{v:?}")).unwrap_or_else(|| "nan".into());
    if csv {
        println!("nci,rwc\n{nci:?},{rwc_text}");
    } else {
        println!("nci={nci:?} rwc={rwc_text}");
    }
    Ok(())
}

pub fn intervene(common: &Common, dir: &Path) -> Result<(), CliError> {
    let s = settings(common)?;
    let cfg = s.grid()?;
    check_netgen(&cfg.netgen)?;
    let strategies = s.strategies()?;
    let (eta, mu) = s.cell();
    output_dir(dir)?;
    let rows = harness::intervention_sweep(&cfg, eta, mu, &strategies, &s.xi_values(), &NullArmCache::new())?;
    write(&dir.join("intervention.csv"), &harness::sweep_csv(&rows)?)?;
    write(&dir.join("manifest.toml"), &manifest(&s, "intervene"))?;
    for r in &rows {
        println!(
            "{} xi={} {}: delta={:+.4} p={:.3e}",
            r.strategy, r.xi, r.metric, r.delta, r.p_value
        );
    }
    Ok(())
}
