//! Layered experiment configuration.
//!
//! Every setting has a unique key that lives in one section of the TOML
//! file. Values are resolved in this order, later layers winning:
//! built-in defaults, the `PRODSIM_SEED` environment variable (seed only),
//! the config file, `--set key=value` overrides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use prodsim_core::engine::{
    Intervention, InterventionStrategy, RecommendationBudget, RewiringPolicy, SimulationConfig,
    Susceptibility,
};
use prodsim_core::harness::{GridConfig, Metric};
use prodsim_core::metrics::{Neighborhood, RwcConfig};
use prodsim_core::netgen::NetgenConfig;
use prodsim_core::odm::{BcmParams, EpistemicParams, OpinionModel};
use prodsim_core::recommenders::{RecommenderKind, RecommenderSpec};
use toml::Value;

use crate::CliError;

pub const SEED_ENV: &str = "PRODSIM_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Int,
    /// Integer that may be left unset.
    OptInt,
    Float,
    Bool,
    Str,
    FloatList,
    StrList,
}

pub struct Key {
    pub section: &'static str,
    pub name: &'static str,
    pub kind: Kind,
    /// TOML literal; empty for unset optional keys.
    pub default: &'static str,
    pub help: &'static str,
}

macro_rules! keys {
    ($($section:literal $name:literal $kind:ident $default:literal $help:literal;)*) => {
        pub const KEYS: &[Key] = &[$(Key {
            section: $section,
            name: $name,
            kind: Kind::$kind,
            default: $default,
            help: $help,
        },)*];
    };
}

keys! {
    "general" "seed" Int "0" "master seed; falls back to PRODSIM_SEED";
    "general" "workers" Int "0" "worker threads, 0 = all cores";

    "netgen" "n" Int "400" "number of nodes";
    "netgen" "mu" Float "0.05" "modularity: fraction of intra-community edges";
    "netgen" "eta" Float "0.8" "homophily: probability of adopting the community opinion";
    "netgen" "degree_exponent" Float "2.5" "power-law exponent of the degree distribution";
    "netgen" "community_exponent" Float "1.5" "power-law exponent of community sizes";
    "netgen" "avg_degree" Float "13.75" "mean undirected degree";
    "netgen" "max_degree" OptInt "" "maximum degree (default n/10)";
    "netgen" "min_community" Int "10" "smallest community";
    "netgen" "max_community" OptInt "" "largest community (default n/4)";
    "netgen" "connectivity_retries" Int "20" "rewiring attempts to obtain a connected graph";

    "simulation" "interactions_per_step" Int "2" "interactions per node per step (S)";
    "simulation" "budget_fraction" Float "0.4" "recommendation budget as a fraction of the arc count";
    "simulation" "max_recommendations" OptInt "" "absolute recommendation budget (overrides budget_fraction)";
    "simulation" "max_steps" OptInt "" "time steps (default 5000 for bcm, 100 for epistemic)";
    "simulation" "odm" Str "\"bcm\"" "opinion model: bcm | epistemic";
    "simulation" "bcm_confidence" Float "0.2" "BCM confidence bound";
    "simulation" "bcm_convergence" Float "0.2" "BCM convergence rate";
    "simulation" "epi_gain" Float "0.005" "epistemic advantage of the novel action";
    "simulation" "epi_trials" Int "15" "epistemic experiments per step";
    "simulation" "epi_self_update" Bool "false" "agents also learn from their own experiments";
    "simulation" "rewiring" Str "\"uniform\"" "unfollow rule: uniform | opinion_distance | inverse_degree";
    "simulation" "susceptibility" Str "\"constant\"" "per-node rate: constant | uniform | power_law";
    "simulation" "intervention" Str "\"none\"" "none | uniform | opinion_diversity | degree_sigmoid";
    "simulation" "xi" Float "0.0" "intervention probability";
    "simulation" "trace_interval" Int "0" "record metrics every this many steps, 0 = off";
    "simulation" "normalizer_samples" Int "5000" "score samples used to fit the normalizer";

    "recommender" "recommender" Str "\"ppr\"" "none | dji | ppr | salsa | oba";
    "recommender" "ppr_damping" Float "0.85" "PPR damping factor";
    "recommender" "ppr_tolerance" Float "1e-8" "PPR L1 convergence tolerance";
    "recommender" "salsa_hubs" Int "50" "SALSA hub count";
    "recommender" "salsa_damping" Float "0.85" "SALSA restart weight";
    "recommender" "oba_gamma" Float "2.0" "OBA similarity exponent";
    "recommender" "oba_floor" Float "1e-4" "OBA minimum opinion distance";

    "metrics" "walks_per_side" Int "10000" "RWC walks per side";
    "metrics" "degree_percentile" Float "0.95" "RWC hub degree quantile";
    "metrics" "max_walk_length" Int "1000" "RWC walk length cap";
    "metrics" "opinion_threshold" Float "0.5" "RWC side threshold";
    "metrics" "nci_neighborhood" Str "\"out\"" "NCI neighbourhood: out | in | both";

    "grid" "eta_values" FloatList "[0.2, 0.4, 0.6, 0.8]" "homophily values";
    "grid" "mu_values" FloatList "[0.05, 0.35, 0.65, 0.95]" "modularity values";
    "grid" "replicas" Int "50" "replicas per cell (--paper-scale sets 500)";
    "grid" "metrics" StrList "[\"nci\", \"rwc\"]" "metrics to evaluate";

    "intervene" "xi_values" FloatList "[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]" "intervention probabilities";
    "intervene" "strategies" StrList "[\"uniform\", \"opinion_diversity\", \"degree_sigmoid\"]" "intervention strategies";
    "intervene" "cell_eta" Float "0.8" "homophily of the evaluated cell";
    "intervene" "cell_mu" Float "0.05" "modularity of the evaluated cell";
}

fn lookup(name: &str) -> Option<&'static Key> {
    match name.split_once('.') {
        Some((section, key)) => KEYS.iter().find(|k| k.section == section && k.name == key),
        None => KEYS.iter().find(|k| k.name == name),
    }
}

fn parse_literal(text: &str) -> Option<Value> {
    let doc: toml::Table = format!("v = {text}").parse().ok()?;
    doc.get("v").cloned()
}

fn coerce(key: &Key, value: Value) -> Result<Value, CliError> {
    let bad = |v: &Value| {
        CliError::Usage(format!(
            "key `{}` expects {}, got `{v}`",
            key.name,
            match key.kind {
                Kind::Int | Kind::OptInt => "an integer",
                Kind::Float => "a number",
                Kind::Bool => "true or false",
                Kind::Str => "a string",
                Kind::FloatList => "a list of numbers",
                Kind::StrList => "a list of strings",
            }
        ))
    };
    let ok = match (key.kind, &value) {
        (Kind::Int | Kind::OptInt, Value::Integer(i)) if *i >= 0 => value,
        (Kind::Float, Value::Float(_)) => value,
        (Kind::Float, Value::Integer(i)) => Value::Float(*i as f64),
        (Kind::Bool, Value::Boolean(_)) => value,
        (Kind::Str, Value::String(_)) => value,
        (Kind::FloatList, Value::Array(items)) => {
            let mut out = Vec::with_capacity(items.len());
            for item in items {
                match item {
                    Value::Float(f) => out.push(Value::Float(*f)),
                    Value::Integer(i) => out.push(Value::Float(*i as f64)),
                    _ => return Err(bad(&value)),
                }
            }
            Value::Array(out)
        }
        (Kind::StrList, Value::Array(items)) if items.iter().all(Value::is_str) => value,
        (Kind::StrList, Value::String(s)) => Value::Array(
            s.split(',')
                .map(|p| Value::String(p.trim().to_string()))
                .collect(),
        ),
        _ => return Err(bad(&value)),
    };
    Ok(ok)
}

/// Fully resolved settings, one entry per registry key.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    values: BTreeMap<&'static str, Option<Value>>,
}

impl Settings {
    pub fn defaults() -> Self {
        let values = KEYS
            .iter()
            .map(|k| {
                let v = if k.default.is_empty() {
                    None
                } else {
                    Some(parse_literal(k.default).expect("registry defaults are valid TOML"))
                };
                (k.name, v)
            })
            .collect();
        Self { values }
    }

    /// Defaults, then the seed environment variable, then the file, then
    /// `--set` overrides.
    pub fn resolve(
        file: Option<&Path>,
        env_seed: Option<&str>,
        overrides: &[String],
    ) -> Result<Self, CliError> {
        let mut s = Self::defaults();
        if let Some(seed) = env_seed {
            let seed: u64 = seed.trim().parse().map_err(|_| {
                CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got `{seed}`"))
            })?;
            s.set("seed", Value::Integer(seed as i64))?;
        }
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            s.merge_toml(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        }
        for o in overrides {
            s.apply_override(o)?;
        }
        Ok(s)
    }

    pub fn merge_toml(&mut self, text: &str) -> Result<(), CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Usage(e.message().to_string()))?;
        for (section, body) in table {
            let Value::Table(body) = body else {
                return Err(CliError::Usage(format!(
                    "top-level key `{section}` must be a [section]"
                )));
            };
            if !KEYS.iter().any(|k| k.section == section) {
                return Err(CliError::Usage(format!("unknown section [{section}]")));
            }
            for (name, value) in body {
                let key = KEYS
                    .iter()
                    .find(|k| k.section == section && k.name == name)
                    .ok_or_else(|| CliError::Usage(format!("unknown key `{name}` in [{section}]")))?;
                self.values.insert(key.name, Some(coerce(key, value)?));
            }
        }
        Ok(())
    }

    pub fn apply_override(&mut self, assignment: &str) -> Result<(), CliError> {
        let (name, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override `{assignment}` is not key=value")))?;
        let key = lookup(name.trim())
            .ok_or_else(|| CliError::Usage(format!("unknown key `{}`", name.trim())))?;
        let raw = raw.trim();
        let value = match key.kind {
            Kind::Str => parse_literal(raw)
                .filter(Value::is_str)
                .unwrap_or_else(|| Value::String(raw.to_string())),
            Kind::StrList => parse_literal(raw)
                .filter(Value::is_array)
                .unwrap_or_else(|| Value::String(raw.to_string())),
            _ => parse_literal(raw)
                .ok_or_else(|| CliError::Usage(format!("cannot parse value `{raw}` for `{}`", key.name)))?,
        };
        self.values.insert(key.name, Some(coerce(key, value)?));
        Ok(())
    }

    pub fn set(&mut self, name: &str, value: Value) -> Result<(), CliError> {
        let key = lookup(name).ok_or_else(|| CliError::Usage(format!("unknown key `{name}`")))?;
        self.values.insert(key.name, Some(coerce(key, value)?));
        Ok(())
    }

    fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name).and_then(Option::as_ref)
    }

    fn int(&self, name: &str) -> u64 {
        self.get(name).and_then(Value::as_integer).expect("integer key") as u64
    }

    fn opt_int(&self, name: &str) -> Option<usize> {
        self.get(name).and_then(Value::as_integer).map(|i| i as usize)
    }

    fn usize(&self, name: &str) -> usize {
        self.int(name) as usize
    }

    fn float(&self, name: &str) -> f64 {
        self.get(name).and_then(Value::as_float).expect("float key")
    }

    fn bool(&self, name: &str) -> bool {
        self.get(name).and_then(Value::as_bool).expect("bool key")
    }

    fn str(&self, name: &str) -> &str {
        self.get(name).and_then(Value::as_str).expect("string key")
    }

    fn floats(&self, name: &str) -> Vec<f64> {
        self.get(name)
            .and_then(Value::as_array)
            .expect("list key")
            .iter()
            .filter_map(Value::as_float)
            .collect()
    }

    fn strings(&self, name: &str) -> Vec<String> {
        self.get(name)
            .and_then(Value::as_array)
            .expect("list key")
            .iter()
            .filter_map(|v| v.as_str().map(str::to_string))
            .collect()
    }

    pub fn seed(&self) -> u64 {
        self.int("seed")
    }

    pub fn workers(&self) -> usize {
        self.usize("workers")
    }

    pub fn netgen(&self) -> NetgenConfig {
        NetgenConfig {
            degree_exponent: self.float("degree_exponent"),
            community_exponent: self.float("community_exponent"),
            avg_degree: self.float("avg_degree"),
            max_degree: self.opt_int("max_degree"),
            min_community: self.usize("min_community"),
            max_community: self.opt_int("max_community"),
            connectivity_retries: self.usize("connectivity_retries"),
            ..NetgenConfig::new(self.usize("n"), self.float("mu"), self.float("eta"), self.seed())
        }
    }

    fn parse<T: std::str::FromStr<Err = prodsim_core::Error>>(&self, name: &str) -> Result<T, CliError> {
        self.str(name)
            .parse()
            .map_err(|e: prodsim_core::Error| CliError::Usage(format!("key `{name}`: {e}")))
    }

    pub fn recommender(&self) -> Result<Option<RecommenderSpec>, CliError> {
        let name = self.str("recommender");
        if name == "none" {
            return Ok(None);
        }
        let kind: RecommenderKind = self.parse("recommender")?;
        Ok(Some(RecommenderSpec {
            ppr_damping: self.float("ppr_damping"),
            ppr_tolerance: self.float("ppr_tolerance"),
            salsa_hubs: self.usize("salsa_hubs"),
            salsa_damping: self.float("salsa_damping"),
            oba_gamma: self.float("oba_gamma"),
            oba_floor: self.float("oba_floor"),
            ..RecommenderSpec::new(kind)
        }))
    }

    pub fn odm(&self) -> Result<OpinionModel, CliError> {
        match self.str("odm") {
            "bcm" => Ok(OpinionModel::Bcm(BcmParams {
                confidence: self.float("bcm_confidence"),
                convergence: self.float("bcm_convergence"),
            })),
            "epistemic" | "epi" => Ok(OpinionModel::Epistemic(EpistemicParams {
                gain: self.float("epi_gain"),
                trials: u32::try_from(self.int("epi_trials"))
                    .map_err(|_| CliError::Usage("epi_trials is too large".into()))?,
                self_update: self.bool("epi_self_update"),
            })),
            other => Err(CliError::Usage(format!(
                "key `odm`: unknown opinion model `{other}` (expected bcm or epistemic)"
            ))),
        }
    }

    pub fn rwc(&self) -> RwcConfig {
        RwcConfig {
            walks_per_side: self.usize("walks_per_side"),
            degree_percentile: self.float("degree_percentile"),
            max_walk_length: self.usize("max_walk_length"),
            opinion_threshold: self.float("opinion_threshold"),
        }
    }

    pub fn neighborhood(&self) -> Result<Neighborhood, CliError> {
        self.parse("nci_neighborhood")
    }

    pub fn simulation(&self) -> Result<SimulationConfig, CliError> {
        let intervention = match self.str("intervention") {
            "none" => None,
            _ => Some(Intervention {
                probability: self.float("xi"),
                strategy: self.parse::<InterventionStrategy>("intervention")?,
            }),
        };
        let max_recommendations = match self.opt_int("max_recommendations") {
            Some(r) => RecommendationBudget::Absolute(r),
            None => RecommendationBudget::Fraction(self.float("budget_fraction")),
        };
        let trace = self.usize("trace_interval");
        let cfg = SimulationConfig {
            interactions_per_step: self.usize("interactions_per_step"),
            max_recommendations,
            max_steps: self.opt_int("max_steps"),
            normalizer_samples: self.usize("normalizer_samples"),
            rewiring: self.parse::<RewiringPolicy>("rewiring")?,
            susceptibility: self.parse::<Susceptibility>("susceptibility")?,
            intervention,
            trace_interval: (trace > 0).then_some(trace),
            rwc: self.rwc(),
            nci_neighborhood: self.neighborhood()?,
            ..SimulationConfig::new(self.odm()?, self.recommender()?, self.seed())
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn metrics(&self) -> Result<Vec<Metric>, CliError> {
        self.strings("metrics")
            .iter()
            .map(|m| m.parse().map_err(|e: prodsim_core::Error| CliError::Usage(format!("key `metrics`: {e}"))))
            .collect()
    }

    pub fn grid(&self) -> Result<GridConfig, CliError> {
        let cfg = GridConfig {
            eta_values: self.floats("eta_values"),
            mu_values: self.floats("mu_values"),
            replicas: self.usize("replicas"),
            metrics: self.metrics()?,
            workers: self.workers(),
            ..GridConfig::new(self.netgen(), self.simulation()?, self.seed())
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn strategies(&self) -> Result<Vec<InterventionStrategy>, CliError> {
        self.strings("strategies")
            .iter()
            .map(|s| s.parse().map_err(|e: prodsim_core::Error| CliError::Usage(format!("key `strategies`: {e}"))))
            .collect()
    }

    pub fn xi_values(&self) -> Vec<f64> {
        self.floats("xi_values")
    }

    pub fn cell(&self) -> (f64, f64) {
        (self.float("cell_eta"), self.float("cell_mu"))
    }

    /// The resolved settings in config-file form; loading it back yields the
    /// same settings.
    pub fn to_toml(&self, header: &str) -> String {
        let mut out = String::new();
        for line in header.lines() {
            writeln!(out, "# {line}").unwrap();
        }
        let mut section = "";
        for key in KEYS {
            if key.section != section {
                section = key.section;
                writeln!(out, "\n[{section}]").unwrap();
            }
            match self.get(key.name) {
                Some(v) => writeln!(out, "{} = {}", key.name, render(v)).unwrap(),
                None => writeln!(out, "# {} unset", key.name).unwrap(),
            }
        }
        out
    }
}

fn render(v: &Value) -> String {
    match v {
        // Debug formatting keeps a decimal point and round-trips exactly.
        Value::Float(f) => format!("{f:?}"),
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(render).collect();
            format!("[{}]", parts.join(", "))
        }
        other => other.to_string(),
    }
}

/// Key table for `--help`, limited to the given sections.
pub fn key_help(sections: &[&str]) -> String {
    let mut out = String::from("Configuration keys (set with -c FILE or --set key=value):\n");
    for key in KEYS.iter().filter(|k| sections.contains(&k.section)) {
        let default = if key.default.is_empty() { "unset" } else { key.default };
        writeln!(
            out,
            "  {:<24} {:<10} default {:<14} {}",
            key.name,
            format!("[{}]", key.section),
            default,
            key.help
        )
        .unwrap();
    }
    out
}
