//! The interleaved recommendation / rewiring / opinion-update loop.
//!
//! Every time step visits all nodes in a fresh random order, and each node
//! performs `interactions_per_step` counted interactions. An interaction
//! either consults the recommender (with the node's susceptibility α_u) or
//! talks to a uniformly drawn followee. An accepted recommendation replaces
//! one old followee, so the arc count never changes.

mod variants;

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, OpinionGraph};
use crate::metrics::{self, Neighborhood, RwcConfig};
use crate::odm::{self, ExperimentOutcome, OpinionModel};
use crate::recommenders::{Candidate, Recommender, RecommenderSpec, ScoreNormalizer};
use crate::stats::rng_stream;
use crate::{Error, Result, SimRng};

pub use variants::{
    apply_intervention, choose_unfollow, rewire, sample_susceptibility, Intervention,
    InterventionStrategy, RewiringPolicy, Susceptibility,
};

/// How `R_max` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RecommendationBudget {
    /// Fraction of the initial arc count.
    Fraction(f64),
    Absolute(usize),
}

impl RecommendationBudget {
    pub fn resolve(&self, arc_count: usize) -> usize {
        match *self {
            RecommendationBudget::Fraction(f) => (f * arc_count as f64).round() as usize,
            RecommendationBudget::Absolute(r) => r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub interactions_per_step: usize,
    pub max_recommendations: RecommendationBudget,
    /// `None` uses the opinion model's default horizon.
    pub max_steps: Option<usize>,
    pub odm: OpinionModel,
    pub recommender: Option<RecommenderSpec>,
    pub normalizer_samples: usize,
    pub rewiring: RewiringPolicy,
    pub susceptibility: Susceptibility,
    pub intervention: Option<Intervention>,
    pub seed: u64,
    /// Record NCI/RWC every this many steps; `None` disables the trace.
    pub trace_interval: Option<usize>,
    pub rwc: RwcConfig,
    pub nci_neighborhood: Neighborhood,
    pub max_consecutive_rejections: usize,
}

impl SimulationConfig {
    pub fn new(odm: OpinionModel, recommender: Option<RecommenderSpec>, seed: u64) -> Self {
        Self {
            interactions_per_step: 2,
            max_recommendations: RecommendationBudget::Fraction(0.4),
            max_steps: None,
            odm,
            recommender,
            normalizer_samples: 5000,
            rewiring: RewiringPolicy::UniformRandom,
            susceptibility: Susceptibility::Constant,
            intervention: None,
            seed,
            trace_interval: None,
            rwc: RwcConfig::default(),
            nci_neighborhood: Neighborhood::Out,
            max_consecutive_rejections: 1000,
        }
    }

    pub fn steps(&self) -> usize {
        self.max_steps.unwrap_or_else(|| self.odm.default_steps())
    }

    /// The same configuration with the recommender switched off.
    pub fn null_model(&self) -> Self {
        Self {
            max_recommendations: RecommendationBudget::Absolute(0),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.interactions_per_step == 0 {
            return Err(Error::InvalidArgument("interactions_per_step must be >= 1".into()));
        }
        if self.steps() == 0 {
            return Err(Error::InvalidArgument("max_steps must be >= 1".into()));
        }
        if let RecommendationBudget::Fraction(f) = self.max_recommendations {
            if !(f >= 0.0 && f.is_finite()) {
                return Err(Error::InvalidArgument(format!("budget fraction {f} is negative")));
            }
        }
        if self.trace_interval == Some(0) {
            return Err(Error::InvalidArgument("trace_interval must be >= 1".into()));
        }
        if self.max_consecutive_rejections == 0 {
            return Err(Error::InvalidArgument(
                "max_consecutive_rejections must be >= 1".into(),
            ));
        }
        self.odm.validate()?;
        if let Some(spec) = &self.recommender {
            spec.validate()?;
        }
        if let Some(iv) = &self.intervention {
            iv.validate()?;
        }
        self.rwc.validate()
    }
}

/// `R_max / ((T_max / 2) · S · |V|)`, clamped to `[0, 1]`.
pub fn calibrate_alpha(
    max_recommendations: usize,
    max_steps: usize,
    interactions_per_step: usize,
    node_count: usize,
) -> f64 {
    let slots = max_steps as f64 / 2.0 * interactions_per_step as f64 * node_count as f64;
    if max_recommendations == 0 || slots <= 0.0 {
        return 0.0;
    }
    let alpha = max_recommendations as f64 / slots;
    if alpha > 1.0 {
        log::warn!("recommendation rate {alpha:.4} exceeds 1, clamping");
        1.0
    } else {
        alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: usize,
    pub nci: f64,
    /// `None` when RWC is undefined for the graph at this step.
    pub rwc: Option<f64>,
    pub recs_used: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub points: Vec<TracePoint>,
    /// Step during which the last allowed recommendation was accepted.
    pub budget_exhausted_at: Option<usize>,
    pub max_recommendations: usize,
    pub alpha: f64,
    pub counters: Counters,
}

impl RunTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,nci,rwc,recs_used\n");
        for p in &self.points {
            let rwc = p.rwc.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", p.t, p.nci, rwc, p.recs_used).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// Counted interactions, no-ops included.
    pub interactions: u64,
    pub recommendation_queries: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub existing_link: u64,
    pub noops: u64,
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub graph: OpinionGraph,
    pub trace: RunTrace,
}

/// One simulation. Owns the evolving graph.
pub struct Simulation {
    cfg: SimulationConfig,
    graph: OpinionGraph,
    t: usize,
    t_max: usize,
    r: usize,
    r_max: usize,
    alpha: f64,
    per_node_alpha: Vec<f64>,
    experiments: Vec<ExperimentOutcome>,
    recommender: Option<(Recommender, ScoreNormalizer)>,
    /// Last candidate per node together with the graph version it was
    /// computed on; deterministic scorers give the same answer until an arc
    /// changes.
    candidate_cache: Vec<Option<(u64, Option<Candidate>)>>,
    rng: SimRng,
    intervention_rng: SimRng,
    order: Vec<NodeId>,
    counters: Counters,
    budget_exhausted_at: Option<usize>,
}

impl Simulation {
    pub fn new(initial: OpinionGraph, cfg: SimulationConfig) -> Result<Self> {
        cfg.validate()?;
        let n = initial.node_count();
        let t_max = cfg.steps();
        let r_max = match cfg.recommender {
            Some(_) => cfg.max_recommendations.resolve(initial.arc_count()),
            None => 0,
        };
        let alpha = calibrate_alpha(r_max, t_max, cfg.interactions_per_step, n);
        let mut sus_rng = rng_stream(cfg.seed, 0, "susceptibility");
        let per_node_alpha = sample_susceptibility(cfg.susceptibility, alpha, n, &mut sus_rng)?;

        let recommender = match cfg.recommender {
            Some(spec) if r_max > 0 => {
                let mut rec = Recommender::new(spec, n)?;
                let mut norm_rng = rng_stream(cfg.seed, 0, "normalizer");
                let normalizer = rec.fit_normalizer(&initial, cfg.normalizer_samples, &mut norm_rng)?;
                Some((rec, normalizer))
            }
            _ => None,
        };

        let experiments = match cfg.odm {
            OpinionModel::Epistemic(p) => vec![
                ExperimentOutcome {
                    action: odm::Action::Known,
                    successes: p.trials as f64 / 2.0,
                };
                n
            ],
            OpinionModel::Bcm(_) => Vec::new(),
        };

        Ok(Self {
            rng: rng_stream(cfg.seed, 0, "dynamics"),
            intervention_rng: rng_stream(cfg.seed, 0, "intervention"),
            cfg,
            t: 0,
            t_max,
            r: 0,
            r_max,
            alpha,
            per_node_alpha,
            experiments,
            recommender,
            candidate_cache: vec![None; n],
            order: (0..n).collect(),
            counters: Counters::default(),
            budget_exhausted_at: None,
            graph: initial,
        })
    }

    pub fn graph(&self) -> &OpinionGraph {
        &self.graph
    }

    pub fn into_graph(self) -> OpinionGraph {
        self.graph
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn max_steps(&self) -> usize {
        self.t_max
    }

    pub fn recommendations_used(&self) -> usize {
        self.r
    }

    pub fn max_recommendations(&self) -> usize {
        self.r_max
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn per_node_alpha(&self) -> &[f64] {
        &self.per_node_alpha
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn normalizer(&self) -> Option<&ScoreNormalizer> {
        self.recommender.as_ref().map(|(_, n)| n)
    }

    pub fn budget_exhausted_at(&self) -> Option<usize> {
        self.budget_exhausted_at
    }

    pub fn is_finished(&self) -> bool {
        self.t >= self.t_max
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<()> {
        if self.is_finished() {
            return Err(Error::InvalidArgument(format!(
                "simulation already ran its {} steps",
                self.t_max
            )));
        }
        if let OpinionModel::Epistemic(p) = self.cfg.odm {
            for v in 0..self.graph.node_count() {
                self.experiments[v] = odm::epistemic_experiment(self.graph.opinion(v), &p, &mut self.rng);
            }
        }
        self.order.shuffle(&mut self.rng);
        for i in 0..self.order.len() {
            let u = self.order[i];
            self.visit(u)?;
        }
        self.t += 1;
        Ok(())
    }

    fn visit(&mut self, u: NodeId) -> Result<()> {
        if let OpinionModel::Epistemic(p) = self.cfg.odm {
            if p.self_update {
                let o = odm::epistemic_update(self.graph.opinion(u), &self.experiments[u], &p);
                self.graph.set_opinion(u, o)?;
            }
        }
        let mut s = 0;
        let mut rejections = 0;
        while s < self.cfg.interactions_per_step {
            // The gate is drawn even when α_u = 0 so that the null and
            // recommender arms consume the stream identically.
            let gate = self.rng.random::<f64>() < self.per_node_alpha[u];
            if gate
                && rejections < self.cfg.max_consecutive_rejections
                && self.graph.out_degree(u) > 0
            {
                if let Some(candidate) = self.query(u)? {
                    self.counters.recommendation_queries += 1;
                    let (_, normalizer) = self.recommender.as_ref().expect("queried");
                    let p = normalizer.transform(candidate.raw_score);
                    if self.rng.random::<f64>() < p {
                        self.accept(u, candidate.node)?;
                        self.counters.accepted += 1;
                        self.counters.interactions += 1;
                        rejections = 0;
                        s += 1;
                    } else {
                        self.counters.rejected += 1;
                        rejections += 1;
                    }
                    continue;
                }
            }
            let followees = self.graph.followees(u);
            if followees.is_empty() {
                self.counters.noops += 1;
            } else {
                let v = followees[self.rng.random_range(0..followees.len())];
                self.interact(u, v)?;
                self.counters.existing_link += 1;
            }
            self.counters.interactions += 1;
            rejections = 0;
            s += 1;
        }
        Ok(())
    }

    fn query(&mut self, u: NodeId) -> Result<Option<Candidate>> {
        let version = self.graph.version();
        let Some((rec, _)) = self.recommender.as_mut() else {
            return Ok(None);
        };
        let cacheable = rec.spec().kind.is_deterministic();
        if cacheable {
            if let Some((seen, cached)) = self.candidate_cache[u] {
                if seen == version {
                    return Ok(cached);
                }
            }
        }
        let candidate = rec.best_candidate(&self.graph, u, &mut self.rng)?;
        if cacheable {
            self.candidate_cache[u] = Some((version, candidate));
        }
        Ok(candidate)
    }

    fn accept(&mut self, u: NodeId, v: NodeId) -> Result<()> {
        let v = match &self.cfg.intervention {
            Some(iv) => apply_intervention(&self.graph, u, v, iv, &mut self.intervention_rng),
            None => v,
        };
        rewire(&mut self.graph, u, v, self.cfg.rewiring, &mut self.rng)?;
        self.graph.add_arc(u, v)?;
        self.interact(u, v)?;
        self.r += 1;
        if self.r >= self.r_max {
            self.per_node_alpha.iter_mut().for_each(|a| *a = 0.0);
            self.budget_exhausted_at = Some(self.t);
        }
        Ok(())
    }

    fn interact(&mut self, u: NodeId, v: NodeId) -> Result<()> {
        let o_u = self.graph.opinion(u);
        let updated = match &self.cfg.odm {
            OpinionModel::Bcm(p) => odm::bcm_update(o_u, self.graph.opinion(v), p),
            OpinionModel::Epistemic(p) => odm::epistemic_update(o_u, &self.experiments[v], p),
        };
        self.graph.set_opinion(u, updated)
    }

    fn trace_point<R: Rng + ?Sized>(&self, rng: &mut R) -> TracePoint {
        TracePoint {
            t: self.t,
            nci: metrics::nci(&self.graph, self.cfg.nci_neighborhood).value,
            rwc: metrics::rwc(&self.graph, &self.cfg.rwc, rng).ok(),
            recs_used: self.r,
        }
    }

    /// Runs the remaining steps, sampling the trace if configured.
    pub fn run_to_end(mut self) -> Result<RunOutput> {
        let mut points = Vec::new();
        let mut trace_rng = rng_stream(self.cfg.seed, 0, "trace-rwc");
        let interval = self.cfg.trace_interval;
        if interval.is_some() {
            points.push(self.trace_point(&mut trace_rng));
        }
        while !self.is_finished() {
            self.step()?;
            if let Some(k) = interval {
                if self.t.is_multiple_of(k) || self.is_finished() {
                    points.push(self.trace_point(&mut trace_rng));
                }
            }
        }
        let trace = RunTrace {
            points,
            budget_exhausted_at: self.budget_exhausted_at,
            max_recommendations: self.r_max,
            alpha: self.alpha,
            counters: self.counters,
        };
        Ok(RunOutput {
            graph: self.graph,
            trace,
        })
    }
}

/// Runs a full simulation from `initial`.
pub fn run(initial: &OpinionGraph, cfg: &SimulationConfig) -> Result<RunOutput> {
    Simulation::new(initial.clone(), cfg.clone())?.run_to_end()
}
