//! People recommenders. Each maps a node `u` to a candidate it does not yet
//! follow plus an acceptance probability, the latter obtained by passing the
//! raw score through a [`ScoreNormalizer`] fitted on the initial graph.

pub mod dji;
pub mod normalizer;
pub mod oba;
pub mod ppr;
pub mod salsa;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, OpinionGraph};
use crate::{Error, Result};

pub use dji::dji_score;
pub use normalizer::ScoreNormalizer;
pub use oba::oba_scores;
pub use ppr::ppr_scores;
pub use salsa::{salsa_authority_scores, salsa_scores};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RecommenderKind {
    Dji,
    Ppr,
    Salsa,
    Oba,
}

impl RecommenderKind {
    pub fn name(self) -> &'static str {
        match self {
            RecommenderKind::Dji => "dji",
            RecommenderKind::Ppr => "ppr",
            RecommenderKind::Salsa => "salsa",
            RecommenderKind::Oba => "oba",
        }
    }

    /// Whether the raw score of a source depends only on the graph.
    pub(crate) fn is_deterministic(self) -> bool {
        !matches!(self, RecommenderKind::Oba)
    }
}

impl fmt::Display for RecommenderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RecommenderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dji" | "jaccard" => Ok(RecommenderKind::Dji),
            "ppr" | "pagerank" => Ok(RecommenderKind::Ppr),
            "salsa" => Ok(RecommenderKind::Salsa),
            "oba" => Ok(RecommenderKind::Oba),
            other => Err(Error::InvalidArgument(format!("unknown recommender `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecommenderSpec {
    pub kind: RecommenderKind,
    pub ppr_damping: f64,
    pub ppr_tolerance: f64,
    pub salsa_hubs: usize,
    pub salsa_damping: f64,
    pub oba_gamma: f64,
    pub oba_floor: f64,
}

impl RecommenderSpec {
    pub fn new(kind: RecommenderKind) -> Self {
        Self {
            kind,
            ppr_damping: 0.85,
            ppr_tolerance: 1e-8,
            salsa_hubs: 50,
            salsa_damping: 0.85,
            oba_gamma: 2.0,
            oba_floor: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let arg = |m: String| Err(Error::InvalidArgument(m));
        if !(0.0..1.0).contains(&self.ppr_damping) {
            return arg(format!("ppr_damping {} outside [0, 1)", self.ppr_damping));
        }
        if !(self.ppr_tolerance > 0.0) {
            return arg("ppr_tolerance must be positive".into());
        }
        if self.salsa_hubs == 0 {
            return arg("salsa_hubs must be positive".into());
        }
        if !(self.salsa_damping > 0.0 && self.salsa_damping <= 1.0) {
            return arg(format!("salsa_damping {} outside (0, 1]", self.salsa_damping));
        }
        if !(self.oba_gamma >= 0.0) || !(self.oba_floor > 0.0) {
            return arg("oba_gamma must be >= 0 and oba_floor > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub node: NodeId,
    pub raw_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recommendation {
    pub node: NodeId,
    pub raw_score: f64,
    /// Normalised acceptance probability in [0, 1].
    pub probability: f64,
}

/// Scorer with reusable scratch buffers; one per simulation.
#[derive(Debug, Clone)]
pub struct Recommender {
    spec: RecommenderSpec,
    scores: Vec<f64>,
    scratch: Vec<f64>,
    common: Vec<u32>,
    excluded: Vec<bool>,
}

impl Recommender {
    pub fn new(spec: RecommenderSpec, node_count: usize) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            scores: vec![0.0; node_count],
            scratch: vec![0.0; node_count],
            common: vec![0; node_count],
            excluded: vec![false; node_count],
        })
    }

    pub fn spec(&self) -> &RecommenderSpec {
        &self.spec
    }

    fn mark_excluded(&mut self, g: &OpinionGraph, u: NodeId, on: bool) {
        self.excluded[u] = on;
        for &v in g.followees(u) {
            self.excluded[v] = on;
        }
    }

    /// Highest-scoring non-followed node, ties broken by smallest id.
    fn argmax_eligible(&self) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        for (v, &s) in self.scores.iter().enumerate() {
            if self.excluded[v] {
                continue;
            }
            if best.is_none_or(|b| s > b.raw_score) {
                best = Some(Candidate { node: v, raw_score: s });
            }
        }
        best
    }

    /// Best candidate for `u` and its raw score, or `None` when `u` already
    /// follows everyone the scorer can reach.
    pub fn best_candidate<R: Rng + ?Sized>(
        &mut self,
        g: &OpinionGraph,
        u: NodeId,
        rng: &mut R,
    ) -> Result<Option<Candidate>> {
        if u >= g.node_count() {
            return Err(Error::InvalidArgument(format!("node {u} out of range")));
        }
        if self.scores.len() != g.node_count() {
            *self = Self::new(self.spec, g.node_count())?;
        }
        if g.out_degree(u) + 1 >= g.node_count() {
            return Ok(None);
        }
        let spec = self.spec;
        match spec.kind {
            RecommenderKind::Dji => {
                dji::dji_all(g, u, &mut self.common, &mut self.scores);
                self.mark_excluded(g, u, true);
                let best = self.argmax_eligible();
                self.mark_excluded(g, u, false);
                Ok(best)
            }
            RecommenderKind::Ppr => {
                ppr::ppr_into(
                    g,
                    u,
                    spec.ppr_damping,
                    spec.ppr_tolerance,
                    &mut self.scores,
                    &mut self.scratch,
                )?;
                self.mark_excluded(g, u, true);
                let best = self.argmax_eligible();
                self.mark_excluded(g, u, false);
                Ok(best)
            }
            RecommenderKind::Salsa => {
                ppr::ppr_into(
                    g,
                    u,
                    spec.ppr_damping,
                    spec.ppr_tolerance,
                    &mut self.scores,
                    &mut self.scratch,
                )?;
                let hubs = salsa::top_hubs(&self.scores, u, spec.salsa_hubs.min(g.node_count()));
                let ranked = match salsa::salsa_authority_scores(g, u, &hubs, spec.salsa_damping) {
                    Ok(r) => r,
                    Err(Error::NoCandidate(_)) => return Ok(None),
                    Err(e) => return Err(e),
                };
                Ok(ranked
                    .into_iter()
                    .find(|&(v, _)| v != u && !g.has_arc(u, v))
                    .map(|(node, raw_score)| Candidate { node, raw_score }))
            }
            RecommenderKind::Oba => {
                let probs = match oba::oba_scores(g, u, spec.oba_gamma, spec.oba_floor) {
                    Ok(p) => p,
                    Err(Error::NoCandidate(_)) => return Ok(None),
                    Err(e) => return Err(e),
                };
                Ok(Some(sample_weighted(&probs, rng)))
            }
        }
    }

    /// Samples `sample_size` source nodes uniformly and records the raw score
    /// of each one's recommended candidate.
    pub fn fit_normalizer<R: Rng + ?Sized>(
        &mut self,
        g: &OpinionGraph,
        sample_size: usize,
        rng: &mut R,
    ) -> Result<ScoreNormalizer> {
        let n = g.node_count();
        let deterministic = self.spec.kind.is_deterministic();
        let mut memo: Vec<Option<Option<f64>>> = vec![None; n];
        let mut sample = Vec::with_capacity(sample_size);
        for _ in 0..sample_size {
            let u = rng.random_range(0..n);
            let raw = match memo[u] {
                Some(cached) if deterministic => cached,
                _ => {
                    let raw = self.best_candidate(g, u, rng)?.map(|c| c.raw_score);
                    memo[u] = Some(raw);
                    raw
                }
            };
            if let Some(raw) = raw {
                sample.push(raw);
            }
        }
        ScoreNormalizer::from_sample(sample)
    }

    pub fn recommend<R: Rng + ?Sized>(
        &mut self,
        g: &OpinionGraph,
        u: NodeId,
        normalizer: &ScoreNormalizer,
        rng: &mut R,
    ) -> Result<Option<Recommendation>> {
        Ok(self.best_candidate(g, u, rng)?.map(|c| Recommendation {
            node: c.node,
            raw_score: c.raw_score,
            probability: normalizer.transform(c.raw_score),
        }))
    }
}

fn sample_weighted<R: Rng + ?Sized>(probs: &[(NodeId, f64)], rng: &mut R) -> Candidate {
    let mut ticket: f64 = rng.random();
    for &(node, p) in probs {
        if ticket < p {
            return Candidate { node, raw_score: p };
        }
        ticket -= p;
    }
    let &(node, p) = probs.last().expect("non-empty");
    Candidate { node, raw_score: p }
}

pub fn fit_normalizer<R: Rng + ?Sized>(
    g: &OpinionGraph,
    spec: &RecommenderSpec,
    rng: &mut R,
    sample_size: usize,
) -> Result<ScoreNormalizer> {
    Recommender::new(*spec, g.node_count())?.fit_normalizer(g, sample_size, rng)
}

/// One-shot recommendation; `Ok(None)` signals that `u` has no candidate.
pub fn recommend<R: Rng + ?Sized>(
    g: &OpinionGraph,
    u: NodeId,
    spec: &RecommenderSpec,
    normalizer: &ScoreNormalizer,
    rng: &mut R,
) -> Result<Option<Recommendation>> {
    Recommender::new(*spec, g.node_count())?.recommend(g, u, normalizer, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::rng_stream;

    fn graph(n: usize, arcs: &[(usize, usize)]) -> OpinionGraph {
        let mut g = OpinionGraph::new(n).unwrap();
        for &(a, b) in arcs {
            g.add_arc(a, b).unwrap();
        }
        g
    }

    const ALL: [RecommenderKind; 4] = [
        RecommenderKind::Dji,
        RecommenderKind::Ppr,
        RecommenderKind::Salsa,
        RecommenderKind::Oba,
    ];

    #[test]
    fn saturated_node_has_no_candidate() {
        let g = graph(3, &[(0, 1), (0, 2), (1, 0)]);
        let norm = ScoreNormalizer::from_sample(vec![0.5]).unwrap();
        let mut rng = rng_stream(1, 0, "t");
        for kind in ALL {
            let r = recommend(&g, 0, &RecommenderSpec::new(kind), &norm, &mut rng).unwrap();
            assert!(r.is_none(), "{kind}");
        }
    }

    #[test]
    fn dji_picks_unique_positive_score() {
        // 0 follows 1 and 2; both follow 3. Nodes 4, 5 share nothing with 0.
        let g = graph(6, &[(0, 1), (0, 2), (1, 3), (2, 3), (4, 5)]);
        let norm = ScoreNormalizer::from_sample(vec![0.0, 0.5, 1.0]).unwrap();
        let mut rng = rng_stream(1, 0, "t");
        let r = recommend(&g, 0, &RecommenderSpec::new(RecommenderKind::Dji), &norm, &mut rng)
            .unwrap()
            .unwrap();
        assert_eq!(r.node, 3);
        assert_eq!(r.raw_score, 1.0);
        assert_eq!(r.probability, 1.0);
    }

    #[test]
    fn ties_break_on_smallest_id() {
        let g = graph(4, &[]);
        let mut rec = Recommender::new(RecommenderSpec::new(RecommenderKind::Dji), 4).unwrap();
        let mut rng = rng_stream(1, 0, "t");
        let c = rec.best_candidate(&g, 2, &mut rng).unwrap().unwrap();
        assert_eq!(c.node, 0);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("PPR".parse::<RecommenderKind>().unwrap(), RecommenderKind::Ppr);
        assert!("nope".parse::<RecommenderKind>().is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = RecommenderSpec::new(RecommenderKind::Ppr);
        assert!(s.validate().is_ok());
        s.ppr_damping = 1.0;
        assert!(s.validate().is_err());
    }
}
