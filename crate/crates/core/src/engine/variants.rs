//! Susceptibility, rewiring and intervention policies.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, OpinionGraph};
use crate::{Error, Result};

macro_rules! named_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
                    $(n if n == $name.replace('_', "") => Ok($ty::$variant),)+
                    _ => Err(Error::InvalidArgument(format!(
                        concat!("unknown ", stringify!($ty), " `{}`"), s
                    ))),
                }
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Susceptibility {
    #[default]
    Constant,
    Uniform,
    PowerLaw,
}

named_enum!(Susceptibility {
    Constant => "constant",
    Uniform => "uniform",
    PowerLaw => "power_law",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum RewiringPolicy {
    #[default]
    UniformRandom,
    OpinionDistance,
    InverseDegree,
}

named_enum!(RewiringPolicy {
    UniformRandom => "uniform",
    OpinionDistance => "opinion_distance",
    InverseDegree => "inverse_degree",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InterventionStrategy {
    Uniform,
    OpinionDiversity,
    DegreeSigmoid,
}

named_enum!(InterventionStrategy {
    Uniform => "uniform",
    OpinionDiversity => "opinion_diversity",
    DegreeSigmoid => "degree_sigmoid",
});

impl InterventionStrategy {
    pub const ALL: [InterventionStrategy; 3] = [
        InterventionStrategy::Uniform,
        InterventionStrategy::OpinionDiversity,
        InterventionStrategy::DegreeSigmoid,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    /// Probability ξ of replacing a recommendation.
    pub probability: f64,
    pub strategy: InterventionStrategy,
}

impl Intervention {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::InvalidArgument(format!(
                "intervention probability {} outside [0, 1]",
                self.probability
            )));
        }
        Ok(())
    }
}

/// Per-node recommendation rates with mean `alpha`.
pub fn sample_susceptibility<R: Rng + ?Sized>(
    kind: Susceptibility,
    alpha: f64,
    node_count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    let values = match kind {
        Susceptibility::Constant => vec![alpha; node_count],
        Susceptibility::Uniform => (0..node_count)
            .map(|_| (rng.random::<f64>() * 2.0 * alpha).min(1.0))
            .collect(),
        Susceptibility::PowerLaw => {
            if alpha >= 1.0 {
                return Err(Error::InvalidArgument(
                    "power-law susceptibility needs alpha < 1".into(),
                ));
            }
            if alpha == 0.0 {
                vec![0.0; node_count]
            } else {
                // Inverse CDF of the density m x^(m-1) on [0, 1].
                let m = alpha / (1.0 - alpha);
                (0..node_count)
                    .map(|_| rng.random::<f64>().powf(1.0 / m).clamp(0.0, 1.0))
                    .collect()
            }
        }
    };
    Ok(values)
}

/// Picks the followee of `u` to drop, never `keep`. Returns `None` when `u`
/// has no other followee.
pub fn choose_unfollow<R: Rng + ?Sized>(
    g: &OpinionGraph,
    u: NodeId,
    keep: NodeId,
    policy: RewiringPolicy,
    rng: &mut R,
) -> Option<NodeId> {
    let old: Vec<NodeId> = g.followees(u).iter().copied().filter(|&w| w != keep).collect();
    if old.is_empty() {
        return None;
    }
    let weights: Vec<f64> = match policy {
        RewiringPolicy::UniformRandom => return Some(old[rng.random_range(0..old.len())]),
        RewiringPolicy::OpinionDistance => {
            let o_u = g.opinion(u);
            old.iter().map(|&w| (o_u - g.opinion(w)).abs()).collect()
        }
        RewiringPolicy::InverseDegree => {
            old.iter().map(|&w| 1.0 / (1.0 + g.in_degree(w) as f64)).collect()
        }
    };
    match WeightedIndex::new(&weights) {
        Ok(dist) => Some(old[dist.sample(rng)]),
        Err(_) => Some(old[rng.random_range(0..old.len())]),
    }
}

/// Removes one old followee of `u` (never `keep`) and returns it.
pub fn rewire<R: Rng + ?Sized>(
    g: &mut OpinionGraph,
    u: NodeId,
    keep: NodeId,
    policy: RewiringPolicy,
    rng: &mut R,
) -> Result<Option<NodeId>> {
    let Some(w) = choose_unfollow(g, u, keep, policy, rng) else {
        return Ok(None);
    };
    g.remove_arc(u, w)?;
    Ok(Some(w))
}

const MAX_INTERVENTION_PASSES: usize = 100;

/// With probability ξ replaces the recommended `v` by a candidate chosen under
/// `strategy`; otherwise returns `v`.
pub fn apply_intervention<R: Rng + ?Sized>(
    g: &OpinionGraph,
    u: NodeId,
    v: NodeId,
    intervention: &Intervention,
    rng: &mut R,
) -> NodeId {
    if rng.random::<f64>() >= intervention.probability {
        return v;
    }
    let mut candidates: Vec<NodeId> = (0..g.node_count())
        .filter(|&c| c != u && !g.has_arc(u, c))
        .collect();
    if candidates.is_empty() {
        return v;
    }
    let o_u = g.opinion(u);
    let mean_in = g.arc_count() as f64 / g.node_count() as f64;
    for _ in 0..MAX_INTERVENTION_PASSES {
        candidates.shuffle(rng);
        if intervention.strategy == InterventionStrategy::Uniform {
            return candidates[0];
        }
        for &c in &candidates {
            let p = match intervention.strategy {
                InterventionStrategy::Uniform => 1.0,
                InterventionStrategy::OpinionDiversity => (o_u - g.opinion(c)).abs(),
                InterventionStrategy::DegreeSigmoid => sigmoid(g.in_degree(c) as f64 - mean_in),
            };
            if rng.random::<f64>() < p {
                return c;
            }
        }
    }
    v
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
