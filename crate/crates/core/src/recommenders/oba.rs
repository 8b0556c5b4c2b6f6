//! Opinion-biased recommender: inverse opinion distance to the power gamma.

use crate::graph::{NodeId, OpinionGraph};
use crate::{Error, Result};

/// Recommendation probabilities over the non-followed nodes of `u`,
/// in ascending node order.
pub fn oba_scores(g: &OpinionGraph, u: NodeId, gamma: f64, floor: f64) -> Result<Vec<(NodeId, f64)>> {
    let o_u = g.opinion(u);
    let followees = g.followees(u);
    let mut weights: Vec<(NodeId, f64)> = Vec::with_capacity(g.node_count());
    let mut next_followee = 0;
    for v in 0..g.node_count() {
        if next_followee < followees.len() && followees[next_followee] == v {
            next_followee += 1;
            continue;
        }
        if v == u {
            continue;
        }
        let d = (o_u - g.opinion(v)).abs().max(floor);
        weights.push((v, d.powf(-gamma)));
    }
    if weights.is_empty() {
        return Err(Error::NoCandidate(u));
    }
    let total: f64 = weights.iter().map(|w| w.1).sum();
    for w in &mut weights {
        w.1 /= total;
    }
    Ok(weights)
}
