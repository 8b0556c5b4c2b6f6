//! Personalized PageRank by power iteration.

use crate::graph::{NodeId, OpinionGraph};
use crate::{Error, Result};

pub const MAX_ITERATIONS: usize = 10_000;

/// Solves `p = d A' p + (1 - d) e_source`, where `A'` moves mass uniformly
/// along out-arcs. Mass on dangling nodes returns to the source. Iterates
/// until the L1 change between sweeps drops below `tolerance`.
pub fn ppr_scores(g: &OpinionGraph, source: NodeId, damping: f64, tolerance: f64) -> Result<Vec<f64>> {
    let mut scores = vec![0.0; g.node_count()];
    let mut scratch = vec![0.0; g.node_count()];
    ppr_into(g, source, damping, tolerance, &mut scores, &mut scratch)?;
    Ok(scores)
}

/// Buffer-reusing variant of [`ppr_scores`]. Returns the iteration count.
pub(crate) fn ppr_into(
    g: &OpinionGraph,
    source: NodeId,
    damping: f64,
    tolerance: f64,
    scores: &mut [f64],
    next: &mut [f64],
) -> Result<usize> {
    if source >= g.node_count() {
        return Err(Error::InvalidArgument(format!("source {source} out of range")));
    }
    if !(0.0..1.0).contains(&damping) {
        return Err(Error::InvalidArgument(format!("damping {damping} outside [0, 1)")));
    }
    scores.fill(0.0);
    scores[source] = 1.0;
    for iteration in 1..=MAX_ITERATIONS {
        next.fill(0.0);
        let mut dangling = 0.0;
        for u in 0..g.node_count() {
            let mass = scores[u];
            if mass == 0.0 {
                continue;
            }
            let out = g.followees(u);
            if out.is_empty() {
                dangling += mass;
                continue;
            }
            let share = damping * mass / out.len() as f64;
            for &v in out {
                next[v] += share;
            }
        }
        next[source] += (1.0 - damping) + damping * dangling;
        let mut diff = 0.0;
        for (a, b) in scores.iter().zip(next.iter()) {
            diff += (a - b).abs();
        }
        scores.copy_from_slice(next);
        if diff < tolerance {
            return Ok(iteration);
        }
    }
    Err(Error::Numeric(format!(
        "PPR from {source} did not converge in {MAX_ITERATIONS} iterations"
    )))
}
