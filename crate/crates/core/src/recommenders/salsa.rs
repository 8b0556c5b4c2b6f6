//! SALSA score propagation on a PPR-selected hub/authority bipartite graph.
//!
//! Hubs are the top-k nodes by personalized PageRank from the source,
//! authorities everything the hubs follow. Mass moves hub -> authority along
//! `M'` (columns normalised by hub out-degree) and back along the transpose
//! of `M` with rows normalised by authority in-degree, with a restart of
//! weight `damping` at the source.

use crate::graph::{NodeId, OpinionGraph};
use crate::recommenders::ppr::ppr_scores;
use crate::{Error, Result};

const TOLERANCE: f64 = 1e-8;
const MAX_ITERATIONS: usize = 10_000;

/// Top-`k` nodes by score with positive mass, ties by id. The source is
/// always included first.
pub fn top_hubs(scores: &[f64], source: NodeId, k: usize) -> Vec<NodeId> {
    let mut order: Vec<NodeId> = (0..scores.len())
        .filter(|&v| v != source && scores[v] > 0.0)
        .collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hubs = Vec::with_capacity(k.min(scores.len()));
    hubs.push(source);
    hubs.extend(order.into_iter().take(k.saturating_sub(1)));
    hubs
}

/// Authority relevance scores for an explicit hub set, sorted by score
/// descending (ties by node id).
pub fn salsa_authority_scores(
    g: &OpinionGraph,
    source: NodeId,
    hubs: &[NodeId],
    damping: f64,
) -> Result<Vec<(NodeId, f64)>> {
    let source_hub = hubs
        .iter()
        .position(|&h| h == source)
        .ok_or_else(|| Error::InvalidArgument("source must be one of the hubs".into()))?;

    let mut authorities: Vec<NodeId> = hubs.iter().flat_map(|&h| g.followees(h).iter().copied()).collect();
    authorities.sort_unstable();
    authorities.dedup();
    if authorities.is_empty() {
        return Err(Error::NoCandidate(source));
    }
    let index_of = |a: NodeId| authorities.binary_search(&a).unwrap();

    // Sparse M: for hub j, the authority indices it follows.
    let hub_links: Vec<Vec<usize>> = hubs
        .iter()
        .map(|&h| g.followees(h).iter().map(|&a| index_of(a)).collect())
        .collect();
    let mut authority_in = vec![0usize; authorities.len()];
    for links in &hub_links {
        for &i in links {
            authority_in[i] += 1;
        }
    }

    let mut s = vec![0.0; hubs.len()];
    s[source_hub] = 1.0;
    let mut r = vec![0.0; authorities.len()];
    let mut r_next = vec![0.0; authorities.len()];
    for _ in 0..MAX_ITERATIONS {
        r_next.fill(0.0);
        for (j, links) in hub_links.iter().enumerate() {
            if links.is_empty() || s[j] == 0.0 {
                continue;
            }
            let share = s[j] / links.len() as f64;
            for &i in links {
                r_next[i] += share;
            }
        }
        let diff: f64 = r.iter().zip(&r_next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut r, &mut r_next);
        if diff < TOLERANCE {
            let mut ranked: Vec<(NodeId, f64)> =
                authorities.iter().copied().zip(r.iter().copied()).collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            return Ok(ranked);
        }
        for (j, links) in hub_links.iter().enumerate() {
            let back: f64 = links.iter().map(|&i| r[i] / authority_in[i] as f64).sum();
            s[j] = (1.0 - damping) * back;
        }
        s[source_hub] += damping;
    }
    Err(Error::Numeric(format!(
        "SALSA from {source} did not converge in {MAX_ITERATIONS} iterations"
    )))
}

pub fn salsa_scores(
    g: &OpinionGraph,
    source: NodeId,
    hubs: usize,
    ppr_damping: f64,
    ppr_tolerance: f64,
    salsa_damping: f64,
) -> Result<Vec<(NodeId, f64)>> {
    let ppr = ppr_scores(g, source, ppr_damping, ppr_tolerance)?;
    let hubs = top_hubs(&ppr, source, hubs.min(g.node_count()));
    salsa_authority_scores(g, source, &hubs, salsa_damping)
}
