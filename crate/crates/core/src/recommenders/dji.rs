//! Directed Jaccard index between u's followees and v's followers.

use crate::graph::{NodeId, OpinionGraph};

pub fn dji_score(g: &OpinionGraph, u: NodeId, v: NodeId) -> f64 {
    let a = g.followees(u);
    let b = g.followers(v);
    let common = sorted_intersection_len(a, b);
    let union = a.len() + b.len() - common;
    if union == 0 {
        0.0
    } else {
        common as f64 / union as f64
    }
}

fn sorted_intersection_len(a: &[NodeId], b: &[NodeId]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// DJI of `u` against every node, via two-hop path counts.
///
/// `common` is scratch of length `node_count` and is left zeroed.
pub(crate) fn dji_all(g: &OpinionGraph, u: NodeId, common: &mut [u32], out: &mut [f64]) {
    for &w in g.followees(u) {
        for &v in g.followees(w) {
            common[v] += 1;
        }
    }
    let du = g.out_degree(u);
    for v in 0..g.node_count() {
        let c = common[v] as usize;
        let union = du + g.in_degree(v) - c;
        out[v] = if union == 0 { 0.0 } else { c as f64 / union as f64 };
        common[v] = 0;
    }
}
