//! LFR-style benchmark graphs with opinions.
//!
//! Degrees and community sizes follow truncated power laws. Each node's
//! stubs are split into intra-community stubs (a fraction `mu`) and
//! inter-community stubs, which are wired with a configuration model and
//! repaired by edge swaps. Every undirected edge becomes two arcs.
//!
//! Note that `mu` here is the *intra*-community fraction; the classical LFR
//! mixing parameter is `1 - mu`.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::OpinionGraph;
use crate::stats::rng_stream;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetgenConfig {
    pub n: usize,
    pub mu: f64,
    pub eta: f64,
    pub degree_exponent: f64,
    pub community_exponent: f64,
    pub avg_degree: f64,
    /// Defaults to `n / 10`.
    pub max_degree: Option<usize>,
    pub min_community: usize,
    /// Defaults to `n / 4`.
    pub max_community: Option<usize>,
    pub seed: u64,
    pub connectivity_retries: usize,
}

impl Default for NetgenConfig {
    fn default() -> Self {
        Self {
            n: 400,
            mu: 0.5,
            eta: 0.5,
            degree_exponent: 2.5,
            community_exponent: 1.5,
            avg_degree: 13.75,
            max_degree: None,
            min_community: 10,
            max_community: None,
            seed: 0,
            connectivity_retries: 20,
        }
    }
}

impl NetgenConfig {
    pub fn new(n: usize, mu: f64, eta: f64, seed: u64) -> Self {
        Self {
            n,
            mu,
            eta,
            seed,
            ..Self::default()
        }
    }

    pub fn effective_max_degree(&self) -> usize {
        self.max_degree.unwrap_or(self.n / 10).min(self.n.saturating_sub(1))
    }

    pub fn effective_max_community(&self) -> usize {
        self.max_community.unwrap_or(self.n / 4)
    }

    pub fn validate(&self) -> Result<()> {
        let arg = |m: String| Err(Error::InvalidArgument(m));
        if self.n == 0 {
            return arg("n must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return arg(format!("mu = {} outside [0, 1]", self.mu));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return arg(format!("eta = {} outside [0, 1]", self.eta));
        }
        if !(self.degree_exponent > 1.0) || !(self.community_exponent > 1.0) {
            return arg("power-law exponents must be > 1".into());
        }
        let max_degree = self.effective_max_degree();
        if max_degree == 0 {
            return arg(format!("max_degree must be positive (got {max_degree})"));
        }
        if !(self.avg_degree >= 1.0 && self.avg_degree <= max_degree as f64) {
            return arg(format!(
                "avg_degree = {} must lie in [1, max_degree = {max_degree}]",
                self.avg_degree
            ));
        }
        let max_c = self.effective_max_community();
        if self.min_community == 0 || self.min_community > max_c || max_c > self.n {
            return arg(format!(
                "community bounds must satisfy 1 <= min ({}) <= max ({max_c}) <= n ({})",
                self.min_community, self.n
            ));
        }
        Ok(())
    }
}

/// Undirected LFR structure emitted as symmetric arcs.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkStructure {
    pub arcs: Vec<(usize, usize)>,
    pub communities: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpinionAssignment {
    pub opinions: Vec<f64>,
    pub community_opinions: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GeneratedNetwork {
    pub graph: OpinionGraph,
    pub community_opinions: Vec<f64>,
}

/// Samples from the continuous power law `x^-exponent` on `[lo, hi]`.
fn power_law_sample<R: Rng + ?Sized>(rng: &mut R, exponent: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    let a = 1.0 - exponent;
    let u: f64 = rng.random();
    let (l, h) = (lo.powf(a), hi.powf(a));
    (l + u * (h - l)).powf(1.0 / a)
}

fn power_law_mean(exponent: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    if (exponent - 2.0).abs() < 1e-9 {
        return (hi - lo) / (hi / lo).ln();
    }
    let a1 = 1.0 - exponent;
    let a2 = 2.0 - exponent;
    (a1 / a2) * (hi.powf(a2) - lo.powf(a2)) / (hi.powf(a1) - lo.powf(a1))
}

/// Lower cut-off giving the requested mean, found by bisection.
fn degree_lower_bound(exponent: f64, mean: f64, hi: f64) -> f64 {
    if power_law_mean(exponent, 1.0, hi) >= mean {
        return 1.0;
    }
    let (mut lo, mut up) = (1.0, hi);
    for _ in 0..100 {
        let mid = 0.5 * (lo + up);
        if power_law_mean(exponent, mid, hi) < mean {
            lo = mid;
        } else {
            up = mid;
        }
    }
    0.5 * (lo + up)
}

fn sample_degrees<R: Rng + ?Sized>(cfg: &NetgenConfig, rng: &mut R) -> Vec<usize> {
    let max_degree = cfg.effective_max_degree();
    let hi = max_degree as f64;
    let lo = degree_lower_bound(cfg.degree_exponent, cfg.avg_degree, hi);
    let mut degrees: Vec<usize> = (0..cfg.n)
        .map(|_| {
            let x = power_law_sample(rng, cfg.degree_exponent, lo, hi);
            (x.round() as usize).clamp(1, max_degree)
        })
        .collect();
    if degrees.iter().sum::<usize>() % 2 == 1 {
        let v = rng.random_range(0..cfg.n);
        if degrees[v] < max_degree {
            degrees[v] += 1;
        } else {
            degrees[v] -= 1;
        }
    }
    degrees
}

fn sample_community_sizes<R: Rng + ?Sized>(cfg: &NetgenConfig, rng: &mut R) -> Result<Vec<usize>> {
    let lo = cfg.min_community;
    let hi = cfg.effective_max_community().min(cfg.n);
    'attempt: for _ in 0..100 {
        let mut sizes = Vec::new();
        let mut total = 0usize;
        loop {
            let s = (power_law_sample(rng, cfg.community_exponent, lo as f64, hi as f64).round()
                as usize)
                .clamp(lo, hi);
            if total + s <= cfg.n {
                sizes.push(s);
                total += s;
                if total == cfg.n {
                    return Ok(sizes);
                }
                continue;
            }
            let rest = cfg.n - total;
            if rest >= lo {
                sizes.push(rest);
                return Ok(sizes);
            }
            // Spread the remainder over communities that still have room.
            let mut open: Vec<usize> = (0..sizes.len()).filter(|&c| sizes[c] < hi).collect();
            for _ in 0..rest {
                if open.is_empty() {
                    continue 'attempt;
                }
                let pick = rng.random_range(0..open.len());
                let c = open[pick];
                sizes[c] += 1;
                if sizes[c] >= hi {
                    open.swap_remove(pick);
                }
            }
            return Ok(sizes);
        }
    }
    Err(Error::Generation(format!(
        "no community partition of {} nodes with sizes in [{lo}, {hi}]",
        cfg.n
    )))
}

/// Assigns nodes to communities large enough for their internal degree.
/// Internal degrees that cannot fit anywhere are capped.
fn assign_communities<R: Rng + ?Sized>(
    sizes: &[usize],
    internal: &mut [usize],
    rng: &mut R,
) -> Vec<u32> {
    let n = internal.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.sort_by(|&a, &b| internal[b].cmp(&internal[a]));

    let mut capacity = sizes.to_vec();
    let mut membership = vec![0u32; n];
    for v in order {
        let eligible: Vec<usize> = (0..sizes.len())
            .filter(|&c| capacity[c] > 0 && sizes[c] > internal[v])
            .collect();
        let c = if eligible.is_empty() {
            let c = (0..sizes.len())
                .filter(|&c| capacity[c] > 0)
                .max_by_key(|&c| (sizes[c], std::cmp::Reverse(c)))
                .expect("sizes sum to n");
            internal[v] = internal[v].min(sizes[c] - 1);
            c
        } else {
            let total: usize = eligible.iter().map(|&c| capacity[c]).sum();
            let mut ticket = rng.random_range(0..total);
            let mut chosen = eligible[0];
            for &c in &eligible {
                if ticket < capacity[c] {
                    chosen = c;
                    break;
                }
                ticket -= capacity[c];
            }
            chosen
        };
        capacity[c] -= 1;
        membership[v] = c as u32;
    }
    membership
}

#[inline]
fn key(a: usize, b: usize) -> (u32, u32) {
    if a < b {
        (a as u32, b as u32)
    } else {
        (b as u32, a as u32)
    }
}

/// Configuration-model pairing of `stubs` with swap-based repair. Returns the
/// number of stubs that could not be placed.
fn wire_stubs<R: Rng + ?Sized>(
    mut stubs: Vec<usize>,
    allowed: &dyn Fn(usize, usize) -> bool,
    edges: &mut HashSet<(u32, u32)>,
    class_edges: &mut Vec<(usize, usize)>,
    rng: &mut R,
) -> usize {
    const SWAP_ATTEMPTS: usize = 100;
    stubs.shuffle(rng);
    let mut failed = Vec::new();
    for pair in stubs.chunks_exact(2) {
        let (a, b) = (pair[0], pair[1]);
        if a != b && allowed(a, b) && !edges.contains(&key(a, b)) {
            edges.insert(key(a, b));
            class_edges.push((a, b));
        } else {
            failed.push((a, b));
        }
    }
    let mut dropped = stubs.len() % 2;
    for (a, b) in failed {
        let mut placed = false;
        for _ in 0..SWAP_ATTEMPTS {
            if class_edges.is_empty() {
                break;
            }
            let idx = rng.random_range(0..class_edges.len());
            let (mut c, mut d) = class_edges[idx];
            if rng.random::<bool>() {
                std::mem::swap(&mut c, &mut d);
            }
            let ok = a != c
                && b != d
                && key(a, c) != key(b, d)
                && allowed(a, c)
                && allowed(b, d)
                && !edges.contains(&key(a, c))
                && !edges.contains(&key(b, d));
            if ok {
                edges.remove(&key(c, d));
                class_edges.swap_remove(idx);
                edges.insert(key(a, c));
                edges.insert(key(b, d));
                class_edges.push((a, c));
                class_edges.push((b, d));
                placed = true;
                break;
            }
        }
        if !placed {
            dropped += 2;
        }
    }
    dropped
}

fn weakly_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            components -= 1;
        }
    }
    components == 1
}

fn wire_once<R: Rng + ?Sized>(cfg: &NetgenConfig, rng: &mut R) -> Result<NetworkStructure> {
    let degrees = sample_degrees(cfg, rng);
    let mut internal: Vec<usize> = degrees
        .iter()
        .map(|&k| {
            let x = cfg.mu * k as f64;
            let base = x.floor();
            let extra = rng.random::<f64>() < x - base;
            (base as usize + extra as usize).min(k)
        })
        .collect();
    let sizes = sample_community_sizes(cfg, rng)?;
    let membership = assign_communities(&sizes, &mut internal, rng);

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); sizes.len()];
    for (v, &c) in membership.iter().enumerate() {
        members[c as usize].push(v);
    }
    // Each community needs an even number of internal stubs.
    for group in &members {
        let total: usize = group.iter().map(|&v| internal[v]).sum();
        if total % 2 == 1 {
            let with_stubs: Vec<usize> = group.iter().copied().filter(|&v| internal[v] > 0).collect();
            let v = with_stubs[rng.random_range(0..with_stubs.len())];
            internal[v] -= 1;
        }
    }

    let mut edges = HashSet::new();
    let mut all_edges = Vec::new();
    for group in &members {
        let stubs: Vec<usize> = group
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, internal[v]))
            .collect();
        let mut class = Vec::new();
        wire_stubs(stubs, &|_, _| true, &mut edges, &mut class, rng);
        all_edges.extend(class);
    }
    // Capping and parity fixes can leave a few external stubs even at mu = 1;
    // there they are dropped so communities stay closed.
    let external: Vec<usize> = if cfg.mu >= 1.0 {
        Vec::new()
    } else {
        (0..cfg.n)
            .flat_map(|v| std::iter::repeat_n(v, degrees[v] - internal[v]))
            .collect()
    };
    let mut class = Vec::new();
    wire_stubs(
        external,
        &|a, b| membership[a] != membership[b],
        &mut edges,
        &mut class,
        rng,
    );
    all_edges.extend(class);

    let mut arcs = Vec::with_capacity(2 * all_edges.len());
    for &(a, b) in &all_edges {
        arcs.push((a, b));
        arcs.push((b, a));
    }
    arcs.sort_unstable();
    Ok(NetworkStructure {
        arcs,
        communities: membership,
    })
}

pub fn generate_structure<R: Rng + ?Sized>(cfg: &NetgenConfig, rng: &mut R) -> Result<NetworkStructure> {
    cfg.validate()?;
    let attempts = cfg.connectivity_retries + 1;
    for _ in 0..attempts {
        let s = wire_once(cfg, rng)?;
        let undirected: Vec<(usize, usize)> =
            s.arcs.iter().copied().filter(|&(a, b)| a < b).collect();
        if cfg.mu >= 1.0 || weakly_connected(cfg.n, &undirected) {
            return Ok(s);
        }
    }
    Err(Error::Generation(format!(
        "no weakly connected graph after {attempts} attempts (n={}, mu={})",
        cfg.n, cfg.mu
    )))
}

/// Draws one opinion per community, then lets each node adopt it with
/// probability `eta` or draw its own.
pub fn assign_opinions<R: Rng + ?Sized>(communities: &[u32], eta: f64, rng: &mut R) -> OpinionAssignment {
    let count = communities.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
    let community_opinions: Vec<f64> = (0..count).map(|_| rng.random::<f64>()).collect();
    let opinions = communities
        .iter()
        .map(|&c| {
            if rng.random::<f64>() < eta {
                community_opinions[c as usize]
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    OpinionAssignment {
        opinions,
        community_opinions,
    }
}

pub fn generate_detailed(cfg: &NetgenConfig) -> Result<GeneratedNetwork> {
    let mut structure_rng = rng_stream(cfg.seed, 0, "netgen-structure");
    let mut opinion_rng = rng_stream(cfg.seed, 0, "netgen-opinions");
    let structure = generate_structure(cfg, &mut structure_rng)?;
    let assignment = assign_opinions(&structure.communities, cfg.eta, &mut opinion_rng);
    let mut graph = OpinionGraph::with_attributes(assignment.opinions, structure.communities)?;
    for (u, v) in structure.arcs {
        graph.add_arc(u, v)?;
    }
    Ok(GeneratedNetwork {
        graph,
        community_opinions: assignment.community_opinions,
    })
}

pub fn generate(cfg: &NetgenConfig) -> Result<OpinionGraph> {
    generate_detailed(cfg).map(|g| g.graph)
}

/// Fraction of arcs whose endpoints share a community.
pub fn intra_community_fraction(g: &OpinionGraph) -> f64 {
    if g.arc_count() == 0 {
        return 0.0;
    }
    let intra = g.arcs().filter(|&(u, v)| g.community(u) == g.community(v)).count();
    intra as f64 / g.arc_count() as f64
}

/// Fraction of nodes holding exactly their community's opinion.
pub fn homophily_fraction(g: &OpinionGraph, community_opinions: &[f64]) -> f64 {
    let hits = (0..g.node_count())
        .filter(|&v| g.opinion(v) == community_opinions[g.community(v) as usize])
        .count();
    hits as f64 / g.node_count() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::rng_stream;

    #[test]
    fn power_law_lower_bound_hits_mean() {
        let lo = degree_lower_bound(2.5, 13.75, 40.0);
        assert!((power_law_mean(2.5, lo, 40.0) - 13.75).abs() < 1e-6);
    }

    #[test]
    fn default_size_matches_target() {
        let mut total = 0usize;
        for seed in 0..5 {
            let g = generate(&NetgenConfig::new(400, 0.5, 0.5, seed)).unwrap();
            total += g.arc_count();
        }
        let mean = total as f64 / 5.0;
        assert!((mean - 5500.0).abs() <= 550.0, "mean arc count {mean}");
    }

    #[test]
    fn full_modularity_has_no_inter_arcs() {
        let g = generate(&NetgenConfig::new(400, 1.0, 0.5, 3)).unwrap();
        assert_eq!(intra_community_fraction(&g), 1.0);
    }

    #[test]
    fn zero_modularity_has_no_intra_arcs() {
        let g = generate(&NetgenConfig::new(400, 0.0, 0.5, 3)).unwrap();
        assert!(intra_community_fraction(&g) < 0.01);
    }

    #[test]
    fn intermediate_modularity() {
        let fractions: Vec<f64> = (0..20)
            .map(|s| intra_community_fraction(&generate(&NetgenConfig::new(400, 0.5, 0.5, s)).unwrap()))
            .collect();
        let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
        assert!((0.45..=0.55).contains(&mean), "mean intra fraction {mean}");
    }

    #[test]
    fn generated_graphs_are_symmetric_and_connected() {
        let g = generate(&NetgenConfig::new(400, 0.95, 0.8, 11)).unwrap();
        for (u, v) in g.arcs() {
            assert!(g.has_arc(v, u));
        }
        assert_eq!(g.weak_component_count(), 1);
        assert!(g.opinions().iter().all(|o| (0.0..=1.0).contains(o)));
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = NetgenConfig::new(400, 0.35, 0.6, 42);
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = NetgenConfig { seed: 43, ..cfg };
        assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(
            generate(&NetgenConfig::new(0, 0.5, 0.5, 0)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(generate(&NetgenConfig::new(400, 1.5, 0.5, 0)).is_err());
        let cfg = NetgenConfig {
            n: 15,
            min_community: 10,
            max_community: Some(12),
            max_degree: Some(5),
            avg_degree: 3.0,
            ..NetgenConfig::default()
        };
        assert!(matches!(generate(&cfg), Err(Error::Generation(_))));
    }

    #[test]
    fn full_homophily_shares_community_opinion() {
        let communities: Vec<u32> = (0..300).map(|v| (v % 7) as u32).collect();
        let mut rng = rng_stream(5, 0, "op");
        let a = assign_opinions(&communities, 1.0, &mut rng);
        for (v, &c) in communities.iter().enumerate() {
            assert_eq!(a.opinions[v], a.community_opinions[c as usize]);
        }
    }

    #[test]
    fn partial_homophily_fraction() {
        let communities = vec![0u32; 1000];
        let mut hits = 0usize;
        let draws = 20;
        for s in 0..draws {
            let mut rng = rng_stream(s, 0, "op");
            let a = assign_opinions(&communities, 0.6, &mut rng);
            hits += a.opinions.iter().filter(|&&o| o == a.community_opinions[0]).count();
        }
        let frac = hits as f64 / (1000.0 * draws as f64);
        assert!((0.57..=0.63).contains(&frac), "fraction {frac}");
    }

    /// Between-community share of opinion variance.
    fn correlation_ratio(communities: &[u32], opinions: &[f64]) -> f64 {
        let k = communities.iter().map(|&c| c as usize + 1).max().unwrap();
        let mean = opinions.iter().sum::<f64>() / opinions.len() as f64;
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&c, &o) in communities.iter().zip(opinions) {
            sums[c as usize] += o;
            counts[c as usize] += 1;
        }
        let between: f64 = (0..k)
            .filter(|&c| counts[c] > 0)
            .map(|c| counts[c] as f64 * (sums[c] / counts[c] as f64 - mean).powi(2))
            .sum();
        let total: f64 = opinions.iter().map(|o| (o - mean).powi(2)).sum();
        between / total
    }

    #[test]
    fn zero_homophily_is_independent_of_community() {
        let communities: Vec<u32> = (0..400).map(|v| (v / 40) as u32).collect();
        let mut acc = 0.0;
        for s in 0..100 {
            let mut rng = rng_stream(s, 0, "op");
            let a = assign_opinions(&communities, 0.0, &mut rng);
            acc += correlation_ratio(&communities, &a.opinions);
        }
        // E[ratio] ~ (k-1)/(n-1) ~ 0.023 under independence.
        let mean = acc / 100.0;
        assert!(mean < 0.05, "correlation ratio {mean}");
        let mut rng = rng_stream(1, 0, "op");
        let full = assign_opinions(&communities, 1.0, &mut rng);
        assert!(correlation_ratio(&communities, &full.opinions) > 0.99);
    }

    #[test]
    fn degree_sequence_is_heavy_tailed() {
        // Rank-degree slope on log-log axes should be close to -1/(tau - 1).
        let g = generate(&NetgenConfig::new(400, 0.5, 0.5, 9)).unwrap();
        let s = g.degree_summary();
        let mut deg: Vec<f64> = s.out_degrees.iter().map(|&d| d as f64).collect();
        deg.sort_by(|a, b| b.total_cmp(a));
        let pts: Vec<(f64, f64)> = deg
            .iter()
            .enumerate()
            .map(|(i, &d)| (((i + 1) as f64).ln(), d.ln()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        let expected = -1.0 / (2.5 - 1.0);
        assert!((slope - expected).abs() <= 0.4, "slope {slope}");
    }

    #[test]
    fn corner_cases_are_distinct() {
        for (eta, mu) in [(0.2, 0.05), (0.2, 0.95), (0.8, 0.05), (0.8, 0.95)] {
            let mut intra = 0.0;
            let mut homo = 0.0;
            for s in 0..5 {
                let net = generate_detailed(&NetgenConfig::new(400, mu, eta, s)).unwrap();
                intra += intra_community_fraction(&net.graph) / 5.0;
                homo += homophily_fraction(&net.graph, &net.community_opinions) / 5.0;
            }
            if mu > 0.5 {
                assert!(intra >= 0.9, "intra {intra} at mu {mu}");
            } else {
                assert!(intra <= 0.15, "intra {intra} at mu {mu}");
            }
            if eta > 0.5 {
                assert!(homo >= 0.75, "homophily {homo} at eta {eta}");
            } else {
                assert!(homo <= 0.3, "homophily {homo} at eta {eta}");
            }
        }
    }
}
