//! Directed follow graph with per-node opinions and community labels.
//!
//! An arc `(u, v)` means "u follows v". Adjacency is kept in both directions
//! as sorted vectors so followee and follower queries are `O(deg)` and
//! iteration order is deterministic.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub type NodeId = usize;

/// Equality compares structure, opinions and communities; the version
/// counter is ignored.
#[derive(Debug, Clone)]
pub struct OpinionGraph {
    out_adj: Vec<Vec<NodeId>>,
    in_adj: Vec<Vec<NodeId>>,
    opinions: Vec<f64>,
    communities: Vec<u32>,
    arc_count: usize,
    /// Bumped on every successful structural mutation.
    version: u64,
}

impl PartialEq for OpinionGraph {
    fn eq(&self, other: &Self) -> bool {
        self.out_adj == other.out_adj
            && self.opinions == other.opinions
            && self.communities == other.communities
    }
}

fn check_opinion(v: NodeId, o: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&o) {
        return Err(Error::Validation(format!(
            "opinion of node {v} is {o}, outside [0, 1]"
        )));
    }
    Ok(())
}

impl OpinionGraph {
    /// Arc-free graph with every opinion at 0.5 and every node in community 0.
    pub fn new(node_count: usize) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidArgument("node_count must be positive".into()));
        }
        Ok(Self {
            out_adj: vec![Vec::new(); node_count],
            in_adj: vec![Vec::new(); node_count],
            opinions: vec![0.5; node_count],
            communities: vec![0; node_count],
            arc_count: 0,
            version: 0,
        })
    }

    pub fn with_attributes(opinions: Vec<f64>, communities: Vec<u32>) -> Result<Self> {
        if opinions.len() != communities.len() {
            return Err(Error::InvalidArgument(format!(
                "{} opinions but {} community labels",
                opinions.len(),
                communities.len()
            )));
        }
        for (v, &o) in opinions.iter().enumerate() {
            check_opinion(v, o)?;
        }
        let mut g = Self::new(opinions.len())?;
        g.opinions = opinions;
        g.communities = communities;
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.opinions.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arc_count
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    fn check_node(&self, u: NodeId) -> Result<()> {
        if u >= self.node_count() {
            return Err(Error::InvalidArgument(format!(
                "node {u} out of range (node_count = {})",
                self.node_count()
            )));
        }
        Ok(())
    }

    /// Adds `u -> v`. Returns `false` if the arc was already present.
    pub fn add_arc(&mut self, u: NodeId, v: NodeId) -> Result<bool> {
        self.check_node(u)?;
        self.check_node(v)?;
        if u == v {
            return Err(Error::InvalidArgument(format!("self-loop on node {u}")));
        }
        let out = &mut self.out_adj[u];
        match out.binary_search(&v) {
            Ok(_) => Ok(false),
            Err(pos) => {
                out.insert(pos, v);
                let inn = &mut self.in_adj[v];
                let pos = inn.binary_search(&u).unwrap_err();
                inn.insert(pos, u);
                self.arc_count += 1;
                self.version += 1;
                Ok(true)
            }
        }
    }

    /// Removes `u -> v`. Returns `false` if the arc was absent.
    pub fn remove_arc(&mut self, u: NodeId, v: NodeId) -> Result<bool> {
        self.check_node(u)?;
        self.check_node(v)?;
        let out = &mut self.out_adj[u];
        match out.binary_search(&v) {
            Err(_) => Ok(false),
            Ok(pos) => {
                out.remove(pos);
                let inn = &mut self.in_adj[v];
                let pos = inn
                    .binary_search(&u)
                    .expect("forward and reverse adjacency out of sync");
                inn.remove(pos);
                self.arc_count -= 1;
                self.version += 1;
                Ok(true)
            }
        }
    }

    pub fn has_arc(&self, u: NodeId, v: NodeId) -> bool {
        u < self.node_count() && self.out_adj[u].binary_search(&v).is_ok()
    }

    pub fn out_neighbors(&self, u: NodeId) -> Result<&[NodeId]> {
        self.check_node(u)?;
        Ok(&self.out_adj[u])
    }

    pub fn in_neighbors(&self, u: NodeId) -> Result<&[NodeId]> {
        self.check_node(u)?;
        Ok(&self.in_adj[u])
    }

    /// Unchecked variant of [`out_neighbors`](Self::out_neighbors) for hot
    /// loops. Panics when `u` is out of range.
    #[inline]
    pub fn followees(&self, u: NodeId) -> &[NodeId] {
        &self.out_adj[u]
    }

    /// Unchecked variant of [`in_neighbors`](Self::in_neighbors).
    #[inline]
    pub fn followers(&self, u: NodeId) -> &[NodeId] {
        &self.in_adj[u]
    }

    #[inline]
    pub fn out_degree(&self, u: NodeId) -> usize {
        self.out_adj[u].len()
    }

    #[inline]
    pub fn in_degree(&self, u: NodeId) -> usize {
        self.in_adj[u].len()
    }

    pub fn opinions(&self) -> &[f64] {
        &self.opinions
    }

    #[inline]
    pub fn opinion(&self, u: NodeId) -> f64 {
        self.opinions[u]
    }

    pub fn set_opinion(&mut self, u: NodeId, value: f64) -> Result<()> {
        self.check_node(u)?;
        check_opinion(u, value)?;
        self.opinions[u] = value;
        Ok(())
    }

    pub fn set_opinions(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.node_count() {
            return Err(Error::InvalidArgument(format!(
                "expected {} opinions, got {}",
                self.node_count(),
                values.len()
            )));
        }
        for (v, &o) in values.iter().enumerate() {
            check_opinion(v, o)?;
        }
        self.opinions = values;
        Ok(())
    }

    pub fn communities(&self) -> &[u32] {
        &self.communities
    }

    #[inline]
    pub fn community(&self, u: NodeId) -> u32 {
        self.communities[u]
    }

    /// All arcs in `(u asc, v asc)` order.
    pub fn arcs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(u, vs)| vs.iter().map(move |&v| (u, v)))
    }

    pub fn degree_summary(&self) -> DegreeSummary {
        DegreeSummary {
            in_degrees: self.in_adj.iter().map(Vec::len).collect(),
            out_degrees: self.out_adj.iter().map(Vec::len).collect(),
        }
    }

    /// Number of weakly connected components.
    pub fn weak_component_count(&self) -> usize {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut stack = Vec::new();
        let mut components = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            components += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(x) = stack.pop() {
                for &y in self.out_adj[x].iter().chain(self.in_adj[x].iter()) {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        components
    }

    /// Serialises to the plain-text graph format.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(32 * (self.node_count() + self.arc_count));
        writeln!(out, "nodes {}", self.node_count()).unwrap();
        for v in 0..self.node_count() {
            writeln!(
                out,
                "node {v} {:.16e} {}",
                self.opinions[v], self.communities[v]
            )
            .unwrap();
        }
        for (u, v) in self.arcs() {
            writeln!(out, "arc {u} {v}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let parse_err = |line: usize, message: String| Error::Parse { line, message };

        let (line, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty file".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("nodes") {
            return Err(parse_err(line, "expected `nodes <N>` header".into()));
        }
        let n: usize = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(line, "bad node count".into()))?;
        if fields.next().is_some() {
            return Err(parse_err(line, "trailing fields in header".into()));
        }
        if n == 0 {
            return Err(Error::Validation("graph must have at least one node".into()));
        }

        let mut opinions = vec![f64::NAN; n];
        let mut communities = vec![0u32; n];
        let mut arcs = Vec::new();
        let mut seen_nodes = 0usize;

        for (line, text) in lines {
            let fields: Vec<&str> = text.split_whitespace().collect();
            match fields.as_slice() {
                ["node", id, opinion, community] => {
                    let id: usize = id
                        .parse()
                        .map_err(|_| parse_err(line, format!("bad node id `{id}`")))?;
                    let opinion: f64 = opinion
                        .parse()
                        .map_err(|_| parse_err(line, format!("bad opinion `{opinion}`")))?;
                    let community: u32 = community
                        .parse()
                        .map_err(|_| parse_err(line, format!("bad community `{community}`")))?;
                    if id >= n {
                        return Err(Error::Validation(format!(
                            "line {line}: node id {id} >= node count {n}"
                        )));
                    }
                    if !opinions[id].is_nan() {
                        return Err(Error::Validation(format!(
                            "line {line}: node {id} declared twice"
                        )));
                    }
                    check_opinion(id, opinion)
                        .map_err(|e| Error::Validation(format!("line {line}: {e}")))?;
                    opinions[id] = opinion;
                    communities[id] = community;
                    seen_nodes += 1;
                }
                ["arc", u, v] => {
                    let u: usize = u
                        .parse()
                        .map_err(|_| parse_err(line, format!("bad arc source `{u}`")))?;
                    let v: usize = v
                        .parse()
                        .map_err(|_| parse_err(line, format!("bad arc target `{v}`")))?;
                    if u >= n || v >= n {
                        return Err(Error::Validation(format!(
                            "line {line}: arc ({u}, {v}) references a node >= {n}"
                        )));
                    }
                    if u == v {
                        return Err(Error::Validation(format!("line {line}: self-loop on {u}")));
                    }
                    arcs.push((line, u, v));
                }
                _ => return Err(parse_err(line, format!("unrecognised record `{text}`"))),
            }
        }
        if seen_nodes != n {
            return Err(Error::Validation(format!(
                "header declares {n} nodes but {seen_nodes} node records found"
            )));
        }
        let mut g = Self::with_attributes(opinions, communities)?;
        for (line, u, v) in arcs {
            if !g.add_arc(u, v)? {
                return Err(Error::Validation(format!(
                    "line {line}: duplicate arc ({u}, {v})"
                )));
            }
        }
        g.version = 0;
        Ok(g)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Degree sequences of a graph snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeSummary {
    pub in_degrees: Vec<usize>,
    pub out_degrees: Vec<usize>,
}

impl DegreeSummary {
    pub fn total_degrees(&self) -> Vec<usize> {
        self.in_degrees
            .iter()
            .zip(&self.out_degrees)
            .map(|(a, b)| a + b)
            .collect()
    }

    /// Nearest-rank quantile of the total degree distribution.
    pub fn percentile(&self, q: f64) -> usize {
        nearest_rank(self.total_degrees(), q)
    }

    pub fn in_percentile(&self, q: f64) -> usize {
        nearest_rank(self.in_degrees.clone(), q)
    }

    pub fn out_percentile(&self, q: f64) -> usize {
        nearest_rank(self.out_degrees.clone(), q)
    }

    pub fn mean_in_degree(&self) -> f64 {
        if self.in_degrees.is_empty() {
            return 0.0;
        }
        self.in_degrees.iter().sum::<usize>() as f64 / self.in_degrees.len() as f64
    }
}

/// Nearest-rank `q`-quantile; 0 for an empty list.
pub(crate) fn nearest_rank(mut values: Vec<usize>, q: f64) -> usize {
    if values.is_empty() {
        return 0;
    }
    values.sort_unstable();
    let q = q.clamp(0.0, 1.0);
    let rank = (q * values.len() as f64).ceil() as usize;
    values[rank.saturating_sub(1).min(values.len() - 1)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> OpinionGraph {
        let mut g = OpinionGraph::with_attributes(vec![0.1, 0.5, 0.9], vec![0, 0, 1]).unwrap();
        g.add_arc(0, 1).unwrap();
        g.add_arc(0, 2).unwrap();
        g.add_arc(2, 0).unwrap();
        g
    }

    #[test]
    fn add_arc_is_idempotent() {
        let mut g = OpinionGraph::new(2).unwrap();
        assert!(g.add_arc(0, 1).unwrap());
        assert!(!g.add_arc(0, 1).unwrap());
        assert_eq!(g.arc_count(), 1);
        assert_eq!(g.arcs().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn rejects_self_loops_and_bad_ids() {
        let mut g = OpinionGraph::new(2).unwrap();
        assert!(matches!(g.add_arc(0, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(g.add_arc(0, 2), Err(Error::InvalidArgument(_))));
        assert!(matches!(g.remove_arc(5, 0), Err(Error::InvalidArgument(_))));
        assert!(g.out_neighbors(7).is_err());
    }

    #[test]
    fn remove_arc() {
        let mut g = OpinionGraph::new(2).unwrap();
        assert!(!g.remove_arc(0, 1).unwrap());
        g.add_arc(0, 1).unwrap();
        assert!(g.remove_arc(0, 1).unwrap());
        assert_eq!(g.arc_count(), 0);
        assert!(!g.has_arc(0, 1));
    }

    #[test]
    fn neighbor_queries() {
        let g = sample();
        assert_eq!(g.out_neighbors(0).unwrap(), &[1, 2]);
        assert_eq!(g.in_neighbors(0).unwrap(), &[2]);
        let lone = OpinionGraph::new(3).unwrap();
        assert!(lone.out_neighbors(1).unwrap().is_empty());
        assert!(lone.in_neighbors(1).unwrap().is_empty());
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let mut g = OpinionGraph::with_attributes(
            vec![0.1 + 0.2, 1.0 / 3.0, 0.0],
            vec![3, 0, 7],
        )
        .unwrap();
        g.add_arc(0, 2).unwrap();
        g.add_arc(1, 0).unwrap();
        let back = OpinionGraph::from_text(&g.to_text()).unwrap();
        assert_eq!(back.opinions(), g.opinions());
        assert_eq!(back.communities(), g.communities());
        assert_eq!(back.arcs().collect::<Vec<_>>(), g.arcs().collect::<Vec<_>>());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        let g = sample();
        g.save(&path).unwrap();
        assert_eq!(OpinionGraph::load(&path).unwrap(), g);
    }

    #[test]
    fn load_rejects_bad_opinion() {
        let text = "nodes 2\nnode 0 1.5 0\nnode 1 0.2 0\n";
        assert!(matches!(
            OpinionGraph::from_text(text),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn load_rejects_out_of_range_arc() {
        let text = "nodes 2\nnode 0 0.5 0\nnode 1 0.2 0\narc 0 2\n";
        assert!(matches!(
            OpinionGraph::from_text(text),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "nodes 2\nnode 0 0.5 0\nbogus line\n";
        match OpinionGraph::from_text(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn percentile_nearest_rank() {
        let s = DegreeSummary {
            in_degrees: vec![0, 1, 2, 3],
            out_degrees: vec![0, 0, 0, 0],
        };
        assert_eq!(s.percentile(0.5), 1);
        assert_eq!(s.percentile(0.95), 3);
        assert_eq!(s.percentile(0.0), 0);
    }

    #[derive(Debug, Clone)]
    enum Op {
        Add(usize, usize),
        Remove(usize, usize),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0..8usize, 0..8usize).prop_map(|(u, v)| Op::Add(u, v)),
            (0..8usize, 0..8usize).prop_map(|(u, v)| Op::Remove(u, v)),
        ]
    }

    proptest! {
        #[test]
        fn adjacency_stays_consistent(ops in prop::collection::vec(op(), 0..200)) {
            let mut g = OpinionGraph::new(8).unwrap();
            for op in ops {
                match op {
                    Op::Add(u, v) if u != v => { g.add_arc(u, v).unwrap(); }
                    Op::Add(..) => {}
                    Op::Remove(u, v) => { g.remove_arc(u, v).unwrap(); }
                }
                let s = g.degree_summary();
                prop_assert_eq!(s.in_degrees.iter().sum::<usize>(), g.arc_count());
                prop_assert_eq!(s.out_degrees.iter().sum::<usize>(), g.arc_count());
            }
            for u in 0..8 {
                for &v in g.followees(u) {
                    prop_assert!(g.followers(v).contains(&u));
                }
                for &v in g.followers(u) {
                    prop_assert!(g.followees(v).contains(&u));
                }
            }
        }

        #[test]
        fn add_then_remove_restores(u in 0..6usize, v in 0..6usize, seed_arcs in prop::collection::vec((0..6usize, 0..6usize), 0..20)) {
            prop_assume!(u != v);
            let mut g = OpinionGraph::new(6).unwrap();
            for (a, b) in seed_arcs {
                if a != b { g.add_arc(a, b).unwrap(); }
            }
            prop_assume!(!g.has_arc(u, v));
            let before: Vec<_> = g.arcs().collect();
            g.add_arc(u, v).unwrap();
            g.remove_arc(u, v).unwrap();
            prop_assert_eq!(g.arcs().collect::<Vec<_>>(), before);
        }
    }
}
