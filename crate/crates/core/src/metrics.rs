//! Echo-chamber and polarization metrics.
//!
//! * NCI: Pearson correlation between each node's opinion and the mean
//!   opinion of its neighbourhood.
//! * RWC: `P_XX * P_YY - P_XY * P_YX` estimated with random walks that stop
//!   at high-degree nodes, where `X` / `Y` are the nodes below / above the
//!   opinion threshold.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{nearest_rank, OpinionGraph};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub value: f64,
    /// Set when an input had zero variance (or too few points) and `value`
    /// was forced to 0.
    pub degenerate: bool,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "pearson inputs differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("pearson needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Ok(Correlation {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(Correlation {
        value: (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

/// Which arcs define a node's neighbourhood for NCI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Neighborhood {
    /// Nodes `u` follows.
    #[default]
    Out,
    /// Nodes following `u`.
    In,
    /// Union of both.
    Both,
}

impl FromStr for Neighborhood {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "out" => Ok(Neighborhood::Out),
            "in" => Ok(Neighborhood::In),
            "both" | "undirected" => Ok(Neighborhood::Both),
            other => Err(Error::InvalidArgument(format!("unknown neighborhood `{other}`"))),
        }
    }
}

impl fmt::Display for Neighborhood {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Neighborhood::Out => "out",
            Neighborhood::In => "in",
            Neighborhood::Both => "both",
        })
    }
}

/// Neighbour Correlation Index. Nodes with an empty neighbourhood are left out.
pub fn nci(g: &OpinionGraph, neighborhood: Neighborhood) -> Correlation {
    let mut own = Vec::with_capacity(g.node_count());
    let mut around = Vec::with_capacity(g.node_count());
    for u in 0..g.node_count() {
        let (sum, count) = match neighborhood {
            Neighborhood::Out => sum_opinions(g, g.followees(u).iter().copied()),
            Neighborhood::In => sum_opinions(g, g.followers(u).iter().copied()),
            Neighborhood::Both => sum_opinions(g, merged(g.followees(u), g.followers(u))),
        };
        if count > 0 {
            own.push(g.opinion(u));
            around.push(sum / count as f64);
        }
    }
    if own.len() < 2 {
        return Correlation {
            value: 0.0,
            degenerate: true,
        };
    }
    pearson(&own, &around).expect("lengths match and >= 2")
}

fn sum_opinions(g: &OpinionGraph, nodes: impl Iterator<Item = usize>) -> (f64, usize) {
    nodes.fold((0.0, 0), |(s, c), v| (s + g.opinion(v), c + 1))
}

/// Sorted union of two sorted slices.
fn merged<'a>(a: &'a [usize], b: &'a [usize]) -> impl Iterator<Item = usize> + 'a {
    let (mut i, mut j) = (0, 0);
    std::iter::from_fn(move || {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (_, Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, None) => return None,
        };
        Some(next)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwcConfig {
    pub walks_per_side: usize,
    /// Walks stop at nodes whose total degree is at or above this quantile.
    pub degree_percentile: f64,
    pub max_walk_length: usize,
    pub opinion_threshold: f64,
}

impl Default for RwcConfig {
    fn default() -> Self {
        Self {
            walks_per_side: 10_000,
            degree_percentile: 0.95,
            max_walk_length: 1000,
            opinion_threshold: 0.5,
        }
    }
}

impl RwcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walks_per_side == 0 || self.max_walk_length == 0 {
            return Err(Error::InvalidArgument(
                "walks_per_side and max_walk_length must be positive".into(),
            ));
        }
        if !(self.degree_percentile > 0.0 && self.degree_percentile < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "degree_percentile {} outside (0, 1)",
                self.degree_percentile
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    X,
    Y,
}

/// Random Walk Controversy score.
///
/// A walk starts at a uniform node of one side and follows uniform out-arcs
/// until it steps onto a high-degree node of either side; that node's side is
/// where the walk ended. Walks that dead-end or exceed `max_walk_length` are
/// discarded and restarted. `P_ij` is the share of walks ending in `j` that
/// started in `i`. Nodes exactly at the threshold belong to neither side.
pub fn rwc<R: Rng + ?Sized>(g: &OpinionGraph, cfg: &RwcConfig, rng: &mut R) -> Result<f64> {
    cfg.validate()?;
    let side_of = |v: usize| {
        let o = g.opinion(v);
        if o < cfg.opinion_threshold {
            Some(Side::X)
        } else if o > cfg.opinion_threshold {
            Some(Side::Y)
        } else {
            None
        }
    };
    let xs: Vec<usize> = (0..g.node_count()).filter(|&v| side_of(v) == Some(Side::X)).collect();
    let ys: Vec<usize> = (0..g.node_count()).filter(|&v| side_of(v) == Some(Side::Y)).collect();
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::UndefinedMetric(format!(
            "one opinion side is empty ({} below, {} above the threshold)",
            xs.len(),
            ys.len()
        )));
    }

    // Hubs are the high-degree nodes of each side, as in the reference
    // implementation of the score; a single global cutoff can leave one side
    // without any place for walks to end.
    let degrees = g.degree_summary().total_degrees();
    let mut hub = vec![false; g.node_count()];
    for side in [&xs, &ys] {
        let cutoff = nearest_rank(side.iter().map(|&v| degrees[v]).collect(), cfg.degree_percentile);
        for &v in side.iter() {
            hub[v] = degrees[v] >= cutoff;
        }
    }

    // ended[i][j]: walks started on side i that ended on side j.
    let mut ended = [[0u64; 2]; 2];
    let max_attempts = cfg.walks_per_side.saturating_mul(100);
    for (i, starts) in [&xs, &ys].into_iter().enumerate() {
        let mut completed = 0;
        let mut attempts = 0;
        while completed < cfg.walks_per_side {
            attempts += 1;
            if attempts > max_attempts {
                return Err(Error::UndefinedMetric(format!(
                    "random walks fail to reach high-degree nodes ({completed} of {} completed)",
                    cfg.walks_per_side
                )));
            }
            let mut cur = starts[rng.random_range(0..starts.len())];
            let mut end = None;
            for _ in 0..cfg.max_walk_length {
                let out = g.followees(cur);
                if out.is_empty() {
                    break;
                }
                cur = out[rng.random_range(0..out.len())];
                if hub[cur] {
                    end = Some(cur);
                    break;
                }
            }
            let Some(end) = end else { continue };
            let Some(side) = side_of(end) else { continue };
            ended[i][side as usize] += 1;
            completed += 1;
        }
    }

    let into_x = ended[0][0] + ended[1][0];
    let into_y = ended[0][1] + ended[1][1];
    if into_x == 0 || into_y == 0 {
        return Err(Error::UndefinedMetric(
            "no walk ended on one of the two sides".into(),
        ));
    }
    let p = |from: usize, to: usize, total: u64| ended[from][to] as f64 / total as f64;
    let (pxx, pyx) = (p(0, 0, into_x), p(1, 0, into_x));
    let (pyy, pxy) = (p(1, 1, into_y), p(0, 1, into_y));
    Ok(pxx * pyy - pxy * pyx)
}
