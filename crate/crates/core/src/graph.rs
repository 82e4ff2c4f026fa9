//! Conditional-independence structure of Hüsler–Reiss models.
//!
//! `Yᵢ` and `Yⱼ` are extremally conditionally independent given the rest iff
//! `Θᵢⱼ = 0`. The graph is read off the zero pattern of Θ and cross-checked
//! against the density factorization through [`factorization_residual`].

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hr::{GhrParams, PrecisionMatrix};
use crate::linalg::SymMatrix;
use crate::probe::{cross_difference, PairwiseFamilySpec};

/// Log-coordinates used for the factorization test; the largest gap is 2.
pub const FACTORIZATION_LOG_GRID: [f64; 4] = [0.0, 0.5, 1.0, 2.0];

/// Undirected simple graph on `0..d`; each edge stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtremalGraph {
    d: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl ExtremalGraph {
    pub fn new(d: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidInput(format!("self-loop at vertex {a}")));
            }
            if a >= d || b >= d {
                return Err(Error::InvalidInput(format!("edge ({a}, {b}) out of range")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(ExtremalGraph { d, edges: set })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    /// Edges with 1-based vertex labels.
    pub fn edges_one_based(&self) -> Vec<[usize; 2]> {
        self.edges.iter().map(|&(a, b)| [a + 1, b + 1]).collect()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.d];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }
}

/// Edges `{i, j}` with `|mᵢⱼ| > tol · max|m|`.
pub fn support_graph(m: &SymMatrix, tol: f64) -> ExtremalGraph {
    let d = m.dim();
    let thr = tol * m.max_abs();
    let edges = (0..d)
        .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
        .filter(|&(i, j)| m.get(i, j).abs() > thr)
        .collect();
    ExtremalGraph { d, edges }
}

pub fn extremal_graph(theta: &PrecisionMatrix, tol: f64) -> ExtremalGraph {
    support_graph(theta.matrix(), tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Pi2Flags {
    pub connected: bool,
    /// Every edge lies on a cycle of odd length; false for an edgeless graph.
    pub every_edge_on_odd_cycle: bool,
}

pub fn check_pi2(g: &ExtremalGraph) -> Pi2Flags {
    Pi2Flags { connected: is_connected(g), every_edge_on_odd_cycle: every_edge_on_odd_cycle(g) }
}

pub fn is_connected(g: &ExtremalGraph) -> bool {
    if g.d == 0 {
        return true;
    }
    let adj = g.adjacency();
    let mut seen = vec![false; g.d];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// An edge lies on an odd cycle iff its biconnected block is not bipartite.
fn every_edge_on_odd_cycle(g: &ExtremalGraph) -> bool {
    if g.edges.is_empty() {
        return false;
    }
    biconnected_blocks(g).iter().all(|block| !is_bipartite(block))
}

struct BlockSearch {
    adj: Vec<Vec<usize>>,
    disc: Vec<Option<usize>>,
    low: Vec<usize>,
    time: usize,
    stack: Vec<(usize, usize)>,
    blocks: Vec<Vec<(usize, usize)>>,
}

impl BlockSearch {
    fn visit(&mut self, u: usize, parent: Option<usize>) {
        self.disc[u] = Some(self.time);
        self.low[u] = self.time;
        self.time += 1;
        for idx in 0..self.adj[u].len() {
            let v = self.adj[u][idx];
            match self.disc[v] {
                None => {
                    self.stack.push((u, v));
                    self.visit(v, Some(u));
                    self.low[u] = self.low[u].min(self.low[v]);
                    if self.low[v] >= self.disc[u].expect("visited") {
                        let mut block = Vec::new();
                        while let Some(e) = self.stack.pop() {
                            block.push(e);
                            if e == (u, v) {
                                break;
                            }
                        }
                        self.blocks.push(block);
                    }
                }
                Some(dv) if Some(v) != parent && dv < self.disc[u].expect("visited") => {
                    self.stack.push((u, v));
                    self.low[u] = self.low[u].min(dv);
                }
                _ => {}
            }
        }
    }
}

/// Edge sets of the biconnected components (Tarjan).
fn biconnected_blocks(g: &ExtremalGraph) -> Vec<Vec<(usize, usize)>> {
    let mut search = BlockSearch {
        adj: g.adjacency(),
        disc: vec![None; g.d],
        low: vec![0; g.d],
        time: 0,
        stack: Vec::new(),
        blocks: Vec::new(),
    };
    for u in 0..g.d {
        if search.disc[u].is_none() {
            search.visit(u, None);
        }
    }
    search.blocks
}

fn is_bipartite(edges: &[(usize, usize)]) -> bool {
    let n = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut color: Vec<Option<bool>> = vec![None; n];
    for start in 0..n {
        if color[start].is_some() || adj[start].is_empty() {
            continue;
        }
        color[start] = Some(false);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            let cu = color[u].expect("colored");
            for &v in &adj[u] {
                match color[v] {
                    None => {
                        color[v] = Some(!cu);
                        queue.push_back(v);
                    }
                    Some(cv) if cv == cu => return false,
                    _ => {}
                }
            }
        }
    }
    true
}

/// Largest `|cross_difference|` for the pair `(i, j)` over [`FACTORIZATION_LOG_GRID`],
/// with every other coordinate at `e`.
///
/// For `(μ, Θ)` this equals `2|Θᵢⱼ| · 4`, so it vanishes iff `Θᵢⱼ = 0`.
pub fn factorization_residual(p: &GhrParams, i: usize, j: usize) -> Result<f64> {
    let d = p.dim();
    if i >= d || j >= d || i == j {
        return Err(Error::InvalidInput(format!("invalid index pair ({i}, {j})")));
    }
    let family = PairwiseFamilySpec::log_family(p);
    let base = vec![std::f64::consts::E; d];
    let grid: Vec<f64> = FACTORIZATION_LOG_GRID.iter().map(|x| x.exp()).collect();
    let mut worst = 0.0_f64;
    for (a, &ya1) in grid.iter().enumerate() {
        for &ya2 in &grid[a + 1..] {
            for (b, &yb1) in grid.iter().enumerate() {
                for &yb2 in &grid[b + 1..] {
                    let c = cross_difference(&family, i, j, (ya1, ya2), (yb1, yb2), &base)?;
                    worst = worst.max(c.abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Graph whose edges are the pairs with a non-vanishing factorization residual,
/// thresholded at `tol` relative to the residual an entry of size `max|Θ|` would give.
pub fn factorization_graph(p: &GhrParams, tol: f64) -> Result<ExtremalGraph> {
    let d = p.dim();
    let span = FACTORIZATION_LOG_GRID[FACTORIZATION_LOG_GRID.len() - 1] - FACTORIZATION_LOG_GRID[0];
    let thr = tol * 2.0 * span * span * p.theta().matrix().max_abs();
    let mut edges = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            if factorization_residual(p, i, j)? > thr {
                edges.push((i, j));
            }
        }
    }
    ExtremalGraph::new(d, edges)
}
