//! Weighted Erdős–Rényi graphs and the two-stage neighborhood exploration.
//!
//! Vertices are 0-based: the two distinguished endpoints are `0` and `n - 1`.

use std::cell::RefCell;
use std::collections::VecDeque;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};

use crate::constants::ModelConstants;
use crate::distributions::WeightLaw;
use crate::error::{FppError, Result};
use crate::SimRng;

/// Undirected simple graph with real edge weights, stored as sorted adjacency
/// arrays (CSR).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    seed: u64,
    offsets: Vec<usize>,
    nbrs: Vec<u32>,
    weights: Vec<f64>,
}

impl WeightedGraph {
    /// Builds a graph from an undirected edge list. Rejects self-loops,
    /// parallel edges and out-of-range endpoints.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)], seed: u64) -> Result<Self> {
        if n > u32::MAX as usize {
            return Err(FppError::Size(format!("{n} vertices exceed u32 labels")));
        }
        let mut degree = vec![0usize; n];
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(FppError::InvalidParameter(format!(
                    "edge ({u}, {v}) out of range for n = {n}"
                )));
            }
            if u == v {
                return Err(FppError::InvalidParameter(format!("self-loop at {u}")));
            }
            if !w.is_finite() {
                return Err(FppError::InvalidParameter(format!(
                    "non-finite weight on ({u}, {v})"
                )));
            }
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut nbrs = vec![0u32; offsets[n]];
        let mut weights = vec![0.0; offsets[n]];
        for &(u, v, w) in edges {
            nbrs[fill[u]] = v as u32;
            weights[fill[u]] = w;
            fill[u] += 1;
            nbrs[fill[v]] = u as u32;
            weights[fill[v]] = w;
            fill[v] += 1;
        }
        for v in 0..n {
            let (lo, hi) = (offsets[v], offsets[v + 1]);
            let mut pairs: Vec<(u32, f64)> = nbrs[lo..hi]
                .iter()
                .copied()
                .zip(weights[lo..hi].iter().copied())
                .collect();
            pairs.sort_by_key(|p| p.0);
            if pairs.windows(2).any(|p| p[0].0 == p[1].0) {
                return Err(FppError::InvalidParameter(format!(
                    "parallel edge at vertex {v}"
                )));
            }
            for (i, (u, w)) in pairs.into_iter().enumerate() {
                nbrs[lo + i] = u;
                weights[lo + i] = w;
            }
        }
        Ok(WeightedGraph {
            n,
            seed,
            offsets,
            nbrs,
            weights,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn edge_count(&self) -> usize {
        self.nbrs.len() / 2
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Neighbors of `v` in ascending label order with the edge weights.
    pub fn adjacency(&self, v: usize) -> (&[u32], &[f64]) {
        let (lo, hi) = (self.offsets[v], self.offsets[v + 1]);
        (&self.nbrs[lo..hi], &self.weights[lo..hi])
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (nb, w) = self.adjacency(v);
        nb.iter().map(|&u| u as usize).zip(w.iter().copied())
    }

    /// Weight of edge `{u, v}`, if present.
    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        let (nb, w) = self.adjacency(u);
        nb.binary_search(&(v as u32)).ok().map(|i| w[i])
    }

    /// Edges `(u, v, w)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .filter(move |&(v, _)| v > u)
                .map(move |(v, w)| (u, v, w))
        })
    }

    /// Directed-edge slot range of `v` in the CSR arrays.
    pub(crate) fn slots(&self, v: usize) -> std::ops::Range<usize> {
        self.offsets[v]..self.offsets[v + 1]
    }

    pub(crate) fn slot_target(&self, e: usize) -> usize {
        self.nbrs[e] as usize
    }

    pub(crate) fn slot_weight(&self, e: usize) -> f64 {
        self.weights[e]
    }

    pub(crate) fn slot_count(&self) -> usize {
        self.nbrs.len()
    }

    /// Slot of the reverse direction of slot `e`, whose source is `u`.
    pub(crate) fn reverse_slot(&self, u: usize, e: usize) -> usize {
        let v = self.slot_target(e);
        let (nb, _) = self.adjacency(v);
        self.offsets[v] + nb.binary_search(&(u as u32)).expect("undirected storage")
    }

    /// Text dump: header `n m seed`, then one `u v w` line per edge with
    /// weights printed to 17 significant digits.
    pub fn write_dump<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{} {} {}", self.n, self.edge_count(), self.seed)?;
        for (u, v, w) in self.edges() {
            writeln!(out, "{u} {v} {w:.16e}")?;
        }
        Ok(())
    }

    pub fn read_dump<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| FppError::Parse("empty graph dump".into()))?
            .map_err(|e| FppError::Parse(e.to_string()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        let field = |s: &str, what: &str| {
            s.parse::<u64>()
                .map_err(|e| FppError::Parse(format!("{what}: {e}")))
        };
        if head.len() != 3 {
            return Err(FppError::Parse(format!("bad header {header:?}")));
        }
        let n = field(head[0], "n")? as usize;
        let m = field(head[1], "m")? as usize;
        let seed = field(head[2], "seed")?;
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            let line = line.map_err(|e| FppError::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(FppError::Parse(format!("bad edge line {line:?}")));
            }
            let w = parts[2]
                .parse::<f64>()
                .map_err(|e| FppError::Parse(format!("weight {:?}: {e}", parts[2])))?;
            edges.push((
                field(parts[0], "u")? as usize,
                field(parts[1], "v")? as usize,
                w,
            ));
        }
        if edges.len() != m {
            return Err(FppError::Parse(format!(
                "header announces {m} edges, found {}",
                edges.len()
            )));
        }
        Self::from_edges(n, &edges, seed)
    }
}

/// Samples `G(n, lambda / n)` with i.i.d. weights from `law`.
///
/// Pairs `(v, w)`, `w < v`, are visited in lexicographic order with geometric
/// skips between present edges, so the cost is `O(n + m)`. Weights are drawn
/// in edge generation order from the same stream.
pub fn generate<L: WeightLaw + ?Sized>(
    n: usize,
    lambda: f64,
    law: &L,
    seed: u64,
) -> Result<WeightedGraph> {
    if n < 2 {
        return Err(FppError::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    if !(lambda > 0.0 && lambda < n as f64) {
        return Err(FppError::InvalidParameter(format!(
            "need 0 < lambda < n, got lambda = {lambda}, n = {n}"
        )));
    }
    let p = lambda / n as f64;
    let log_q = (-p).ln_1p();
    let mut rng = SimRng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity((lambda * n as f64 * 0.55) as usize + 16);
    let (mut v, mut w): (usize, i64) = (1, -1);
    while v < n {
        let r: f64 = rng.random();
        let skip = ((1.0 - r).ln() / log_q).floor();
        w += 1 + if skip.is_finite() { skip.min(1e18) as i64 } else { 0 };
        while w >= v as i64 && v < n {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            edges.push((w as usize, v, 0.0));
        }
    }
    for e in edges.iter_mut() {
        e.2 = law.sample(&mut rng);
    }
    WeightedGraph::from_edges(n, &edges, seed)
}

/// `max(2, ceil((ln n)^0.4))`.
pub fn default_radius(n: usize) -> usize {
    let r = (n.max(2) as f64).ln().powf(0.4).ceil();
    (r as usize).max(2)
}

/// Read access to adjacency arrays; lets tests observe which vertices an
/// exploration touches.
pub trait AdjacencyAccess {
    fn vertex_count(&self) -> usize;
    fn adjacency(&self, v: usize) -> (&[u32], &[f64]);
}

impl AdjacencyAccess for WeightedGraph {
    fn vertex_count(&self) -> usize {
        self.n
    }

    fn adjacency(&self, v: usize) -> (&[u32], &[f64]) {
        WeightedGraph::adjacency(self, v)
    }
}

/// Wraps a graph and logs every vertex whose adjacency is read.
pub struct RecordingAccess<'a> {
    graph: &'a WeightedGraph,
    reads: RefCell<Vec<usize>>,
}

impl<'a> RecordingAccess<'a> {
    pub fn new(graph: &'a WeightedGraph) -> Self {
        RecordingAccess {
            graph,
            reads: RefCell::new(Vec::new()),
        }
    }

    pub fn reads(&self) -> Vec<usize> {
        self.reads.borrow().clone()
    }
}

impl AdjacencyAccess for RecordingAccess<'_> {
    fn vertex_count(&self) -> usize {
        self.graph.n()
    }

    fn adjacency(&self, v: usize) -> (&[u32], &[f64]) {
        self.reads.borrow_mut().push(v);
        self.graph.adjacency(v)
    }
}

/// A node of a rooted ordered exploration tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeNode {
    pub vertex: usize,
    /// Index of the parent in the node list; `None` for the root.
    pub parent: Option<usize>,
    pub depth: usize,
    pub edge_weight: f64,
    /// Total weight of the tree path from the root.
    pub path_weight: f64,
}

/// Radius-`r` neighborhoods of `0` and `n - 1` from the two-stage search.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodForest {
    pub radius: usize,
    /// Nodes in discovery order; children of a node are in ascending label order.
    pub tree_from_1: Vec<TreeNode>,
    pub tree_from_n: Vec<TreeNode>,
    /// `(vertex, X([1, u]))` for the depth-`radius` nodes of the first tree.
    pub boundary_1: Vec<(usize, f64)>,
    /// `(vertex, X([v, n]))` for the depth-`radius` nodes of the second tree.
    pub boundary_n: Vec<(usize, f64)>,
    pub g1_holds: bool,
    pub w_r: f64,
    pub wt_r: f64,
    /// Sizes of the unrestricted radius balls around the two endpoints.
    pub ball_sizes: (usize, usize),
}

/// Level-synchronous search from `root` up to depth `radius`, skipping
/// `blocked` vertices. Each level is scanned in increasing label order and
/// every scanned vertex claims its unreached neighbors as children.
fn staged_bfs<A: AdjacencyAccess + ?Sized>(
    g: &A,
    root: usize,
    radius: usize,
    reached: &mut [bool],
) -> Vec<TreeNode> {
    let mut nodes = vec![TreeNode {
        vertex: root,
        parent: None,
        depth: 0,
        edge_weight: 0.0,
        path_weight: 0.0,
    }];
    reached[root] = true;
    let mut level: Vec<usize> = vec![0];
    for depth in 1..=radius {
        level.sort_by_key(|&i| nodes[i].vertex);
        let mut next = Vec::new();
        for &i in &level {
            let TreeNode {
                vertex, path_weight, ..
            } = nodes[i];
            let (nb, ws) = g.adjacency(vertex);
            for (&u, &w) in nb.iter().zip(ws) {
                let u = u as usize;
                if !reached[u] {
                    reached[u] = true;
                    next.push(nodes.len());
                    nodes.push(TreeNode {
                        vertex: u,
                        parent: Some(i),
                        depth,
                        edge_weight: w,
                        path_weight: path_weight + w,
                    });
                }
            }
        }
        if next.is_empty() {
            break;
        }
        level = next;
    }
    nodes
}

/// Vertex set within graph distance `radius` of `root`, via plain BFS.
fn ball<A: AdjacencyAccess + ?Sized>(g: &A, root: usize, radius: usize) -> Vec<usize> {
    let mut dist = std::collections::HashMap::new();
    dist.insert(root, 0usize);
    let mut queue = VecDeque::from([root]);
    let mut out = vec![root];
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d == radius {
            continue;
        }
        let (nb, _) = g.adjacency(v);
        for &u in nb {
            let u = u as usize;
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(u) {
                e.insert(d + 1);
                out.push(u);
                queue.push_back(u);
            }
        }
    }
    out
}

/// Two-stage exploration around `0` and `n - 1` with the tree-likeness check.
pub fn explore(g: &WeightedGraph, radius: usize, consts: &ModelConstants) -> Result<NeighborhoodForest> {
    explore_with(g, radius, consts)
}

/// [`explore`] over any adjacency source. Reads adjacency only of vertices
/// within distance `radius` of the endpoints.
pub fn explore_with<A: AdjacencyAccess + ?Sized>(
    g: &A,
    radius: usize,
    consts: &ModelConstants,
) -> Result<NeighborhoodForest> {
    if radius == 0 {
        return Err(FppError::InvalidParameter("radius must be at least 1".into()));
    }
    let n = g.vertex_count();
    if n < 2 {
        return Err(FppError::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    let (s, t) = (0, n - 1);
    let mut reached = vec![false; n];
    let tree_from_1 = staged_bfs(g, s, radius, &mut reached);
    let tree_from_n = if reached[t] {
        Vec::new()
    } else {
        staged_bfs(g, t, radius, &mut reached)
    };

    // Tree-likeness is judged on the unrestricted balls: disjoint, each
    // connected, and with exactly |B1| + |B2| - 2 induced edges.
    let b1 = ball(g, s, radius);
    let b2 = ball(g, t, radius);
    let mut in_union = vec![0u8; n];
    for &v in &b1 {
        in_union[v] |= 1;
    }
    for &v in &b2 {
        in_union[v] |= 2;
    }
    let disjoint = !in_union.contains(&3);
    let mut induced = 0usize;
    if disjoint {
        for &v in b1.iter().chain(&b2) {
            let (nb, _) = g.adjacency(v);
            induced += nb.iter().filter(|&&u| in_union[u as usize] != 0).count();
        }
        induced /= 2;
    }
    let size_cap = (2.0 * consts.lambda).powi(radius as i32);
    let g1_holds = disjoint
        && induced + 2 == b1.len() + b2.len()
        && b1.len() as f64 <= size_cap
        && b2.len() as f64 <= size_cap;

    let boundary = |tree: &[TreeNode]| -> Vec<(usize, f64)> {
        tree.iter()
            .filter(|nd| nd.depth == radius)
            .map(|nd| (nd.vertex, nd.path_weight))
            .collect()
    };
    let boundary_1 = boundary(&tree_from_1);
    let boundary_n = boundary(&tree_from_n);
    let martingale = |b: &[(usize, f64)]| -> f64 {
        if g1_holds {
            b.iter().fold(0.0, |acc, &(_, x)| acc + (-consts.alpha * x).exp())
        } else {
            0.0
        }
    };
    Ok(NeighborhoodForest {
        radius,
        w_r: martingale(&boundary_1),
        wt_r: martingale(&boundary_n),
        tree_from_1,
        tree_from_n,
        boundary_1,
        boundary_n,
        g1_holds,
        ball_sizes: (b1.len(), b2.len()),
    })
}
