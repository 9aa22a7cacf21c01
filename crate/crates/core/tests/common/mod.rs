#![allow(dead_code)]

use fpp_core::graph::WeightedGraph;
use fpp_core::SimRng;
use rand::{Rng, SeedableRng};

/// A simple path as (vertices, weight, hops). Weights are summed from the
/// first vertex onward.
pub type Path = (Vec<usize>, f64, usize);

/// Every simple path starting at `source` with at least one edge.
pub fn simple_paths_from(g: &WeightedGraph, source: usize) -> Vec<Path> {
    fn go(g: &WeightedGraph, stack: &mut Vec<usize>, w: f64, out: &mut Vec<Path>) {
        let v = *stack.last().unwrap();
        for (u, x) in g.neighbors(v) {
            if stack.contains(&u) {
                continue;
            }
            stack.push(u);
            out.push((stack.clone(), w + x, stack.len() - 1));
            go(g, stack, w + x, out);
            stack.pop();
        }
    }
    let mut out = Vec::new();
    go(g, &mut vec![source], 0.0, &mut out);
    out
}

/// (weight, hops) of every simple `0 -> n-1` path.
pub fn all_endpoint_paths(g: &WeightedGraph) -> Vec<(f64, usize)> {
    let t = g.n() - 1;
    if t == 0 {
        return vec![(0.0, 0)];
    }
    simple_paths_from(g, 0)
        .into_iter()
        .filter(|p| *p.0.last().unwrap() == t)
        .map(|p| (p.1, p.2))
        .collect()
}

/// Checks that `path` is a simple path of `g` and returns its weight.
pub fn path_weight(g: &WeightedGraph, path: &[usize]) -> Option<f64> {
    let mut seen = vec![false; g.n()];
    let mut w = 0.0;
    for (i, &v) in path.iter().enumerate() {
        if v >= g.n() || seen[v] {
            return None;
        }
        seen[v] = true;
        if i > 0 {
            w += g.weight(path[i - 1], v)?;
        }
    }
    Some(w)
}

/// G(n, lambda/n) with weights drawn by `draw`.
pub fn random_graph<F: FnMut(&mut SimRng) -> f64>(n: usize, lambda: f64, seed: u64, mut draw: F) -> WeightedGraph {
    let mut rng = SimRng::seed_from_u64(seed);
    let p = (lambda / n as f64).min(1.0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v, draw(&mut rng)));
            }
        }
    }
    WeightedGraph::from_edges(n, &edges, seed).unwrap()
}

pub fn sort_pairs(v: &mut [(f64, usize)]) {
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
}
