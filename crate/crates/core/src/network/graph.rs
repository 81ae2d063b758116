use std::collections::VecDeque;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::{mann_whitney_u, MannWhitney};
use crate::util;

/// Row-major `n × n` matrix indexed `[source][target]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Clone> SquareMatrix<T> {
    pub fn filled(n: usize, value: T) -> Self {
        Self {
            n,
            data: vec![value; n * n],
        }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::domain("matrix rows must all have length n"));
        }
        Ok(Self {
            n,
            data: rows.into_iter().flatten().collect(),
        })
    }
}

impl<T> SquareMatrix<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.n + j] = value;
    }

    /// Off-diagonal `(i, j, value)` triples in row-major order.
    pub fn off_diagonal(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let n = self.n;
        self.data
            .iter()
            .enumerate()
            .filter(move |(k, _)| k / n != k % n)
            .map(move |(k, v)| (k / n, k % n, v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// A directed graph with positive edge weights (TE in bits), no self-loops
/// and at most one edge per ordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedWeightedGraph {
    node_labels: Vec<String>,
    edges: Vec<Edge>,
}

impl DirectedWeightedGraph {
    pub fn new(node_labels: Vec<String>, mut edges: Vec<Edge>) -> Result<Self> {
        let n = node_labels.len();
        for e in &edges {
            if e.source >= n || e.target >= n {
                return Err(Error::domain(format!(
                    "edge {}->{} references a node outside 0..{n}",
                    e.source, e.target
                )));
            }
            if e.source == e.target {
                return Err(Error::domain(format!("self-loop on node {}", e.source)));
            }
            if !(e.weight > 0.0) || !e.weight.is_finite() {
                return Err(Error::domain(format!(
                    "edge {}->{} has non-positive weight {}",
                    e.source, e.target, e.weight
                )));
            }
        }
        edges.sort_by_key(|e| (e.source, e.target));
        if edges
            .windows(2)
            .any(|w| (w[0].source, w[0].target) == (w[1].source, w[1].target))
        {
            return Err(Error::domain("duplicate edge for an ordered pair"));
        }
        Ok(Self { node_labels, edges })
    }

    /// Unweighted graph (all weights 1) from `(source, target)` pairs.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let labels = (0..n).map(|i| format!("n{i}")).collect();
        let edges = pairs
            .iter()
            .map(|&(source, target)| Edge {
                source,
                target,
                weight: 1.0,
            })
            .collect();
        Self::new(labels, edges)
    }

    pub fn n_nodes(&self) -> usize {
        self.node_labels.len()
    }

    pub fn node_labels(&self) -> &[String] {
        &self.node_labels
    }

    /// Edges sorted by `(source, target)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.weight).collect()
    }

    pub fn density(&self) -> f64 {
        let n = self.n_nodes();
        if n < 2 {
            return 0.0;
        }
        self.edges.len() as f64 / (n * (n - 1)) as f64
    }

    fn out_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for e in &self.edges {
            adj[e.source].push(e.target);
        }
        adj
    }

    /// Same graph with node `i` renamed to position `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_nodes();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::domain("relabeling must be a permutation of the nodes"));
        }
        let mut labels = vec![String::new(); n];
        for (i, &p) in perm.iter().enumerate() {
            labels[p] = self.node_labels[i].clone();
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                source: perm[e.source],
                target: perm[e.target],
                weight: e.weight,
            })
            .collect();
        Self::new(labels, edges)
    }
}

/// Edge `(i, j, te[i][j])` for every off-diagonal `mask[i][j]`.
pub fn build_network(
    te: &SquareMatrix<f64>,
    mask: &SquareMatrix<bool>,
    labels: &[String],
) -> Result<DirectedWeightedGraph> {
    if te.n() != mask.n() || te.n() != labels.len() {
        return Err(Error::domain(format!(
            "shape mismatch: te {}x{}, mask {}x{}, {} labels",
            te.n(),
            te.n(),
            mask.n(),
            mask.n(),
            labels.len()
        )));
    }
    let edges = mask
        .off_diagonal()
        .filter(|(_, _, &m)| m)
        .map(|(source, target, _)| Edge {
            source,
            target,
            weight: *te.get(source, target),
        })
        .collect();
    DirectedWeightedGraph::new(labels.to_vec(), edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetworkStats {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub density: f64,
    pub mean_te: f64,
    pub max_te: f64,
    pub median_te: f64,
    /// Mean local clustering of the undirected projection.
    pub mean_clustering: f64,
}

pub fn network_stats(g: &DirectedWeightedGraph) -> NetworkStats {
    let w = g.weights();
    let (mean_te, max_te, median_te) = if w.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        (util::mean(&w), w.iter().copied().fold(0.0, f64::max), util::median(&w))
    };
    NetworkStats {
        n_nodes: g.n_nodes(),
        n_edges: g.edges().len(),
        density: g.density(),
        mean_te,
        max_te,
        median_te,
        mean_clustering: mean_clustering(g),
    }
}

fn mean_clustering(g: &DirectedWeightedGraph) -> f64 {
    let n = g.n_nodes();
    if n == 0 {
        return 0.0;
    }
    let mut adj = vec![vec![false; n]; n];
    for e in g.edges() {
        adj[e.source][e.target] = true;
        adj[e.target][e.source] = true;
    }
    let mut total = 0.0;
    for v in 0..n {
        let nb: Vec<usize> = (0..n).filter(|&u| adj[v][u]).collect();
        let d = nb.len();
        if d < 2 {
            continue;
        }
        let mut links = 0usize;
        for (a, &x) in nb.iter().enumerate() {
            links += nb[a + 1..].iter().filter(|&&y| adj[x][y]).count();
        }
        total += 2.0 * links as f64 / (d * (d - 1)) as f64;
    }
    total / n as f64
}

/// Node centralities as parallel columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralityTable {
    pub labels: Vec<String>,
    /// Out-degree divided by `n − 1`.
    pub out_degree: Vec<f64>,
    pub in_degree: Vec<f64>,
    /// Sum of outgoing edge weights.
    pub weighted_out_degree: Vec<f64>,
    /// Shortest-path betweenness on unit-length edges, divided by `(n − 1)(n − 2)`.
    pub betweenness: Vec<f64>,
    /// Harmonic closeness over outgoing shortest paths, divided by `n − 1`.
    pub closeness: Vec<f64>,
    pub pagerank: Vec<f64>,
}

pub const PAGERANK_DAMPING: f64 = 0.85;
pub const PAGERANK_TOL: f64 = 1e-10;

impl CentralityTable {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "ticker",
            "out_degree",
            "in_degree",
            "weighted_out_degree",
            "betweenness",
            "closeness",
            "pagerank",
        ])?;
        for i in 0..self.len() {
            w.write_record([
                self.labels[i].clone(),
                util::fmt_f64(self.out_degree[i]),
                util::fmt_f64(self.in_degree[i]),
                util::fmt_f64(self.weighted_out_degree[i]),
                util::fmt_f64(self.betweenness[i]),
                util::fmt_f64(self.closeness[i]),
                util::fmt_f64(self.pagerank[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn centralities(g: &DirectedWeightedGraph) -> CentralityTable {
    let n = g.n_nodes();
    let norm = if n > 1 { 1.0 / (n - 1) as f64 } else { 0.0 };
    let mut out_deg = vec![0.0; n];
    let mut in_deg = vec![0.0; n];
    let mut w_out = vec![0.0; n];
    for e in g.edges() {
        out_deg[e.source] += 1.0;
        in_deg[e.target] += 1.0;
        w_out[e.source] += e.weight;
    }
    let adj = g.out_adjacency();
    let (betweenness, closeness) = path_centralities(&adj);
    CentralityTable {
        labels: g.node_labels().to_vec(),
        out_degree: out_deg.iter().map(|d| d * norm).collect(),
        in_degree: in_deg.iter().map(|d| d * norm).collect(),
        weighted_out_degree: w_out,
        betweenness,
        closeness,
        pagerank: pagerank(&adj, PAGERANK_DAMPING, PAGERANK_TOL),
    }
}

/// Brandes betweenness and harmonic closeness from one BFS per source.
fn path_centralities(adj: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
    let n = adj.len();
    let mut between = vec![0.0; n];
    let mut close = vec![0.0; n];
    let mut dist = vec![usize::MAX; n];
    let mut sigma = vec![0.0f64; n];
    let mut delta = vec![0.0; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::with_capacity(n);
    for s in 0..n {
        dist.fill(usize::MAX);
        sigma.fill(0.0);
        delta.fill(0.0);
        preds.iter_mut().for_each(Vec::clear);
        order.clear();
        dist[s] = 0;
        sigma[s] = 1.0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        for &v in order.iter().skip(1) {
            close[s] += 1.0 / dist[v] as f64;
        }
        for &w in order.iter().rev() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                between[w] += delta[w];
            }
        }
    }
    if n > 2 {
        let b = 1.0 / ((n - 1) * (n - 2)) as f64;
        between.iter_mut().for_each(|x| *x *= b);
    } else {
        between.fill(0.0);
    }
    if n > 1 {
        let c = 1.0 / (n - 1) as f64;
        close.iter_mut().for_each(|x| *x *= c);
    }
    (between, close)
}

/// Power-iteration PageRank with uniform teleport; dangling mass is spread
/// uniformly. Iterates until the L1 change is below `tol`.
fn pagerank(adj: &[Vec<usize>], damping: f64, tol: f64) -> Vec<f64> {
    let n = adj.len();
    if n == 0 {
        return Vec::new();
    }
    let nf = n as f64;
    let mut pr = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    for _ in 0..100_000 {
        let dangling: f64 = (0..n).filter(|&v| adj[v].is_empty()).map(|v| pr[v]).sum();
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        next.fill(base);
        for (v, out) in adj.iter().enumerate() {
            if !out.is_empty() {
                let share = damping * pr[v] / out.len() as f64;
                for &w in out {
                    next[w] += share;
                }
            }
        }
        let diff: f64 = pr.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pr, &mut next);
        if diff < tol {
            break;
        }
    }
    let total: f64 = pr.iter().sum();
    pr.iter_mut().for_each(|x| *x /= total);
    pr
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bellwether {
    pub rank: usize,
    pub ticker: String,
    pub out_degree: f64,
    pub weighted_out_degree: f64,
    pub pagerank: f64,
    pub betweenness: f64,
}

/// Top `top_k` nodes by out-degree, then weighted out-degree (both
/// descending), then label.
pub fn bellwether_ranking(table: &CentralityTable, top_k: usize) -> Result<Vec<Bellwether>> {
    if top_k > table.len() {
        return Err(Error::domain(format!(
            "top_k {top_k} exceeds node count {}",
            table.len()
        )));
    }
    let mut idx: Vec<usize> = (0..table.len()).collect();
    idx.sort_by(|&a, &b| {
        table.out_degree[b]
            .total_cmp(&table.out_degree[a])
            .then(table.weighted_out_degree[b].total_cmp(&table.weighted_out_degree[a]))
            .then_with(|| table.labels[a].cmp(&table.labels[b]))
    });
    Ok(idx
        .into_iter()
        .take(top_k)
        .enumerate()
        .map(|(r, i)| Bellwether {
            rank: r + 1,
            ticker: table.labels[i].clone(),
            out_degree: table.out_degree[i],
            weighted_out_degree: table.weighted_out_degree[i],
            pagerank: table.pagerank[i],
            betweenness: table.betweenness[i],
        })
        .collect())
}

/// Mann–Whitney U test between the edge-weight samples of two networks.
pub fn edge_weight_comparison(g1: &DirectedWeightedGraph, g2: &DirectedWeightedGraph) -> Result<MannWhitney> {
    if g1.edges().is_empty() || g2.edges().is_empty() {
        return Err(Error::domain("edge-weight comparison needs edges in both networks"));
    }
    mann_whitney_u(&g1.weights(), &g2.weights())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("S{i:03}")).collect()
    }

    #[test]
    fn empty_and_complete_masks() {
        let te = SquareMatrix::filled(3, 0.5);
        let g = build_network(&te, &SquareMatrix::filled(3, false), &labels(3)).unwrap();
        let s = network_stats(&g);
        assert_eq!((s.n_edges, s.density, s.mean_te, s.mean_clustering), (0, 0.0, 0.0, 0.0));
        let g = build_network(&te, &SquareMatrix::filled(3, true), &labels(3)).unwrap();
        assert_eq!(g.edges().len(), 6);
        assert_eq!(g.density(), 1.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let te = SquareMatrix::filled(3, 0.5);
        assert!(build_network(&te, &SquareMatrix::filled(4, true), &labels(3)).is_err());
        assert!(build_network(&te, &SquareMatrix::filled(3, true), &labels(2)).is_err());
    }

    #[test]
    fn density_of_sparse_networks() {
        let mut mask = SquareMatrix::filled(100, false);
        let te = SquareMatrix::filled(100, 0.03);
        for k in 0..45 {
            mask.set(k, (k + 1) % 100, true);
        }
        let g = build_network(&te, &mask, &labels(100)).unwrap();
        assert!((g.density() - 45.0 / 9900.0).abs() < 1e-15);
        assert_eq!(format!("{:.4}", g.density()), "0.0045");
        for k in 45..50 {
            mask.set(k, (k + 1) % 100, true);
        }
        let g = build_network(&te, &mask, &labels(100)).unwrap();
        assert_eq!(format!("{:.4}", network_stats(&g).density), "0.0051");
    }

    #[test]
    fn triangle_clustering_is_one() {
        let pairs = [(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)];
        let g = DirectedWeightedGraph::from_pairs(3, &pairs).unwrap();
        assert_eq!(network_stats(&g).mean_clustering, 1.0);
        let g = DirectedWeightedGraph::from_pairs(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(network_stats(&g).mean_clustering, 1.0);
    }

    #[test]
    fn out_degree_normalization() {
        let g = DirectedWeightedGraph::from_pairs(100, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let c = centralities(&g);
        assert_eq!(format!("{:.4}", c.out_degree[0]), "0.0303");
        assert_eq!(c.out_degree[0] * 99.0, 3.0);
    }

    #[test]
    fn path_betweenness() {
        let g = DirectedWeightedGraph::from_pairs(3, &[(0, 1), (1, 2)]).unwrap();
        let c = centralities(&g);
        assert_eq!(c.betweenness, vec![0.0, 0.5, 0.0]);
        assert_eq!(c.closeness, vec![0.75, 0.5, 0.0]);
    }

    #[test]
    fn two_cycle_pagerank() {
        let g = DirectedWeightedGraph::from_pairs(2, &[(0, 1), (1, 0)]).unwrap();
        let pr = centralities(&g).pagerank;
        assert!((pr[0] - 0.5).abs() < 1e-12 && (pr[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_graph_pagerank_is_uniform() {
        let g = DirectedWeightedGraph::from_pairs(4, &[]).unwrap();
        let c = centralities(&g);
        assert!(c.pagerank.iter().all(|p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn invalid_edges_are_rejected() {
        assert!(DirectedWeightedGraph::from_pairs(2, &[(0, 0)]).is_err());
        assert!(DirectedWeightedGraph::from_pairs(2, &[(0, 1), (0, 1)]).is_err());
        assert!(DirectedWeightedGraph::from_pairs(2, &[(0, 2)]).is_err());
        let e = Edge {
            source: 0,
            target: 1,
            weight: 0.0,
        };
        assert!(DirectedWeightedGraph::new(labels(2), vec![e]).is_err());
    }

    #[test]
    fn bellwether_tiebreaks() {
        let t = CentralityTable {
            labels: vec!["D".into(), "C".into(), "B".into(), "A".into()],
            out_degree: vec![2.0 / 99.0, 3.0 / 99.0, 3.0 / 99.0, 4.0 / 99.0],
            in_degree: vec![0.0; 4],
            weighted_out_degree: vec![0.1, 0.05, 0.09, 0.2],
            betweenness: vec![0.0; 4],
            closeness: vec![0.0; 4],
            pagerank: vec![0.25; 4],
        };
        let r: Vec<String> = bellwether_ranking(&t, 4).unwrap().into_iter().map(|b| b.ticker).collect();
        assert_eq!(r, ["A", "B", "C", "D"]);
        assert_eq!(bellwether_ranking(&t, 1).unwrap()[0].ticker, "A");
        assert!(bellwether_ranking(&t, 5).is_err());

        let zero = CentralityTable {
            out_degree: vec![0.0; 4],
            weighted_out_degree: vec![0.0; 4],
            ..t
        };
        let r: Vec<String> = bellwether_ranking(&zero, 4).unwrap().into_iter().map(|b| b.ticker).collect();
        assert_eq!(r, ["A", "B", "C", "D"]);
    }

    #[test]
    fn edge_weight_comparisons() {
        let n = 100;
        let mk = |w: &[f64]| {
            let edges = w
                .iter()
                .enumerate()
                .map(|(k, &weight)| Edge {
                    source: k / (n - 1),
                    target: {
                        let t = k % (n - 1);
                        if t >= k / (n - 1) { t + 1 } else { t }
                    },
                    weight,
                })
                .collect();
            DirectedWeightedGraph::new(labels(n), edges).unwrap()
        };
        let a: Vec<f64> = (0..45).map(|i| 0.03 + 1e-4 * i as f64).collect();
        let b: Vec<f64> = (0..79).map(|i| 0.015 + 1e-4 * i as f64).collect();
        let mw = edge_weight_comparison(&mk(&a), &mk(&b)).unwrap();
        assert!(mw.p_value < 0.001);
        let same = edge_weight_comparison(&mk(&a), &mk(&a)).unwrap();
        assert!(same.p_value > 0.99);
        let empty = DirectedWeightedGraph::from_pairs(3, &[]).unwrap();
        assert!(edge_weight_comparison(&empty, &mk(&a)).is_err());
    }

    #[test]
    fn relabel_rejects_non_permutations() {
        let g = DirectedWeightedGraph::from_pairs(3, &[(0, 1)]).unwrap();
        assert!(g.relabel(&[0, 0, 1]).is_err());
        assert_eq!(g.relabel(&[2, 0, 1]).unwrap().edges()[0].source, 2);
    }
}
