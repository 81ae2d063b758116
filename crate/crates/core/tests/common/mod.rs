#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

/// Every labeled digraph on `n` nodes (no self-loops), as edge lists.
pub fn all_digraphs(n: usize) -> Vec<Vec<(usize, usize)>> {
    let slots: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    (0u64..1 << slots.len())
        .map(|mask| {
            slots
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &e)| e)
                .collect()
        })
        .collect()
}

fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut a = vec![vec![false; n]; n];
    for &(i, j) in edges {
        a[i][j] = true;
    }
    a
}

/// All-pairs hop distances by Floyd–Warshall; `None` when unreachable.
pub fn floyd_warshall(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<Option<usize>>> {
    let mut d = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for &(i, j) in edges {
        d[i][j] = Some(1);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

/// Harmonic closeness over outgoing distances, divided by `n − 1`.
pub fn brute_closeness(n: usize, edges: &[(usize, usize)]) -> Vec<f64> {
    let d = floyd_warshall(n, edges);
    (0..n)
        .map(|s| {
            if n < 2 {
                return 0.0;
            }
            let h: f64 = (0..n)
                .filter(|&t| t != s)
                .filter_map(|t| d[s][t].map(|x| 1.0 / x as f64))
                .sum();
            h / (n - 1) as f64
        })
        .collect()
}

/// Betweenness by enumerating every simple path between every ordered pair
/// and keeping the shortest ones.
pub fn brute_betweenness(n: usize, edges: &[(usize, usize)]) -> Vec<f64> {
    let adj = adjacency(n, edges);
    let mut score = vec![0.0; n];
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            let mut paths = Vec::new();
            let mut stack = vec![s];
            let mut used = vec![false; n];
            used[s] = true;
            simple_paths(&adj, t, &mut stack, &mut used, &mut paths);
            let Some(best) = paths.iter().map(Vec::len).min() else { continue };
            let shortest: Vec<&Vec<usize>> = paths.iter().filter(|p| p.len() == best).collect();
            let total = shortest.len() as f64;
            for v in 0..n {
                if v == s || v == t {
                    continue;
                }
                let through = shortest.iter().filter(|p| p.contains(&v)).count() as f64;
                score[v] += through / total;
            }
        }
    }
    if n > 2 {
        let norm = ((n - 1) * (n - 2)) as f64;
        score.iter_mut().for_each(|x| *x /= norm);
    } else {
        score.fill(0.0);
    }
    score
}

fn simple_paths(adj: &[Vec<bool>], t: usize, stack: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
    let v = *stack.last().unwrap();
    if v == t {
        out.push(stack.clone());
        return;
    }
    for w in 0..adj.len() {
        if adj[v][w] && !used[w] {
            used[w] = true;
            stack.push(w);
            simple_paths(adj, t, stack, used, out);
            stack.pop();
            used[w] = false;
        }
    }
}

/// PageRank as the solution of `(I − d·Sᵀ) x = (1 − d)/n · 1`, with `S` the
/// row-stochastic transition matrix whose dangling rows are uniform.
pub fn pagerank_linear(n: usize, edges: &[(usize, usize)], damping: f64) -> Vec<f64> {
    let adj = adjacency(n, edges);
    let mut s = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let out = adj[i].iter().filter(|&&b| b).count();
        for j in 0..n {
            s[(i, j)] = if out == 0 {
                1.0 / n as f64
            } else if adj[i][j] {
                1.0 / out as f64
            } else {
                0.0
            };
        }
    }
    let a = DMatrix::<f64>::identity(n, n) - s.transpose() * damping;
    let b = DVector::<f64>::from_element(n, (1.0 - damping) / n as f64);
    let x = a.lu().solve(&b).expect("nonsingular");
    let total: f64 = x.iter().sum();
    x.iter().map(|v| v / total).collect()
}

/// Plug-in TE `I(x[t+1]; y[t+1−lag] | x[t])` in bits from hash-map counts.
pub fn hashmap_te(source: &[u32], target: &[u32], lag: usize) -> f64 {
    let mut xyz: HashMap<(u32, u32, u32), f64> = HashMap::new();
    let mut xz: HashMap<(u32, u32), f64> = HashMap::new();
    let mut yz: HashMap<(u32, u32), f64> = HashMap::new();
    let mut z: HashMap<u32, f64> = HashMap::new();
    let start = lag.max(1) - 1;
    for t in start..target.len() - 1 {
        let (x1, x0, y) = (target[t + 1], target[t], source[t + 1 - lag]);
        *xyz.entry((x1, x0, y)).or_default() += 1.0;
        *xz.entry((x1, x0)).or_default() += 1.0;
        *yz.entry((y, x0)).or_default() += 1.0;
        *z.entry(x0).or_default() += 1.0;
    }
    xyz.iter()
        .map(|(&(x1, x0, y), &c)| c * (c * z[&x0] / (xz[&(x1, x0)] * yz[&(y, x0)])).log2())
        .sum::<f64>()
        / xyz.values().sum::<f64>()
}

/// Exact two-sided Mann–Whitney p-value by enumerating every split of the
/// pooled midranks into groups of size `n1` and `n2`.
pub fn mw_enumerated_p(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midranks(&pooled);
    let n1 = x.len();
    let n = pooled.len();
    let mean = n1 as f64 * (n as f64 + 1.0) / 2.0;
    let observed: f64 = ranks[..n1].iter().sum();
    let dev = (observed - mean).abs();
    let mut extreme = 0u64;
    let mut total = 0u64;
    let mut pick = Vec::with_capacity(n1);
    combos(&ranks, n1, 0, &mut pick, &mut |s| {
        total += 1;
        if (s - mean).abs() >= dev - 1e-9 {
            extreme += 1;
        }
    });
    extreme as f64 / total as f64
}

fn combos(r: &[f64], k: usize, start: usize, pick: &mut Vec<f64>, f: &mut impl FnMut(f64)) {
    if pick.len() == k {
        f(pick.iter().sum());
        return;
    }
    for i in start..r.len() {
        if r.len() - i < k - pick.len() {
            break;
        }
        pick.push(r[i]);
        combos(r, k, i + 1, pick, f);
        pick.pop();
    }
}

pub fn midranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&v| {
            let below = xs.iter().filter(|&&u| u < v).count() as f64;
            let equal = xs.iter().filter(|&&u| u == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// BH step-up by definition: reject the `k` smallest p-values, where `k` is
/// the largest rank with `p_(k) ≤ k·α/m`.
pub fn bh_definition(p: &[f64], alpha: f64) -> Vec<bool> {
    let m = p.len();
    let mut sorted: Vec<f64> = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = (1..=m).filter(|&k| sorted[k - 1] <= k as f64 * alpha / m as f64).max();
    match k {
        None => vec![false; m],
        Some(k) => {
            let cut = sorted[k - 1];
            p.iter().map(|&v| v <= cut).collect()
        }
    }
}
