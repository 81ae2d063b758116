//! Kraskov–Stögbauer–Grassberger k-nearest-neighbour estimators (max-norm),
//! for mutual information and its conditional (Frenzel–Pompe) variant.
//!
//! Columns are scaled to unit standard deviation before the neighbour search.
//! Results are in nats and are not clamped; small negative values are
//! estimator noise.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

/// What to do with exactly repeated values in a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    /// Add deterministic noise seeded from the column contents.
    Jitter,
    Fail,
    Ignore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KsgConfig {
    pub k_neighbors: usize,
    pub ties: TiePolicy,
    /// Jitter half-width in units of the column's standard deviation.
    pub jitter_amplitude: f64,
}

impl Default for KsgConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            ties: TiePolicy::Jitter,
            jitter_amplitude: 1e-10,
        }
    }
}

fn prepare(col: &[f64], cfg: &KsgConfig) -> Result<Vec<f64>> {
    if let Some(v) = col.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("non-finite value {v} in KSG input")));
    }
    let sd = util::sample_sd(col);
    let scale = if sd.is_finite() && sd > 0.0 { 1.0 / sd } else { 1.0 };
    let mut out: Vec<f64> = col.iter().map(|v| v * scale).collect();
    let mut sorted = out.clone();
    sorted.sort_by(f64::total_cmp);
    let has_ties = sorted.windows(2).any(|w| w[0] == w[1]);
    if has_ties {
        match cfg.ties {
            TiePolicy::Ignore => {}
            TiePolicy::Fail => {
                return Err(Error::Degenerate("tied values in KSG input".into()));
            }
            TiePolicy::Jitter => {
                let mut bytes = Vec::with_capacity(col.len() * 8);
                for v in col {
                    bytes.extend_from_slice(&v.to_bits().to_le_bytes());
                }
                let mut rng = util::rng(util::fnv1a(&bytes));
                for v in &mut out {
                    *v += cfg.jitter_amplitude * (2.0 * rng.random::<f64>() - 1.0);
                }
            }
        }
    }
    Ok(out)
}

struct Dist(f64);
impl PartialEq for Dist {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Dist {}
impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Points in a product space, sorted along the first coordinate.
struct Space<'a> {
    cols: Vec<&'a [f64]>,
    order: Vec<usize>,
    pos: Vec<usize>,
    sorted0: Vec<f64>,
}

impl<'a> Space<'a> {
    fn new(cols: Vec<&'a [f64]>) -> Self {
        let n = cols[0].len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| cols[0][a].total_cmp(&cols[0][b]).then(a.cmp(&b)));
        let mut pos = vec![0; n];
        for (p, &i) in order.iter().enumerate() {
            pos[i] = p;
        }
        let sorted0 = order.iter().map(|&i| cols[0][i]).collect();
        Self {
            cols,
            order,
            pos,
            sorted0,
        }
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        self.cols
            .iter()
            .map(|c| (c[i] - c[j]).abs())
            .fold(0.0, f64::max)
    }

    /// Max-norm distance from point `i` to its k-th nearest other point.
    fn kth_distance(&self, i: usize, k: usize) -> f64 {
        let n = self.order.len();
        let p = self.pos[i];
        let x = self.sorted0[p];
        let mut heap: BinaryHeap<Dist> = BinaryHeap::with_capacity(k + 1);
        let (mut lo, mut hi) = (p, p + 1);
        let mut down = p > 0;
        let mut up = hi < n;
        while down || up {
            let gap_lo = if down { x - self.sorted0[lo - 1] } else { f64::INFINITY };
            let gap_hi = if up { self.sorted0[hi] - x } else { f64::INFINITY };
            let (gap, j) = if gap_lo <= gap_hi {
                lo -= 1;
                down = lo > 0;
                (gap_lo, self.order[lo])
            } else {
                let j = self.order[hi];
                hi += 1;
                up = hi < n;
                (gap_hi, j)
            };
            if heap.len() == k && gap > heap.peek().unwrap().0 {
                break;
            }
            let d = self.dist(i, j);
            if heap.len() < k {
                heap.push(Dist(d));
            } else if d < heap.peek().unwrap().0 {
                heap.pop();
                heap.push(Dist(d));
            }
        }
        heap.peek().map(|d| d.0).unwrap_or(f64::INFINITY)
    }

    /// Number of points `j != i` with max-norm distance strictly below `eps`.
    fn count_within(&self, i: usize, eps: f64) -> usize {
        let x = self.cols[0][i];
        let start = self.sorted0.partition_point(|&v| v < x - eps);
        let end = self.sorted0.partition_point(|&v| v <= x + eps);
        let mut count = 0;
        for &j in &self.order[start..end] {
            if j != i && self.dist(i, j) < eps {
                count += 1;
            }
        }
        count
    }
}

fn digamma_table(n: usize) -> Vec<f64> {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let mut t = vec![f64::NAN; n + 2];
    t[1] = -EULER_GAMMA;
    for m in 1..=n {
        t[m + 1] = t[m] + 1.0 / m as f64;
    }
    t
}

fn check_lengths(cols: &[&[f64]], cfg: &KsgConfig) -> Result<usize> {
    let n = cols[0].len();
    if cols.iter().any(|c| c.len() != n) {
        return Err(Error::domain("KSG inputs must have equal lengths"));
    }
    if cfg.k_neighbors < 1 {
        return Err(Error::domain("k_neighbors must be at least 1"));
    }
    if n <= cfg.k_neighbors {
        return Err(Error::SampleSize {
            required: cfg.k_neighbors + 1,
            actual: n,
        });
    }
    Ok(n)
}

/// KSG (algorithm 1) mutual information `I(x; y)` in nats.
pub fn ksg_mi(x: &[f64], y: &[f64], cfg: &KsgConfig) -> Result<f64> {
    let n = check_lengths(&[x, y], cfg)?;
    let xs = prepare(x, cfg)?;
    let ys = prepare(y, cfg)?;
    let joint = Space::new(vec![&xs, &ys]);
    let sx = Space::new(vec![&xs]);
    let sy = Space::new(vec![&ys]);
    let psi = digamma_table(n);
    let k = cfg.k_neighbors;
    let mut acc = 0.0;
    for i in 0..n {
        let eps = joint.kth_distance(i, k);
        acc += psi[sx.count_within(i, eps) + 1] + psi[sy.count_within(i, eps) + 1];
    }
    Ok(psi[k] + psi[n] - acc / n as f64)
}

/// Conditional mutual information `I(x; y | z)` in nats, where `z` may have
/// several columns.
pub fn ksg_cmi(x: &[f64], y: &[f64], z: &[&[f64]], cfg: &KsgConfig) -> Result<f64> {
    if z.is_empty() {
        return ksg_mi(x, y, cfg);
    }
    let mut all: Vec<&[f64]> = vec![x, y];
    all.extend_from_slice(z);
    let n = check_lengths(&all, cfg)?;
    let xs = prepare(x, cfg)?;
    let ys = prepare(y, cfg)?;
    let zs: Vec<Vec<f64>> = z.iter().map(|c| prepare(c, cfg)).collect::<Result<_>>()?;
    let zr: Vec<&[f64]> = zs.iter().map(Vec::as_slice).collect();

    let joint = Space::new([&[xs.as_slice(), ys.as_slice()][..], &zr].concat());
    let sxz = Space::new([&[xs.as_slice()][..], &zr].concat());
    let syz = Space::new([&[ys.as_slice()][..], &zr].concat());
    let sz = Space::new(zr.clone());
    let psi = digamma_table(n);
    let k = cfg.k_neighbors;
    let mut acc = 0.0;
    for i in 0..n {
        let eps = joint.kth_distance(i, k);
        acc += psi[sxz.count_within(i, eps) + 1] + psi[syz.count_within(i, eps) + 1]
            - psi[sz.count_within(i, eps) + 1];
    }
    Ok(psi[k] - acc / n as f64)
}
