//! Ground-truth generators and exact oracles.
//!
//! Every generator is a pure function of its spec; randomness comes from
//! [`util::rng`] so outputs are bit-identical across runs and platforms.

use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{FlowPanel, FlowRecord, InvestorType, SignalField, SymbolSeries};
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledChainSpec {
    pub n_symbols: u32,
    /// Probability that `target[t + lag]` copies `source[t]`.
    pub coupling: f64,
    pub lag: usize,
    pub length: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledChain {
    pub source: SymbolSeries,
    pub target: SymbolSeries,
    /// TE(source → target) in bits at the generating lag.
    pub exact_te: f64,
}

/// `log2 n + q log2 q + (n−1) r log2 r` with `q = c + (1−c)/n`, `r = (1−c)/n`.
pub fn coupled_chain_te(n_symbols: u32, coupling: f64) -> f64 {
    let n = n_symbols as f64;
    let q = coupling + (1.0 - coupling) / n;
    let r = (1.0 - coupling) / n;
    let xlx = |p: f64| if p > 0.0 { p * p.log2() } else { 0.0 };
    (n.log2() + xlx(q) + (n - 1.0) * xlx(r)).max(0.0)
}

/// i.i.d. uniform source; the target copies the source `lag` steps later with
/// probability `coupling`, and is uniform otherwise.
pub fn gen_coupled_chain(spec: &CoupledChainSpec) -> Result<CoupledChain> {
    if !(0.0..=1.0).contains(&spec.coupling) {
        return Err(Error::domain("coupling must lie in [0, 1]"));
    }
    if spec.n_symbols < 2 || spec.lag < 1 {
        return Err(Error::domain("need n_symbols >= 2 and lag >= 1"));
    }
    let mut rng = util::rng(spec.seed);
    let k = spec.n_symbols;
    let source: Vec<u32> = (0..spec.length).map(|_| rng.random_range(0..k)).collect();
    let target: Vec<u32> = (0..spec.length)
        .map(|t| {
            let copy = rng.random::<f64>() < spec.coupling;
            let fresh = rng.random_range(0..k);
            if t >= spec.lag && copy { source[t - spec.lag] } else { fresh }
        })
        .collect();
    Ok(CoupledChain {
        source: SymbolSeries::new(source, k)?.with_id("source"),
        target: SymbolSeries::new(target, k)?.with_id("target"),
        exact_te: coupled_chain_te(k, spec.coupling),
    })
}

/// Standard bivariate normal pair with correlation `rho`, and its MI
/// `−½ ln(1 − ρ²)` in nats.
pub fn gen_gaussian_pair(rho: f64, n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    if !(rho.abs() < 1.0) {
        return Err(Error::domain("|rho| must be below 1"));
    }
    let mut rng = util::rng(seed);
    let s = (1.0 - rho * rho).sqrt();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        x.push(a);
        y.push(rho * a + s * b);
    }
    Ok((x, y, -0.5 * (1.0 - rho * rho).ln()))
}

/// Markov transition law of a joint chain `(x, y)` over `n` symbols each:
/// `P[(x, y) → (x', y')]` stored at `((x·n + y)·n + x')·n + y'`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTransition {
    pub n_symbols: usize,
    pub probs: Vec<f64>,
}

impl JointTransition {
    pub fn new(n_symbols: usize, probs: Vec<f64>) -> Result<Self> {
        let s = n_symbols * n_symbols;
        if probs.len() != s * s {
            return Err(Error::domain(format!("expected {} entries, got {}", s * s, probs.len())));
        }
        for row in probs.chunks(s) {
            if row.iter().any(|&p| !(p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::domain("transition rows must be non-negative and sum to 1"));
            }
        }
        Ok(Self { n_symbols, probs })
    }

    /// Build from a function `p(x, y, x', y')`.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let mut probs = Vec::with_capacity(n.pow(4));
        for x in 0..n {
            for y in 0..n {
                for x1 in 0..n {
                    for y1 in 0..n {
                        probs.push(f(x, y, x1, y1));
                    }
                }
            }
        }
        Self::new(n, probs)
    }

    /// Random law with Dirichlet(1)-like rows.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = util::rng(seed);
        let s = n * n;
        let mut probs = Vec::with_capacity(s * s);
        for _ in 0..s {
            let row: Vec<f64> = (0..s).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let total: f64 = row.iter().sum();
            probs.extend(row.iter().map(|v| v / total));
        }
        Self { n_symbols: n, probs }
    }

    fn p(&self, from: usize, to: usize) -> f64 {
        let s = self.n_symbols * self.n_symbols;
        self.probs[from * s + to]
    }

    /// Stationary distribution over joint states `x·n + y`.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        let s = self.n_symbols * self.n_symbols;
        let mut a = DMatrix::from_fn(s, s, |i, j| self.p(j, i) - if i == j { 1.0 } else { 0.0 });
        for j in 0..s {
            a[(s - 1, j)] = 1.0;
        }
        let mut b = DVector::zeros(s);
        b[s - 1] = 1.0;
        let pi = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Degenerate("transition law has no unique stationary law".into()))?;
        Ok(pi.iter().map(|v| v.max(0.0)).collect())
    }

    /// Simulate `len` steps from the state `(0, 0)` after a burn-in.
    pub fn simulate(&self, len: usize, seed: u64) -> Result<(SymbolSeries, SymbolSeries)> {
        let n = self.n_symbols;
        let s = n * n;
        let mut rng = util::rng(seed);
        let mut state = 0usize;
        let mut xs = Vec::with_capacity(len);
        let mut ys = Vec::with_capacity(len);
        for step in 0..len + 1000 {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut next = s - 1;
            for to in 0..s {
                acc += self.p(state, to);
                if u < acc {
                    next = to;
                    break;
                }
            }
            state = next;
            if step >= 1000 {
                xs.push((state / n) as u32);
                ys.push((state % n) as u32);
            }
        }
        Ok((SymbolSeries::new(xs, n as u32)?, SymbolSeries::new(ys, n as u32)?))
    }
}

/// TE(y → x) in bits with `k = l = 1`, lag 1, by exhaustive summation under
/// the stationary law.
pub fn oracle_te_exact(law: &JointTransition) -> Result<f64> {
    let n = law.n_symbols;
    let pi = law.stationary()?;
    // p(x' | x, y) and p(x' | x)
    let mut p_x1_xy = vec![0.0; n * n * n];
    for x in 0..n {
        for y in 0..n {
            for x1 in 0..n {
                p_x1_xy[(x * n + y) * n + x1] = (0..n).map(|y1| law.p(x * n + y, x1 * n + y1)).sum();
            }
        }
    }
    let mut te = 0.0;
    for x in 0..n {
        let px: f64 = (0..n).map(|y| pi[x * n + y]).sum();
        if px <= 0.0 {
            continue;
        }
        for x1 in 0..n {
            let p_x1_x: f64 = (0..n).map(|y| pi[x * n + y] * p_x1_xy[(x * n + y) * n + x1]).sum::<f64>() / px;
            for y in 0..n {
                let pc = p_x1_xy[(x * n + y) * n + x1];
                let w = pi[x * n + y] * pc;
                if w > 0.0 {
                    te += w * (pc / p_x1_x).log2();
                }
            }
        }
    }
    Ok(te.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEdge {
    pub source: usize,
    pub target: usize,
    /// Probability that the target copies the source's previous value.
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedPanelSpec {
    pub n_stocks: usize,
    pub n_periods: usize,
    pub intercept: f64,
    pub true_b1: f64,
    pub true_b2: f64,
    pub true_b3: f64,
    pub noise_sd: f64,
    /// Standard deviation of the signal columns.
    pub signal_sd: f64,
    pub planted_edges: Vec<PlantedEdge>,
    /// Investor whose matched signal drives returns.
    pub return_investor: InvestorType,
    pub start_date: NaiveDate,
    pub seed: u64,
}

impl Default for PlantedPanelSpec {
    fn default() -> Self {
        Self {
            n_stocks: 20,
            n_periods: 600,
            intercept: 0.0,
            true_b1: 0.5,
            true_b2: 0.0,
            true_b3: 0.0,
            noise_sd: 0.01,
            signal_sd: 0.01,
            planted_edges: Vec::new(),
            return_investor: InvestorType::Foreign,
            start_date: NaiveDate::from_ymd_opt(2020, 1, 2).expect("valid date"),
            seed: 0,
        }
    }
}

impl PlantedPanelSpec {
    /// `count` edges with distinct targets: edge `k` runs `k → (k + count) mod n`.
    pub fn ring_edges(n_stocks: usize, count: usize, coupling: f64) -> Vec<PlantedEdge> {
        (0..count)
            .map(|k| PlantedEdge {
                source: k % n_stocks,
                target: (k + count) % n_stocks,
                coupling,
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.n_stocks < 5 {
            return Err(Error::domain("n_stocks must be at least 5"));
        }
        if !(self.noise_sd > 0.0) || !(self.signal_sd > 0.0) {
            return Err(Error::domain("noise_sd and signal_sd must be positive"));
        }
        let mut seen = vec![false; self.n_stocks];
        for e in &self.planted_edges {
            if e.source >= self.n_stocks || e.target >= self.n_stocks || e.source == e.target {
                return Err(Error::domain(format!("invalid planted edge {}->{}", e.source, e.target)));
            }
            if !(0.0..=1.0).contains(&e.coupling) {
                return Err(Error::domain("coupling must lie in [0, 1]"));
            }
            if std::mem::replace(&mut seen[e.target], true) {
                return Err(Error::domain(format!("stock {} is the target of two planted edges", e.target)));
            }
        }
        Ok(())
    }
}

/// Everything planted in a generated panel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub rng: String,
    pub tickers: Vec<String>,
    pub n_periods: usize,
    /// Planted edges by ticker; present in every investor type's matched signal.
    pub edges: Vec<(String, String, f64)>,
    pub intercept: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub noise_sd: f64,
    pub signal_sd: f64,
    pub return_investor: InvestorType,
    pub return_signal: SignalField,
    /// Planted out-degree divided by `n − 1`, used as the return-model centrality.
    pub centrality: Vec<f64>,
}

impl GroundTruth {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PlantedPanel {
    pub panel: FlowPanel,
    pub truth: GroundTruth,
}

fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

/// Signal series with planted lag-1 copy couplings.
fn coupled_signals(n: usize, t: usize, sd: f64, edges: &[PlantedEdge], rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut s: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..t).map(|_| { let z: f64 = StandardNormal.sample(rng); sd * z }).collect())
        .collect();
    for step in 1..t {
        for e in edges {
            if rng.random::<f64>() < e.coupling {
                s[e.target][step] = s[e.source][step - 1];
            }
        }
    }
    s
}

/// Panel whose matched-signal columns carry the planted couplings and whose
/// next-day returns follow
/// `R[i,t+1] = a + b1·S[i,t] + b2·C[i] + b3·S[i,t]·C[i] + ε`,
/// with `S` the return investor's matched signal and `C` the planted out-degree centrality.
pub fn gen_planted_panel(spec: &PlantedPanelSpec) -> Result<PlantedPanel> {
    spec.validate()?;
    let n = spec.n_stocks;
    let t = spec.n_periods;
    let mut rng = util::rng(spec.seed);
    let tickers: Vec<String> = (0..n).map(|i| format!("S{i:03}")).collect();
    let dates = business_days(spec.start_date, t);

    let mut centrality = vec![0.0; n];
    for e in &spec.planted_edges {
        centrality[e.source] += 1.0 / (n - 1) as f64;
    }

    // per investor: [net_flow, s_mc, s_tv]
    let mut sig: Vec<[Vec<Vec<f64>>; 3]> = Vec::new();
    for inv in InvestorType::ALL {
        let matched = inv.matched_signal();
        let mut fields: [Vec<Vec<f64>>; 3] = Default::default();
        for (k, field) in [SignalField::NetFlow, SignalField::SMc, SignalField::STv].into_iter().enumerate() {
            let edges: &[PlantedEdge] = if field == matched { &spec.planted_edges } else { &[] };
            let sd = if field == SignalField::NetFlow { 1000.0 } else { spec.signal_sd };
            fields[k] = coupled_signals(n, t, sd, edges, &mut rng);
        }
        sig.push(fields);
    }
    let ret_inv = InvestorType::ALL.iter().position(|&i| i == spec.return_investor).expect("listed");
    let ret_field = spec.return_investor.matched_signal();
    let drive = &sig[ret_inv][if ret_field == SignalField::SMc { 1 } else { 2 }];

    let mut close = vec![vec![0.0; t]; n];
    let mut market_cap = vec![0.0; n];
    for i in 0..n {
        close[i][0] = 50.0 + 10.0 * i as f64;
        market_cap[i] = 1e9 * (1.0 + i as f64) * (0.5 + rng.random::<f64>());
        for step in 0..t.saturating_sub(1) {
            let s = drive[i][step];
            let c = centrality[i];
            let eps: f64 = StandardNormal.sample(&mut rng);
            let r = spec.intercept + spec.true_b1 * s + spec.true_b2 * c + spec.true_b3 * s * c + spec.noise_sd * eps;
            if r <= -1.0 {
                return Err(Error::domain("generated return <= -100%; reduce signal_sd, noise_sd or coefficients"));
            }
            close[i][step + 1] = close[i][step] * (1.0 + r);
        }
    }

    let mut records = Vec::with_capacity(n * t * 3);
    for (d, &date) in dates.iter().enumerate() {
        for i in 0..n {
            let volume = 1e5 * (1.0 + rng.random::<f64>());
            for (k, inv) in InvestorType::ALL.into_iter().enumerate() {
                records.push(FlowRecord {
                    date,
                    ticker: tickers[i].clone(),
                    investor_type: inv,
                    net_buy_volume: sig[k][0][i][d],
                    close: close[i][d],
                    market_cap: market_cap[i] * close[i][d] / close[i][0],
                    trading_volume: volume,
                    s_mc: sig[k][1][i][d],
                    s_tv: sig[k][2][i][d],
                });
            }
        }
    }
    let truth = GroundTruth {
        seed: spec.seed,
        rng: util::RNG_ALGORITHM.to_string(),
        edges: spec
            .planted_edges
            .iter()
            .map(|e| (tickers[e.source].clone(), tickers[e.target].clone(), e.coupling))
            .collect(),
        tickers,
        n_periods: t,
        intercept: spec.intercept,
        b1: spec.true_b1,
        b2: spec.true_b2,
        b3: spec.true_b3,
        noise_sd: spec.noise_sd,
        signal_sd: spec.signal_sd,
        return_investor: spec.return_investor,
        return_signal: ret_field,
        centrality,
    };
    Ok(PlantedPanel {
        panel: FlowPanel::from_records(records)?,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{symbolic_te, TeConfig};

    #[test]
    fn closed_form_chain_te() {
        assert_eq!(coupled_chain_te(5, 0.0), 0.0);
        assert!((coupled_chain_te(5, 1.0) - 5f64.log2()).abs() < 1e-12);
        // frozen from an independent computation
        assert!((coupled_chain_te(5, 0.5) - 0.550_977_500_432_693_3).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_exhaustive_joint_law() {
        // 25-state joint law of (source, target) for one copy step
        let (n, c) = (5usize, 0.5);
        let mut mi = 0.0;
        for y in 0..n {
            for x in 0..n {
                let p = (1.0 / n as f64) * ((1.0 - c) / n as f64 + if x == y { c } else { 0.0 });
                mi += p * (p / (1.0 / (n * n) as f64)).log2();
            }
        }
        assert!((mi - coupled_chain_te(5, 0.5)).abs() < 1e-12);
    }

    #[test]
    fn chain_generator_is_deterministic() {
        let spec = CoupledChainSpec {
            n_symbols: 5,
            coupling: 0.5,
            lag: 2,
            length: 1000,
            seed: 9,
        };
        assert_eq!(gen_coupled_chain(&spec).unwrap(), gen_coupled_chain(&spec).unwrap());
        let bad = CoupledChainSpec { coupling: 1.5, ..spec };
        assert!(gen_coupled_chain(&bad).is_err());
    }

    #[test]
    fn gaussian_pair_closed_form() {
        let (_, _, mi) = gen_gaussian_pair(0.9, 10, 1).unwrap();
        assert!((mi - 0.830_365_6).abs() < 1e-6);
        assert_eq!(gen_gaussian_pair(-0.9, 10, 1).unwrap().2, mi);
        assert_eq!(gen_gaussian_pair(0.0, 10, 1).unwrap().2, 0.0);
        assert!(gen_gaussian_pair(1.0, 10, 1).is_err());
    }

    #[test]
    fn oracle_independent_and_copy_laws() {
        let n = 3;
        let indep = JointTransition::from_fn(n, |_, _, _, _| 1.0 / 9.0).unwrap();
        assert!(oracle_te_exact(&indep).unwrap().abs() < 1e-12);
        let copy = JointTransition::from_fn(n, |_, y, x1, _| if x1 == y { 1.0 / 3.0 } else { 0.0 }).unwrap();
        assert!((oracle_te_exact(&copy).unwrap() - 3f64.log2()).abs() < 1e-12);
        assert!(JointTransition::new(2, vec![0.5; 16]).is_err());
    }

    #[test]
    fn oracle_matches_simulation() {
        let law = JointTransition::random(5, 3);
        let exact = oracle_te_exact(&law).unwrap();
        let (x, y) = law.simulate(200_000, 4).unwrap();
        let est = symbolic_te(&y, &x, &TeConfig::default()).unwrap();
        // plug-in bias is about (states − 1)/(2 N ln 2)
        assert!((est - exact).abs() < 0.01, "est {est} exact {exact}");
    }

    #[test]
    fn planted_panel_shape_and_truth() {
        let spec = PlantedPanelSpec {
            n_stocks: 6,
            n_periods: 50,
            planted_edges: PlantedPanelSpec::ring_edges(6, 2, 0.8),
            seed: 5,
            ..PlantedPanelSpec::default()
        };
        let p = gen_planted_panel(&spec).unwrap();
        assert_eq!(p.panel.records().len(), 6 * 50 * 3);
        assert_eq!(p.truth.edges[0], ("S000".to_string(), "S002".to_string(), 0.8));
        assert_eq!(p.truth.centrality[0], 0.2);
        let again = gen_planted_panel(&spec).unwrap();
        assert_eq!(p.panel.records(), again.panel.records());
        let dup = PlantedPanelSpec {
            planted_edges: vec![
                PlantedEdge { source: 0, target: 1, coupling: 0.5 },
                PlantedEdge { source: 2, target: 1, coupling: 0.5 },
            ],
            ..spec
        };
        assert!(gen_planted_panel(&dup).is_err());
    }
}
