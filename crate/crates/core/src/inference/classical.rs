//! Classical tests: Benjamini–Hochberg, Mann–Whitney U, one-sample t.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::util;

/// Benjamini–Hochberg step-up rejection mask, in input order.
pub fn bh_fdr(p_values: &[f64], alpha: f64) -> Result<Vec<bool>> {
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::domain(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut cutoff = 0;
    for (rank0, &i) in order.iter().enumerate() {
        let rank = rank0 + 1;
        if p_values[i] <= rank as f64 * alpha / m as f64 {
            cutoff = rank;
        }
    }
    let mut mask = vec![false; m];
    for &i in &order[..cutoff] {
        mask[i] = true;
    }
    Ok(mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MannWhitney {
    /// U statistic of the first sample: rank sum minus `n_a (n_a + 1) / 2`.
    pub u: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Largest smaller-sample size for which the exact null distribution is enumerated.
pub const MW_EXACT_MAX: usize = 8;

/// Two-sided Mann–Whitney U test with midranks for ties. Uses the exact
/// permutation distribution when the smaller sample has at most
/// [`MW_EXACT_MAX`] observations, else a tie-corrected normal approximation
/// with continuity correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("Mann-Whitney needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::domain("Mann-Whitney inputs must be finite"));
    }
    let na = a.len();
    let nb = b.len();
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = util::midranks(&pooled);
    let ra: f64 = ranks[..na].iter().sum();
    let u = ra - (na * (na + 1)) as f64 / 2.0;
    let mu = (na * nb) as f64 / 2.0;

    if na.min(nb) <= MW_EXACT_MAX {
        let p = exact_p(&ranks, na, nb, u);
        return Ok(MannWhitney {
            u,
            p_value: p,
            exact: true,
        });
    }

    let n = (na + nb) as f64;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
        statrs::function::erf::erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    Ok(MannWhitney {
        u,
        p_value: p,
        exact: false,
    })
}

/// Exact two-sided p from the distribution of the smaller sample's rank sum
/// over all equally likely group assignments of the (mid)ranks.
fn exact_p(ranks: &[f64], na: usize, nb: usize, u_a: f64) -> f64 {
    let (m, u_small) = if na <= nb {
        (na, u_a)
    } else {
        (nb, (na * nb) as f64 - u_a)
    };
    // Doubled midranks are integers.
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = {
        let mut d = doubled.clone();
        d.sort_unstable_by(|a, b| b.cmp(a));
        d[..m].iter().sum()
    };
    // dist[j][s]: number of size-j subsets with doubled rank sum s
    let mut dist = vec![vec![0f64; max_sum + 1]; m + 1];
    dist[0][0] = 1.0;
    for &r in &doubled {
        for j in (1..=m).rev() {
            let (lo, hi) = dist.split_at_mut(j);
            let prev = &lo[j - 1];
            let cur = &mut hi[0];
            for s in (r..=max_sum).rev() {
                if prev[s - r] != 0.0 {
                    cur[s] += prev[s - r];
                }
            }
        }
    }
    let total: f64 = dist[m].iter().sum();
    let offset = (m * (m + 1)) as f64; // doubled m(m+1)/2
    let mu2 = (na * nb) as f64; // doubled mean of U
    let obs_dev = (2.0 * u_small - mu2).abs();
    let mut tail = 0.0;
    for (s, &c) in dist[m].iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let u2 = s as f64 - offset;
        if (u2 - mu2).abs() >= obs_dev - 1e-9 {
            tail += c;
        }
    }
    (tail / total).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub p_value: f64,
    pub df: f64,
}

/// One-sample t-test of mean zero; two-sided p from Student t with n − 1 df.
pub fn one_sample_ttest(values: &[f64]) -> Result<TTest> {
    let n = values.len();
    if n < 2 {
        return Err(Error::SampleSize {
            required: 2,
            actual: n,
        });
    }
    let m = util::mean(values);
    let sd = util::sample_sd(values);
    if !(sd > 0.0) {
        return Err(Error::Degenerate("zero variance in t-test sample".into()));
    }
    let t = m / (sd / (n as f64).sqrt());
    let df = (n - 1) as f64;
    Ok(TTest {
        t,
        p_value: student_two_sided_p(t, df),
        df,
    })
}

pub fn student_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    statrs::function::beta::beta_reg(df / 2.0, 0.5, df / (df + t * t)).min(1.0)
}
