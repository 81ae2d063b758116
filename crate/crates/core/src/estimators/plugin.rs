//! Maximum-likelihood (plug-in) entropy and mutual information on symbol series.

use crate::error::{Error, Result};
use crate::panel::SymbolSeries;

fn log_factor(log_base: f64) -> Result<f64> {
    if !(log_base > 0.0) || log_base == 1.0 {
        return Err(Error::domain(format!("invalid log base {log_base}")));
    }
    Ok(log_base.ln())
}

/// Entropy of a count vector with total `n`, in nats.
pub(crate) fn entropy_of_counts(counts: impl IntoIterator<Item = u64>, n: u64) -> f64 {
    let nf = n as f64;
    let mut h = 0.0;
    for c in counts {
        if c > 0 {
            let p = c as f64 / nf;
            h -= p * p.ln();
        }
    }
    h
}

fn symbol_counts(symbols: &[u32], n_symbols: u32) -> Vec<u64> {
    let mut counts = vec![0u64; n_symbols as usize];
    for &s in symbols {
        counts[s as usize] += 1;
    }
    counts
}

/// H(X) = −Σ p̂ log p̂ in the requested base.
pub fn plugin_entropy(x: &SymbolSeries, log_base: f64) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::domain("entropy of an empty series"));
    }
    let f = log_factor(log_base)?;
    let counts = symbol_counts(&x.symbols, x.n_symbols);
    Ok(entropy_of_counts(counts, x.len() as u64) / f)
}

/// Joint entropy of two aligned series, in the requested base.
pub fn plugin_joint_entropy(x: &SymbolSeries, y: &SymbolSeries, log_base: f64) -> Result<f64> {
    check_aligned(x, y)?;
    let f = log_factor(log_base)?;
    let joint = combine(x, y)?;
    let counts = symbol_counts(&joint.symbols, joint.n_symbols);
    Ok(entropy_of_counts(counts, x.len() as u64) / f)
}

/// I(X;Y) = H(X) + H(Y) − H(X,Y), in the requested base.
pub fn plugin_mi(x: &SymbolSeries, y: &SymbolSeries, log_base: f64) -> Result<f64> {
    check_aligned(x, y)?;
    let hx = plugin_entropy(x, log_base)?;
    let hy = plugin_entropy(y, log_base)?;
    let hxy = plugin_joint_entropy(x, y, log_base)?;
    Ok((hx + hy - hxy).max(0.0))
}

/// H(Y | X) = H(X,Y) − H(X).
pub fn plugin_conditional_entropy(y: &SymbolSeries, x: &SymbolSeries, log_base: f64) -> Result<f64> {
    Ok(plugin_joint_entropy(x, y, log_base)? - plugin_entropy(x, log_base)?)
}

/// Encode two aligned series as one series on the product alphabet (`x * |Y| + y`).
pub fn combine(x: &SymbolSeries, y: &SymbolSeries) -> Result<SymbolSeries> {
    check_aligned(x, y)?;
    let n_symbols = x
        .n_symbols
        .checked_mul(y.n_symbols)
        .ok_or_else(|| Error::domain("joint alphabet overflows"))?;
    let symbols = x
        .symbols
        .iter()
        .zip(&y.symbols)
        .map(|(&a, &b)| a * y.n_symbols + b)
        .collect();
    Ok(SymbolSeries {
        symbols,
        n_symbols,
        source_id: format!("({},{})", x.source_id, y.source_id),
    })
}

fn check_aligned(x: &SymbolSeries, y: &SymbolSeries) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::domain(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::domain("empty series"));
    }
    Ok(())
}
