//! Small numeric and seeding helpers shared across modules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier of the pseudorandom generator used for every stochastic step.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), seeds derived via FNV-1a + SplitMix64";

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Linear-interpolation quantile of an ascending-sorted slice (the "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let q = q.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    quantile(xs, 0.5)
}

/// 0-based ranks where tied values all receive the smallest rank of their group.
pub fn min_ranks(xs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        for &idx in &order[i..=j] {
            ranks[idx] = i;
        }
        i = j + 1;
    }
    ranks
}

/// 1-based midranks (average rank for ties).
pub fn midranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derive a child seed from a parent seed and a sequence of labels.
pub fn derive_seed(parent: u64, parts: &[&str]) -> u64 {
    let mut s = splitmix64(parent);
    for p in parts {
        s = splitmix64(s ^ fnv1a(p.as_bytes()));
    }
    s
}

/// Seed for the surrogate test of the ordered pair `source -> target`.
pub fn pair_seed(global: u64, source_id: &str, target_id: &str) -> u64 {
    derive_seed(global, &[source_id, "->", target_id])
}

pub fn indexed_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(index.wrapping_add(0xA5A5_A5A5)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shortest round-trip decimal; scientific notation for very small or large magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x != 0.0 && x.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

pub fn bits_to_nats(bits: f64) -> f64 {
    bits * std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_cells_round_trip() {
        for x in [0.0, 0.5, -3.25, 2.4e-124, 1e20, 123456.789, 1e-5, 9.99e-6] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            assert!(s.len() < 30, "{s}");
        }
    }

    #[test]
    fn quantile_matches_linear_rule() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert!((quantile_sorted(&v, 0.5) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn min_ranks_ties_take_lowest() {
        assert_eq!(min_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![2, 0, 2, 1]);
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn pair_seed_is_directional() {
        assert_ne!(pair_seed(7, "A", "B"), pair_seed(7, "B", "A"));
        assert_eq!(pair_seed(7, "A", "B"), pair_seed(7, "A", "B"));
    }
}
