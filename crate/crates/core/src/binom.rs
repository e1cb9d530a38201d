//! Exact and log-space binomial sums.

use num_bigint::BigUint;
use num_traits::One;

/// Row n of Pascal's triangle.
pub fn binom_row(n: usize) -> Vec<BigUint> {
    let mut row = vec![BigUint::one()];
    for k in 1..=n {
        let prev = &row[k - 1];
        row.push(prev * BigUint::from(n - k + 1) / BigUint::from(k));
    }
    row
}

/// ln C(n,k) for k = 0..=n.
pub fn ln_binom_row(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    for k in 1..=n {
        out.push(out[k - 1] + ((n - k + 1) as f64).ln() - (k as f64).ln());
    }
    out
}

/// Σ_{k: keep(k)} C(n,k) a^k b^{n−k}, evaluated term by term in log space.
pub fn weighted_binomial_sum(n: usize, a: f64, b: f64, keep: impl Fn(usize) -> bool) -> f64 {
    let lb = ln_binom_row(n);
    let (la, lbb) = (a.ln(), b.ln());
    let mut s = 0.0;
    for k in 0..=n {
        if !keep(k) {
            continue;
        }
        let mut t = lb[k];
        if k > 0 {
            t += k as f64 * la;
        }
        if n > k {
            t += (n - k) as f64 * lbb;
        }
        s += t.exp();
    }
    s
}

pub fn big_to_f64(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        let shift = bits.saturating_sub(64);
        let top: BigUint = x >> shift as usize;
        let digits = top.to_u64_digits();
        let m = digits.first().copied().unwrap_or(0) as f64;
        m * 2f64.powi(shift as i32)
    } else {
        f64::INFINITY
    }
}

/// x · 2^{-n} as f64 without overflow for large n.
pub fn ratio_pow2(x: &BigUint, n: usize) -> f64 {
    let bits = x.bits() as i64;
    let shift = (bits - 60).max(0);
    let top: BigUint = x >> shift as usize;
    let m = top.to_u64_digits().first().copied().unwrap_or(0) as f64;
    m * 2f64.powi((shift - n as i64) as i32)
}
