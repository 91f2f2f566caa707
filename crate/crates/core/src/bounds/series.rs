//! Power-series tails and the infinite products Π(1 + c·k^(−σ)).

use crate::{Error, Result};

/// B_2, B_4, B_6, B_8, B_10 divided by (2j)!.
const BERNOULLI_OVER_FACTORIAL: [f64; 5] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30_240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
];

/// Direct-summation floor before the Euler–Maclaurin correction kicks in.
const EM_START: u64 = 32;

/// Largest number of directly summed product factors.
const MAX_DIRECT_TERMS: f64 = 1e8;

/// Σ_{k ≥ n} k^(−σ) for σ > 1, n ≥ 1.
pub fn power_tail(sigma: f64, n: u64) -> f64 {
    assert!(sigma > 1.0 && n >= 1);
    let m = n.max(EM_START);
    let head: f64 = (n..m).map(|k| (k as f64).powf(-sigma)).sum();
    let mf = m as f64;
    let f = mf.powf(-sigma);
    let mut tail = mf.powf(1.0 - sigma) / (sigma - 1.0) + 0.5 * f;
    // f^(2j−1)(m) = −σ(σ+1)…(σ+2j−2)·m^(−σ−2j+1)
    let mut rising = sigma;
    let mut power = f / mf;
    for (j, c) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        tail += c * rising * power;
        let k = 2.0 * j as f64;
        rising *= (sigma + k + 1.0) * (sigma + k + 2.0);
        power /= mf * mf;
    }
    head + tail
}

/// ζ(σ) = Σ_{k ≥ 1} k^(−σ).
pub fn zeta(sigma: f64) -> f64 {
    power_tail(sigma, 1)
}

/// ln Π_{k ≥ k0} (1 + c·k^(−σ)) for c ≥ 0, σ > 1.
///
/// Sums log1p directly until c·K^(−σ) ≤ 1e-3, then expands log1p over the
/// remaining tail as an alternating series of power tails.
pub fn log_product_tail(c: f64, sigma: f64, k0: u64) -> Result<f64> {
    if c == 0.0 {
        return Ok(0.0);
    }
    if !(sigma > 1.0) {
        return Err(Error::DivergentSeries(format!(
            "product of (1 + c k^-{sigma}) diverges"
        )));
    }
    let needed = (c / 1e-3).powf(1.0 / sigma).ceil();
    if needed > MAX_DIRECT_TERMS {
        return Err(Error::param(
            "weights",
            format!("product needs {needed:e} direct terms; reduce the gain"),
        ));
    }
    let k_end = (needed as u64).max(k0 + 64);
    let mut sum = 0.0;
    for k in k0..k_end {
        sum += (c * (k as f64).powf(-sigma)).ln_1p();
    }
    let mut cm = 1.0;
    for m in 1..=12u32 {
        cm *= c;
        let term = cm * power_tail(m as f64 * sigma, k_end) / m as f64;
        sum += if m % 2 == 1 { term } else { -term };
        if term < 1e-18 * sum.abs() {
            break;
        }
    }
    Ok(sum)
}

/// ln(sinh(y)/y) for y ≥ 0, stable at both ends.
pub fn ln_sinhc(y: f64) -> f64 {
    if y < 1e-3 {
        let y2 = y * y;
        y2 / 6.0 - y2 * y2 / 180.0
    } else if y < 20.0 {
        (y.sinh() / y).ln()
    } else {
        y - (2.0 * y).ln() + (-(-2.0 * y).exp()).ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn zeta_known_values() {
        assert_relative_eq!(zeta(2.0), PI * PI / 6.0, max_relative = 1e-13);
        assert_relative_eq!(zeta(4.0), PI.powi(4) / 90.0, max_relative = 1e-13);
        assert_relative_eq!(zeta(1.2), 5.591_582_441_177_75, max_relative = 1e-12);
    }

    #[test]
    fn power_tail_matches_partial_sums() {
        for &(s, n) in &[(2.0, 1u64), (1.5, 3), (3.3, 100), (2.0, 5000)] {
            let direct: f64 = (n..n + 2_000_000).map(|k| (k as f64).powf(-s)).sum();
            let rest = power_tail(s, n + 2_000_000);
            assert_relative_eq!(power_tail(s, n), direct + rest, max_relative = 1e-12);
        }
    }

    #[test]
    fn product_matches_sinh_closed_form() {
        for &x in &[0.01, 0.5, 1.0, 3.7, 11.0] {
            let general = log_product_tail(x * x, 2.0, 1).unwrap();
            assert_relative_eq!(general, ln_sinhc(PI * x), max_relative = 1e-10);
        }
    }

    #[test]
    fn ln_sinhc_branches_agree() {
        for y in [9.999e-4f64, 1.0001e-3, 19.999, 20.001] {
            let exact = (y.sinh() / y).ln();
            assert_relative_eq!(ln_sinhc(y), exact, max_relative = 1e-9);
        }
        assert_eq!(ln_sinhc(0.0), 0.0);
        assert!(ln_sinhc(1000.0).is_finite());
    }

    #[test]
    fn product_edge_cases() {
        assert_eq!(log_product_tail(0.0, 2.0, 1).unwrap(), 0.0);
        assert!(log_product_tail(1.0, 1.0, 1).is_err());
    }
}
