//! Scalar special functions: Poisson weights, binomial weights, entropies.

use std::sync::OnceLock;

use crate::error::{invalid, Result};

const LN_FACT_TABLE: usize = 4096;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE);
        t.push(0.0);
        let mut acc = 0.0;
        for k in 1..LN_FACT_TABLE {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// ln(n!).
pub fn ln_factorial(n: u32) -> f64 {
    let n = n as usize;
    if n < LN_FACT_TABLE {
        return ln_fact_table()[n];
    }
    // Stirling series; the truncation error is far below f64 resolution here.
    let x = n as f64;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x * x * x)
}

/// Poisson probability without argument checks.
pub(crate) fn pmf(x: f64, n: u32) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if n <= 30 {
        let mut p = (-x).exp();
        for k in 1..=n {
            p *= x / k as f64;
        }
        p
    } else {
        (n as f64 * x.ln() - x - ln_factorial(n)).exp()
    }
}

/// Probability that a Poisson source of mean `x` emits exactly `n` photons.
pub fn poisson_pmf(x: f64, n: u32) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(invalid(format!(
            "mean photon number must be finite and >= 0, got {x}"
        )));
    }
    Ok(pmf(x, n))
}

/// Tail mass without argument checks.
pub(crate) fn tail(x: f64, n0: u32) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x <= n0 as f64 + 1.0 {
        // Terms decrease from n0+1 on, so summing the tail directly is both
        // convergent and free of the cancellation in 1 - partial sum.
        let mut term = pmf(x, n0 + 1);
        let mut sum = 0.0;
        let mut n = n0 + 1;
        while term > 0.0 && term > sum * 1e-18 {
            sum += term;
            n += 1;
            term *= x / n as f64;
            if n > n0 + 100_000 {
                break;
            }
        }
        return sum.clamp(0.0, 1.0);
    }
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for n in 0..=n0 {
        let t = pmf(x, n);
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    (1.0 - (sum + comp)).clamp(0.0, 1.0)
}

/// Mass of a Poisson distribution above `n0`, i.e. `1 - sum_{n<=n0} p_n(x)`.
pub fn poisson_tail(x: f64, n0: u32) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(invalid(format!(
            "mean photon number must be finite and >= 0, got {x}"
        )));
    }
    Ok(tail(x, n0))
}

/// Smallest cutoff whose Poisson tail is below `eps`.
pub fn poisson_cutoff(x: f64, eps: f64) -> u32 {
    let mut n = 0;
    while tail(x, n) >= eps {
        n += 1;
    }
    n
}

/// Binomial probabilities `C(m,k) eta^k (1-eta)^(m-k)` for `k = 0..=m`.
///
/// Computed from log-domain weights so that large `m` neither overflows nor
/// underflows the leading factor.
pub fn binomial_weights(m: u32, eta: f64) -> Vec<f64> {
    let len = m as usize + 1;
    if eta >= 1.0 {
        let mut w = vec![0.0; len];
        w[m as usize] = 1.0;
        return w;
    }
    if eta <= 0.0 {
        let mut w = vec![0.0; len];
        w[0] = 1.0;
        return w;
    }
    let (le, lf) = (eta.ln(), (1.0 - eta).ln());
    let mut out = Vec::with_capacity(len);
    let mut ln_c = 0.0;
    for k in 0..=m {
        if k > 0 {
            ln_c += ((m - k + 1) as f64).ln() - (k as f64).ln();
        }
        out.push((ln_c + k as f64 * le + (m - k) as f64 * lf).exp());
    }
    out
}

/// Binomial coefficient as a float.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

/// Binary entropy in bits, with `0 log 0 = 0`.
pub fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Shannon entropy in bits of a probability vector.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pmf_known_values() {
        assert_eq!(poisson_pmf(0.0, 0).unwrap(), 1.0);
        assert_relative_eq!(poisson_pmf(0.5, 1).unwrap(), 0.3032653299, epsilon = 1e-10);
        assert!(poisson_pmf(-1.0, 0).is_err());
    }

    #[test]
    fn log_space_branch_matches_product() {
        for &x in &[0.3f64, 2.0, 25.0] {
            let direct: f64 = (1..=40).fold((-x).exp(), |p, k| p * x / k as f64);
            assert_relative_eq!(pmf(x, 40), direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn tail_values() {
        assert_eq!(poisson_tail(0.0, 0).unwrap(), 0.0);
        assert_relative_eq!(poisson_tail(0.5, 0).unwrap(), 0.3934693403, epsilon = 1e-10);
        assert!(poisson_tail(0.5, 200).unwrap() < 1e-15);
        // x^3/6 leading term for tiny intensities, kept to full relative precision.
        let x: f64 = 1e-3;
        let t = poisson_tail(x, 2).unwrap();
        let series = x.powi(3) / 6.0 * (-x).exp() * (1.0 + x / 4.0 + x * x / 20.0);
        assert_relative_eq!(t, series, max_relative = 1e-12);
    }

    #[test]
    fn normalisation() {
        for &x in &[1e-3, 1e-2, 0.5, 1.0] {
            let s: f64 = (0..=300).map(|n| pmf(x, n)).sum::<f64>() + tail(x, 300);
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn binomial_weights_sum_to_one() {
        for &m in &[0u32, 1, 7, 60, 400] {
            for &eta in &[0.0, 0.3, 0.85, 1.0] {
                let s: f64 = binomial_weights(m, eta).iter().sum();
                assert_relative_eq!(s, 1.0, epsilon = 1e-12);
            }
        }
        let w = binomial_weights(3, 0.5);
        assert_relative_eq!(w[1], 0.375, epsilon = 1e-15);
    }

    #[test]
    fn entropies() {
        assert_eq!(h2(0.0), 0.0);
        assert_relative_eq!(h2(0.5), 1.0);
        assert_relative_eq!(shannon_entropy(&[0.25; 4]), 2.0);
        assert_eq!(binomial(5, 2), 10.0);
    }
}
