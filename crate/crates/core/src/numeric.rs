//! Log-domain helpers shared by the scoring and decision code.

/// Natural log of the Gamma function for `x > 0`.
///
/// Backed by the musl `lgamma` port in `libm`, which stays within a few ulp
/// over the range the scorer uses.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma domain is x > 0, got {x}");
    libm::lgamma(x)
}

/// `ln Σ exp(v)` evaluated around the maximum. Returns `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Relative closeness with an absolute floor of 1 on the scale.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_log_factorial() {
        let mut acc = 0.0f64;
        for n in 1..200u32 {
            // ln Γ(n + 1) = ln n!
            acc += f64::from(n).ln();
            let got = ln_gamma(f64::from(n) + 1.0);
            assert!(rel_close(got, acc, 1e-13), "n={n}: {got} vs {acc}");
        }
    }

    #[test]
    fn ln_gamma_half_integers_and_recurrence() {
        let ln_sqrt_pi = 0.5 * std::f64::consts::PI.ln();
        assert!((ln_gamma(0.5) - ln_sqrt_pi).abs() < 1e-15);
        for &x in &[1e-3, 0.01, 0.3, 0.77, 1.5, 3.25, 17.1, 250.5, 1e4, 1e6] {
            let lhs = ln_gamma(x + 1.0);
            let rhs = ln_gamma(x) + x.ln();
            assert!(rel_close(lhs, rhs, 1e-12), "x={x}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        let v = [-1000.0, -1000.0];
        assert!((log_sum_exp(&v) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        let v = [0.0, 1.0f64.ln(), 2.0f64.ln()];
        assert!((log_sum_exp(&v) - 4f64.ln()).abs() < 1e-15);
    }
}
