//! Scalar helpers shared by the likelihood code and the samplers.

use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

/// log(1 - exp(x)) for x < 0.
///
/// Split at -ln 2: below it `log1p(-exp(x))` is accurate, above it
/// `log(-expm1(x))` avoids catastrophic cancellation as x -> 0-.
pub fn log1mexp(x: f64) -> f64 {
    debug_assert!(x < 0.0, "log1mexp needs a negative argument, got {x}");
    if x < -std::f64::consts::LN_2 {
        (-x.exp()).ln_1p()
    } else {
        (-x.exp_m1()).ln()
    }
}

/// log(1 + exp(x)) without overflow on either tail.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function, evaluated on the side that keeps exp() bounded.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of `sigmoid` for p in (0, 1).
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// log sum exp over a small slice; -inf on an empty slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// ln n!
pub fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// N-th harmonic number, summed from the small end for accuracy.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).rev().map(|i| 1.0 / i as f64).sum()
}

/// Log density of Beta(a, b) at x in (0, 1), normalisation included.
pub fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    debug_assert!(x > 0.0 && x < 1.0);
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b)
}

/// ln Beta(a, b).
pub fn ln_beta_fn(a: f64, b: f64) -> f64 {
    ln_beta(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log1mexp_matches_naive_where_naive_is_safe() {
        for &x in &[-0.01f64, -0.5, -1.0, -5.0, -20.0] {
            let naive = (1.0 - x.exp()).ln();
            assert!((log1mexp(x) - naive).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn log1mexp_near_zero_stays_finite() {
        let v = log1mexp(-1e-12);
        assert!(v.is_finite());
        assert!((v - (1e-12f64).ln()).abs() < 1e-6);
    }

    #[test]
    fn softplus_tails() {
        assert!((softplus(40.0) - 40.0).abs() < 1e-12);
        assert!(softplus(-40.0) > 0.0);
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_logit_roundtrip() {
        for &p in &[1e-8, 0.25, 0.5, 0.75, 1.0 - 1e-8] {
            assert!((sigmoid(logit(p)) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_small_values() {
        assert!((harmonic(1) - 1.0).abs() < 1e-15);
        assert!((harmonic(2) - 1.5).abs() < 1e-15);
        assert!((harmonic(3) - 11.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn beta_pdf_is_normalised_uniform_case() {
        // Beta(1, 1) is uniform on (0, 1).
        assert!(beta_ln_pdf(0.3, 1.0, 1.0).abs() < 1e-14);
        // Beta(5, 1) at 0.5: 5 * 0.5^4.
        let expect = (5.0f64 * 0.5f64.powi(4)).ln();
        assert!((beta_ln_pdf(0.5, 5.0, 1.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn logsumexp_handles_neg_inf() {
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = logsumexp(&[0.0, f64::NEG_INFINITY]);
        assert!((v - 0.0).abs() < 1e-15);
    }
}
