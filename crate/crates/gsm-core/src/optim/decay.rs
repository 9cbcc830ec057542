//! Passive-decay calculus: how fast does a weight that only ever receives
//! decay shrink, and how many iterations until it is negligible?
//!
//! A permanently passive scalar with zero initial momentum follows
//!
//! ```text
//! z <- beta*z + eta*w        w <- w - alpha*z
//! ```
//!
//! [`exact_passive_decay`] iterates that recurrence; [`approx_passive_decay`]
//! evaluates the closed-form approximation `(1 - alpha*eta/(1-beta))^k`,
//! which is what run-length planning uses. Both work in `f64`: these are
//! planning quantities, not tensor values.

use crate::error::{Error, Result};

/// `w(k)/w(0)` from iterating the passive recurrence `k` times with
/// `w(0) = 1`, `z(0) = 0`.
pub fn exact_passive_decay(alpha: f64, eta: f64, beta: f64, k: u64) -> f64 {
    let mut z = 0.0f64;
    let mut w = 1.0f64;
    for _ in 0..k {
        z = beta * z + eta * w;
        w -= alpha * z;
    }
    w
}

/// The closed-form estimate `(1 - alpha*eta/(1-beta))^k`.
pub fn approx_passive_decay(alpha: f64, eta: f64, beta: f64, k: u64) -> Result<f64> {
    if beta >= 1.0 {
        return Err(Error::Argument(format!("beta {beta} must be < 1")));
    }
    Ok(pow_u64(1.0 - alpha * eta / (1.0 - beta), k))
}

/// Smallest `k` with `(1 - alpha*eta/(1-beta))^k < tau`.
pub fn iterations_to_threshold(alpha: f64, eta: f64, beta: f64, tau: f64) -> Result<u64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Argument(format!("threshold {tau} must be in (0, 1)")));
    }
    if beta >= 1.0 {
        return Err(Error::Argument(format!("beta {beta} must be < 1")));
    }
    let factor = 1.0 - alpha * eta / (1.0 - beta);
    if !(factor > 0.0 && factor < 1.0) {
        return Err(Error::Argument(format!(
            "per-iteration decay factor {factor} must be in (0, 1)"
        )));
    }
    // Log estimate, then walk to the exact boundary in powf terms.
    let mut k = (tau.ln() / factor.ln()).ceil().max(1.0) as u64;
    while k > 1 && pow_u64(factor, k - 1) < tau {
        k -= 1;
    }
    while pow_u64(factor, k) >= tau {
        k += 1;
    }
    Ok(k)
}

/// Binary exponentiation, deterministic for integer exponents of any size.
fn pow_u64(base: f64, mut exp: u64) -> f64 {
    let mut acc = 1.0f64;
    let mut b = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= b;
        }
        b *= b;
        exp >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_iterations_is_unity() {
        assert_eq!(exact_passive_decay(5e-3, 5e-4, 0.98, 0), 1.0);
        assert_eq!(approx_passive_decay(5e-3, 5e-4, 0.98, 0).unwrap(), 1.0);
    }

    #[test]
    fn beta_zero_collapses_to_geometric_decay() {
        let (alpha, eta) = (5e-3, 5e-4);
        for k in [1u64, 5, 100, 5000] {
            let exact = exact_passive_decay(alpha, eta, 0.0, k);
            let geometric = pow_u64(1.0 - alpha * eta, k);
            assert!(
                (exact - geometric).abs() <= 1e-12 * geometric.abs(),
                "k={k}: {exact} vs {geometric}"
            );
        }
    }

    #[test]
    fn approx_matches_hand_evaluated_closed_form() {
        // (1 - 1.25e-4)^10000
        let v = approx_passive_decay(5e-3, 5e-4, 0.98, 10_000).unwrap();
        assert!((v - 0.286_482_412_681_841_55).abs() < 1e-12, "{v}");
        assert!((v - 0.2865).abs() < 1e-4);
    }

    #[test]
    fn approx_rejects_beta_at_or_above_one() {
        assert!(approx_passive_decay(5e-3, 5e-4, 1.0, 10).is_err());
    }

    #[test]
    fn threshold_is_strictly_less_than() {
        // factor = 0.5: 0.5^1 is not < 0.5, 0.5^2 = 0.25 is.
        assert_eq!(iterations_to_threshold(1.0, 0.5, 0.0, 0.5).unwrap(), 2);
    }

    #[test]
    fn threshold_at_reference_settings() {
        assert_eq!(
            iterations_to_threshold(5e-3, 5e-4, 0.98, 1e-4).unwrap(),
            73_679
        );
        // Direct iteration cross-check of the boundary.
        let f = 1.0 - 5e-3 * 5e-4 / 0.02f64;
        assert!(pow_u64(f, 73_678) >= 1e-4);
        assert!(pow_u64(f, 73_679) < 1e-4);
    }

    #[test]
    fn raising_beta_to_099_roughly_halves_k() {
        let k98 = iterations_to_threshold(5e-3, 5e-4, 0.98, 1e-4).unwrap();
        let k99 = iterations_to_threshold(5e-3, 5e-4, 0.99, 1e-4).unwrap();
        let ratio = k98 as f64 / k99 as f64;
        assert!((ratio - 2.0).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn degenerate_factor_is_rejected() {
        // alpha*eta/(1-beta) >= 1 leaves no valid decay factor.
        assert!(iterations_to_threshold(1.0, 1.0, 0.5, 0.5).is_err());
        assert!(iterations_to_threshold(5e-3, 5e-4, 0.98, 1.0).is_err());
        assert!(iterations_to_threshold(5e-3, 5e-4, 0.98, 0.0).is_err());
    }
}
