//! Gamma maximum-likelihood fit for the concentration trace.

use crate::dist::special::{digamma, trigamma};
use crate::error::{Error, Result};
use crate::real::{cv, cvu, Real};

/// Gamma MLE (shape, rate) by Newton iteration on the profile score
/// ln a − ψ(a) = ln(mean) − mean(ln x), initialized at the moment estimator
/// (m²/v, m/v). Converges to |score| < 1e-12.
pub fn fit_gamma_mle<T: Real>(draws: &[T]) -> Result<(T, T)> {
    if draws.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10 draws, got {}",
            draws.len()
        )));
    }
    if draws.iter().any(|&x| x <= T::zero() || !x.is_finite()) {
        return Err(Error::InvalidArgument("draws must be positive and finite".into()));
    }
    let n = cvu::<T>(draws.len());
    let mean = draws.iter().fold(T::zero(), |a, &b| a + b) / n;
    let var = draws.iter().map(|&x| (x - mean) * (x - mean)).fold(T::zero(), |a, b| a + b)
        / (n - T::one());
    if var <= T::zero() {
        return Err(Error::DegenerateSample("all draws are equal".into()));
    }
    let mean_ln = draws.iter().map(|&x| x.ln()).fold(T::zero(), |a, b| a + b) / n;
    let target = mean.ln() - mean_ln; // > 0 unless degenerate

    let mut a = mean * mean / var; // moment estimator
    let tol = cv::<T>(1e-12);
    let mut converged = false;
    for _ in 0..200 {
        let f = a.ln() - digamma(a) - target;
        if f.abs() < tol {
            converged = true;
            break;
        }
        let fp = T::one() / a - trigamma(a); // < 0
        let mut next = a - f / fp;
        if next <= T::zero() {
            next = a * cv::<T>(0.5);
        }
        a = next;
    }
    if !converged {
        return Err(Error::NumericalDomain("gamma MLE did not converge".into()));
    }
    Ok((a, a / mean))
}
