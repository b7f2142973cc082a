//! Maximum-likelihood estimation for Normal inverse-Wishart draws.

use crate::dist::special::{mv_digamma, mv_trigamma};
use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::real::{cv, cvu, Real};
use nalgebra::DVector;

/// Fitted Normal inverse-Wishart hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NiwParams<T: Real> {
    pub mu0: DVector<T>,
    pub kappa0: T,
    pub lambda_scale: SpdMatrix<T>,
    pub lambda_dof: T,
}

/// How [`solve_lambda_dof`] treats an equation whose root falls outside
/// (d+1, LAMBDA_MAX): hard error, or clamping to the violated end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LambdaPolicy {
    Strict,
    Clamp,
}

const LAMBDA_MAX: f64 = 1e6;

/// Solve ψ_d(λ/2) = rhs + d·ln((n_eff λ + shift)/2) for λ in (d+1, 1e6].
///
/// The left-minus-right function is strictly increasing, so bisection
/// brackets the root; a Newton polish brings the residual under 1e-10.
pub fn solve_lambda_dof<T: Real>(
    d: usize,
    n_eff: T,
    shift: T,
    rhs: T,
    policy: LambdaPolicy,
) -> Result<T> {
    let g = |lambda: T| {
        mv_digamma(d, lambda * cv::<T>(0.5))
            - cvu::<T>(d) * ((n_eff * lambda + shift) * cv::<T>(0.5)).ln()
            - rhs
    };
    let mut lo = cvu::<T>(d + 1) + cv::<T>(1e-6);
    let mut hi = cv::<T>(LAMBDA_MAX);
    if g(lo) > T::zero() {
        return match policy {
            LambdaPolicy::Strict => Err(Error::Constraint(format!(
                "degrees-of-freedom equation has no root above d + 1 = {}",
                d + 1
            ))),
            LambdaPolicy::Clamp => Ok(lo),
        };
    }
    if g(hi) < T::zero() {
        return match policy {
            LambdaPolicy::Strict => Err(Error::DegenerateSample(
                "draws are too concentrated: degrees of freedom diverge".into(),
            )),
            LambdaPolicy::Clamp => Ok(hi),
        };
    }
    for _ in 0..200 {
        let mid = (lo + hi) * cv::<T>(0.5);
        if g(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < cv::<T>(1e-9) * (T::one() + lo) {
            break;
        }
    }
    let mut lambda = (lo + hi) * cv::<T>(0.5);
    for _ in 0..20 {
        let f = g(lambda);
        if f.abs() < cv::<T>(1e-10) {
            break;
        }
        let fp = cv::<T>(0.5) * mv_trigamma(d, lambda * cv::<T>(0.5))
            - cvu::<T>(d) * n_eff / (n_eff * lambda + shift);
        let next = lambda - f / fp;
        if next > cvu::<T>(d + 1) && next < cv::<T>(LAMBDA_MAX) {
            lambda = next;
        } else {
            break;
        }
    }
    Ok(lambda)
}

/// Maximum-likelihood Normal inverse-Wishart fit to (mu_i, Sigma_i) draws:
/// precision-weighted mean, closed-form kappa, degrees of freedom from the
/// digamma equation under the constraint lambda > d + 1, and
/// Lambda = n·lambda·(Σ Sigma_i⁻¹)⁻¹.
pub fn mle_niw<T: Real>(
    mu_draws: &[DVector<T>],
    sigma_draws: &[SpdMatrix<T>],
) -> Result<NiwParams<T>> {
    let n = mu_draws.len();
    if n < 2 || sigma_draws.len() != n {
        return Err(Error::InvalidArgument(format!(
            "need >= 2 paired draws, got {n} and {}",
            sigma_draws.len()
        )));
    }
    let d = mu_draws[0].len();
    let nf = cvu::<T>(n);

    let mut precision_sum = nalgebra::DMatrix::<T>::zeros(d, d);
    let mut weighted_mu = DVector::<T>::zeros(d);
    let mut sum_ln_det = T::zero();
    for (mu, sigma) in mu_draws.iter().zip(sigma_draws) {
        let sinv = sigma.inverse();
        weighted_mu += &sinv * mu;
        precision_sum += sinv;
        sum_ln_det += sigma.ln_det();
    }
    let precision_sum = SpdMatrix::new((&precision_sum + precision_sum.transpose()) * cv::<T>(0.5))?;
    let mu0 = precision_sum.solve(&weighted_mu);

    let mut quad = T::zero();
    for (mu, sigma) in mu_draws.iter().zip(sigma_draws) {
        quad += sigma.inv_quad(&(mu - &mu0));
    }
    if quad <= T::zero() {
        return Err(Error::DegenerateSample("all location draws are identical".into()));
    }
    let kappa0 = nf * cvu::<T>(d) / quad;

    let rhs = -sum_ln_det / nf - precision_sum.ln_det();
    let lambda_dof = solve_lambda_dof(d, nf, T::zero(), rhs, LambdaPolicy::Strict)?;
    let lambda_scale =
        SpdMatrix::new(precision_sum.inverse() * (nf * lambda_dof)).map_err(|e| {
            Error::NumericalDomain(format!("fitted scale is not positive definite: {e}"))
        })?;
    Ok(NiwParams { mu0, kappa0, lambda_scale, lambda_dof })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::invwishart::rinvwishart;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn niw_sample(
        mu0: &DVector<f64>,
        kappa0: f64,
        scale: &SpdMatrix<f64>,
        dof: f64,
        rng: &mut ChaCha12Rng,
    ) -> (DVector<f64>, SpdMatrix<f64>) {
        let sigma = rinvwishart(dof, scale, rng).unwrap();
        let d = mu0.len();
        let z = DVector::from_fn(d, |_, _| f64::draw_std_normal(rng));
        let mu = mu0 + sigma.chol_mul(&z) / kappa0.sqrt();
        (mu, sigma)
    }

    #[test]
    fn symmetric_trivial_case() {
        // rotationally symmetric inputs: mu0 = 0 and Lambda0 proportional to
        // the identity with Lambda0 = n·lambda·(Σ Sigma_i⁻¹)⁻¹ exactly
        let mus = vec![
            DVector::from_row_slice(&[0.5, 0.0]),
            DVector::from_row_slice(&[-0.5, 0.0]),
            DVector::from_row_slice(&[0.0, 0.5]),
            DVector::from_row_slice(&[0.0, -0.5]),
        ];
        let scales = [0.5, 0.5, 2.0, 2.0];
        let sigmas: Vec<SpdMatrix<f64>> = scales
            .iter()
            .map(|&a| SpdMatrix::new(DMatrix::<f64>::identity(2, 2) * a).unwrap())
            .collect();
        let fit = mle_niw(&mus, &sigmas).unwrap();
        assert!(fit.mu0.norm() < 1e-10, "mu0 {}", fit.mu0);
        assert!(fit.lambda_scale.matrix()[(0, 1)].abs() < 1e-10);
        let sum_prec: f64 = scales.iter().map(|a| 1.0 / a).sum();
        let expect = 4.0 * fit.lambda_dof / sum_prec;
        let got = fit.lambda_scale.matrix()[(0, 0)];
        assert!((got - expect).abs() < 1e-8 * expect, "{got} vs {expect}");
    }

    #[test]
    fn recovers_generating_parameters() {
        let mu0 = DVector::from_row_slice(&[1.0, -2.0]);
        let scale =
            SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5])).unwrap();
        let (kappa0, dof) = (2.0, 8.0);
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let mut mus = Vec::new();
        let mut sigmas = Vec::new();
        for _ in 0..10_000 {
            let (m, s) = niw_sample(&mu0, kappa0, &scale, dof, &mut rng);
            mus.push(m);
            sigmas.push(s);
        }
        let fit = mle_niw(&mus, &sigmas).unwrap();
        assert!((fit.mu0[0] - 1.0).abs() < 0.1 && (fit.mu0[1] + 2.0).abs() < 0.1);
        assert!((fit.kappa0 - kappa0).abs() / kappa0 < 0.1, "kappa {}", fit.kappa0);
        assert!((fit.lambda_dof - dof).abs() / dof < 0.1, "dof {}", fit.lambda_dof);
        for i in 0..2 {
            for j in 0..2 {
                let got = fit.lambda_scale.matrix()[(i, j)];
                let want = scale.matrix()[(i, j)];
                assert!(
                    (got - want).abs() <= 0.1 * want.abs().max(0.1),
                    "scale[{i}][{j}] {got} vs {want}"
                );
            }
        }
        // solver postcondition: residual < 1e-8 and constraint satisfied
        assert!(fit.lambda_dof > 3.0);
        let d = 2;
        let nf = mus.len() as f64;
        let sum_ln: f64 = sigmas.iter().map(|s| s.ln_det()).sum();
        let mut prec = DMatrix::<f64>::zeros(2, 2);
        for s in &sigmas {
            prec += s.inverse();
        }
        let prec = SpdMatrix::new((&prec + prec.transpose()) * 0.5).unwrap();
        let resid = mv_digamma(d, fit.lambda_dof / 2.0)
            - (-sum_ln / nf + 2.0 * ((nf * fit.lambda_dof) / 2.0).ln() - prec.ln_det());
        assert!(resid.abs() < 1e-8, "residual {resid}");
    }

    #[test]
    fn identical_draws_are_degenerate() {
        let sig = SpdMatrix::<f64>::identity(2);
        let mus = vec![DVector::from_row_slice(&[1.0, 1.0]); 20];
        let sigmas = vec![sig; 20];
        assert!(matches!(
            mle_niw(&mus, &sigmas),
            Err(Error::DegenerateSample(_))
        ));
    }
}
