//! Sequential posterior approximation: compress a chain's posterior draws
//! into a parametric (Gamma, sNiW-mixture) prior for the next dataset.

pub mod gamma;
pub mod niw;
pub mod sniw_fit;

pub use gamma::fit_gamma_mle;
pub use niw::{mle_niw, solve_lambda_dof, LambdaPolicy, NiwParams};
pub use sniw_fit::{em_sniw, mle_sniw, EmMode, MapPriorConfig, SNiWMixtureFit, SniwDraw};

use crate::error::{Error, Result};
use crate::model::{BaseMeasure, ConcentrationPrior, NuPrior};
use crate::real::{cv, Real};
use crate::sampler::PosteriorDraws;
use rand::Rng;

/// Pool every stored draw's occupied-cluster parameter triples.
pub fn pool_cluster_draws<T: Real>(draws: &PosteriorDraws<T>) -> Vec<SniwDraw<T>> {
    draws
        .cluster_params
        .iter()
        .flat_map(|clusters| {
            clusters.iter().map(|cp| SniwDraw {
                xi: cp.xi.clone(),
                psi: cp.psi.clone(),
                sigma: cp.sigma.clone(),
            })
        })
        .collect()
}

/// Default component count for the informative prior: the modal number of
/// clusters among the stored draws.
pub fn default_prior_components<T: Real>(draws: &PosteriorDraws<T>) -> usize {
    draws.modal_k().max(1)
}

/// Build an informative prior from a previous chain's draws: a MAP-EM
/// sNiW-mixture fit of the pooled cluster parameters becomes the base
/// measure, a Gamma MLE of the concentration trace becomes the concentration
/// prior, and the nu prior passes through unchanged.
pub fn build_informative_prior<T: Real, R: Rng + ?Sized>(
    draws: &PosteriorDraws<T>,
    n_components: usize,
    cfg: &MapPriorConfig<T>,
    nu_prior: NuPrior<T>,
    rng: &mut R,
) -> Result<(BaseMeasure<T>, ConcentrationPrior<T>)> {
    if draws.n_draws() == 0 {
        return Err(Error::InvalidArgument("no posterior draws".into()));
    }
    let pooled = pool_cluster_draws(draws);
    let fit = em_sniw(&pooled, n_components, EmMode::Map, cfg, rng)?;

    // drop numerically empty components and renormalize
    let mut components = Vec::new();
    let mut total = T::zero();
    for (w, comp) in fit.weights.iter().zip(fit.components) {
        if *w > cv::<T>(1e-10) {
            components.push((*w, comp));
            total += *w;
        }
    }
    if components.is_empty() {
        return Err(Error::ComponentCollapse("every fitted component is empty".into()));
    }
    for (w, _) in &mut components {
        *w /= total;
    }
    let base = BaseMeasure::new(components, nu_prior)?;

    let (a, b) = fit_gamma_mle(&draws.alpha_trace)?;
    Ok((base, ConcentrationPrior::new(a, b)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClusterParams;
    use crate::linalg::SpdMatrix;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    // synthetic "draws" with one stable cluster and a gamma-like alpha trace
    fn fake_draws(n: usize, rng: &mut ChaCha12Rng) -> PosteriorDraws<f64> {
        let mut cluster_params = Vec::new();
        let mut alpha_trace = Vec::new();
        for _ in 0..n {
            let jitter = 0.05 * f64::draw_std_normal(rng);
            let cp = ClusterParams {
                xi: DVector::from_row_slice(&[3.0 + jitter, -1.0 + jitter]),
                psi: DVector::from_row_slice(&[1.0 + jitter, 0.2]),
                sigma: SpdMatrix::new(DMatrix::from_row_slice(
                    2,
                    2,
                    &[0.5 + jitter.abs(), 0.1, 0.1, 0.4 + jitter.abs()],
                ))
                .unwrap(),
                nu: 8.0,
            };
            cluster_params.push(vec![cp]);
            alpha_trace.push(f64::draw_gamma(2.0, 4.0, rng));
        }
        PosteriorDraws {
            partitions: vec![vec![1, 1]; n],
            cluster_params,
            alpha_trace,
            k_trace: vec![1; n],
            logdensity_trace: vec![0.0; n],
            nu_acceptance_rate: 0.3,
        }
    }

    #[test]
    fn informative_prior_centers_on_truth() {
        let mut rng = ChaCha12Rng::seed_from_u64(51);
        let draws = fake_draws(400, &mut rng);
        let nu_prior = NuPrior::ShiftedExponential { rate: 0.1 };
        let (base, conc) = build_informative_prior(
            &draws,
            1,
            &MapPriorConfig::default(),
            nu_prior,
            &mut rng,
        )
        .unwrap();
        assert_eq!(base.components().len(), 1);
        let (w, comp) = &base.components()[0];
        assert!((w - 1.0).abs() < 1e-12);
        assert!((comp.b_xi[0] - 3.0).abs() < 0.1, "b_xi {}", comp.b_xi[0]);
        assert!((comp.b_xi[1] + 1.0).abs() < 0.1);
        // alpha trace was Gamma(2, 4)
        assert!((conc.a - 2.0).abs() / 2.0 < 0.2, "a {}", conc.a);
        assert!((conc.b - 4.0).abs() / 4.0 < 0.2, "b {}", conc.b);
        // invariants guaranteed by construction
        assert!(comp.lambda_dof > 3.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng1 = ChaCha12Rng::seed_from_u64(52);
        let draws = fake_draws(200, &mut rng1);
        let nu_prior = NuPrior::ShiftedExponential { rate: 0.1f64 };
        let mut ra = ChaCha12Rng::seed_from_u64(99);
        let mut rb = ChaCha12Rng::seed_from_u64(99);
        let (base_a, conc_a) =
            build_informative_prior(&draws, 1, &MapPriorConfig::default(), nu_prior.clone(), &mut ra)
                .unwrap();
        let (base_b, conc_b) =
            build_informative_prior(&draws, 1, &MapPriorConfig::default(), nu_prior, &mut rb)
                .unwrap();
        assert_eq!(base_a, base_b);
        assert_eq!(conc_a, conc_b);
    }

    #[test]
    fn modal_k_default() {
        let mut rng = ChaCha12Rng::seed_from_u64(53);
        let mut draws = fake_draws(10, &mut rng);
        draws.k_trace = vec![2, 3, 3, 3, 2, 4, 3, 1, 3, 2];
        assert_eq!(default_prior_components(&draws), 3);
    }
}
