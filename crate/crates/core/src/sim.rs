//! Synthetic mixture generation for benchmarking and tests.

use crate::dist::skew::{sample_skew_normal, sample_skew_t, SkewNormalParams, SkewTParams};
use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::model::DataMatrix;
use crate::real::{cv, Real};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// One mixture component; `nu = None` draws skew-normal observations.
#[derive(Clone, Debug)]
pub struct SimComponent<T: Real> {
    pub weight: T,
    pub xi: DVector<T>,
    pub psi: DVector<T>,
    pub sigma: SpdMatrix<T>,
    pub nu: Option<T>,
}

/// Draw `count` observations from the mixture; returns the data and the
/// 1-based truth labels.
pub fn simulate_mixture<T: Real, R: Rng + ?Sized>(
    components: &[SimComponent<T>],
    count: usize,
    rng: &mut R,
) -> Result<(DataMatrix<T>, Vec<u32>)> {
    if components.is_empty() || count == 0 {
        return Err(Error::Config("need at least one component and one observation".into()));
    }
    let total: T = components.iter().map(|c| c.weight).fold(T::zero(), |a, b| a + b);
    if (total - T::one()).abs() > cv::<T>(1e-10) {
        return Err(Error::Config(format!("component weights must sum to 1, got {total}")));
    }
    let d = components[0].xi.len();
    let mut prepared = Vec::with_capacity(components.len());
    for c in components {
        if c.xi.len() != d || c.psi.len() != d || c.sigma.dim() != d {
            return Err(Error::Config("components disagree on dimension".into()));
        }
        let base = SkewNormalParams::new(c.xi.clone(), c.psi.clone(), c.sigma.clone())?;
        let st = match c.nu {
            Some(nu) => Some(SkewTParams::new(base.clone(), nu)?),
            None => None,
        };
        prepared.push((base, st));
    }

    let mut values = DMatrix::<T>::zeros(count, d);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let u = T::draw_unit(rng);
        let mut acc = T::zero();
        let mut k = components.len() - 1;
        for (j, c) in components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                k = j;
                break;
            }
        }
        let y = match &prepared[k].1 {
            Some(st) => sample_skew_t(st, rng),
            None => sample_skew_normal(&prepared[k].0, rng),
        };
        for j in 0..d {
            values[(i, j)] = y[j];
        }
        labels.push(k as u32 + 1);
    }
    let names = (1..=d).map(|j| format!("m{j}")).collect();
    Ok((DataMatrix::new(values, names)?, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn gaussian_limit_matches_moments() {
        // single component, zero skew, huge nu: mean xi, covariance Sigma
        let comp = SimComponent::<f64> {
            weight: 1.0,
            xi: DVector::from_row_slice(&[2.0, -1.0]),
            psi: DVector::from_row_slice(&[0.0, 0.0]),
            sigma: SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]))
                .unwrap(),
            nu: Some(1e6),
        };
        let mut rng = ChaCha12Rng::seed_from_u64(61);
        let (data, labels) = simulate_mixture(&[comp], 50_000, &mut rng).unwrap();
        assert!(labels.iter().all(|&l| l == 1));
        let means = data.column_means();
        assert!((means[0] - 2.0).abs() < 0.02, "{}", means[0]);
        assert!((means[1] + 1.0).abs() < 0.02);
        let vars = data.column_variances();
        assert!((vars[0] - 1.0).abs() < 0.03);
        assert!((vars[1] - 0.5).abs() < 0.03);
    }

    #[test]
    fn skewness_sign_follows_psi() {
        let comp = SimComponent::<f64> {
            weight: 1.0,
            xi: DVector::from_row_slice(&[0.0]),
            psi: DVector::from_row_slice(&[10.0]),
            sigma: SpdMatrix::identity(1),
            nu: Some(8.0),
        };
        let mut rng = ChaCha12Rng::seed_from_u64(62);
        let (data, _) = simulate_mixture(&[comp], 20_000, &mut rng).unwrap();
        let xs: Vec<f64> = (0..data.n_obs()).map(|i| data.values()[(i, 0)]).collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / xs.len() as f64;
        assert!(m3 > 0.0);
    }

    #[test]
    fn bad_weights_rejected() {
        let comp = SimComponent {
            weight: 0.7f64,
            xi: DVector::from_row_slice(&[0.0]),
            psi: DVector::from_row_slice(&[0.0]),
            sigma: SpdMatrix::identity(1),
            nu: None,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(63);
        assert!(matches!(
            simulate_mixture(&[comp], 10, &mut rng),
            Err(Error::Config(_))
        ));
    }
}
