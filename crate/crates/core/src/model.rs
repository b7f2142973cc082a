//! Domain types of the hierarchical model: data container, base-measure
//! hyperparameters, concentration prior, and per-cluster parameters.

use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::real::{cv, cvu, Real};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Observations: C rows of d marker intensities, all finite.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix<T: Real> {
    values: DMatrix<T>,
    names: Vec<String>,
}

impl<T: Real> DataMatrix<T> {
    pub fn new(values: DMatrix<T>, names: Vec<String>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidArgument("data matrix must be non-empty".into()));
        }
        if names.len() != values.ncols() {
            return Err(Error::InvalidArgument(format!(
                "{} column names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("data contains NaN or infinite entries".into()));
        }
        Ok(Self { values, names })
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    pub fn row(&self, c: usize) -> DVector<T> {
        self.values.row(c).transpose()
    }

    pub fn column_means(&self) -> DVector<T> {
        let n = cvu::<T>(self.n_obs());
        DVector::from_iterator(self.dim(), self.values.column_iter().map(|c| c.sum() / n))
    }

    /// Sample variances (n − 1 denominator) per column.
    pub fn column_variances(&self) -> DVector<T> {
        let n = self.n_obs();
        let means = self.column_means();
        let denom = cvu::<T>(n.saturating_sub(1).max(1));
        DVector::from_iterator(
            self.dim(),
            self.values.column_iter().enumerate().map(|(j, col)| {
                col.iter().map(|&x| (x - means[j]) * (x - means[j])).fold(T::zero(), |a, b| a + b)
                    / denom
            }),
        )
    }
}

/// Hyperparameters of a structured Normal inverse-Wishart distribution.
///
/// `(xi, psi) | Sigma` is 2d-variate normal with mean `(b_xi, b_psi)` and
/// covariance `b_cov ⊗ Sigma`; `Sigma` is inverse-Wishart with `lambda_dof`
/// degrees of freedom and scale `lambda_scale`. `b_cov` is diagonal in the
/// prior and a full 2x2 matrix in posteriors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct SNiWParams<T: Real> {
    pub b_xi: DVectorDef<T>,
    pub b_psi: DVectorDef<T>,
    pub b_cov: SpdMatrix<T>,
    pub lambda_scale: SpdMatrix<T>,
    pub lambda_dof: T,
}

/// Serializable alias; nalgebra vectors serialize as plain sequences.
pub type DVectorDef<T> = DVector<T>;

impl<T: Real> SNiWParams<T> {
    pub fn new(
        b_xi: DVector<T>,
        b_psi: DVector<T>,
        b_cov: SpdMatrix<T>,
        lambda_scale: SpdMatrix<T>,
        lambda_dof: T,
    ) -> Result<Self> {
        let d = b_xi.len();
        if b_psi.len() != d || lambda_scale.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "b_xi: {d}, b_psi: {}, lambda_scale: {}",
                b_psi.len(),
                lambda_scale.dim()
            )));
        }
        if b_cov.dim() != 2 {
            return Err(Error::InvalidArgument("b_cov must be 2x2".into()));
        }
        if lambda_dof <= cvu::<T>(d + 1) {
            return Err(Error::InvalidArgument(format!(
                "lambda_dof must exceed d + 1 = {}, got {lambda_dof}",
                d + 1
            )));
        }
        Ok(Self { b_xi, b_psi, b_cov, lambda_scale, lambda_dof })
    }

    pub fn dim(&self) -> usize {
        self.b_xi.len()
    }

    /// Location stacked as a d x 2 matrix `[b_xi b_psi]`.
    pub fn location_matrix(&self) -> DMatrix<T> {
        let d = self.dim();
        DMatrix::from_fn(d, 2, |i, j| if j == 0 { self.b_xi[i] } else { self.b_psi[i] })
    }
}

/// Prior on the degrees of freedom, supported on nu > 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub enum NuPrior<T: Real> {
    /// nu − 1 ~ Exp(rate).
    ShiftedExponential { rate: T },
    /// nu ~ Uniform(lo, hi) with 1 <= lo < hi.
    TruncatedUniform { lo: T, hi: T },
}

impl<T: Real> NuPrior<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            NuPrior::ShiftedExponential { rate } if *rate > T::zero() => Ok(()),
            NuPrior::ShiftedExponential { rate } => {
                Err(Error::InvalidArgument(format!("nu prior rate must be positive, got {rate}")))
            }
            NuPrior::TruncatedUniform { lo, hi } if *lo >= T::one() && hi > lo => Ok(()),
            NuPrior::TruncatedUniform { lo, hi } => Err(Error::InvalidArgument(format!(
                "nu prior support [{lo}, {hi}] must satisfy 1 <= lo < hi"
            ))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match self {
            NuPrior::ShiftedExponential { rate } => T::one() + T::draw_std_exp(rng) / *rate,
            NuPrior::TruncatedUniform { lo, hi } => *lo + T::draw_unit(rng) * (*hi - *lo),
        }
    }

    /// Log density; −inf outside the support.
    pub fn ln_pdf(&self, nu: T) -> T {
        if nu <= T::one() {
            return cv::<T>(f64::NEG_INFINITY);
        }
        match self {
            NuPrior::ShiftedExponential { rate } => rate.ln() - *rate * (nu - T::one()),
            NuPrior::TruncatedUniform { lo, hi } => {
                if nu >= *lo && nu <= *hi {
                    -(*hi - *lo).ln()
                } else {
                    cv::<T>(f64::NEG_INFINITY)
                }
            }
        }
    }
}

/// Base measure: a mixture of sNiW components plus the nu prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct BaseMeasure<T: Real> {
    components: Vec<(T, SNiWParams<T>)>,
    pub nu_prior: NuPrior<T>,
}

impl<T: Real> BaseMeasure<T> {
    pub fn new(components: Vec<(T, SNiWParams<T>)>, nu_prior: NuPrior<T>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("base measure needs at least one component".into()));
        }
        let d = components[0].1.dim();
        if components.iter().any(|(_, c)| c.dim() != d) {
            return Err(Error::DimensionMismatch("base measure components disagree on d".into()));
        }
        if components.iter().any(|(w, _)| *w <= T::zero() || *w > T::one()) {
            return Err(Error::InvalidArgument("component weights must lie in (0, 1]".into()));
        }
        let total = components.iter().fold(T::zero(), |a, (w, _)| a + *w);
        if (total - T::one()).abs() > cv::<T>(1e-10) {
            return Err(Error::InvalidArgument(format!(
                "component weights must sum to 1, got {total}"
            )));
        }
        nu_prior.validate()?;
        Ok(Self { components, nu_prior })
    }

    pub fn single(sniw: SNiWParams<T>, nu_prior: NuPrior<T>) -> Result<Self> {
        Self::new(vec![(T::one(), sniw)], nu_prior)
    }

    pub fn components(&self) -> &[(T, SNiWParams<T>)] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].1.dim()
    }
}

/// Gamma(a, b) prior on the DP concentration (rate parameterization).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct ConcentrationPrior<T: Real> {
    pub a: T,
    pub b: T,
}

impl<T: Real> ConcentrationPrior<T> {
    pub fn new(a: T, b: T) -> Result<Self> {
        if a <= T::zero() || b <= T::zero() {
            return Err(Error::InvalidArgument(format!(
                "concentration prior needs a, b > 0, got ({a}, {b})"
            )));
        }
        Ok(Self { a, b })
    }
}

/// One mixture atom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct ClusterParams<T: Real> {
    pub xi: DVector<T>,
    pub psi: DVector<T>,
    pub sigma: SpdMatrix<T>,
    pub nu: T,
}

impl<T: Real> ClusterParams<T> {
    pub fn new(xi: DVector<T>, psi: DVector<T>, sigma: SpdMatrix<T>, nu: T) -> Result<Self> {
        let d = xi.len();
        if psi.len() != d || sigma.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "xi: {d}, psi: {}, sigma: {}",
                psi.len(),
                sigma.dim()
            )));
        }
        if nu <= T::one() {
            return Err(Error::InvalidArgument(format!("nu must exceed 1, got {nu}")));
        }
        Ok(Self { xi, psi, sigma, nu })
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }
}

/// Prior expected number of clusters: Σ_{c=0}^{C−1} α/(α+c).
pub fn expected_num_clusters<T: Real>(alpha: T, n_obs: usize) -> Result<T> {
    if alpha <= T::zero() {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if n_obs == 0 {
        return Err(Error::InvalidArgument("need at least one observation".into()));
    }
    Ok((0..n_obs).map(|c| alpha / (alpha + cvu::<T>(c))).fold(T::zero(), |a, b| a + b))
}

/// Empirical-Bayes default hyperparameters.
///
/// Location at the column means, zero skew, vague 2x2 covariance factor
/// (diag 100), inverse-Wishart scale at a third of the column variances with
/// d + 3 degrees of freedom, shifted-exponential nu prior (rate 0.1), and a
/// Gamma(0.5, 0.125) concentration prior (prior mean 4 clusters).
pub fn default_hyperparams<T: Real>(
    data: &DataMatrix<T>,
) -> Result<(BaseMeasure<T>, ConcentrationPrior<T>)> {
    default_hyperparams_scaled(data, cv::<T>(1.0 / 3.0))
}

/// Same as [`default_hyperparams`] with a configurable scale multiplier for
/// the inverse-Wishart prior scale (the knob that trades off the prior number
/// of clusters).
pub fn default_hyperparams_scaled<T: Real>(
    data: &DataMatrix<T>,
    lambda_scale_mult: T,
) -> Result<(BaseMeasure<T>, ConcentrationPrior<T>)> {
    if data.n_obs() < 2 {
        return Err(Error::InsufficientData(
            "need at least 2 observations to set default hyperparameters".into(),
        ));
    }
    if lambda_scale_mult <= T::zero() {
        return Err(Error::InvalidArgument("lambda scale multiplier must be positive".into()));
    }
    let d = data.dim();
    let b_xi = data.column_means();
    let b_psi = DVector::zeros(d);
    let b_cov = SpdMatrix::from_diagonal(&[cv::<T>(100.0), cv::<T>(100.0)])?;
    let vars = data.column_variances();
    if vars.iter().any(|v| *v <= T::zero()) {
        return Err(Error::InsufficientData("a data column has zero variance".into()));
    }
    let lambda_scale =
        SpdMatrix::from_diagonal(&vars.iter().map(|&v| v * lambda_scale_mult).collect::<Vec<_>>())?;
    let sniw = SNiWParams::new(b_xi, b_psi, b_cov, lambda_scale, cvu::<T>(d + 3))?;
    let base = BaseMeasure::single(sniw, NuPrior::ShiftedExponential { rate: cv::<T>(0.1) })?;
    let prior = ConcentrationPrior::new(cv::<T>(0.5), cv::<T>(0.125))?;
    Ok((base, prior))
}
