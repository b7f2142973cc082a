//! TOML configuration documents for fits and simulations. Unknown keys are
//! rejected so that a typo cannot silently change a run.

use dpmst::error::Error;
use dpmst::io::Transform;
use dpmst::linalg::SpdMatrix;
use dpmst::model::{BaseMeasure, ConcentrationPrior, DataMatrix, NuPrior, SNiWParams};
use dpmst::sampler::{ChainConfig, Mode};
use dpmst::sim::SimComponent;
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::str::FromStr;

fn default_iters() -> usize {
    3000
}
fn default_burnin() -> usize {
    2000
}
fn default_thin() -> usize {
    5
}
fn default_mode() -> String {
    "st".into()
}
fn default_true() -> bool {
    true
}
fn default_mh_step() -> f64 {
    1.0
}
fn default_init_clusters() -> usize {
    30
}
fn default_point_method() -> String {
    "binder".into()
}

/// Fit/seqfit run configuration.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: PathBuf,
    pub out: PathBuf,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_burnin")]
    pub burnin: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub parallel: bool,
    #[serde(default = "default_mh_step")]
    pub mh_step: f64,
    #[serde(default)]
    pub jitter: f64,
    #[serde(default = "default_init_clusters")]
    pub init_clusters: usize,
    #[serde(default)]
    pub transform: Option<String>,
    #[serde(default = "default_point_method")]
    pub point_method: String,
    #[serde(default)]
    pub save_similarity: bool,
    #[serde(default)]
    pub hyper: HyperOverrides,
}

/// Optional overrides of the empirical-Bayes default hyperparameters.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperOverrides {
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// Diagonal of the 2x2 location covariance factor.
    pub d0: Option<f64>,
    pub lambda_dof: Option<f64>,
    /// Multiplier on the column variances forming the inverse-Wishart scale.
    pub lambda_scale_mult: Option<f64>,
    /// "exp:RATE" or "uniform:LO,HI".
    pub nu_prior: Option<String>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<(Self, String), Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{path:?}: {e}")))?;
        Ok((cfg, text))
    }

    pub fn mode(&self) -> Result<Mode, Error> {
        Mode::from_str(&self.mode)
    }

    pub fn transform_spec(&self) -> Result<Transform<f64>, Error> {
        match &self.transform {
            None => Ok(Transform::None),
            Some(s) => s.parse(),
        }
    }

    pub fn chain_config(&self) -> Result<ChainConfig<f64>, Error> {
        let cfg = ChainConfig {
            n_iter: self.iters,
            burn_in: self.burnin,
            thin: self.thin,
            mode: self.mode()?,
            mh_step: self.mh_step,
            seed: self.seed,
            parallel: self.parallel,
            jitter: self.jitter,
            init_clusters: self.init_clusters,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default hyperparameters adjusted by the [hyper] overrides.
    pub fn hyperparams(
        &self,
        data: &DataMatrix<f64>,
    ) -> Result<(BaseMeasure<f64>, ConcentrationPrior<f64>), Error> {
        let h = &self.hyper;
        let mult = h.lambda_scale_mult.unwrap_or(1.0 / 3.0);
        let (base, conc) = dpmst::model::default_hyperparams_scaled(data, mult)?;
        let (_, sniw0) = &base.components()[0];

        let d0 = h.d0.unwrap_or(100.0);
        if d0 <= 0.0 {
            return Err(Error::Config("hyper.d0 must be positive".into()));
        }
        let b_cov = SpdMatrix::from_diagonal(&[d0, d0])?;
        let lambda_dof = h.lambda_dof.unwrap_or(sniw0.lambda_dof);
        let sniw = SNiWParams::new(
            sniw0.b_xi.clone(),
            sniw0.b_psi.clone(),
            b_cov,
            sniw0.lambda_scale.clone(),
            lambda_dof,
        )?;
        let nu_prior = match &h.nu_prior {
            None => base.nu_prior.clone(),
            Some(s) => parse_nu_prior(s)?,
        };
        let base = BaseMeasure::single(sniw, nu_prior)?;
        let conc = ConcentrationPrior::new(h.a.unwrap_or(conc.a), h.b.unwrap_or(conc.b))?;
        Ok((base, conc))
    }
}

pub fn parse_nu_prior(s: &str) -> Result<NuPrior<f64>, Error> {
    let bad = || Error::Config(format!("nu_prior {s:?}; expected exp:RATE or uniform:LO,HI"));
    let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
    let prior = match kind {
        "exp" => NuPrior::ShiftedExponential { rate: rest.parse().map_err(|_| bad())? },
        "uniform" => {
            let (lo, hi) = rest.split_once(',').ok_or_else(bad)?;
            NuPrior::TruncatedUniform {
                lo: lo.parse().map_err(|_| bad())?,
                hi: hi.parse().map_err(|_| bad())?,
            }
        }
        _ => return Err(bad()),
    };
    prior.validate()?;
    Ok(prior)
}

/// Simulation configuration.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    pub out_data: PathBuf,
    pub out_labels: PathBuf,
    #[serde(rename = "component")]
    pub components: Vec<SimComponentConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimComponentConfig {
    pub weight: f64,
    pub xi: Vec<f64>,
    pub psi: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub nu: Option<f64>,
}

impl SimConfig {
    pub fn from_file(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{path:?}: {e}")))
    }

    pub fn components(&self) -> Result<Vec<SimComponent<f64>>, Error> {
        self.components
            .iter()
            .map(|c| {
                let d = c.xi.len();
                if c.sigma.len() != d || c.sigma.iter().any(|r| r.len() != d) {
                    return Err(Error::Config(format!(
                        "component sigma must be {d}x{d} to match xi"
                    )));
                }
                let sigma = SpdMatrix::new(DMatrix::from_fn(d, d, |i, j| c.sigma[i][j]))?;
                Ok(SimComponent {
                    weight: c.weight,
                    xi: DVector::from_row_slice(&c.xi),
                    psi: DVector::from_row_slice(&c.psi),
                    sigma,
                    nu: c.nu,
                })
            })
            .collect()
    }
}
