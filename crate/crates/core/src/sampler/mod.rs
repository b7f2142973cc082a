//! Partially collapsed Gibbs sampler for Dirichlet-process mixtures of
//! multivariate skew-normal and skew-t distributions.
//!
//! Each iteration updates, in order: the concentration parameter, the mixing
//! distribution (weights, slice variables, stick extension, allocation), the
//! skew latents, the cluster parameters through their conjugate sNiW
//! posterior, and — in skew-t mode — the degrees of freedom jointly with the
//! scale latents via Metropolis-within-Gibbs with the latents integrated out
//! of the Metropolis step only.

pub mod diagnostics;
pub mod init;
pub mod steps;

pub use diagnostics::{gelman_rubin, iterations_to_converge, split_rhat};
pub use steps::{
    alpha_mixture_given_x, cluster_marginal_logdensity, scale_latent_conditional,
    skew_latent_conditional, sniw_posterior, state_logdensity, update_alpha,
    update_cluster_params, update_nu_and_scale, update_skew_latent, update_sticks_and_alloc,
};

use crate::error::{Error, Result};
use crate::model::{BaseMeasure, ClusterParams, ConcentrationPrior, DataMatrix};
use crate::real::{cv, cvu, Real};
use crate::rng::RngStream;
use serde::{Deserialize, Serialize};

/// Component density family of the mixture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "sn")]
    SkewNormal,
    #[serde(rename = "st")]
    SkewT,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::SkewNormal => "sn",
            Mode::SkewT => "st",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sn" => Ok(Mode::SkewNormal),
            "st" => Ok(Mode::SkewT),
            other => Err(Error::Config(format!("mode must be sn or st, got {other:?}"))),
        }
    }
}

/// Chain configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct ChainConfig<T: Real> {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub mode: Mode,
    /// Half-width of the uniform random walk on log(nu − 1).
    pub mh_step: T,
    pub seed: u64,
    pub parallel: bool,
    /// Diagonal jitter retried on a non-SPD posterior scale (0 disables).
    pub jitter: T,
    /// Number of k-means clusters seeding the initial partition.
    pub init_clusters: usize,
}

impl<T: Real> ChainConfig<T> {
    pub fn new(n_iter: usize, burn_in: usize, thin: usize, mode: Mode, seed: u64) -> Self {
        Self {
            n_iter,
            burn_in,
            thin,
            mode,
            mh_step: T::one(),
            seed,
            parallel: true,
            jitter: T::zero(),
            init_clusters: 30,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 || self.burn_in >= self.n_iter {
            return Err(Error::InvalidArgument(format!(
                "need burn_in < n_iter, got {} and {}",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thin must be at least 1".into()));
        }
        if self.mh_step <= T::zero() {
            return Err(Error::InvalidArgument("mh_step must be positive".into()));
        }
        if self.jitter < T::zero() {
            return Err(Error::InvalidArgument("jitter must be non-negative".into()));
        }
        if self.init_clusters == 0 {
            return Err(Error::InvalidArgument("init_clusters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Full sampler state for one iteration.
#[derive(Clone, Debug)]
pub struct ChainState<T: Real> {
    /// Cluster index (0-based) per observation.
    pub alloc: Vec<usize>,
    /// Skew latents s_c >= 0.
    pub skew_latent: Vec<T>,
    /// Scale latents gamma_c > 0 (all 1 in skew-normal mode).
    pub scale_latent: Vec<T>,
    /// Weight per occupied cluster.
    pub weights: Vec<T>,
    /// Remainder stick mass.
    pub w_rest: T,
    pub alpha: T,
    pub clusters: Vec<ClusterParams<T>>,
    /// Latent base-measure component index per cluster.
    pub base_component_of: Vec<usize>,
}

impl<T: Real> ChainState<T> {
    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// 1-based labels of the current partition.
    pub fn partition_labels(&self) -> Vec<u32> {
        self.alloc.iter().map(|&k| k as u32 + 1).collect()
    }

    /// Relabels clusters so that label order follows each cluster's smallest
    /// member index. Keeps the trajectory invariant under label permutations
    /// of the input state.
    pub fn compact_canonical(&mut self) {
        let k = self.clusters.len();
        let mut first = vec![usize::MAX; k];
        for (c, &l) in self.alloc.iter().enumerate() {
            if first[l] == usize::MAX {
                first[l] = c;
            }
        }
        let mut order: Vec<usize> = (0..k).filter(|&l| first[l] != usize::MAX).collect();
        order.sort_unstable_by_key(|&l| first[l]);
        let mut relabel = vec![usize::MAX; k];
        for (new_l, &old_l) in order.iter().enumerate() {
            relabel[old_l] = new_l;
        }
        self.alloc = self.alloc.iter().map(|&l| relabel[l]).collect();
        self.clusters = order.iter().map(|&l| self.clusters[l].clone()).collect();
        self.weights = order.iter().map(|&l| self.weights[l]).collect();
        self.base_component_of = order.iter().map(|&l| self.base_component_of[l]).collect();
    }
}

/// Thinned post-burn-in draws.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorDraws<T: Real> {
    /// 1-based labels per stored draw.
    pub partitions: Vec<Vec<u32>>,
    /// Cluster parameters per stored draw; index k-1 holds label k.
    pub cluster_params: Vec<Vec<ClusterParams<T>>>,
    pub alpha_trace: Vec<T>,
    pub k_trace: Vec<usize>,
    pub logdensity_trace: Vec<T>,
    /// Accepted / proposed over the whole run; 0 in skew-normal mode.
    pub nu_acceptance_rate: T,
}

impl<T: Real> PosteriorDraws<T> {
    pub fn n_draws(&self) -> usize {
        self.partitions.len()
    }

    /// Most frequent number of clusters among the stored draws (smallest
    /// wins ties).
    pub fn modal_k(&self) -> usize {
        let mut counts = std::collections::BTreeMap::new();
        for &k in &self.k_trace {
            *counts.entry(k).or_insert(0usize) += 1;
        }
        counts.into_iter().max_by_key(|&(k, n)| (n, std::cmp::Reverse(k))).map(|(k, _)| k).unwrap_or(0)
    }

    pub fn partitions_as_partition(&self) -> Result<Vec<crate::partition::Partition>> {
        self.partitions.iter().map(|p| crate::partition::Partition::new(p.clone())).collect()
    }
}

/// Run one chain and collect the thinned draws.
pub fn run_chain<T: Real>(
    data: &DataMatrix<T>,
    base: &BaseMeasure<T>,
    prior: &ConcentrationPrior<T>,
    cfg: &ChainConfig<T>,
) -> Result<PosteriorDraws<T>> {
    run_chain_observed(data, base, prior, cfg, |_, _| {})
}

/// As [`run_chain`], invoking `on_iter(iteration, state)` after every sweep.
pub fn run_chain_observed<T: Real>(
    data: &DataMatrix<T>,
    base: &BaseMeasure<T>,
    prior: &ConcentrationPrior<T>,
    cfg: &ChainConfig<T>,
    mut on_iter: impl FnMut(usize, &ChainState<T>),
) -> Result<PosteriorDraws<T>> {
    cfg.validate()?;
    if base.dim() != data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "base measure dimension {} but data dimension {}",
            base.dim(),
            data.dim()
        )));
    }
    let mut rng = RngStream::new(cfg.seed);
    let mut state = init_state(data, base, prior, cfg, &mut rng)?;

    let n_draws = (cfg.n_iter - cfg.burn_in).div_ceil(cfg.thin);
    let mut draws = PosteriorDraws {
        partitions: Vec::with_capacity(n_draws),
        cluster_params: Vec::with_capacity(n_draws),
        alpha_trace: Vec::with_capacity(n_draws),
        k_trace: Vec::with_capacity(n_draws),
        logdensity_trace: Vec::with_capacity(n_draws),
        nu_acceptance_rate: T::zero(),
    };
    let mut accepted = 0usize;
    let mut proposed = 0usize;

    for t in 0..cfg.n_iter {
        let it = t as u64;
        state.alpha = update_alpha(state.alpha, state.n_clusters(), data.n_obs(), prior, &mut rng);
        update_sticks_and_alloc(&mut state, data, base, cfg.mode, it, cfg.parallel, &mut rng)?;
        update_skew_latent(&mut state, data, it, cfg.parallel, &rng)?;
        update_cluster_params(&mut state, data, base, cfg.jitter, it, cfg.parallel, &rng)?;
        if cfg.mode == Mode::SkewT {
            let (acc, prop) =
                update_nu_and_scale(&mut state, data, base, cfg.mh_step, it, cfg.parallel, &rng)?;
            accepted += acc;
            proposed += prop;
        }

        if t >= cfg.burn_in && (t - cfg.burn_in).is_multiple_of(cfg.thin) {
            let ld = state_logdensity(&state, data, cfg.mode, cfg.parallel)?;
            if !ld.is_finite() {
                return Err(Error::ChainFailure {
                    iteration: t,
                    message: format!("log density became {ld}"),
                });
            }
            draws.partitions.push(state.partition_labels());
            draws.cluster_params.push(state.clusters.clone());
            draws.alpha_trace.push(state.alpha);
            draws.k_trace.push(state.n_clusters());
            draws.logdensity_trace.push(ld);
        }
        on_iter(t, &state);
    }
    draws.nu_acceptance_rate = cvu::<T>(accepted) / cvu::<T>(proposed.max(1));
    Ok(draws)
}

fn init_state<T: Real>(
    data: &DataMatrix<T>,
    base: &BaseMeasure<T>,
    prior: &ConcentrationPrior<T>,
    cfg: &ChainConfig<T>,
    rng: &mut RngStream,
) -> Result<ChainState<T>> {
    let n = data.n_obs();
    let raw = init::kmeans_labels(data, cfg.init_clusters, 10, rng);
    // compact raw labels (k-means may leave empty clusters)
    let mut relabel = std::collections::HashMap::new();
    let alloc: Vec<usize> = raw
        .iter()
        .map(|&l| {
            let next = relabel.len();
            *relabel.entry(l).or_insert(next)
        })
        .collect();
    let k = relabel.len();

    let alpha = T::draw_gamma(prior.a, prior.b, rng);
    let comp_weights: Vec<T> = base.components().iter().map(|(w, _)| *w).collect();
    let base_component_of: Vec<usize> = (0..k)
        .map(|_| {
            if comp_weights.len() == 1 {
                0
            } else {
                let u = T::draw_unit(rng);
                let mut acc = T::zero();
                let mut pick = comp_weights.len() - 1;
                for (i, &w) in comp_weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                pick
            }
        })
        .collect();

    // initial atom parameters drawn from the base measure (the model's own
    // prior), one per seeded cluster; nu starts at 10
    let nu0 = cv::<T>(10.0);
    let clusters: Vec<ClusterParams<T>> = base_component_of
        .iter()
        .map(|&m| {
            let (xi, psi, sigma) = crate::dist::rsniw(&base.components()[m].1, rng)?;
            Ok(ClusterParams { xi, psi, sigma, nu: nu0 })
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0usize; k];
    for &l in &alloc {
        counts[l] += 1;
    }
    let total = cvu::<T>(n) + alpha;
    let mut state = ChainState {
        alloc,
        skew_latent: vec![cv::<T>(0.5); n],
        scale_latent: vec![T::one(); n],
        weights: counts.iter().map(|&c| cvu::<T>(c) / total).collect(),
        w_rest: alpha / total,
        alpha,
        clusters,
        base_component_of,
    };
    state.compact_canonical();
    Ok(state)
}
