//! Dirichlet process mixtures of multivariate skew-normal and skew-t
//! distributions for unsupervised model-based clustering, with a partially
//! collapsed Gibbs sampler, sequential posterior approximation for repeated
//! samples, partition point estimation, and cytometry-oriented ingestion.
//!
//! All numerics are generic over the scalar type through [`real::Real`]
//! (`f32` or `f64`); the `*64` aliases below pin the usual choice.

pub mod dist;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod partition;
pub mod real;
pub mod rng;
pub mod sampler;
pub mod seqpost;
pub mod sim;

pub use error::{Error, Result};
pub use real::Real;

/// Concrete `f64` aliases for the main public types.
pub type SpdMatrix64 = linalg::SpdMatrix<f64>;
pub type DataMatrix64 = model::DataMatrix<f64>;
pub type SNiWParams64 = model::SNiWParams<f64>;
pub type BaseMeasure64 = model::BaseMeasure<f64>;
pub type ClusterParams64 = model::ClusterParams<f64>;
pub type ConcentrationPrior64 = model::ConcentrationPrior<f64>;
pub type NuPrior64 = model::NuPrior<f64>;
pub type ChainConfig64 = sampler::ChainConfig<f64>;
pub type ChainState64 = sampler::ChainState<f64>;
pub type PosteriorDraws64 = sampler::PosteriorDraws<f64>;
pub type SimilarityMatrix64 = partition::SimilarityMatrix<f64>;
pub type ResultBundle64 = io::ResultBundle<f64>;
pub type Transform64 = io::Transform<f64>;
pub type MapPriorConfig64 = seqpost::MapPriorConfig<f64>;
