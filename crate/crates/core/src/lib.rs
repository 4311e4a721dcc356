//! Log-concave independent components (LC-IC) density estimation.
//!
//! A density on `R^d` whose coordinates become independent and log-concave
//! after an orthogonal change of basis is estimated in two stages: the basis is
//! recovered from the covariance (PCA) or a reweighted covariance (Fourier
//! PCA), then each coordinate's density is fitted by univariate log-concave
//! maximum likelihood on a disjoint half of the sample.
//!
//! Modules:
//! - [`sim`]: ground-truth models and seeded sampling
//! - [`unmixing`]: covariance-based unmixing matrix estimation and frame alignment
//! - [`lcmle`]: univariate log-concave MLE
//! - [`estimator`]: the full pipeline and the fitted product density
//! - [`metrics`]: Monte-Carlo divergences, Gaussian oracles and stability bounds
//! - [`mixture`]: EM for mixtures of LC-IC components

pub mod assignment;
pub mod density;
pub mod error;
pub mod estimator;
pub mod lcmle;
pub mod linalg;
pub mod metrics;
pub mod mixture;
pub mod par;
pub mod rng;
pub mod sim;
pub mod unmixing;

pub use density::{Density, SampleMatrix, Sampler};
pub use estimator::{fit_lcic, fit_oracle, Method, ProductEstimate, SplitPlan};
pub use error::{Error, Result};

pub use lcmle::{fit_logconcave_1d, LogConcave1D, WeightedPoints};
pub use linalg::{OrthonormalFrame, SymMatrix};
pub use rng::RngState;
pub use sim::{GroundTruthModel, MarginalSpec};
