//! Information-theoretic Bayesian optimization built around alpha-divergence
//! acquisition functions, with a GP surrogate, posterior optimum sampling via
//! random Fourier features, entropy-search baselines, a brute-force validation
//! oracle, and an experiment engine.

pub mod acquisition;
pub mod alpha;
pub mod data;
pub mod engine;
pub mod error;
pub mod gp;
pub mod objectives;
pub mod optimize;
pub mod oracle;
pub mod quadrature;
pub mod rff;
pub mod seed;
pub mod stats;
pub mod truncated;

pub use data::{Bounds, Dataset};
pub use error::{Error, Result};
pub use gp::{GpHyperparams, GpModel, PredictiveGaussian};
pub use rff::OptimumSample;
