//! Marginal likelihood (model evidence) estimation from posterior samples.
//!
//! The evidence `f(x) = ∫ f(x | theta) pi(theta) dtheta` is estimated by
//! averaging `f(x | theta_i) pi(theta_i) / q(theta_i)` over posterior draws
//! `theta_i`, where `q` is a Gaussian kernel density estimate of the
//! posterior built from the same draws. All arithmetic is in log space.
//!
//! ```
//! use kde_evidence::estimator::estimate_with_kde;
//! use kde_evidence::kde::KdeConfig;
//! use kde_evidence::model::{Dataset, NormalModel, NormalModelConfig};
//! use kde_evidence::sampling::{sample_exact_posterior, sample_normal, RngStream};
//!
//! let mut rng = RngStream::new(1702);
//! let data = Dataset::from_values(sample_normal(&mut rng, -1.0, 3.0, 25)?)?;
//! let model = NormalModel::new(NormalModelConfig::new(3.0, 0.0, 10.0)?)?;
//!
//! let draws = sample_exact_posterior(&mut rng, &model.posterior(&data), 1000)?;
//! let estimate = estimate_with_kde(&model, &data, &draws, &KdeConfig::default())?;
//!
//! assert!((estimate.log_evidence - model.log_marginal(&data)).abs() < 0.05);
//! # Ok::<(), kde_evidence::Error>(())
//! ```
//!
//! Besides the estimator the crate ships the conjugate Normal-Normal model
//! with its closed-form evidence ([`model`]), seeded samplers including
//! random-walk Metropolis ([`sampling`]), and a Simpson quadrature
//! of the evidence integral ([`oracle`]) for cross-checking.

pub mod error;
pub mod estimator;
pub mod io;
pub mod kde;
pub mod model;
pub mod oracle;
pub mod sampling;

pub use error::{Error, Result};

// Compile and run every snippet in the book as a doctest, one module per
// chapter so a failure points at its source file.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/kde.md")]
    mod kde {}
    #[doc = include_str!("../../../book/src/estimator.md")]
    mod estimator {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
