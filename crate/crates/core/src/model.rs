//! The Normal-Normal conjugate model and the generic model interface.
//!
//! Observations are i.i.d. `N(theta, sigma^2)` with `sigma` known and the
//! prior on `theta` is `N(theta0, sigma0^2)`. Everything here works with log
//! densities; the marginal likelihood is never exponentiated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `0.5 * ln(2 pi)`
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Log density of `N(mean, sd^2)` at `x`.
#[inline]
pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -HALF_LN_2PI - sd.ln() - 0.5 * z * z
}

/// Observations together with their sufficient statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    mean: f64,
    pop_variance: f64,
}

impl Dataset {
    /// Builds a dataset, computing the mean and the population variance
    /// (divisor `n`).
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidObservation { index, value });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let pop_variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(Dataset {
            values,
            mean,
            pop_variance,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Sample mean `x̄`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance `s^2 = (1/n) Σ (x_i - x̄)^2`.
    pub fn pop_variance(&self) -> f64 {
        self.pop_variance
    }
}

/// Known observation sd and the Normal prior on the location parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalModelConfig {
    pub sigma: f64,
    pub theta0: f64,
    pub sigma0: f64,
}

impl NormalModelConfig {
    pub fn new(sigma: f64, theta0: f64, sigma0: f64) -> Result<Self> {
        let cfg = NormalModelConfig {
            sigma,
            theta0,
            sigma0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be positive and finite (got {})",
                self.sigma
            )));
        }
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma0 must be positive and finite (got {})",
                self.sigma0
            )));
        }
        if !self.theta0.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "theta0 must be finite (got {})",
                self.theta0
            )));
        }
        Ok(())
    }
}

/// Parameters of a Normal posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorParams {
    pub mean: f64,
    pub variance: f64,
}

impl PosteriorParams {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn ln_pdf(&self, theta: f64) -> f64 {
        normal_ln_pdf(theta, self.mean, self.sd())
    }
}

/// A model defined by its log-likelihood and log-prior.
///
/// Implementations must be pure and return a finite value or `-inf`, never
/// NaN. Non-conjugate models plug into the estimator and the quadrature
/// oracle through this trait.
pub trait BayesModel {
    fn log_likelihood(&self, theta: f64, data: &Dataset) -> f64;

    fn log_prior(&self, theta: f64) -> f64;

    /// Identifier echoed into reports.
    fn name(&self) -> String {
        "custom".to_string()
    }

    /// `log f(x | theta) + log pi(theta)`, short-circuiting on a zero prior.
    fn log_joint(&self, theta: f64, data: &Dataset) -> f64 {
        let lp = self.log_prior(theta);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + self.log_likelihood(theta, data)
    }
}

/// A [`BayesModel`] assembled from two closures.
pub struct FnModel<L, P> {
    name: String,
    log_likelihood: L,
    log_prior: P,
}

impl<L, P> FnModel<L, P>
where
    L: Fn(f64, &Dataset) -> f64,
    P: Fn(f64) -> f64,
{
    pub fn new(name: impl Into<String>, log_likelihood: L, log_prior: P) -> Self {
        FnModel {
            name: name.into(),
            log_likelihood,
            log_prior,
        }
    }
}

impl<L, P> BayesModel for FnModel<L, P>
where
    L: Fn(f64, &Dataset) -> f64,
    P: Fn(f64) -> f64,
{
    fn log_likelihood(&self, theta: f64, data: &Dataset) -> f64 {
        (self.log_likelihood)(theta, data)
    }

    fn log_prior(&self, theta: f64) -> f64 {
        (self.log_prior)(theta)
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Normal likelihood with known variance and a Normal prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalModel {
    pub config: NormalModelConfig,
}

impl NormalModel {
    pub fn new(config: NormalModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(NormalModel { config })
    }

    pub fn posterior(&self, data: &Dataset) -> PosteriorParams {
        normal_posterior_params(data, &self.config)
    }

    pub fn log_marginal(&self, data: &Dataset) -> f64 {
        normal_log_marginal_closed_form(data, &self.config)
    }
}

impl BayesModel for NormalModel {
    fn log_likelihood(&self, theta: f64, data: &Dataset) -> f64 {
        normal_log_likelihood(data, &self.config, theta)
    }

    fn log_prior(&self, theta: f64) -> f64 {
        normal_log_prior(theta, &self.config)
    }

    fn name(&self) -> String {
        format!(
            "normal-normal(sigma={}, theta0={}, sigma0={})",
            self.config.sigma, self.config.theta0, self.config.sigma0
        )
    }
}

/// Log-likelihood through the sufficient statistics:
/// `-(n/2) ln 2pi - n ln sigma - n/(2 sigma^2) ((theta - x̄)^2 + s^2)`.
pub fn normal_log_likelihood(data: &Dataset, config: &NormalModelConfig, theta: f64) -> f64 {
    let n = data.n() as f64;
    let sigma = config.sigma;
    let d = theta - data.mean();
    -n * HALF_LN_2PI - n * sigma.ln() - n / (2.0 * sigma * sigma) * (d * d + data.pop_variance())
}

pub fn normal_log_prior(theta: f64, config: &NormalModelConfig) -> f64 {
    normal_ln_pdf(theta, config.theta0, config.sigma0)
}

pub fn normal_posterior_params(data: &Dataset, config: &NormalModelConfig) -> PosteriorParams {
    let n = data.n() as f64;
    let s2 = config.sigma * config.sigma;
    let s02 = config.sigma0 * config.sigma0;
    let denom = n * s02 + s2;
    PosteriorParams {
        mean: (n * s02 * data.mean() + s2 * config.theta0) / denom,
        variance: s2 * s02 / denom,
    }
}

/// Closed-form log marginal likelihood.
///
/// The two cross terms inside the exponent combine into
/// `n (x̄ - theta0)^2 / (n sigma0^2 + sigma^2)`, which avoids cancellation
/// when `sigma0` is large.
pub fn normal_log_marginal_closed_form(data: &Dataset, config: &NormalModelConfig) -> f64 {
    let n = data.n() as f64;
    let sigma = config.sigma;
    let s2 = sigma * sigma;
    let denom = n * config.sigma0 * config.sigma0 + s2;
    let d = data.mean() - config.theta0;
    let quad = n * data.pop_variance() / s2 + n * d * d / denom;
    -n * HALF_LN_2PI + (1.0 - n) * sigma.ln() - 0.5 * denom.ln() - 0.5 * quad
}
