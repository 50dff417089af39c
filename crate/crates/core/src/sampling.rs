//! Seeded random streams, exact conjugate posterior draws and a random-walk
//! Metropolis sampler.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BayesModel, Dataset, PosteriorParams};

/// Deterministic random stream.
///
/// Backed by ChaCha8, whose output for a given seed is fixed across
/// platforms. A stream is owned by one thread at a time; independent
/// streams with distinct seeds may run in parallel.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// `count` i.i.d. draws from `N(mean, sd^2)`.
pub fn sample_normal(rng: &mut RngStream, mean: f64, sd: f64, count: usize) -> Result<Vec<f64>> {
    if !(sd.is_finite() && sd > 0.0) {
        return Err(Error::InvalidScale(sd));
    }
    Ok((0..count)
        .map(|_| mean + sd * rng.standard_normal())
        .collect())
}

/// Where a posterior sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    /// Independent draws from a known posterior.
    ExactIid,
    /// Retained states of a Metropolis chain.
    Mcmc {
        burn_in: usize,
        thinning: usize,
        acceptance_rate: f64,
    },
    /// Read from a file that carried no provenance metadata.
    External,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::ExactIid => write!(f, "provenance=exact-iid"),
            Provenance::Mcmc {
                burn_in,
                thinning,
                acceptance_rate,
            } => write!(
                f,
                "provenance=mcmc burn_in={burn_in} thinning={thinning} acceptance_rate={acceptance_rate}"
            ),
            Provenance::External => write!(f, "provenance=external"),
        }
    }
}

/// Draws from the posterior of a parameter, with at least two finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    draws: Vec<f64>,
    provenance: Provenance,
}

impl PosteriorSample {
    pub fn new(draws: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if draws.len() < 2 {
            return Err(Error::SampleTooSmall { got: draws.len() });
        }
        if let Some((index, &value)) = draws.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidDraw { index, value });
        }
        if let Provenance::Mcmc {
            acceptance_rate, ..
        } = provenance
        {
            if !(acceptance_rate > 0.0 && acceptance_rate < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "MCMC acceptance rate must lie in (0, 1), got {acceptance_rate}"
                )));
            }
        }
        Ok(PosteriorSample { draws, provenance })
    }

    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
}

/// I.i.d. draws from a Normal posterior.
pub fn sample_exact_posterior(
    rng: &mut RngStream,
    params: &PosteriorParams,
    n_draws: usize,
) -> Result<PosteriorSample> {
    if n_draws < 2 {
        return Err(Error::SampleTooSmall { got: n_draws });
    }
    let draws = sample_normal(rng, params.mean, params.sd(), n_draws)?;
    PosteriorSample::new(draws, Provenance::ExactIid)
}

/// Random-walk Metropolis settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MhConfig {
    pub proposal_sd: f64,
    pub burn_in: usize,
    pub thinning: usize,
    /// Number of transitions; the initial state is not counted.
    pub chain_length: usize,
    pub initial_theta: f64,
}

impl MhConfig {
    pub const DEFAULT_BURN_IN: usize = 1000;
    pub const DEFAULT_THINNING: usize = 1;

    /// Defaults around a posterior scale estimate: proposal sd `2.4 * scale`,
    /// 1000 burn-in iterations, no thinning.
    pub fn from_scale(scale: f64, chain_length: usize, initial_theta: f64) -> Self {
        MhConfig {
            proposal_sd: 2.4 * scale,
            burn_in: Self::DEFAULT_BURN_IN,
            thinning: Self::DEFAULT_THINNING,
            chain_length,
            initial_theta,
        }
    }

    pub fn retained(&self) -> usize {
        self.chain_length.saturating_sub(self.burn_in) / self.thinning.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.proposal_sd.is_finite() && self.proposal_sd > 0.0) {
            return Err(Error::InvalidScale(self.proposal_sd));
        }
        if self.thinning < 1 {
            return Err(Error::InvalidConfig("thinning must be at least 1".into()));
        }
        if self.chain_length < 2 {
            return Err(Error::InvalidConfig(
                "chain_length must be at least 2".into(),
            ));
        }
        if !self.initial_theta.is_finite() {
            return Err(Error::InvalidConfig("initial_theta must be finite".into()));
        }
        Ok(())
    }
}

/// Runs a random-walk Metropolis chain targeting the unnormalized posterior
/// `exp(log_likelihood + log_prior)`.
///
/// Iteration `t` (1-based) is kept when `t > burn_in` and
/// `(t - burn_in) % thinning == 0`, giving
/// `floor((chain_length - burn_in) / thinning)` draws.
pub fn metropolis_sample<M: BayesModel + ?Sized>(
    rng: &mut RngStream,
    model: &M,
    data: &Dataset,
    cfg: &MhConfig,
) -> Result<PosteriorSample> {
    cfg.validate()?;
    let retained = cfg.retained();
    if retained < 2 {
        return Err(Error::SampleTooSmall { got: retained });
    }

    let mut theta = cfg.initial_theta;
    let mut log_target = model.log_joint(theta, data);
    if !log_target.is_finite() {
        return Err(Error::BadInitialization { theta });
    }

    let mut draws = Vec::with_capacity(retained);
    let mut accepted = 0usize;
    for t in 1..=cfg.chain_length {
        let proposal = theta + cfg.proposal_sd * rng.standard_normal();
        let log_proposal = model.log_joint(proposal, data);
        let u = rng.uniform();
        // -inf and NaN targets compare false and are rejected
        if u.ln() < log_proposal - log_target {
            theta = proposal;
            log_target = log_proposal;
            accepted += 1;
        }
        if t > cfg.burn_in && (t - cfg.burn_in).is_multiple_of(cfg.thinning) {
            draws.push(theta);
        }
    }

    if accepted == 0 || accepted == cfg.chain_length {
        return Err(Error::DegenerateChain {
            accepted,
            proposals: cfg.chain_length,
        });
    }
    let provenance = Provenance::Mcmc {
        burn_in: cfg.burn_in,
        thinning: cfg.thinning,
        acceptance_rate: accepted as f64 / cfg.chain_length as f64,
    };
    PosteriorSample::new(draws, provenance)
}
