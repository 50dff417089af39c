//! The kernel-density plug-in estimator of the log marginal likelihood.
//!
//! For posterior draws `theta_i` and a posterior density estimate `q`, each
//! draw contributes the log weight
//!
//! ```text
//! log w_i = log f(x | theta_i) + log pi(theta_i) - log q(theta_i)
//! ```
//!
//! and the evidence estimate is `log((1/N) Σ exp(log w_i))`, computed with a
//! max shift so that likelihoods far below `f64::MIN_POSITIVE` stay usable.
//! With the exact posterior in place of `q` every weight equals the evidence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kde::{EvalMode, KdeConfig, PosteriorKde};
use crate::model::{BayesModel, Dataset, PosteriorParams};
use crate::sampling::{PosteriorSample, Provenance};

/// Density estimates at or below this value are treated as a support
/// mismatch between the sample and the density estimate.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// `m + ln Σ exp(v_i - m)` with `m = max v_i`.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    let m = max_finite(values)?;
    let sum: f64 = values.iter().map(|v| (v - m).exp()).sum();
    Ok(m + sum.ln())
}

/// `ln((1/N) Σ exp(v_i))`, the same max-shifted sum divided by `N` before
/// the logarithm.
pub fn log_mean_exp(values: &[f64]) -> Result<f64> {
    let m = max_finite(values)?;
    let sum: f64 = values.iter().map(|v| (v - m).exp()).sum();
    Ok(m + (sum / values.len() as f64).ln())
}

fn max_finite(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFiniteInput { index, value });
    }
    Ok(values.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// What to do when the density estimate falls to [`DENSITY_FLOOR`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FloorPolicy {
    /// Fail with [`Error::DensityFloorViolation`].
    #[default]
    Abort,
    /// Replace the density by the floor and count the intervention.
    Clamp,
}

/// Description of the density used in the weight denominators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DensitySource {
    ExactNormal { mean: f64, variance: f64 },
    Kde { bandwidth: f64, eval_mode: EvalMode },
    Custom,
}

/// Anything that can evaluate a posterior density at a point.
pub trait DensityEvaluator {
    fn density(&self, theta: f64) -> Result<f64>;

    fn source(&self) -> DensitySource {
        DensitySource::Custom
    }
}

impl<F> DensityEvaluator for F
where
    F: Fn(f64) -> f64,
{
    fn density(&self, theta: f64) -> Result<f64> {
        Ok(self(theta))
    }
}

impl DensityEvaluator for PosteriorParams {
    fn density(&self, theta: f64) -> Result<f64> {
        Ok(self.ln_pdf(theta).exp())
    }

    fn source(&self) -> DensitySource {
        DensitySource::ExactNormal {
            mean: self.mean,
            variance: self.variance,
        }
    }
}

impl DensityEvaluator for PosteriorKde {
    fn density(&self, theta: f64) -> Result<f64> {
        PosteriorKde::density(self, theta)
    }

    fn source(&self) -> DensitySource {
        DensitySource::Kde {
            bandwidth: self.bandwidth(),
            eval_mode: self.mode(),
        }
    }
}

/// Provenance carried from the weights into the estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateContext {
    pub model: String,
    pub sample: Provenance,
    pub density: DensitySource,
}

/// Per-draw log weights, in draw order.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeightSet {
    log_weights: Vec<f64>,
    n_clamped: usize,
    context: EstimateContext,
}

impl LogWeightSet {
    /// Wraps externally computed log weights; at least two, all finite.
    pub fn new(log_weights: Vec<f64>, n_clamped: usize, context: EstimateContext) -> Result<Self> {
        if log_weights.len() < 2 {
            return Err(Error::SampleTooSmall {
                got: log_weights.len(),
            });
        }
        if let Some((index, &value)) = log_weights.iter().enumerate().find(|(_, v)| !v.is_finite())
        {
            return Err(Error::NonFiniteInput { index, value });
        }
        Ok(LogWeightSet {
            log_weights,
            n_clamped,
            context,
        })
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn n_clamped(&self) -> usize {
        self.n_clamped
    }

    pub fn context(&self) -> &EstimateContext {
        &self.context
    }
}

/// Computes the log weights with [`FloorPolicy::Abort`].
pub fn compute_log_weights<M, D>(
    model: &M,
    data: &Dataset,
    sample: &PosteriorSample,
    density: &D,
) -> Result<LogWeightSet>
where
    M: BayesModel + ?Sized,
    D: DensityEvaluator + ?Sized,
{
    compute_log_weights_with(model, data, sample, density, FloorPolicy::Abort)
}

pub fn compute_log_weights_with<M, D>(
    model: &M,
    data: &Dataset,
    sample: &PosteriorSample,
    density: &D,
    policy: FloorPolicy,
) -> Result<LogWeightSet>
where
    M: BayesModel + ?Sized,
    D: DensityEvaluator + ?Sized,
{
    let mut n_clamped = 0;
    let mut log_weights = Vec::with_capacity(sample.len());
    for &theta in sample.draws() {
        let mut q = density.density(theta)?;
        if q.is_nan() || q <= DENSITY_FLOOR {
            match policy {
                FloorPolicy::Abort => {
                    return Err(Error::DensityFloorViolation { theta, density: q })
                }
                FloorPolicy::Clamp => {
                    q = DENSITY_FLOOR;
                    n_clamped += 1;
                }
            }
        }
        let lw = model.log_likelihood(theta, data) + model.log_prior(theta) - q.ln();
        if !lw.is_finite() {
            return Err(Error::NonFiniteWeight { theta });
        }
        log_weights.push(lw);
    }
    let context = EstimateContext {
        model: model.name(),
        sample: sample.provenance(),
        density: density.source(),
    };
    LogWeightSet::new(log_weights, n_clamped, context)
}

/// The evidence estimate with descriptive weight diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalEstimate {
    pub log_evidence: f64,
    pub n_samples: usize,
    /// Standard deviation of the log weights (divisor `N - 1`).
    pub log_weight_sd: f64,
    pub log_weight_min: f64,
    pub log_weight_max: f64,
    pub n_clamped: usize,
    pub context: EstimateContext,
}

pub fn estimate_log_marginal(weights: &LogWeightSet) -> MarginalEstimate {
    let lw = weights.log_weights();
    let n = lw.len() as f64;
    let (min, max) = lw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    // weights are validated nonempty and finite
    let raw = log_mean_exp(lw).expect("validated log weights");
    // a mean lies within the range; clamp away last-bit rounding
    let log_evidence = raw.clamp(min, max);
    let mean = lw.iter().sum::<f64>() / n;
    let var = lw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    MarginalEstimate {
        log_evidence,
        n_samples: lw.len(),
        log_weight_sd: var.sqrt(),
        log_weight_min: min,
        log_weight_max: max,
        n_clamped: weights.n_clamped(),
        context: weights.context().clone(),
    }
}

/// Plugs the exact Normal posterior density into the weights. For the
/// conjugate model this reproduces the closed-form evidence for any sample.
pub fn estimate_with_true_posterior<M: BayesModel + ?Sized>(
    model: &M,
    data: &Dataset,
    sample: &PosteriorSample,
    posterior: &PosteriorParams,
) -> Result<MarginalEstimate> {
    let weights = compute_log_weights(model, data, sample, posterior)?;
    Ok(estimate_log_marginal(&weights))
}

/// Fits a KDE to the sample and estimates the evidence with it.
pub fn estimate_with_kde<M: BayesModel + ?Sized>(
    model: &M,
    data: &Dataset,
    sample: &PosteriorSample,
    kde: &KdeConfig,
) -> Result<MarginalEstimate> {
    let density = PosteriorKde::fit(sample.draws(), kde)?;
    let weights = compute_log_weights(model, data, sample, &density)?;
    Ok(estimate_log_marginal(&weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NormalModel, NormalModelConfig};
    use crate::sampling::{sample_exact_posterior, sample_normal, RngStream};
    use proptest::prelude::*;

    fn ctx() -> EstimateContext {
        EstimateContext {
            model: "test".into(),
            sample: Provenance::ExactIid,
            density: DensitySource::Custom,
        }
    }

    fn reference_setup(seed: u64) -> (NormalModel, Dataset, PosteriorParams, RngStream) {
        let mut rng = RngStream::new(seed);
        let data = Dataset::from_values(sample_normal(&mut rng, -1.0, 3.0, 25).unwrap()).unwrap();
        let model = NormalModel::new(NormalModelConfig::new(3.0, 0.0, 10.0).unwrap()).unwrap();
        let post = model.posterior(&data);
        (model, data, post, rng)
    }

    #[test]
    fn lse_examples() {
        assert!(
            (log_sum_exp(&[-1000.0, -1000.0]).unwrap() - (-999.306_852_819_440_1)).abs() < 1e-10
        );
        assert_eq!(log_sum_exp(&[0.0]).unwrap(), 0.0);
        let v = log_sum_exp(&[1f64.ln(), 2f64.ln(), 3f64.ln()]).unwrap();
        assert!((v - 6f64.ln()).abs() < 1e-15);
        assert!((v - 1.791_759_5).abs() < 1e-7);
        assert_eq!(log_sum_exp(&[]), Err(Error::EmptyInput));
        assert!(log_sum_exp(&[1.0, f64::NAN]).is_err());
        assert!((log_sum_exp(&[700.0, 700.0]).unwrap() - (700.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn constant_weights() {
        let w = LogWeightSet::new(vec![-66.7; 10], 0, ctx()).unwrap();
        let e = estimate_log_marginal(&w);
        assert!((e.log_evidence - (-66.7)).abs() < 1e-12);
        assert!(e.log_weight_sd < 1e-12);
        assert_eq!(e.n_samples, 10);
    }

    #[test]
    fn arithmetic_mean_in_linear_domain() {
        let w = LogWeightSet::new(vec![2f64.ln(), 4f64.ln()], 0, ctx()).unwrap();
        let e = estimate_log_marginal(&w);
        assert!((e.log_evidence - 3f64.ln()).abs() < 1e-15);
        assert!((e.log_evidence - 1.098_612_3).abs() < 1e-7);
    }

    #[test]
    fn weight_set_validation() {
        assert!(LogWeightSet::new(vec![1.0], 0, ctx()).is_err());
        assert!(LogWeightSet::new(vec![1.0, f64::NEG_INFINITY], 0, ctx()).is_err());
    }

    #[test]
    fn exact_posterior_weights_are_constant() {
        let (model, data, post, mut rng) = reference_setup(3);
        let sample = sample_exact_posterior(&mut rng, &post, 500).unwrap();
        let w = compute_log_weights(&model, &data, &sample, &post).unwrap();
        let closed = model.log_marginal(&data);
        assert!(w.log_weights().iter().all(|lw| (lw - closed).abs() < 1e-9));
        assert_eq!(w.context().density, post.source());
    }

    #[test]
    fn zero_density_aborts_or_clamps() {
        let (model, data, post, mut rng) = reference_setup(4);
        let sample = sample_exact_posterior(&mut rng, &post, 20).unwrap();
        let first = sample.draws()[0];
        let holey = move |t: f64| {
            if t == first {
                0.0
            } else {
                post.ln_pdf(t).exp()
            }
        };
        match compute_log_weights(&model, &data, &sample, &holey) {
            Err(Error::DensityFloorViolation { theta, density }) => {
                assert_eq!(theta, first);
                assert_eq!(density, 0.0);
            }
            other => panic!("expected floor violation, got {other:?}"),
        }
        let w =
            compute_log_weights_with(&model, &data, &sample, &holey, FloorPolicy::Clamp).unwrap();
        assert_eq!(w.n_clamped(), 1);
        assert!(w.log_weights()[0] > 600.0);
    }

    #[test]
    fn true_posterior_small_case() {
        let model = NormalModel::new(NormalModelConfig::new(1.0, 0.0, 1.0).unwrap()).unwrap();
        let data = Dataset::from_values(vec![0.0]).unwrap();
        let post = model.posterior(&data);
        let sample = PosteriorSample::new(vec![-0.3, 1.1], Provenance::ExactIid).unwrap();
        let e = estimate_with_true_posterior(&model, &data, &sample, &post).unwrap();
        assert!((e.log_evidence - (-1.265_512_123_484_645_4)).abs() < 1e-10);
    }

    #[test]
    fn true_posterior_two_draws_reference_config() {
        let (model, data, post, mut rng) = reference_setup(5);
        let sample = sample_exact_posterior(&mut rng, &post, 2).unwrap();
        let e = estimate_with_true_posterior(&model, &data, &sample, &post).unwrap();
        assert!((e.log_evidence - model.log_marginal(&data)).abs() < 1e-10);
    }

    #[test]
    fn wrong_posterior_is_visible_in_diagnostics() {
        let (model, data, post, mut rng) = reference_setup(6);
        let sample = sample_exact_posterior(&mut rng, &post, 200).unwrap();
        let wrong = PosteriorParams {
            mean: post.mean + 1.0,
            variance: post.variance,
        };
        let e = estimate_with_true_posterior(&model, &data, &sample, &wrong).unwrap();
        assert!(e.log_evidence.is_finite());
        assert!((e.log_evidence - model.log_marginal(&data)).abs() > 1e-3);
        assert!(e.log_weight_sd > 0.1);
    }

    #[test]
    fn kde_weights_nearly_constant_on_reference_config() {
        let (model, data, post, mut rng) = reference_setup(1702);
        let sample = sample_exact_posterior(&mut rng, &post, 1000).unwrap();
        let e = estimate_with_kde(&model, &data, &sample, &KdeConfig::default()).unwrap();
        assert!(e.log_weight_sd < 0.5, "sd {}", e.log_weight_sd);
        assert!((e.log_evidence - model.log_marginal(&data)).abs() <= 0.05);
        assert!(matches!(
            e.context.density,
            DensitySource::Kde {
                eval_mode: EvalMode::Direct,
                ..
            }
        ));
    }

    proptest! {
        #[test]
        fn shift_moves_estimate(ws in prop::collection::vec(-50.0f64..50.0, 2..60), c in -500.0f64..500.0) {
            let a = estimate_log_marginal(&LogWeightSet::new(ws.clone(), 0, ctx()).unwrap());
            let shifted: Vec<f64> = ws.iter().map(|w| w + c).collect();
            let b = estimate_log_marginal(&LogWeightSet::new(shifted, 0, ctx()).unwrap());
            prop_assert!((b.log_evidence - a.log_evidence - c).abs() <= 1e-12 * (1.0 + c.abs() + a.log_evidence.abs()));
        }

        #[test]
        fn estimate_within_weight_range(ws in prop::collection::vec(-1e3f64..1e3, 2..60)) {
            let e = estimate_log_marginal(&LogWeightSet::new(ws, 0, ctx()).unwrap());
            prop_assert!(e.log_weight_min <= e.log_evidence && e.log_evidence <= e.log_weight_max);
        }

        #[test]
        fn permutation_invariance(ws in prop::collection::vec(-80.0f64..-40.0, 2..200), seed in any::<u64>()) {
            let a = estimate_log_marginal(&LogWeightSet::new(ws.clone(), 0, ctx()).unwrap());
            let mut perm = ws.clone();
            // Fisher-Yates driven by a seeded stream
            let mut rng = RngStream::new(seed);
            for i in (1..perm.len()).rev() {
                let j = (rng.uniform() * (i + 1) as f64) as usize;
                perm.swap(i, j.min(i));
            }
            let b = estimate_log_marginal(&LogWeightSet::new(perm, 0, ctx()).unwrap());
            prop_assert!((a.log_evidence - b.log_evidence).abs() <= 1e-12);
        }

        #[test]
        fn lse_matches_naive_where_safe(ws in prop::collection::vec(-20.0f64..20.0, 1..50)) {
            let naive = ws.iter().map(|w| w.exp()).sum::<f64>().ln();
            prop_assert!((log_sum_exp(&ws).unwrap() - naive).abs() <= 1e-12 * naive.abs().max(1.0));
        }
    }
}
