use kde_evidence::estimator::{estimate_with_kde, estimate_with_true_posterior};
use kde_evidence::kde::{EvalMode, KdeConfig};
use kde_evidence::model::{Dataset, NormalModel, NormalModelConfig};
use kde_evidence::sampling::{
    metropolis_sample, sample_exact_posterior, sample_normal, MhConfig, PosteriorSample,
    Provenance, RngStream,
};
use proptest::prelude::*;

fn reference_setup(seed: u64) -> (NormalModel, Dataset, RngStream) {
    let mut rng = RngStream::new(seed);
    let data = Dataset::from_values(sample_normal(&mut rng, -1.0, 3.0, 25).unwrap()).unwrap();
    let model = NormalModel::new(NormalModelConfig::new(3.0, 0.0, 10.0).unwrap()).unwrap();
    (model, data, rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn exact_plug_in_reproduces_closed_form(
        seed in any::<u64>(),
        n in 1usize..60,
        true_mean in -10.0f64..10.0,
        sigma in 0.1f64..10.0,
        theta0 in -10.0f64..10.0,
        sigma0 in 0.1f64..30.0,
        n_draws in 2usize..200,
    ) {
        let mut rng = RngStream::new(seed);
        let data = Dataset::from_values(sample_normal(&mut rng, true_mean, sigma, n).unwrap()).unwrap();
        let model = NormalModel::new(NormalModelConfig::new(sigma, theta0, sigma0).unwrap()).unwrap();
        let post = model.posterior(&data);
        let sample = sample_exact_posterior(&mut rng, &post, n_draws).unwrap();
        let e = estimate_with_true_posterior(&model, &data, &sample, &post).unwrap();
        let closed = model.log_marginal(&data);
        prop_assert!((e.log_evidence - closed).abs() <= 1e-10, "{} vs {}", e.log_evidence, closed);
        prop_assert!(e.log_weight_min <= e.log_evidence && e.log_evidence <= e.log_weight_max);
    }
}

#[test]
fn reference_pipeline_within_tolerance_at_fixed_seeds() {
    for seed in [1702u64, 1, 2, 3, 42] {
        let (model, data, mut rng) = reference_setup(seed);
        let sample = sample_exact_posterior(&mut rng, &model.posterior(&data), 1000).unwrap();
        for mode in [EvalMode::Direct, EvalMode::GridInterp] {
            let cfg = KdeConfig {
                eval_mode: mode,
                ..KdeConfig::default()
            };
            let e = estimate_with_kde(&model, &data, &sample, &cfg).unwrap();
            let err = (e.log_evidence - model.log_marginal(&data)).abs();
            assert!(err <= 0.05, "seed {seed} {mode:?}: error {err}");
            assert!(e.log_weight_sd < 0.5);
        }
    }
}

#[test]
fn metropolis_sample_also_works() {
    let (model, data, _) = reference_setup(1702);
    let post = model.posterior(&data);
    let cfg = MhConfig {
        thinning: 10,
        ..MhConfig::from_scale(post.sd(), 1000 + 10 * 4000, post.mean)
    };
    let sample = metropolis_sample(&mut RngStream::new(8), &model, &data, &cfg).unwrap();
    let e = estimate_with_kde(&model, &data, &sample, &KdeConfig::default()).unwrap();
    assert!((e.log_evidence - model.log_marginal(&data)).abs() <= 0.05);
    assert!(matches!(
        e.context.sample,
        Provenance::Mcmc { thinning: 10, .. }
    ));
}

#[test]
fn prior_draws_inflate_weight_spread() {
    let (model, data, mut rng) = reference_setup(1702);
    let post = model.posterior(&data);
    let matched = sample_exact_posterior(&mut rng, &post, 1000).unwrap();
    let prior_draws = PosteriorSample::new(
        sample_normal(&mut rng, 0.0, 10.0, 1000).unwrap(),
        Provenance::External,
    )
    .unwrap();
    let cfg = KdeConfig::default();
    let good = estimate_with_kde(&model, &data, &matched, &cfg).unwrap();
    let bad = estimate_with_kde(&model, &data, &prior_draws, &cfg).unwrap();
    assert!(bad.log_weight_sd > good.log_weight_sd);
}

#[test]
fn large_n_stays_finite_in_log_space() {
    // likelihood around exp(-14000): unusable in linear space
    let mut rng = RngStream::new(5);
    let data = Dataset::from_values(sample_normal(&mut rng, 2.0, 3.0, 5000).unwrap()).unwrap();
    let model = NormalModel::new(NormalModelConfig::new(3.0, 0.0, 10.0).unwrap()).unwrap();
    let closed = model.log_marginal(&data);
    assert!(closed < -10_000.0);
    let sample = sample_exact_posterior(&mut rng, &model.posterior(&data), 1000).unwrap();
    let e = estimate_with_kde(&model, &data, &sample, &KdeConfig::default()).unwrap();
    assert!((e.log_evidence - closed).abs() <= 0.05);
}
