use kde_evidence::model::{Dataset, NormalModel, NormalModelConfig, PosteriorParams};
use kde_evidence::sampling::{
    metropolis_sample, sample_exact_posterior, sample_normal, MhConfig, Provenance, RngStream,
};
use statrs::distribution::{ContinuousCDF, Normal};

fn reference_target(seed: u64) -> (NormalModel, Dataset, PosteriorParams) {
    let mut rng = RngStream::new(seed);
    let data = Dataset::from_values(sample_normal(&mut rng, -1.0, 3.0, 25).unwrap()).unwrap();
    let model = NormalModel::new(NormalModelConfig::new(3.0, 0.0, 10.0).unwrap()).unwrap();
    let post = model.posterior(&data);
    (model, data, post)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the mean from non-overlapping batch means.
fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = xs.chunks_exact(size).map(mean).collect();
    (variance(&means) / means.len() as f64).sqrt()
}

/// Two-sided one-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic critical value of the KS statistic at significance `alpha`.
fn ks_critical(alpha: f64, n: usize) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / (n as f64).sqrt()
}

#[test]
fn exact_sampler_moments_within_four_standard_errors() {
    for seed in [11u64, 12, 13] {
        let (_, _, post) = reference_target(seed);
        let n = 100_000;
        let s = sample_exact_posterior(&mut RngStream::new(seed + 1000), &post, n).unwrap();
        let se_mean = (post.variance / n as f64).sqrt();
        let se_var = post.variance * (2.0 / (n - 1) as f64).sqrt();
        assert!((mean(s.draws()) - post.mean).abs() < 4.0 * se_mean);
        assert!((variance(s.draws()) - post.variance).abs() < 4.0 * se_var);
    }
}

#[test]
fn metropolis_mean_matches_closed_form_posterior() {
    let (model, data, post) = reference_target(1702);
    let cfg = MhConfig {
        proposal_sd: 2.0 * post.sd(),
        burn_in: 5000,
        thinning: 5,
        chain_length: 50_000,
        initial_theta: 0.0,
    };
    let s = metropolis_sample(&mut RngStream::new(21), &model, &data, &cfg).unwrap();
    assert_eq!(s.len(), 9000);
    let se = batch_means_se(s.draws(), 30);
    let m = mean(s.draws());
    assert!(
        (m - post.mean).abs() < 4.0 * se,
        "mean {m} vs {} (se {se})",
        post.mean
    );
}

#[test]
fn metropolis_passes_ks_against_closed_form_posterior() {
    let (model, data, post) = reference_target(1702);
    let truth = Normal::new(post.mean, post.sd()).unwrap();
    for seed in [31u64, 32, 33] {
        let cfg = MhConfig {
            proposal_sd: 2.4 * post.sd(),
            burn_in: 1000,
            thinning: 10,
            chain_length: 1000 + 10 * 10_000,
            initial_theta: 0.0,
        };
        let s = metropolis_sample(&mut RngStream::new(seed), &model, &data, &cfg).unwrap();
        assert_eq!(s.len(), 10_000);
        let d = ks_statistic(s.draws(), |x| truth.cdf(x));
        let crit = ks_critical(0.001, s.len());
        assert!(d < crit, "seed {seed}: D = {d} >= {crit}");
    }
}

#[test]
fn acceptance_rate_stays_moderate() {
    let (model, data, post) = reference_target(1702);
    for factor in [0.5, 1.0, 2.0, 5.0] {
        let cfg = MhConfig {
            proposal_sd: factor * post.sd(),
            ..MhConfig::from_scale(post.sd(), 20_000, post.mean)
        };
        let s = metropolis_sample(&mut RngStream::new(41), &model, &data, &cfg).unwrap();
        match s.provenance() {
            Provenance::Mcmc {
                acceptance_rate, ..
            } => {
                assert!(
                    acceptance_rate > 0.05 && acceptance_rate < 0.95,
                    "factor {factor}: rate {acceptance_rate}"
                );
            }
            other => panic!("unexpected provenance {other:?}"),
        }
    }
}

#[test]
fn ks_helper_sanity() {
    // exact draws must pass, shifted draws must fail
    let (_, _, post) = reference_target(5);
    let truth = Normal::new(post.mean, post.sd()).unwrap();
    let s = sample_exact_posterior(&mut RngStream::new(77), &post, 10_000).unwrap();
    assert!(ks_statistic(s.draws(), |x| truth.cdf(x)) < ks_critical(0.001, 10_000));
    let shifted: Vec<f64> = s.draws().iter().map(|x| x + 0.2 * post.sd()).collect();
    assert!(ks_statistic(&shifted, |x| truth.cdf(x)) > ks_critical(0.001, 10_000));
}
