//! Command implementations behind the `kde-evidence` binary.
//!
//! Each command is a plain function returning a serializable report so the
//! pipelines can be driven from tests without spawning a process.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use kde_evidence::estimator::{estimate_with_kde, MarginalEstimate};
use kde_evidence::io::{read_sample_file, read_values_file, ReadError};
use kde_evidence::kde::{BandwidthRule, EvalMode, KdeConfig};
use kde_evidence::model::{Dataset, NormalModel, NormalModelConfig};
use kde_evidence::oracle::{default_quadrature_config, quadrature_log_marginal, QuadratureConfig};
use kde_evidence::sampling::{sample_exact_posterior, sample_normal, PosteriorSample, RngStream};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Numerical(#[from] kde_evidence::Error),
    #[error(transparent)]
    Read(#[from] ReadError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Read(_) | CliError::Io { .. } => 4,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "E_USAGE",
            CliError::Numerical(e) => e.code(),
            CliError::Read(ReadError::Io { .. }) | CliError::Io { .. } => "E_IO",
            CliError::Read(ReadError::Invalid(e)) => e.code(),
            CliError::Read(_) => "E_PARSE",
        }
    }

    /// One line: `CODE: message`.
    pub fn render(&self) -> String {
        let mut msg = self.to_string().replace('\n', " ");
        if let CliError::Numerical(kde_evidence::Error::DensityFloorViolation { .. }) = self {
            msg.push_str("; check that the sample was drawn from this model's posterior");
        }
        format!("{}: {}", self.code(), msg)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
}

/// Settings for the simulated experiment and the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    /// Separate stream for the posterior draws; when absent they continue
    /// the data stream.
    pub posterior_seed: Option<u64>,
    pub n_obs: usize,
    pub true_mean: f64,
    pub sigma: f64,
    pub theta0: f64,
    pub sigma0: f64,
    pub n_post: usize,
    pub kde: KdeConfig,
    pub output_format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1702,
            posterior_seed: None,
            n_obs: 25,
            true_mean: -1.0,
            sigma: 3.0,
            theta0: 0.0,
            sigma0: 10.0,
            n_post: 1000,
            kde: KdeConfig::default(),
            output_format: OutputFormat::Text,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_obs < 1 {
            return Err(usage("n_obs must be >= 1"));
        }
        check_n_post(self.n_post)?;
        if !self.true_mean.is_finite() {
            return Err(usage("true_mean must be finite"));
        }
        self.model_config()?;
        validate_kde(&self.kde)
    }

    pub fn model_config(&self) -> Result<NormalModelConfig, CliError> {
        NormalModelConfig::new(self.sigma, self.theta0, self.sigma0)
            .map_err(|e| usage(e.to_string()))
    }
}

fn check_n_post(n_post: usize) -> Result<(), CliError> {
    if n_post < 2 {
        return Err(usage(format!("n_post must be >= 2 (got {n_post})")));
    }
    Ok(())
}

fn validate_kde(kde: &KdeConfig) -> Result<(), CliError> {
    kde.validate()
        .map_err(|e| usage(format!("invalid KDE options: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_samples: usize,
    pub log_weight_sd: f64,
    pub log_weight_min: f64,
    pub log_weight_max: f64,
    pub n_clamped: usize,
    pub bandwidth: Option<f64>,
    pub estimate: MarginalEstimate,
}

impl From<&MarginalEstimate> for Diagnostics {
    fn from(e: &MarginalEstimate) -> Self {
        let bandwidth = match e.context.density {
            kde_evidence::estimator::DensitySource::Kde { bandwidth, .. } => Some(bandwidth),
            _ => None,
        };
        Diagnostics {
            n_samples: e.n_samples,
            log_weight_sd: e.log_weight_sd,
            log_weight_min: e.log_weight_min,
            log_weight_max: e.log_weight_max,
            n_clamped: e.n_clamped,
            bandwidth,
            estimate: e.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub samples: PathBuf,
    pub data: PathBuf,
    pub sigma: f64,
    pub theta0: f64,
    pub sigma0: f64,
    pub kde: KdeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum ReportConfig {
    Reproduce(RunConfig),
    Estimate(EstimateConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ReportConfig,
    pub log_theoretical: Option<f64>,
    pub log_estimate: f64,
    pub abs_error: Option<f64>,
    pub diagnostics: Diagnostics,
    pub version: String,
    pub timing_ms: f64,
}

impl ExperimentReport {
    fn new(
        config: ReportConfig,
        estimate: &MarginalEstimate,
        log_theoretical: Option<f64>,
        started: Instant,
    ) -> Self {
        ExperimentReport {
            config,
            log_theoretical,
            log_estimate: estimate.log_evidence,
            abs_error: log_theoretical.map(|t| (t - estimate.log_evidence).abs()),
            diagnostics: Diagnostics::from(estimate),
            version: VERSION.to_string(),
            timing_ms: started.elapsed().as_secs_f64() * 1e3,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(t) = self.log_theoretical {
            let _ = writeln!(s, "Theoretical:  {t:.5}");
        }
        let _ = writeln!(s, "Estimate:     {:.5}", self.log_estimate);
        if let Some(e) = self.abs_error {
            let _ = writeln!(s, "Abs. error:   {e:.3e}");
        }
        let d = &self.diagnostics;
        let _ = writeln!(
            s,
            "Draws: {}  log-weight sd: {:.3e}  range: [{:.5}, {:.5}]  clamped: {}",
            d.n_samples, d.log_weight_sd, d.log_weight_min, d.log_weight_max, d.n_clamped
        );
        if let Some(h) = d.bandwidth {
            let _ = writeln!(s, "Bandwidth:    {h:.6}");
        }
        let _ = writeln!(s, "Elapsed:      {:.1} ms", self.timing_ms);
        s
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => self.to_json() + "\n",
            OutputFormat::Text => self.to_text(),
        }
    }
}

/// Everything the reproduce pipeline produced.
#[derive(Debug, Clone)]
pub struct ReproduceOutcome {
    pub report: ExperimentReport,
    pub data: Dataset,
    pub sample: PosteriorSample,
}

/// Simulates data from `N(true_mean, sigma^2)`, draws from the exact
/// posterior, and compares the KDE estimate with the closed form.
pub fn cmd_reproduce(cfg: &RunConfig) -> Result<ReproduceOutcome, CliError> {
    let started = Instant::now();
    cfg.validate()?;
    let model = NormalModel::new(cfg.model_config()?)?;

    let mut rng = RngStream::new(cfg.seed);
    let data = Dataset::from_values(sample_normal(
        &mut rng,
        cfg.true_mean,
        cfg.sigma,
        cfg.n_obs,
    )?)?;
    let mut posterior_rng = match cfg.posterior_seed {
        Some(seed) => RngStream::new(seed),
        None => rng,
    };
    let sample = sample_exact_posterior(&mut posterior_rng, &model.posterior(&data), cfg.n_post)?;
    let estimate = estimate_with_kde(&model, &data, &sample, &cfg.kde)?;
    let report = ExperimentReport::new(
        ReportConfig::Reproduce(cfg.clone()),
        &estimate,
        Some(model.log_marginal(&data)),
        started,
    );
    Ok(ReproduceOutcome {
        report,
        data,
        sample,
    })
}

fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let file = read_values_file(path)?;
    Dataset::from_values(file.values).map_err(|e| CliError::Read(ReadError::Invalid(e)))
}

/// Estimates the evidence of the Normal-Normal model for `data` from an
/// externally produced posterior sample.
pub fn cmd_estimate(cfg: &EstimateConfig) -> Result<ExperimentReport, CliError> {
    let started = Instant::now();
    let model_cfg = NormalModelConfig::new(cfg.sigma, cfg.theta0, cfg.sigma0)
        .map_err(|e| usage(e.to_string()))?;
    validate_kde(&cfg.kde)?;
    let model = NormalModel::new(model_cfg)?;
    let data = read_dataset(&cfg.data)?;
    let sample = read_sample_file(&cfg.samples)?;
    let estimate = estimate_with_kde(&model, &data, &sample, &cfg.kde)?;
    Ok(ExperimentReport::new(
        ReportConfig::Estimate(cfg.clone()),
        &estimate,
        Some(model.log_marginal(&data)),
        started,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub data: PathBuf,
    pub sigma: f64,
    pub theta0: f64,
    pub sigma0: f64,
    pub center: Option<f64>,
    pub scale: Option<f64>,
    pub half_width_sds: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub config: OracleConfig,
    pub quadrature: QuadratureConfig,
    pub log_quadrature: f64,
    pub log_theoretical: f64,
    pub difference: f64,
    pub version: String,
    pub timing_ms: f64,
}

impl OracleReport {
    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => {
                serde_json::to_string_pretty(self).expect("report serializes") + "\n"
            }
            OutputFormat::Text => format!(
                "Quadrature:   {:.10}\nTheoretical:  {:.10}\nDifference:   {:.3e}\n",
                self.log_quadrature, self.log_theoretical, self.difference
            ),
        }
    }
}

/// Integrates likelihood times prior numerically and sets the result
/// against the closed form.
pub fn cmd_oracle(cfg: &OracleConfig) -> Result<OracleReport, CliError> {
    let started = Instant::now();
    let model_cfg = NormalModelConfig::new(cfg.sigma, cfg.theta0, cfg.sigma0)
        .map_err(|e| usage(e.to_string()))?;
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if !positive(cfg.abs_tol) {
        return Err(usage(format!(
            "abs_tol must be positive (got {})",
            cfg.abs_tol
        )));
    }
    if !positive(cfg.half_width_sds) {
        return Err(usage(format!(
            "half_width_sds must be positive (got {})",
            cfg.half_width_sds
        )));
    }
    if let Some(scale) = cfg.scale {
        if !positive(scale) {
            return Err(usage(format!("scale must be positive (got {scale})")));
        }
    }
    if cfg.center.is_some_and(|c| !c.is_finite()) {
        return Err(usage("center must be finite"));
    }
    let model = NormalModel::new(model_cfg)?;
    let data = read_dataset(&cfg.data)?;
    let post = model.posterior(&data);
    let defaults = default_quadrature_config(Some(&post), &model_cfg);
    let quad = QuadratureConfig {
        center: cfg.center.unwrap_or(defaults.center),
        scale: cfg.scale.unwrap_or(defaults.scale),
        half_width_sds: cfg.half_width_sds,
        abs_tol: cfg.abs_tol,
        max_depth: cfg.max_depth,
    };
    quad.validate().map_err(|e| usage(e.to_string()))?;
    let log_quadrature = quadrature_log_marginal(&model, &data, &quad)?;
    let log_theoretical = model.log_marginal(&data);
    Ok(OracleReport {
        config: cfg.clone(),
        quadrature: quad,
        log_quadrature,
        log_theoretical,
        difference: log_quadrature - log_theoretical,
        version: VERSION.to_string(),
        timing_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Posterior seed of one sweep cell:
/// `seed XOR splitmix64(splitmix64(n_post) XOR replication)`.
///
/// Re-run a single cell with `reproduce --seed <seed> --posterior-seed
/// <cell seed> --n-post <n_post>`.
pub fn sweep_cell_seed(seed: u64, n_post: usize, replication: usize) -> u64 {
    seed ^ splitmix64(splitmix64(n_post as u64) ^ replication as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_post: usize,
    pub replication: usize,
    pub seed: u64,
    pub log_estimate: f64,
    pub log_theoretical: f64,
    pub abs_error: f64,
}

/// Runs the reproduce pipeline for every `(n_post, replication)` cell on the
/// dataset drawn from `cfg.seed`, each cell with its own posterior stream.
/// Rows come back in `(n_post, replication)` order.
pub fn cmd_sweep(
    cfg: &RunConfig,
    n_post_list: &[usize],
    replications: usize,
) -> Result<Vec<SweepRow>, CliError> {
    if n_post_list.is_empty() {
        return Err(usage("n_post list is empty"));
    }
    for &n_post in n_post_list {
        check_n_post(n_post)?;
    }
    if replications < 1 {
        return Err(usage("replications must be >= 1"));
    }
    cfg.validate()?;

    let mut rows = Vec::with_capacity(n_post_list.len() * replications);
    for &n_post in n_post_list {
        for replication in 0..replications {
            let seed = sweep_cell_seed(cfg.seed, n_post, replication);
            let cell = RunConfig {
                posterior_seed: Some(seed),
                n_post,
                ..cfg.clone()
            };
            let report = cmd_reproduce(&cell)?.report;
            let log_theoretical = report.log_theoretical.expect("conjugate model");
            rows.push(SweepRow {
                n_post,
                replication,
                seed,
                log_estimate: report.log_estimate,
                log_theoretical,
                abs_error: (report.log_estimate - log_theoretical).abs(),
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("n_post,replication,seed,log_estimate,log_theoretical,abs_error\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:?},{:?},{:?}",
            r.n_post, r.replication, r.seed, r.log_estimate, r.log_theoretical, r.abs_error
        );
    }
    s
}

/// Median `abs_error` per `n_post`, in first-appearance order.
pub fn sweep_medians(rows: &[SweepRow]) -> Vec<(usize, f64)> {
    let mut order: Vec<usize> = Vec::new();
    for r in rows {
        if !order.contains(&r.n_post) {
            order.push(r.n_post);
        }
    }
    order
        .into_iter()
        .map(|n| {
            let mut errs: Vec<f64> = rows
                .iter()
                .filter(|r| r.n_post == n)
                .map(|r| r.abs_error)
                .collect();
            (n, median(&mut errs))
        })
        .collect()
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Parses `silverman` or a positive number.
pub fn parse_bandwidth(s: &str) -> Result<BandwidthRule, String> {
    if s.eq_ignore_ascii_case("silverman") {
        return Ok(BandwidthRule::Silverman);
    }
    match s.parse::<f64>() {
        Ok(h) if h.is_finite() && h > 0.0 => Ok(BandwidthRule::Fixed(h)),
        _ => Err(format!(
            "expected `silverman` or a positive bandwidth, got {s:?}"
        )),
    }
}

pub fn eval_mode_name(mode: EvalMode) -> &'static str {
    match mode {
        EvalMode::Direct => "direct",
        EvalMode::GridInterp => "grid-interp",
    }
}
