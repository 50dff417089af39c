use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kde_evidence::io::write_sample;
use kde_evidence::kde::{BandwidthRule, EvalMode, KdeConfig};
use kde_evidence_cli::{
    cmd_estimate, cmd_oracle, cmd_reproduce, cmd_sweep, eval_mode_name, parse_bandwidth, sweep_csv,
    CliError, EstimateConfig, OracleConfig, OutputFormat, RunConfig,
};

/// Marginal likelihood from posterior draws and a kernel density estimate.
#[derive(Parser)]
#[command(name = "kde-evidence", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the Normal-Normal experiment and compare with the closed form
    Reproduce(ReproduceArgs),
    /// Estimate the evidence from a posterior sample file
    Estimate(EstimateArgs),
    /// Integrate likelihood x prior numerically
    Oracle(OracleArgs),
    /// Repeat the experiment across posterior sample sizes; CSV on stdout
    Sweep(SweepArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Known observation noise sd
    #[arg(long, default_value_t = 3.0)]
    sigma: f64,
    /// Prior mean
    #[arg(long, default_value_t = 0.0)]
    theta0: f64,
    /// Prior sd
    #[arg(long, default_value_t = 10.0)]
    sigma0: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Direct,
    GridInterp,
}

#[derive(Args)]
struct KdeArgs {
    /// `silverman` or a fixed positive bandwidth
    #[arg(long, default_value = "silverman", value_parser = parse_bandwidth)]
    kde_bandwidth: BandwidthRule,
    /// Number of grid nodes
    #[arg(long, default_value_t = 401)]
    kde_grid_size: usize,
    /// Grid padding beyond the sample range, in bandwidths
    #[arg(long, default_value_t = 6.0)]
    kde_padding: f64,
    /// How the density is evaluated at the draws
    #[arg(long, value_enum, default_value = "direct")]
    eval_mode: Mode,
}

impl KdeArgs {
    fn config(&self) -> KdeConfig {
        KdeConfig {
            bandwidth: self.kde_bandwidth,
            grid_size: self.kde_grid_size,
            padding_bandwidths: self.kde_padding,
            eval_mode: match self.eval_mode {
                Mode::Direct => EvalMode::Direct,
                Mode::GridInterp => EvalMode::GridInterp,
            },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Output {
    Text,
    Json,
}

impl From<Output> for OutputFormat {
    fn from(o: Output) -> Self {
        match o {
            Output::Text => OutputFormat::Text,
            Output::Json => OutputFormat::Json,
        }
    }
}

#[derive(Args)]
struct ExperimentArgs {
    /// Seed of the data stream
    #[arg(long, default_value_t = 1702)]
    seed: u64,
    /// Seed of a separate posterior stream
    #[arg(long)]
    posterior_seed: Option<u64>,
    /// Number of observations
    #[arg(long, default_value_t = 25)]
    n_obs: usize,
    /// Mean the observations are drawn from
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    true_mean: f64,
    /// Posterior draws
    #[arg(long, default_value_t = 1000)]
    n_post: usize,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    kde: KdeArgs,
}

impl ExperimentArgs {
    fn config(&self, output: Output) -> RunConfig {
        RunConfig {
            seed: self.seed,
            posterior_seed: self.posterior_seed,
            n_obs: self.n_obs,
            true_mean: self.true_mean,
            sigma: self.model.sigma,
            theta0: self.model.theta0,
            sigma0: self.model.sigma0,
            n_post: self.n_post,
            kde: self.kde.config(),
            output_format: output.into(),
        }
    }
}

#[derive(Args)]
struct ReproduceArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long, value_enum, default_value = "text")]
    output: Output,
    /// Write the posterior draws to this file
    #[arg(long)]
    export_samples: Option<PathBuf>,
    /// Write the density grid as CSV to this file
    #[arg(long)]
    export_grid: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Posterior draws, one per line
    #[arg(long)]
    samples: PathBuf,
    /// Observations, one per line
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    kde: KdeArgs,
    #[arg(long, value_enum, default_value = "text")]
    output: Output,
}

#[derive(Args)]
struct OracleArgs {
    /// Observations, one per line
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Window center (default: posterior mean)
    #[arg(long, allow_hyphen_values = true)]
    center: Option<f64>,
    /// Window scale (default: max of posterior and prior sd)
    #[arg(long)]
    scale: Option<f64>,
    /// Window half-width in scales
    #[arg(long, default_value_t = 12.0)]
    half_width_sds: f64,
    /// Absolute tolerance on the log evidence
    #[arg(long, default_value_t = 1e-10)]
    abs_tol: f64,
    /// Maximum number of refinement levels
    #[arg(long, default_value_t = 40)]
    max_depth: u32,
    #[arg(long, value_enum, default_value = "text")]
    output: Output,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Comma-separated posterior sample sizes
    #[arg(long, value_delimiter = ',', default_value = "500,4000,32000")]
    n_post_list: Vec<usize>,
    /// Replications per sample size
    #[arg(long, default_value_t = 50)]
    replications: usize,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            context: format!("cannot create {}", path.display()),
            source,
        })
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        context: format!("cannot write {}", path.display()),
        source,
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Reproduce(args) => {
            let cfg = args.experiment.config(args.output);
            let outcome = cmd_reproduce(&cfg)?;
            if let Some(path) = &args.export_samples {
                let mut out = create(path)?;
                let extra = [
                    ("seed", cfg.seed.to_string()),
                    ("n_obs", cfg.n_obs.to_string()),
                ];
                write_sample(&mut out, &outcome.sample, &extra).map_err(io_err(path))?;
                out.flush().map_err(io_err(path))?;
            }
            if let Some(path) = &args.export_grid {
                let grid = kde_evidence::kde::kde_fit_grid(outcome.sample.draws(), &cfg.kde)?;
                let mut out = create(path)?;
                grid.write_csv(&mut out).map_err(io_err(path))?;
                out.flush().map_err(io_err(path))?;
            }
            Ok(outcome.report.render(cfg.output_format))
        }
        Command::Estimate(args) => {
            let cfg = EstimateConfig {
                samples: args.samples,
                data: args.data,
                sigma: args.model.sigma,
                theta0: args.model.theta0,
                sigma0: args.model.sigma0,
                kde: args.kde.config(),
            };
            Ok(cmd_estimate(&cfg)?.render(args.output.into()))
        }
        Command::Oracle(args) => {
            let cfg = OracleConfig {
                data: args.data,
                sigma: args.model.sigma,
                theta0: args.model.theta0,
                sigma0: args.model.sigma0,
                center: args.center,
                scale: args.scale,
                half_width_sds: args.half_width_sds,
                abs_tol: args.abs_tol,
                max_depth: args.max_depth,
            };
            Ok(cmd_oracle(&cfg)?.render(args.output.into()))
        }
        Command::Sweep(args) => {
            let cfg = args.experiment.config(Output::Text);
            eprintln!(
                "sweep: n_post {:?} x {} replications, eval mode {}",
                args.n_post_list,
                args.replications,
                eval_mode_name(cfg.kde.eval_mode)
            );
            let rows = cmd_sweep(&cfg, &args.n_post_list, args.replications)?;
            Ok(sweep_csv(&rows))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                let _ = e.print();
                return ExitCode::from(2);
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("E_USAGE: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(text) => {
            let mut stdout = io::stdout().lock();
            if stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .is_err()
            {
                return ExitCode::from(4);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.render());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
