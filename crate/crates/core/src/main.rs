use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hawkes_spectral::analysis::{convergence_study, default_fit_range, delta_sweep, pointwise_error_samples};
use hawkes_spectral::covariance::CovarianceConfig;
use hawkes_spectral::error::{HawkesError, Result};
use hawkes_spectral::io::{
    read_covariance, read_kernel, write_covariance, write_events, write_json, write_kernel, write_table,
    DEFAULT_MIN_EVENTS,
};
use hawkes_spectral::kernels::HawkesModel;
use hawkes_spectral::pipeline::{
    average_days, estimate_kernel, fit_columns, load_days, run_pipeline, InputKind, Mode, RunConfig,
};
use hawkes_spectral::simulator::{simulate, SimConfig};

#[derive(Parser)]
#[command(name = "hawkes-spectral", version, about = "Simulate Hawkes processes and estimate their kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Grid {
    /// Bin width in seconds [default: delta]
    #[arg(long)]
    h: Option<f64>,
    /// Lag step in seconds
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Largest lag in seconds
    #[arg(long, default_value_t = 2.0)]
    tau_max: f64,
}

impl Grid {
    fn config(self) -> CovarianceConfig {
        CovarianceConfig { h: self.h.unwrap_or(self.delta), delta: self.delta, tau_max: self.tau_max }
    }
}

#[derive(Args)]
struct Inputs {
    /// Event CSV (`component,timestamp`) or price CSV (`timestamp,price`)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Kind::Events)]
    input_kind: Kind,
    #[arg(long, value_enum, default_value_t = ModeArg::OneD)]
    mode: ModeArg,
    /// JSON list of `{label, start, end}` day windows
    #[arg(long)]
    windows: Option<PathBuf>,
    /// Days with fewer events are dropped
    #[arg(long, default_value_t = DEFAULT_MIN_EVENTS)]
    min_events: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(name = "1d")]
    OneD,
    #[value(name = "2d-bisym")]
    TwoDBisym,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::OneD => Mode::OneD,
            ModeArg::TwoDBisym => Mode::TwoDBisym,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Events,
    Prices,
}

#[derive(Clone, Copy, ValueEnum)]
enum Study {
    Convergence,
    Pointwise,
    DeltaSweep,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a sample path to `events.csv`
    Simulate {
        /// Model JSON, inline or a file path
        #[arg(long)]
        kernel_spec: String,
        /// Sample length in seconds
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        burn_in: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Day-averaged covariance to `covariance.csv`
    Cov {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        out: PathBuf,
    },
    /// Kernel estimate from a covariance CSV to `kernel.csv`
    Estimate {
        /// Covariance CSV with its JSON sidecar
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::OneD)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Power-law fit of a kernel CSV to `fit.json`
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// `t_lo:t_hi` [default: 2Δ:τmax/2]
        #[arg(long, value_parser = parse_range)]
        fit_range: Option<(f64, f64)>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo error studies on a scalar model
    Errors {
        #[arg(long)]
        kernel_spec: String,
        #[arg(long, value_enum)]
        study: Study,
        #[command(flatten)]
        grid: Grid,
        /// Sample lengths; the first is used by the pointwise and delta studies
        #[arg(long, value_delimiter = ',', default_value = "1e3,3e3,1e4,3e4,1e5")]
        horizons: Vec<f64>,
        /// First seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of seeds
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1.0")]
        t_values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.15,0.3,0.6")]
        deltas: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Events or prices to covariance, kernel, fit and diagnostics
    Pipeline {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        grid: Grid,
        #[arg(long, value_parser = parse_range)]
        fit_range: Option<(f64, f64)>,
        /// Recorded in the diagnostics
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected t_lo:t_hi, got `{s}`"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("t_lo: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("t_hi: {e}"))?;
    Ok((lo, hi))
}

fn load_model(arg: &str) -> Result<HawkesModel> {
    if arg.trim_start().starts_with('{') {
        HawkesModel::from_json(arg)
    } else {
        HawkesModel::from_json(&std::fs::read_to_string(arg)?)
    }
}

fn run_config(inputs: &Inputs, grid: Grid, out: &Path) -> RunConfig {
    let mut cfg = RunConfig::new(&inputs.input, out, grid.config(), inputs.mode.into());
    cfg.input_kind = match inputs.input_kind {
        Kind::Events => InputKind::Events,
        Kind::Prices => InputKind::Prices,
    };
    cfg.windows = inputs.windows.clone();
    cfg.min_events = inputs.min_events;
    cfg
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { kernel_spec, horizon, seed, burn_in, out } => {
            let model = load_model(&kernel_spec)?;
            let mut cfg = SimConfig::new(horizon, seed);
            cfg.burn_in = burn_in;
            let sim = simulate(&model.kernel, &model.mu, &cfg)?;
            std::fs::create_dir_all(&out)?;
            write_events(&out.join("events.csv"), &sim.events)?;
            write_json(&out.join("simulation.json"), &sim.meta)?;
            log::info!("{} events", sim.events.total_events());
        }
        Command::Cov { inputs, grid, out } => {
            let cfg = run_config(&inputs, grid, &out);
            cfg.validate()?;
            let (days, dropped) = load_days(&cfg, "-")?;
            let avg = average_days(&days, &cfg.covariance, cfg.mode, "-")?;
            std::fs::create_dir_all(&out)?;
            write_covariance(&out.join("covariance.csv"), &avg.covariance)?;
            write_json(
                &out.join("days.json"),
                &serde_json::json!({ "days": avg.days, "dropped": dropped, "bisymmetry": avg.bisymmetry }),
            )?;
        }
        Command::Estimate { input, mode, out } => {
            let cov = read_covariance(&input)?;
            let lambda_bar = cov.lambda_bar.iter().sum::<f64>() / cov.n as f64;
            let kernel = estimate_kernel(&cov, lambda_bar, mode.into())?;
            std::fs::create_dir_all(&out)?;
            write_kernel(&out.join("kernel.csv"), &kernel)?;
        }
        Command::Fit { input, fit_range, out } => {
            let kernel = read_kernel(&input)?;
            let d = &kernel.diagnostics;
            let (lo, hi) = fit_range.unwrap_or_else(|| default_fit_range(d.delta, d.tau_max));
            let fits = fit_columns(&kernel, lo, hi)?;
            std::fs::create_dir_all(&out)?;
            write_json(&out.join("fit.json"), &fits)?;
        }
        Command::Errors { kernel_spec, study, grid, horizons, seed, seeds, t_values, deltas, out } => {
            let model = load_model(&kernel_spec)?;
            let cfg = grid.config();
            let seeds: Vec<u64> = (seed..seed + seeds).collect();
            let horizon = *horizons.first().ok_or_else(|| HawkesError::Validation("no horizons given".into()))?;
            std::fs::create_dir_all(&out)?;
            match study {
                Study::Convergence => {
                    let res = convergence_study(&model.kernel, &model.mu, &horizons, &seeds, &cfg)?;
                    write_table(
                        &out.join("convergence.csv"),
                        &["T", "seed", "e2"],
                        res.points.iter().map(|p| vec![p.horizon, p.seed as f64, p.e2]),
                    )?;
                    write_json(&out.join("convergence.json"), &res)?;
                }
                Study::Pointwise => {
                    let res = pointwise_error_samples(&model.kernel, &model.mu, &cfg, horizon, &seeds, &t_values)?;
                    write_table(
                        &out.join("qq.csv"),
                        &["t", "empirical", "normal"],
                        res.iter().flat_map(|p| p.qq.iter().map(move |&(e, q)| vec![p.t, e, q])),
                    )?;
                    write_json(&out.join("pointwise.json"), &res)?;
                }
                Study::DeltaSweep => {
                    let res = delta_sweep(&model.kernel, &model.mu, horizon, &deltas, cfg.tau_max, &seeds)?;
                    write_table(
                        &out.join("delta_sweep.csv"),
                        &["delta", "e2_mean"],
                        res.rows.iter().map(|r| vec![r.delta, r.e2_mean]),
                    )?;
                    write_json(&out.join("delta_sweep.json"), &res)?;
                }
            }
        }
        Command::Pipeline { inputs, grid, fit_range, seed, out } => {
            let mut cfg = run_config(&inputs, grid, &out);
            cfg.fit_range = fit_range;
            cfg.seed = seed;
            let res = run_pipeline(&cfg)?;
            log::info!("lambda_bar {:.6}, {} days used, {} dropped", res.lambda_bar, res.days.len(), res.dropped.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
