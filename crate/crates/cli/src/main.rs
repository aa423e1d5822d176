//! Command-line surface: train the scoring network, scan spectra, run
//! Monte-Carlo benchmarks, and inspect model files.
//!
//! Exit codes: 0 success, 2 usage error, 3 runtime error, 4 I/O error.

mod config;

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use config::RunConfig;
use sp2net::array::make_ula;
use sp2net::bench::{emit_results, run_experiment, ExperimentSpec, Method};
use sp2net::bartlett::bartlett_spectrum;
use sp2net::infer::net_spectrum;
use sp2net::net::{load_model, save_model, ModelParams};
use sp2net::rng::RngState;
use sp2net::scenario::{scenario_from_line, sigma_for_snr_db, synthesize_snapshot, Scenario, Source};
use sp2net::sparse::{build_manifold_matrix, solve_bpdn, sparse_spectrum};
use sp2net::spectrum::{find_peaks, AngleGrid, Spectrum};
use sp2net::train::{train, TargetSpec};
use sp2net::Error;

#[derive(Parser)]
#[command(name = "sp2net", version, about = "Single-snapshot DOA estimation toolkit")]
struct Cli {
    /// Worker thread count (default: available parallelism). Results do not
    /// depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the scoring network and write the best-validation checkpoint.
    Train(TrainArgs),
    /// Scan a spatial spectrum for one scenario and write it as two-column text.
    Spectrum(SpectrumArgs),
    /// Run a Monte-Carlo RMSE benchmark and emit CSVs plus a run manifest.
    Benchmark(BenchmarkArgs),
    /// Print the header of a model file.
    ModelInfo(ModelInfoArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Where to write the trained model.
    #[arg(long)]
    output: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured iteration budget.
    #[arg(long)]
    iterations: Option<usize>,
    /// Write the training log to this file.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Save improving checkpoints into this directory.
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Estimator: bartlett, sparse, or sp2net.
    #[arg(long)]
    method: String,
    /// Optional TOML configuration (sparse solver settings).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inline scenario: comma-separated source angles in degrees.
    #[arg(long, conflicts_with = "scenario_file")]
    angles: Option<String>,
    /// First-source SNR in dB for the inline scenario.
    #[arg(long)]
    snr: Option<f64>,
    /// Use a noiseless snapshot for the inline scenario.
    #[arg(long, conflicts_with = "snr")]
    noiseless: bool,
    /// Read the scenario from the first line of this file.
    #[arg(long)]
    scenario_file: Option<PathBuf>,
    /// Seed for the inline scenario's phases and noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 45.0)]
    grid_start: f64,
    #[arg(long, default_value_t = 135.0)]
    grid_stop: f64,
    #[arg(long, default_value_t = 0.01)]
    grid_step: f64,
    /// Model file (required for sp2net).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Also print the Q strongest peaks.
    #[arg(long)]
    peaks: Option<usize>,
    /// Output spectrum file.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// TOML configuration file (defaults apply when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use a built-in experiment preset: single_120, two_100_105,
    /// three_60_90_95, or three_63_67_72.
    #[arg(long)]
    preset: Option<String>,
    /// Model file (required when the sp2net method is requested).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output directory for CSVs, spectra, and the manifest.
    #[arg(long)]
    output_dir: PathBuf,
    /// Override trials per SNR.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the method list, comma-separated.
    #[arg(long)]
    methods: Option<String>,
    /// Override the SNR grid, comma-separated dB values.
    #[arg(long)]
    snrs: Option<String>,
    /// Override the seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ModelInfoArgs {
    path: PathBuf,
}

enum CliError {
    Usage(String),
    Runtime(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) | CliError::Io(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        sp2net::configure_threads(n);
    }
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::ModelInfo(args) => cmd_model_info(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message());
        std::process::exit(e.code());
    }
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&args.config).map_err(usage)?;
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
        cfg.apply_seed_override();
    }
    if let Some(iters) = args.iterations {
        cfg.train.max_iterations = iters;
    }
    if args.log.is_some() {
        cfg.train.log_path = args.log;
    }
    if args.checkpoint_dir.is_some() {
        cfg.train.checkpoint_dir = args.checkpoint_dir;
    }

    let m = cfg.num_elements();
    let geom = make_ula(m).map_err(CliError::from)?;
    let target = TargetSpec::new(cfg.target.m_target).map_err(CliError::from)?;
    let dims = cfg.network.layer_dims(m);
    let mut init_rng = RngState::with_stream(cfg.train.seed, 0x696e_6974);
    let model = ModelParams::init_random(dims, cfg.network.skip_pairs.clone(), &mut init_rng)
        .map_err(|e| usage(format!("invalid network section: {e}")))?;

    eprintln!(
        "training {} parameters for up to {} iterations (seed {})",
        model.num_parameters(),
        cfg.train.max_iterations,
        cfg.train.seed
    );
    let outcome = train(model, &cfg.train, &target, &geom).map_err(CliError::from)?;
    save_model(&outcome.params, &args.output).map_err(CliError::from)?;
    println!(
        "best validation weighted MSE {} at iteration {} (baseline {}); model written to {}",
        outcome.best_val_mse,
        outcome.best_iteration,
        outcome.baseline_val_mse,
        args.output.display()
    );
    if let Some(reason) = outcome.diverged {
        eprintln!("training aborted: {reason}; best checkpoint saved");
        return Err(CliError::Runtime(format!("training aborted: {reason}")));
    }
    Ok(())
}

fn inline_scenario(args: &SpectrumArgs) -> Result<Scenario, CliError> {
    let angles_text = args
        .angles
        .as_ref()
        .ok_or_else(|| usage("provide either --angles or --scenario-file"))?;
    let mut angles = Vec::new();
    for part in angles_text.split(',') {
        let v: f64 = part
            .trim()
            .parse()
            .map_err(|e| usage(format!("bad angle '{part}': {e}")))?;
        angles.push(v);
    }
    if angles.is_empty() {
        return Err(usage("--angles needs at least one value"));
    }
    let sigma_v = if args.noiseless {
        0.0
    } else {
        let snr = args.snr.ok_or_else(|| usage("provide --snr or --noiseless"))?;
        sigma_for_snr_db(snr)
    };
    let mut rng = RngState::substream(args.seed, &[0xC11]);
    let sources: Vec<Source> = angles
        .iter()
        .map(|&theta_deg| Source {
            theta_deg,
            amplitude: Complex64::from_polar(
                1.0,
                rng.uniform(0.0, 2.0 * std::f64::consts::PI),
            ),
        })
        .collect();
    let geom = make_ula(16).map_err(CliError::from)?;
    let snapshot = synthesize_snapshot(&geom, &sources, sigma_v, &mut rng).map_err(CliError::from)?;
    Ok(Scenario {
        sources,
        sigma_v,
        snr_db: args.snr.unwrap_or(f64::INFINITY),
        snapshot,
    })
}

fn cmd_spectrum(args: SpectrumArgs) -> Result<(), CliError> {
    let method = Method::from_str(&args.method).map_err(|e| usage(e.to_string()))?;
    let cfg = match &args.config {
        Some(path) => RunConfig::load(path).map_err(usage)?,
        None => RunConfig::default(),
    };
    let scenario = match &args.scenario_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
            let first = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .ok_or_else(|| usage(format!("{} contains no scenario line", path.display())))?;
            scenario_from_line(first).map_err(|e| usage(e.to_string()))?
        }
        None => inline_scenario(&args)?,
    };
    let m = scenario.snapshot.len();
    let geom = make_ula(m).map_err(CliError::from)?;
    let grid = AngleGrid::uniform(args.grid_start, args.grid_stop, args.grid_step)
        .map_err(|e| usage(e.to_string()))?;

    let spectrum: Spectrum = match method {
        Method::Bartlett => bartlett_spectrum(&geom, &scenario.snapshot, &grid)?,
        Method::Sparse => {
            if scenario.sigma_v == 0.0 {
                eprintln!(
                    "warning: sigma_v = 0; the sparse solver applies its noise floor {}",
                    cfg.experiment.sparse.sigma_floor
                );
            }
            let manifold = build_manifold_matrix(&geom, &grid)?;
            let solution = solve_bpdn(
                &manifold,
                &scenario.snapshot,
                scenario.sigma_v,
                &cfg.experiment.sparse,
            )?;
            if !solution.converged {
                eprintln!(
                    "warning: sparse solver stopped at {} iterations without meeting tolerances \
                     (primal {:.3e}, dual {:.3e})",
                    solution.iterations_used, solution.primal_residual, solution.dual_residual
                );
            }
            sparse_spectrum(&solution, &grid)?
        }
        Method::Sp2net => {
            let path = args
                .model
                .as_ref()
                .ok_or_else(|| usage("--method sp2net requires --model"))?;
            let model = load_model(path)?;
            net_spectrum(&model, &geom, &scenario.snapshot, scenario.sigma_v, &grid)?
        }
    };

    let metadata = format!(
        "angles={:?} sigma_v={} grid={}..{}step{}",
        scenario.sources.iter().map(|s| s.theta_deg).collect::<Vec<_>>(),
        scenario.sigma_v,
        args.grid_start,
        args.grid_stop,
        args.grid_step
    );
    std::fs::write(&args.output, spectrum.to_text(method.name(), &metadata))
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", args.output.display())))?;

    if let Some(q) = args.peaks {
        let est = find_peaks(&spectrum, q).map_err(|e| usage(e.to_string()))?;
        for (theta, score) in est.angles.iter().zip(&est.scores) {
            println!("peak {theta} {score}");
        }
    }
    println!(
        "wrote {} ({} angles, method {})",
        args.output.display(),
        grid.len(),
        method
    );
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(name) = &args.preset {
        let preset = ExperimentSpec::preset(name).ok_or_else(|| {
            usage(format!(
                "unknown preset '{name}', valid presets: {}",
                ExperimentSpec::PRESET_NAMES.join(", ")
            ))
        })?;
        // Presets fix the scenario; solver settings come from the config.
        cfg.experiment = ExperimentSpec {
            sparse: cfg.experiment.sparse.clone(),
            seed: cfg.experiment.seed,
            ..preset
        };
    }
    if let Some(trials) = args.trials {
        cfg.experiment.trials_per_snr = trials;
    }
    if let Some(methods) = &args.methods {
        let mut parsed = Vec::new();
        for part in methods.split(',') {
            parsed.push(Method::from_str(part.trim()).map_err(|e| usage(e.to_string()))?);
        }
        cfg.experiment.methods = parsed;
    }
    if let Some(snrs) = &args.snrs {
        let mut parsed = Vec::new();
        for part in snrs.split(',') {
            let v: f64 = part
                .trim()
                .parse()
                .map_err(|e| usage(format!("bad SNR '{part}': {e}")))?;
            parsed.push(v);
        }
        cfg.experiment.snr_grid_db = parsed;
    }
    if let Some(seed) = args.seed {
        cfg.experiment.seed = seed;
    }

    let model = match &args.model {
        Some(path) => Some(load_model(path)?),
        None => None,
    };
    if cfg.experiment.methods.contains(&Method::Sp2net) && model.is_none() {
        return Err(usage("the sp2net method requires --model"));
    }

    let result = run_experiment(&cfg.experiment, model.as_ref())?;
    let files = emit_results(&result, &cfg.experiment, &args.output_dir)?;
    println!(
        "{} trials x {} methods complete; wrote {} files to {}",
        cfg.experiment.snr_grid_db.len() * cfg.experiment.trials_per_snr,
        cfg.experiment.methods.len(),
        files.len(),
        args.output_dir.display()
    );
    for row in &result.rmse_table {
        println!(
            "rmse method={} snr_db={} rmse_deg={} trials={}",
            row.method, row.snr_db, row.rmse_deg, row.trials
        );
    }
    Ok(())
}

fn cmd_model_info(args: ModelInfoArgs) -> Result<(), CliError> {
    let model = load_model(&args.path)?;
    let dims = model.layer_dims();
    println!("file: {}", args.path.display());
    println!("input_dim: {} (M = {})", model.input_dim(), (model.input_dim() - 1) / 4);
    println!("layer_dims: {dims:?}");
    println!("skip_pairs: {:?}", model.skip_pairs());
    println!("parameters: {}", model.num_parameters());
    Ok(())
}
