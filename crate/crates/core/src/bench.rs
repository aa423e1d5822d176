//! Monte-Carlo experiment runner: RMSE-vs-SNR curves for the three
//! estimators on fixed source configurations, with per-trial records, CSV
//! emission, and a machine-readable run manifest.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{make_ula, ArrayGeometry};
use crate::bartlett::bartlett_spectrum_with_manifold;
use crate::error::{invalid, Result};
use crate::infer::net_spectrum;
use crate::manifold::ManifoldMatrix;
use crate::net::ModelParams;
use crate::rng::RngState;
use crate::scenario::{sigma_for_snr_db, synthesize_snapshot, Source};
use crate::sparse::{solve_bpdn, sparse_spectrum, SparseConfig};
use crate::spectrum::{find_peaks, pair_and_error, rmse, AngleGrid, Spectrum};

/// Estimators the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bartlett,
    Sparse,
    Sp2net,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bartlett => "bartlett",
            Method::Sparse => "sparse",
            Method::Sp2net => "sp2net",
        }
    }

    pub const ALL: [Method; 3] = [Method::Bartlett, Method::Sparse, Method::Sp2net];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bartlett" => Ok(Method::Bartlett),
            "sparse" => Ok(Method::Sparse),
            "sp2net" => Ok(Method::Sp2net),
            other => Err(invalid(format!(
                "unknown method '{other}', valid methods: bartlett, sparse, sp2net"
            ))),
        }
    }
}

/// Full description of one benchmark: scenario, SNR sweep, methods, scan
/// grid, and seed. Everything needed to reproduce the run byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub num_elements: usize,
    pub true_angles_deg: Vec<f64>,
    pub snr_grid_db: Vec<f64>,
    pub trials_per_snr: usize,
    pub methods: Vec<Method>,
    pub grid_start_deg: f64,
    pub grid_stop_deg: f64,
    pub grid_step_deg: f64,
    pub seed: u64,
    /// SNR whose first trial gets its spectra dumped by `emit_results`.
    pub spectrum_snapshot_snr_db: Option<f64>,
    pub sparse: SparseConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "custom".into(),
            num_elements: 16,
            true_angles_deg: Vec::new(),
            snr_grid_db: (0..=40).map(f64::from).collect(),
            trials_per_snr: 500,
            methods: vec![Method::Bartlett, Method::Sparse],
            grid_start_deg: 45.0,
            grid_stop_deg: 135.0,
            grid_step_deg: 0.01,
            seed: 0,
            spectrum_snapshot_snr_db: Some(25.0),
            sparse: SparseConfig::default(),
        }
    }
}

impl ExperimentSpec {
    /// The four source configurations used in the experiments.
    pub fn preset(name: &str) -> Option<ExperimentSpec> {
        let (angles, snapshot_snr): (Vec<f64>, f64) = match name {
            "single_120" => (vec![120.0], 25.0),
            "two_100_105" => (vec![100.0, 105.0], 25.0),
            "three_60_90_95" => (vec![60.0, 90.0, 95.0], 30.0),
            "three_63_67_72" => (vec![63.0, 67.0, 72.0], 30.0),
            _ => return None,
        };
        Some(ExperimentSpec {
            name: name.into(),
            true_angles_deg: angles,
            spectrum_snapshot_snr_db: Some(snapshot_snr),
            ..ExperimentSpec::default()
        })
    }

    pub const PRESET_NAMES: [&'static str; 4] = [
        "single_120",
        "two_100_105",
        "three_60_90_95",
        "three_63_67_72",
    ];

    pub fn grid(&self) -> Result<AngleGrid> {
        AngleGrid::uniform(self.grid_start_deg, self.grid_stop_deg, self.grid_step_deg)
    }

    fn validate(&self) -> Result<()> {
        if self.true_angles_deg.is_empty() {
            return Err(invalid("experiment needs at least one true angle"));
        }
        if self.snr_grid_db.is_empty() {
            return Err(invalid("experiment needs at least one SNR value"));
        }
        if self.trials_per_snr == 0 {
            return Err(invalid("trials_per_snr must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(invalid("experiment needs at least one method"));
        }
        if self.num_elements == 0 {
            return Err(invalid("num_elements must be >= 1"));
        }
        Ok(())
    }
}

/// Result of one (method, snr, trial) evaluation.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub experiment: String,
    pub method: Method,
    pub snr_db: f64,
    pub trial: usize,
    pub estimated_deg: Vec<f64>,
    pub errors_deg: Vec<f64>,
    pub wall_secs: f64,
}

/// One row of the aggregated RMSE table.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseRow {
    pub method: Method,
    pub snr_db: f64,
    pub rmse_deg: f64,
    pub trials: usize,
}

/// Everything produced by [`run_experiment`].
pub struct ExperimentResult {
    pub records: Vec<TrialRecord>,
    pub rmse_table: Vec<RmseRow>,
    /// Spectra of the flagged realization, one per method.
    pub spectrum_dumps: Vec<(Method, f64, Spectrum)>,
}

fn run_method(
    method: Method,
    manifold: &ManifoldMatrix,
    geom: &ArrayGeometry,
    snapshot: &[Complex64],
    sigma_v: f64,
    spec: &ExperimentSpec,
    model: Option<&ModelParams>,
) -> Result<Spectrum> {
    match method {
        Method::Bartlett => bartlett_spectrum_with_manifold(manifold, snapshot),
        Method::Sparse => {
            let solution = solve_bpdn(manifold, snapshot, sigma_v, &spec.sparse)?;
            sparse_spectrum(&solution, manifold.grid())
        }
        Method::Sp2net => {
            let model = model.ok_or_else(|| invalid("sp2net requested without a model"))?;
            net_spectrum(model, geom, snapshot, sigma_v, manifold.grid())
        }
    }
}

/// Run the full Monte-Carlo sweep. Within one trial every method sees the
/// identical snapshot; trials are keyed by `(seed, snr index, trial)`, so
/// parallel execution cannot change any recorded value.
pub fn run_experiment(
    spec: &ExperimentSpec,
    model: Option<&ModelParams>,
) -> Result<ExperimentResult> {
    spec.validate()?;
    if spec.methods.contains(&Method::Sp2net) {
        let model = model.ok_or_else(|| {
            invalid("experiment lists the sp2net method but no model was provided")
        })?;
        if model.input_dim() != 4 * spec.num_elements + 1 {
            return Err(invalid(format!(
                "model input width {} does not match 4M+1 = {}",
                model.input_dim(),
                4 * spec.num_elements + 1
            )));
        }
    }
    let geom = make_ula(spec.num_elements)?;
    let grid = spec.grid()?;
    let manifold = ManifoldMatrix::build(&geom, &grid)?;
    let q = spec.true_angles_deg.len();

    let flagged_snr_index = spec.spectrum_snapshot_snr_db.map(|want| {
        let mut best = 0usize;
        let mut best_gap = f64::INFINITY;
        for (i, &snr) in spec.snr_grid_db.iter().enumerate() {
            let gap = (snr - want).abs();
            if gap < best_gap {
                best_gap = gap;
                best = i;
            }
        }
        best
    });

    let jobs: Vec<(usize, usize)> = (0..spec.snr_grid_db.len())
        .flat_map(|si| (0..spec.trials_per_snr).map(move |t| (si, t)))
        .collect();

    struct TrialOutput {
        records: Vec<TrialRecord>,
        dumps: Vec<(Method, f64, Spectrum)>,
    }

    let outputs: Vec<Result<TrialOutput>> = jobs
        .par_iter()
        .map(|&(si, trial)| {
            let snr_db = spec.snr_grid_db[si];
            let sigma_v = sigma_for_snr_db(snr_db);
            let mut rng = RngState::substream(spec.seed, &[si as u64, trial as u64]);
            let sources: Vec<Source> = spec
                .true_angles_deg
                .iter()
                .map(|&theta_deg| Source {
                    theta_deg,
                    amplitude: Complex64::from_polar(
                        1.0,
                        rng.uniform(0.0, 2.0 * std::f64::consts::PI),
                    ),
                })
                .collect();
            let snapshot = synthesize_snapshot(&geom, &sources, sigma_v, &mut rng)?;

            let keep_spectra = flagged_snr_index == Some(si) && trial == 0;
            let mut records = Vec::with_capacity(spec.methods.len());
            let mut dumps = Vec::new();
            for &method in &spec.methods {
                let t0 = Instant::now();
                let spectrum =
                    run_method(method, &manifold, &geom, &snapshot, sigma_v, spec, model)?;
                let estimate = find_peaks(&spectrum, q)?;
                let errors = pair_and_error(&estimate.angles, &spec.true_angles_deg)?;
                records.push(TrialRecord {
                    experiment: spec.name.clone(),
                    method,
                    snr_db,
                    trial,
                    estimated_deg: estimate.angles.clone(),
                    errors_deg: errors,
                    wall_secs: t0.elapsed().as_secs_f64(),
                });
                if keep_spectra {
                    dumps.push((method, snr_db, spectrum.clone()));
                }
            }
            Ok(TrialOutput { records, dumps })
        })
        .collect();

    let mut records = Vec::with_capacity(jobs.len() * spec.methods.len());
    let mut spectrum_dumps = Vec::new();
    for out in outputs {
        let out = out?;
        records.extend(out.records);
        spectrum_dumps.extend(out.dumps);
    }

    let rmse_table = aggregate_rmse(spec, &records)?;
    Ok(ExperimentResult {
        records,
        rmse_table,
        spectrum_dumps,
    })
}

/// RMSE per (method, SNR) in spec order, recomputable from the records.
pub fn aggregate_rmse(spec: &ExperimentSpec, records: &[TrialRecord]) -> Result<Vec<RmseRow>> {
    let mut table = Vec::with_capacity(spec.methods.len() * spec.snr_grid_db.len());
    for &method in &spec.methods {
        for &snr_db in &spec.snr_grid_db {
            let errors: Vec<Vec<f64>> = records
                .iter()
                .filter(|r| r.method == method && r.snr_db == snr_db)
                .map(|r| r.errors_deg.clone())
                .collect();
            let rmse_deg = rmse(&errors)?;
            table.push(RmseRow {
                method,
                snr_db,
                rmse_deg,
                trials: errors.len(),
            });
        }
    }
    Ok(table)
}

/// Write `rmse_vs_snr.csv`, `trials.csv`, per-method spectrum dumps of the
/// flagged realization, and `manifest.json` into `output_dir`. Returns the
/// created paths. All output is deterministic for a fixed spec and seed.
pub fn emit_results(
    result: &ExperimentResult,
    spec: &ExperimentSpec,
    output_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    if result.records.is_empty() {
        return Err(invalid("no trial records to emit"));
    }
    let dir = output_dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let rmse_path = dir.join("rmse_vs_snr.csv");
    {
        let mut f = fs::File::create(&rmse_path)?;
        writeln!(f, "method,snr_db,rmse_deg,trials")?;
        for row in &result.rmse_table {
            writeln!(f, "{},{},{},{}", row.method, row.snr_db, row.rmse_deg, row.trials)?;
        }
    }
    written.push(rmse_path);

    let trials_path = dir.join("trials.csv");
    {
        let mut f = fs::File::create(&trials_path)?;
        writeln!(f, "experiment,method,snr_db,trial,estimated_deg,errors_deg")?;
        for r in &result.records {
            let est: Vec<String> = r.estimated_deg.iter().map(|v| v.to_string()).collect();
            let err: Vec<String> = r.errors_deg.iter().map(|v| v.to_string()).collect();
            writeln!(
                f,
                "{},{},{},{},{},{}",
                r.experiment,
                r.method,
                r.snr_db,
                r.trial,
                est.join(";"),
                err.join(";")
            )?;
        }
    }
    written.push(trials_path);

    for (method, snr_db, spectrum) in &result.spectrum_dumps {
        let path = dir.join(format!("spectrum_{}_snr{}.txt", method, snr_db));
        let metadata = format!(
            "experiment={} snr_db={} trial=0 angles={:?}",
            spec.name, snr_db, spec.true_angles_deg
        );
        fs::write(&path, spectrum.to_text(method.name(), &metadata))?;
        written.push(path);
    }

    let manifest_path = dir.join("manifest.json");
    let manifest = serde_json::json!({
        "experiment": spec,
        "toolkit_version": env!("CARGO_PKG_VERSION"),
    });
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).unwrap())?;
    written.push(manifest_path);

    Ok(written)
}
