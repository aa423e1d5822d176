//! Training strategy for the scoring network: virtual-wide-array target
//! scores, hypothesis-angle sampling around the target beam's 3 dB range,
//! SNR-weighted MSE, on-the-fly scenario batches, and validation-based
//! stopping.

use std::io::Write as _;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{inner_product, make_ula, steering_vector, ArrayGeometry};
use crate::error::{invalid, Error, Result};
use crate::net::{
    adam_step, backward_batch, encode_input_into, forward_batch, AdamState, Gradients,
    ModelParams,
};
use crate::rng::RngState;
use crate::scenario::{sample_training_scenario, Scenario, FOV_DEG, SNR_RANGE_DB};

const TRAIN_STREAM: u64 = 0x7472_6169_6e00;
const VALIDATION_STREAM: u64 = 0x7661_6c69_6400;
const MACRO_BATCH: usize = 4096;

/// Virtual target array used only to define training targets: a noise-free
/// ULA with `m_target` elements, plus the 3 dB half-width `delta_deg` of its
/// main lobe, `delta = (2 / M_tg) * (180 / pi)` degrees.
#[derive(Debug, Clone)]
pub struct TargetSpec {
    m_target: usize,
    target_geom: ArrayGeometry,
    delta_deg: f64,
}

impl TargetSpec {
    pub fn new(m_target: usize) -> Result<Self> {
        if m_target == 0 {
            return Err(invalid("target array needs at least one element"));
        }
        Ok(TargetSpec {
            m_target,
            target_geom: make_ula(m_target)?,
            delta_deg: (2.0 / m_target as f64) * (180.0 / std::f64::consts::PI),
        })
    }

    /// The default choice of four times the measurement array's size.
    pub fn quadruple_of(geom: &ArrayGeometry) -> Result<Self> {
        TargetSpec::new(4 * geom.num_elements())
    }

    pub fn m_target(&self) -> usize {
        self.m_target
    }

    pub fn delta_deg(&self) -> f64 {
        self.delta_deg
    }

    pub fn target_geom(&self) -> &ArrayGeometry {
        &self.target_geom
    }
}

/// Knobs of the training loop. Angles and scenario statistics are fixed by
/// the scenario generator; this controls batching, optimization, and
/// stopping.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub k_hypotheses: usize,
    pub scenarios_per_iteration: usize,
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub validation_scenarios: usize,
    pub eval_interval: usize,
    pub patience: usize,
    pub seed: u64,
    /// Optional lower bound on the SNR loss weight; `None` applies the
    /// linear-scale weighting verbatim.
    pub weight_floor: Option<f64>,
    pub checkpoint_dir: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
    /// Stream evaluation records to stderr.
    pub verbose: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k_hypotheses: 80,
            scenarios_per_iteration: 200,
            learning_rate: 0.001,
            max_iterations: 20_000,
            validation_scenarios: 1000,
            eval_interval: 50,
            patience: 20,
            seed: 0,
            weight_floor: None,
            checkpoint_dir: None,
            log_path: None,
            verbose: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.k_hypotheses == 0 || self.k_hypotheses % 2 != 0 {
            return Err(invalid("k_hypotheses must be a positive even number"));
        }
        if self.scenarios_per_iteration == 0
            || self.max_iterations == 0
            || self.validation_scenarios == 0
            || self.eval_interval == 0
            || self.patience == 0
        {
            return Err(invalid("iteration counts must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate must be positive"));
        }
        Ok(())
    }
}

/// Eq.-style target: the maximum over sources of the noise-free single-source
/// spectrum of the virtual array, `max_q |a_tg^H(theta_hyp) a_tg(theta_q)|^2`.
pub fn target_score(spec: &TargetSpec, theta_hyp: f64, true_angles: &[f64]) -> Result<f64> {
    if true_angles.is_empty() {
        return Err(invalid("target score needs at least one true angle"));
    }
    let a_hyp = steering_vector(&spec.target_geom, theta_hyp)?;
    let mut best = 0.0f64;
    for &theta_q in true_angles {
        let a_q = steering_vector(&spec.target_geom, theta_q)?;
        best = best.max(inner_product(&a_hyp, &a_q).norm_sqr());
    }
    Ok(best)
}

/// SNR loss weight on the linear scale, normalized so 40 dB maps to 1.
pub fn snr_weight(snr_db: f64) -> Result<f64> {
    if !(SNR_RANGE_DB.0..=SNR_RANGE_DB.1).contains(&snr_db) {
        return Err(invalid(format!(
            "snr_db {snr_db} outside [{}, {}]",
            SNR_RANGE_DB.0, SNR_RANGE_DB.1
        )));
    }
    Ok(10f64.powf(snr_db / 10.0) / 10f64.powf(SNR_RANGE_DB.1 / 10.0))
}

/// K hypothesis angles for one true DOA: half uniform inside the 3 dB range
/// `[theta - delta/2, theta + delta/2]` (clipped to the FOV), half uniform on
/// the FOV outside that range, drawn by rejection.
pub fn sample_hypotheses(
    spec: &TargetSpec,
    k_hypotheses: usize,
    true_angle: f64,
    fov: (f64, f64),
    rng: &mut RngState,
) -> Result<Vec<f64>> {
    if k_hypotheses == 0 || k_hypotheses % 2 != 0 {
        return Err(invalid("k_hypotheses must be a positive even number"));
    }
    if !(fov.0..=fov.1).contains(&true_angle) {
        return Err(invalid(format!(
            "true angle {true_angle} outside the FOV [{}, {}]",
            fov.0, fov.1
        )));
    }
    let half = k_hypotheses / 2;
    let half_width = spec.delta_deg / 2.0;
    let lo = (true_angle - half_width).max(fov.0);
    let hi = (true_angle + half_width).min(fov.1);
    let mut out = Vec::with_capacity(k_hypotheses);
    for _ in 0..half {
        out.push(rng.uniform(lo, hi));
    }
    for _ in 0..half {
        loop {
            let candidate = rng.uniform(fov.0, fov.1);
            if (candidate - true_angle).abs() > half_width {
                out.push(candidate);
                break;
            }
        }
    }
    Ok(out)
}

/// One evaluation-point record of the training log. Wall-clock is reported
/// for monitoring only; the numeric fields are deterministic per seed.
#[derive(Debug, Clone)]
pub struct TrainRecord {
    pub iteration: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub wall_secs: f64,
}

/// Result of a training run: the best-validation parameters and the log.
#[derive(Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<TrainRecord>,
    pub best_val_mse: f64,
    pub best_iteration: usize,
    /// Weighted MSE of the constant-0.5 predictor on the validation set.
    pub baseline_val_mse: f64,
    /// Populated when training aborted on a non-finite loss; `params` then
    /// holds the last good checkpoint.
    pub diverged: Option<String>,
}

struct SampleBatch {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    weights: Vec<f64>,
}

impl SampleBatch {
    fn new() -> Self {
        SampleBatch {
            inputs: Vec::new(),
            targets: Vec::new(),
            weights: Vec::new(),
        }
    }

    fn clear(&mut self) {
        self.inputs.clear();
        self.targets.clear();
        self.weights.clear();
    }

    fn len(&self) -> usize {
        self.targets.len()
    }
}

/// Append the K-per-source hypothesis samples of one scenario.
fn push_scenario_samples(
    batch: &mut SampleBatch,
    scenario: &Scenario,
    geom: &ArrayGeometry,
    spec: &TargetSpec,
    cfg: &TrainConfig,
    rng: &mut RngState,
) -> Result<()> {
    let mut weight = snr_weight(scenario.snr_db)?;
    if let Some(floor) = cfg.weight_floor {
        weight = weight.max(floor);
    }
    let angles = scenario.true_angles();
    // Cache the virtual steering vectors of the true DOAs; every hypothesis
    // target takes a max over them.
    let a_truth: Vec<Vec<Complex64>> = angles
        .iter()
        .map(|&t| steering_vector(spec.target_geom(), t))
        .collect::<Result<_>>()?;
    for &theta_q in &angles {
        let hyps = sample_hypotheses(spec, cfg.k_hypotheses, theta_q, FOV_DEG, rng)?;
        for theta_hyp in hyps {
            let a_tg_hyp = steering_vector(spec.target_geom(), theta_hyp)?;
            let target = a_truth
                .iter()
                .map(|a_q| inner_product(&a_tg_hyp, a_q).norm_sqr())
                .fold(0.0f64, f64::max);
            let a_hyp = steering_vector(geom, theta_hyp)?;
            encode_input_into(&scenario.snapshot, &a_hyp, scenario.sigma_v, &mut batch.inputs);
            batch.targets.push(target);
            batch.weights.push(weight);
        }
    }
    Ok(())
}

/// Weighted MSE of the model on a prepared sample batch (forward only).
fn weighted_mse(params: &ModelParams, batch: &SampleBatch) -> Result<f64> {
    let in_dim = params.input_dim();
    let n = batch.len();
    if n == 0 {
        return Err(invalid("empty evaluation batch"));
    }
    let mut loss = 0.0;
    let mut row = 0;
    while row < n {
        let take = MACRO_BATCH.min(n - row);
        let acts = forward_batch(params, &batch.inputs[row * in_dim..(row + take) * in_dim])?;
        for (s, &out) in acts.outputs().iter().enumerate() {
            let err = out - batch.targets[row + s];
            loss += batch.weights[row + s] * err * err;
        }
        row += take;
    }
    Ok(loss / n as f64)
}

fn constant_predictor_mse(batch: &SampleBatch, prediction: f64) -> f64 {
    let mut loss = 0.0;
    for (t, w) in batch.targets.iter().zip(&batch.weights) {
        let err = prediction - t;
        loss += w * err * err;
    }
    loss / batch.len() as f64
}

/// Train the scoring network: each iteration draws fresh scenarios, scores
/// `K` hypothesis angles per true DOA against the virtual-array target, and
/// applies one Adam update of the weighted MSE; the validation set is fixed
/// up front and the best-validation checkpoint is returned.
pub fn train(
    model: ModelParams,
    cfg: &TrainConfig,
    spec: &TargetSpec,
    geom: &ArrayGeometry,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if model.input_dim() != 4 * geom.num_elements() + 1 {
        return Err(invalid(format!(
            "model input width {} does not match 4M+1 = {}",
            model.input_dim(),
            4 * geom.num_elements() + 1
        )));
    }

    // Fixed validation set from a dedicated stream.
    let mut val_rng = RngState::with_stream(cfg.seed, VALIDATION_STREAM);
    let mut validation = SampleBatch::new();
    for _ in 0..cfg.validation_scenarios {
        let scenario = sample_training_scenario(geom, &mut val_rng)?;
        push_scenario_samples(&mut validation, &scenario, geom, spec, cfg, &mut val_rng)?;
    }
    let baseline_val_mse = constant_predictor_mse(&validation, 0.5);

    let mut log_file = match &cfg.log_path {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            writeln!(f, "# iteration train_weighted_mse val_weighted_mse wall_secs")?;
            Some(f)
        }
        None => None,
    };

    let mut params = model;
    let mut adam = AdamState::new(&params, cfg.learning_rate);
    let mut rng = RngState::with_stream(cfg.seed, TRAIN_STREAM);
    let started = std::time::Instant::now();

    let mut best_params = params.clone();
    let mut best_val_mse = f64::INFINITY;
    let mut best_iteration = 0usize;
    let mut evals_without_improvement = 0usize;
    let mut log = Vec::new();
    let mut diverged = None;

    let mut batch = SampleBatch::new();
    let in_dim = params.input_dim();

    'training: for iteration in 1..=cfg.max_iterations {
        batch.clear();
        for _ in 0..cfg.scenarios_per_iteration {
            let scenario = sample_training_scenario(geom, &mut rng)?;
            push_scenario_samples(&mut batch, &scenario, geom, spec, cfg, &mut rng)?;
        }
        let n = batch.len();

        let mut grads = Gradients::zeros_like(&params);
        let mut loss_sum = 0.0;
        let mut row = 0;
        while row < n {
            let take = MACRO_BATCH.min(n - row);
            let acts = forward_batch(&params, &batch.inputs[row * in_dim..(row + take) * in_dim])?;
            loss_sum += backward_batch(
                &params,
                &acts,
                &batch.targets[row..row + take],
                &batch.weights[row..row + take],
                &mut grads,
            )?;
            row += take;
        }
        let train_mse = loss_sum / n as f64;
        if !train_mse.is_finite() {
            diverged = Some(format!(
                "non-finite training loss at iteration {iteration}"
            ));
            break 'training;
        }
        grads.scale(1.0 / n as f64);
        if let Err(e) = adam_step(&mut params, &mut adam, &grads) {
            diverged = Some(format!("optimizer abort at iteration {iteration}: {e}"));
            break 'training;
        }

        let last = iteration == cfg.max_iterations;
        if iteration % cfg.eval_interval == 0 || last {
            let val_mse = weighted_mse(&params, &validation)?;
            let record = TrainRecord {
                iteration,
                train_mse,
                val_mse,
                wall_secs: started.elapsed().as_secs_f64(),
            };
            if let Some(f) = log_file.as_mut() {
                writeln!(
                    f,
                    "{} {} {} {:.3}",
                    record.iteration, record.train_mse, record.val_mse, record.wall_secs
                )?;
            }
            if cfg.verbose {
                eprintln!(
                    "iteration {} train_mse {:.6e} val_mse {:.6e} ({:.1}s)",
                    record.iteration, record.train_mse, record.val_mse, record.wall_secs
                );
            }
            log.push(record);
            if val_mse < best_val_mse {
                best_val_mse = val_mse;
                best_iteration = iteration;
                best_params = params.clone();
                evals_without_improvement = 0;
                if let Some(dir) = &cfg.checkpoint_dir {
                    std::fs::create_dir_all(dir)?;
                    crate::net::save_model(
                        &best_params,
                        dir.join(format!("checkpoint_iter{iteration}.bin")),
                    )?;
                }
            } else {
                evals_without_improvement += 1;
                if evals_without_improvement >= cfg.patience {
                    break 'training;
                }
            }
        }
    }

    if best_iteration == 0 {
        // No evaluation ever improved on infinity (training aborted before
        // the first eval); fall back to the incoming parameters.
        best_params = params;
        best_val_mse = weighted_mse(&best_params, &validation)?;
    }

    if diverged.is_some() {
        return Ok(TrainOutcome {
            params: best_params,
            log,
            best_val_mse,
            best_iteration,
            baseline_val_mse,
            diverged,
        });
    }

    Ok(TrainOutcome {
        params: best_params,
        log,
        best_val_mse,
        best_iteration,
        baseline_val_mse,
        diverged: None,
    })
}

/// Divergence (if any) turned into a hard error, for callers that must not
/// proceed with a stale checkpoint.
pub fn train_strict(
    model: ModelParams,
    cfg: &TrainConfig,
    spec: &TargetSpec,
    geom: &ArrayGeometry,
) -> Result<TrainOutcome> {
    let outcome = train(model, cfg, spec, geom)?;
    if let Some(msg) = &outcome.diverged {
        return Err(Error::NonFinite(msg.clone()));
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec64() -> TargetSpec {
        TargetSpec::new(64).unwrap()
    }

    #[test]
    fn delta_formula() {
        let spec = spec64();
        let expected = (2.0 / 64.0) * (180.0 / std::f64::consts::PI);
        assert!((spec.delta_deg() - expected).abs() < 1e-12);
        assert!((spec.delta_deg() - 1.7905).abs() < 5e-4);
        let geom = make_ula(16).unwrap();
        assert_eq!(TargetSpec::quadruple_of(&geom).unwrap().m_target(), 64);
    }

    #[test]
    fn target_is_one_at_true_angle() {
        let spec = spec64();
        for theta in [47.3, 90.0, 120.0] {
            let t = target_score(&spec, theta, &[theta, 60.0]).unwrap();
            assert!((t - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn target_null_at_first_dirichlet_zero() {
        // First null of the 64-element virtual beam centered at 90 degrees:
        // cos(theta) = 1/32.
        let spec = spec64();
        let theta_null = (1.0f64 / 32.0).acos().to_degrees();
        let t = target_score(&spec, theta_null, &[90.0]).unwrap();
        assert!(t < 1e-20, "null value {t}");
        assert!((theta_null - 88.209).abs() < 1e-3);
    }

    #[test]
    fn target_duplicate_angles_idempotent() {
        let spec = spec64();
        let a = target_score(&spec, 93.7, &[88.0]).unwrap();
        let b = target_score(&spec, 93.7, &[88.0, 88.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn target_symmetry_and_max_decomposition() {
        // The kernel of a centered ULA is even in cos(theta_hyp) -
        // cos(theta_q) and symmetric under exchanging the two angles; in
        // theta itself the symmetry is exact at boresight only.
        let spec = spec64();
        let mut rng = RngState::new(404);
        for _ in 0..200 {
            let theta_q = rng.uniform(55.0, 125.0);
            let c_q = theta_q.to_radians().cos();
            let offset = rng.uniform(0.0, 0.2).min(1.0 - c_q.abs());
            let plus = ((c_q + offset).acos()).to_degrees();
            let minus = ((c_q - offset).acos()).to_degrees();
            let t_plus = target_score(&spec, plus, &[theta_q]).unwrap();
            let t_minus = target_score(&spec, minus, &[theta_q]).unwrap();
            assert!(
                (t_plus - t_minus).abs() < 1e-12,
                "cosine-offset asymmetry at {theta_q}: {t_plus} vs {t_minus}"
            );

            let exchanged = target_score(&spec, theta_q, &[plus]).unwrap();
            assert!((t_plus - exchanged).abs() < 1e-12);

            let delta = rng.uniform(0.0, 8.0);
            let b_plus = target_score(&spec, 90.0 + delta, &[90.0]).unwrap();
            let b_minus = target_score(&spec, 90.0 - delta, &[90.0]).unwrap();
            assert!(
                (b_plus - b_minus).abs() < 1e-12,
                "boresight asymmetry at delta {delta}: {b_plus} vs {b_minus}"
            );

            let s1 = rng.uniform(45.0, 135.0);
            let s2 = rng.uniform(45.0, 135.0);
            let hyp = rng.uniform(45.0, 135.0);
            let joint = target_score(&spec, hyp, &[s1, s2]).unwrap();
            let t1 = target_score(&spec, hyp, &[s1]).unwrap();
            let t2 = target_score(&spec, hyp, &[s2]).unwrap();
            assert_eq!(joint, t1.max(t2));
            assert!((0.0..=1.0).contains(&joint));
        }
    }

    #[test]
    fn snr_weight_endpoints() {
        assert_eq!(snr_weight(40.0).unwrap(), 1.0);
        assert!((snr_weight(0.0).unwrap() - 1e-4).abs() < 1e-19);
        assert!((snr_weight(20.0).unwrap() - 1e-2).abs() < 1e-17);
        assert!(snr_weight(-0.5).is_err());
        assert!(snr_weight(40.5).is_err());
    }

    #[test]
    fn hypotheses_split_inside_and_outside() {
        let spec = spec64();
        let mut rng = RngState::new(7);
        let theta_q = 100.0;
        let half_width = spec.delta_deg() / 2.0;
        for _ in 0..50 {
            let hyps = sample_hypotheses(&spec, 80, theta_q, FOV_DEG, &mut rng).unwrap();
            assert_eq!(hyps.len(), 80);
            for (i, &h) in hyps.iter().enumerate() {
                assert!((FOV_DEG.0..=FOV_DEG.1).contains(&h));
                if i < 40 {
                    assert!((h - theta_q).abs() <= half_width);
                } else {
                    assert!((h - theta_q).abs() > half_width);
                }
            }
        }
    }

    #[test]
    fn hypotheses_clip_at_fov_edge() {
        let spec = spec64();
        let mut rng = RngState::new(8);
        let hyps = sample_hypotheses(&spec, 80, 45.0, FOV_DEG, &mut rng).unwrap();
        assert_eq!(hyps.len(), 80);
        for &h in &hyps {
            assert!((45.0..=135.0).contains(&h));
        }
        assert!(sample_hypotheses(&spec, 80, 30.0, FOV_DEG, &mut rng).is_err());
        assert!(sample_hypotheses(&spec, 79, 90.0, FOV_DEG, &mut rng).is_err());
    }

    #[test]
    fn in_range_hypotheses_are_uniform() {
        // Kolmogorov-Smirnov statistic of the in-range half against the
        // uniform CDF, below the 1% critical value.
        let spec = spec64();
        let mut rng = RngState::new(1234);
        let theta_q = 90.0;
        let half_width = spec.delta_deg() / 2.0;
        let mut samples = Vec::new();
        for _ in 0..250 {
            let hyps = sample_hypotheses(&spec, 80, theta_q, FOV_DEG, &mut rng).unwrap();
            samples.extend(hyps[..40].iter().cloned());
        }
        let n = samples.len();
        assert_eq!(n, 10_000);
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lo = theta_q - half_width;
        let width = 2.0 * half_width;
        let mut d = 0.0f64;
        for (i, &s) in samples.iter().enumerate() {
            let cdf = (s - lo) / width;
            let emp_hi = (i + 1) as f64 / n as f64;
            let emp_lo = i as f64 / n as f64;
            d = d.max((cdf - emp_lo).abs()).max((emp_hi - cdf).abs());
        }
        let critical = 1.628 / (n as f64).sqrt();
        assert!(d < critical, "KS statistic {d} above critical {critical}");
    }

    fn toy_config(iterations: usize) -> TrainConfig {
        TrainConfig {
            k_hypotheses: 16,
            scenarios_per_iteration: 20,
            learning_rate: 0.001,
            max_iterations: iterations,
            validation_scenarios: 40,
            eval_interval: 10,
            patience: 50,
            seed: 99,
            weight_floor: None,
            checkpoint_dir: None,
            log_path: None,
            verbose: false,
        }
    }

    #[test]
    fn toy_training_beats_constant_predictor() {
        let geom = make_ula(16).unwrap();
        let spec = TargetSpec::quadruple_of(&geom).unwrap();
        let cfg = toy_config(50);
        let mut rng = RngState::new(cfg.seed);
        let model = ModelParams::init_random(vec![65, 8, 1], vec![], &mut rng).unwrap();
        let outcome = train(model, &cfg, &spec, &geom).unwrap();
        assert!(outcome.diverged.is_none());
        assert!(
            outcome.best_val_mse < outcome.baseline_val_mse,
            "val {} vs baseline {}",
            outcome.best_val_mse,
            outcome.baseline_val_mse
        );
    }

    #[test]
    fn best_checkpoint_is_argmin_of_log() {
        let geom = make_ula(16).unwrap();
        let spec = TargetSpec::quadruple_of(&geom).unwrap();
        let cfg = toy_config(60);
        let mut rng = RngState::new(cfg.seed);
        let model = ModelParams::init_random(vec![65, 8, 1], vec![], &mut rng).unwrap();
        let outcome = train(model, &cfg, &spec, &geom).unwrap();
        let log_min = outcome
            .log
            .iter()
            .map(|r| r.val_mse)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(outcome.best_val_mse, log_min);
        let argmin = outcome
            .log
            .iter()
            .min_by(|a, b| a.val_mse.partial_cmp(&b.val_mse).unwrap())
            .unwrap();
        assert_eq!(outcome.best_iteration, argmin.iteration);
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let geom = make_ula(16).unwrap();
        let spec = TargetSpec::quadruple_of(&geom).unwrap();
        let cfg = toy_config(20);
        let run = || {
            let mut rng = RngState::new(cfg.seed);
            let model = ModelParams::init_random(vec![65, 8, 1], vec![], &mut rng).unwrap();
            train(model, &cfg, &spec, &geom).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.log.len(), b.log.len());
        for (ra, rb) in a.log.iter().zip(&b.log) {
            assert_eq!(ra.iteration, rb.iteration);
            assert_eq!(ra.train_mse, rb.train_mse);
            assert_eq!(ra.val_mse, rb.val_mse);
        }
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn model_width_is_checked() {
        let geom = make_ula(16).unwrap();
        let spec = TargetSpec::quadruple_of(&geom).unwrap();
        let cfg = toy_config(5);
        let model = ModelParams::zeros(vec![9, 4, 1], vec![]).unwrap();
        assert!(train(model, &cfg, &spec, &geom).is_err());
    }
}
