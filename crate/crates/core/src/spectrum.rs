//! Spatial-spectrum representation shared by every estimator: the scan grid,
//! peak extraction, error pairing, and RMSE aggregation.

use std::fmt::Write as _;

use crate::error::{invalid, Result};

/// Ordered scan angles in degrees. The standard constructor produces a
/// uniform grid; [`AngleGrid::irregular`] admits arbitrary strictly
/// increasing angle sets for estimators that can scan them (peak finding
/// still requires a uniform grid).
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    angles: Vec<f64>,
    step: Option<f64>,
}

impl AngleGrid {
    /// Uniform grid from `start` to `stop` inclusive with spacing `step`.
    pub fn uniform(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
            return Err(invalid("grid bounds and step must be finite"));
        }
        if step <= 0.0 || stop <= start {
            return Err(invalid(format!(
                "need stop > start and step > 0, got [{start}, {stop}] step {step}"
            )));
        }
        let count = ((stop - start) / step).round() as usize + 1;
        if count < 2 {
            return Err(invalid("grid must contain at least two angles"));
        }
        let angles: Vec<f64> = (0..count).map(|i| start + i as f64 * step).collect();
        Ok(AngleGrid {
            angles,
            step: Some(step),
        })
    }

    /// The evaluation grid used throughout the experiments: 45 to 135 degrees
    /// at 0.01 degree resolution.
    pub fn default_fov() -> Self {
        AngleGrid::uniform(45.0, 135.0, 0.01).expect("default grid is valid")
    }

    /// Arbitrary strictly increasing angle set.
    pub fn irregular(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(invalid("grid must be nonempty"));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(invalid("grid angles must be finite"));
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("grid angles must be strictly increasing"));
        }
        Ok(AngleGrid { angles, step: None })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Spacing of a uniform grid; `None` for irregular grids.
    pub fn step(&self) -> Option<f64> {
        self.step
    }

    pub fn is_uniform(&self) -> bool {
        self.step.is_some()
    }
}

/// Score-per-angle output of an estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: AngleGrid,
    pub scores: Vec<f64>,
}

impl Spectrum {
    pub fn new(grid: AngleGrid, scores: Vec<f64>) -> Result<Self> {
        if grid.len() != scores.len() {
            return Err(invalid(format!(
                "grid has {} angles but {} scores were given",
                grid.len(),
                scores.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(invalid("scores must be finite and nonnegative"));
        }
        Ok(Spectrum { grid, scores })
    }

    /// Two-column text export: a header line with the estimator name and
    /// metadata, then `angle_deg score` rows.
    pub fn to_text(&self, estimator: &str, metadata: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# estimator={estimator} {metadata}");
        for (a, s) in self.grid.angles().iter().zip(&self.scores) {
            let _ = writeln!(out, "{a} {s}");
        }
        out
    }
}

/// Peak angles (sorted ascending) with their spectrum scores.
#[derive(Debug, Clone, PartialEq)]
pub struct DoaEstimate {
    pub angles: Vec<f64>,
    pub scores: Vec<f64>,
}

/// The `q` strongest local maxima of the spectrum.
///
/// A local maximum is a sample strictly greater than both neighbors; grid
/// endpoints qualify when greater than their single neighbor, and the
/// leftmost sample of a plateau that exceeds both plateau-exterior neighbors
/// counts as the maximum. If fewer than `q` local maxima exist the remaining
/// slots are filled with the highest-scoring grid points that are not already
/// selected and not adjacent to a selected point. Ties break toward the lower
/// angle.
pub fn find_peaks(spec: &Spectrum, q: usize) -> Result<DoaEstimate> {
    let n = spec.scores.len();
    if q == 0 {
        return Err(invalid("peak count q must be >= 1"));
    }
    if n < 3 {
        return Err(invalid("spectrum must contain at least 3 samples"));
    }
    if q >= n {
        return Err(invalid(format!("q = {q} must be below grid length {n}")));
    }
    if !spec.grid.is_uniform() {
        return Err(invalid("peak finding requires a uniform grid"));
    }
    let scores = &spec.scores;

    // Plateau-aware local maxima: for each run of equal scores, take its
    // leftmost index if both exterior neighbors (treated as -inf at the
    // boundary) are strictly lower.
    let mut maxima: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[j + 1] == scores[i] {
            j += 1;
        }
        let left_ok = i == 0 || scores[i - 1] < scores[i];
        let right_ok = j == n - 1 || scores[j + 1] < scores[i];
        if left_ok && right_ok {
            maxima.push(i);
        }
        i = j + 1;
    }

    // Strongest first; lower angle wins on equal scores.
    maxima.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut selected: Vec<usize> = maxima.into_iter().take(q).collect();

    if selected.len() < q {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
        // First pass honors the non-adjacency rule; if the grid is too small
        // to satisfy it, fall back to the best remaining points.
        for relax in [false, true] {
            for &idx in &order {
                if selected.len() == q {
                    break;
                }
                if selected.contains(&idx) {
                    continue;
                }
                let adjacent = selected.iter().any(|&s| idx.abs_diff(s) <= 1);
                if relax || !adjacent {
                    selected.push(idx);
                }
            }
        }
    }

    selected.sort_unstable();
    Ok(DoaEstimate {
        angles: selected.iter().map(|&i| spec.grid.angles()[i]).collect(),
        scores: selected.iter().map(|&i| scores[i]).collect(),
    })
}

/// Signed errors after sorting both angle lists ascending:
/// `error_i = estimated_i - true_i`.
pub fn pair_and_error(estimated: &[f64], true_angles: &[f64]) -> Result<Vec<f64>> {
    if estimated.len() != true_angles.len() {
        return Err(invalid(format!(
            "estimate count {} != truth count {}",
            estimated.len(),
            true_angles.len()
        )));
    }
    let mut est = estimated.to_vec();
    let mut truth = true_angles.to_vec();
    est.sort_by(|a, b| a.partial_cmp(b).unwrap());
    truth.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(est.iter().zip(&truth).map(|(e, t)| e - t).collect())
}

/// Root mean square over every error of every trial.
pub fn rmse(per_trial_errors: &[Vec<f64>]) -> Result<f64> {
    let total: usize = per_trial_errors.iter().map(|e| e.len()).sum();
    if total == 0 {
        return Err(invalid("rmse needs at least one error"));
    }
    let sum_sq: f64 = per_trial_errors
        .iter()
        .flat_map(|e| e.iter())
        .map(|e| e * e)
        .sum();
    Ok((sum_sq / total as f64).sqrt())
}
