//! Ground-truth scenarios and noisy single snapshots.
//!
//! A scenario bundles the sources, the noise level, and one measured snapshot
//! `x = sum_q a(theta_q) s_q + v` with white circularly-symmetric complex
//! noise of per-entry variance `sigma_v^2`.

use num_complex::Complex64;

use crate::array::{ensure_finite, steering_vector, ArrayGeometry, ComplexVector};
use crate::error::{invalid, Error, Result};
use crate::rng::RngState;

/// Field of view used for generated scenarios, degrees.
pub const FOV_DEG: (f64, f64) = (45.0, 135.0);
/// SNR range (dB) of generated scenarios.
pub const SNR_RANGE_DB: (f64, f64) = (0.0, 40.0);

/// One far-field source: direction in degrees plus complex amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Source {
    pub theta_deg: f64,
    pub amplitude: Complex64,
}

/// Ground truth plus one noisy snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub sources: Vec<Source>,
    pub sigma_v: f64,
    pub snr_db: f64,
    pub snapshot: ComplexVector,
}

impl Scenario {
    pub fn true_angles(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.theta_deg).collect()
    }
}

/// Noise standard deviation for a given first-source SNR in dB, under the
/// convention `SNR = |s_1|^2 / sigma_v^2` with `|s_1| = 1`.
pub fn sigma_for_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 20.0)
}

/// `m` i.i.d. circularly-symmetric complex-normal samples, per-entry variance
/// `sigma_v^2` (each real part has variance `sigma_v^2 / 2`).
pub fn draw_noise(rng: &mut RngState, m: usize, sigma_v: f64) -> Result<ComplexVector> {
    if sigma_v < 0.0 {
        return Err(invalid(format!("sigma_v must be >= 0, got {sigma_v}")));
    }
    if sigma_v == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); m]);
    }
    (0..m).map(|_| rng.complex_normal(sigma_v)).collect()
}

/// One snapshot from the given sources plus fresh noise.
pub fn synthesize_snapshot(
    geom: &ArrayGeometry,
    sources: &[Source],
    sigma_v: f64,
    rng: &mut RngState,
) -> Result<ComplexVector> {
    if sources.is_empty() {
        return Err(invalid("at least one source is required"));
    }
    for s in sources {
        if !(0.0 < s.theta_deg && s.theta_deg < 180.0) {
            return Err(invalid(format!(
                "source angle {} deg outside (0, 180)",
                s.theta_deg
            )));
        }
    }
    let m = geom.num_elements();
    let mut x = vec![Complex64::new(0.0, 0.0); m];
    for s in sources {
        let a = steering_vector(geom, s.theta_deg)?;
        for (xi, ai) in x.iter_mut().zip(&a) {
            *xi += ai * s.amplitude;
        }
    }
    let v = draw_noise(rng, m, sigma_v)?;
    for (xi, vi) in x.iter_mut().zip(&v) {
        *xi += vi;
    }
    ensure_finite(&x, "snapshot")?;
    Ok(x)
}

/// Draw one scenario from the training distribution: Q uniform in {1,2,3},
/// angles uniform in the FOV, unit-magnitude first source, the rest with
/// magnitudes uniform in [0.5, 1], phases uniform in [0, 2pi), SNR uniform
/// over the integer dB values 0..=40.
pub fn sample_training_scenario(geom: &ArrayGeometry, rng: &mut RngState) -> Result<Scenario> {
    let q = 1 + rng.uniform_u64(3) as usize;
    let mut angles = Vec::with_capacity(q);
    for _ in 0..q {
        angles.push(rng.uniform(FOV_DEG.0, FOV_DEG.1));
    }
    let mut magnitudes = Vec::with_capacity(q);
    magnitudes.push(1.0);
    for _ in 1..q {
        magnitudes.push(rng.uniform(0.5, 1.0));
    }
    let sources: Vec<Source> = angles
        .iter()
        .zip(&magnitudes)
        .map(|(&theta_deg, &mag)| {
            let phase = rng.uniform(0.0, 2.0 * std::f64::consts::PI);
            Source {
                theta_deg,
                amplitude: Complex64::from_polar(mag, phase),
            }
        })
        .collect();
    let snr_db = rng.uniform_u64(41) as f64;
    let sigma_v = sigma_for_snr_db(snr_db);
    let snapshot = synthesize_snapshot(geom, &sources, sigma_v, rng)?;
    Ok(Scenario {
        sources,
        sigma_v,
        snr_db,
        snapshot,
    })
}

/// One scenario per line: `Q theta.. re im (per source).. sigma_v re im (per
/// element)..`, whitespace-separated, floats printed with full round-trip
/// precision.
pub fn scenario_to_line(s: &Scenario) -> String {
    let mut parts: Vec<String> = Vec::with_capacity(2 + 3 * s.sources.len() + 2 * s.snapshot.len());
    parts.push(s.sources.len().to_string());
    for src in &s.sources {
        parts.push(format!("{}", src.theta_deg));
    }
    for src in &s.sources {
        parts.push(format!("{}", src.amplitude.re));
        parts.push(format!("{}", src.amplitude.im));
    }
    parts.push(format!("{}", s.sigma_v));
    for z in &s.snapshot {
        parts.push(format!("{}", z.re));
        parts.push(format!("{}", z.im));
    }
    parts.join(" ")
}

/// Parse a line produced by [`scenario_to_line`]. The SNR field is recovered
/// from `sigma_v` under the first-source SNR convention.
pub fn scenario_from_line(line: &str) -> Result<Scenario> {
    let mut it = line.split_whitespace();
    let q: usize = it
        .next()
        .ok_or_else(|| Error::Parse("empty scenario line".into()))?
        .parse()
        .map_err(|e| Error::Parse(format!("bad source count: {e}")))?;
    if q == 0 {
        return Err(Error::Parse("scenario line declares zero sources".into()));
    }
    let mut next_f64 = |what: &str| -> Result<f64> {
        it.next()
            .ok_or_else(|| Error::Parse(format!("scenario line truncated at {what}")))?
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("bad {what}: {e}")))
    };
    let mut angles = Vec::with_capacity(q);
    for i in 0..q {
        angles.push(next_f64(&format!("angle {i}"))?);
    }
    let mut amplitudes = Vec::with_capacity(q);
    for i in 0..q {
        let re = next_f64(&format!("amplitude {i} re"))?;
        let im = next_f64(&format!("amplitude {i} im"))?;
        amplitudes.push(Complex64::new(re, im));
    }
    let sigma_v = next_f64("sigma_v")?;
    let mut snapshot = Vec::new();
    let rest: Vec<&str> = it.collect();
    if rest.len() % 2 != 0 {
        return Err(Error::Parse(
            "scenario line has an odd number of snapshot components".into(),
        ));
    }
    for pair in rest.chunks(2) {
        let re: f64 = pair[0]
            .parse()
            .map_err(|e| Error::Parse(format!("bad snapshot entry: {e}")))?;
        let im: f64 = pair[1]
            .parse()
            .map_err(|e| Error::Parse(format!("bad snapshot entry: {e}")))?;
        snapshot.push(Complex64::new(re, im));
    }
    if snapshot.is_empty() {
        return Err(Error::Parse("scenario line has no snapshot".into()));
    }
    let snr_db = -20.0 * sigma_v.log10();
    Ok(Scenario {
        sources: angles
            .into_iter()
            .zip(amplitudes)
            .map(|(theta_deg, amplitude)| Source {
                theta_deg,
                amplitude,
            })
            .collect(),
        sigma_v,
        snr_db,
        snapshot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::norm_sq;

    #[test]
    fn zero_sigma_gives_zero_noise() {
        let mut rng = RngState::new(1);
        let v = draw_noise(&mut rng, 16, 0.0).unwrap();
        assert!(v.iter().all(|z| z.re == 0.0 && z.im == 0.0));
    }

    #[test]
    fn negative_sigma_rejected() {
        let mut rng = RngState::new(1);
        assert!(draw_noise(&mut rng, 4, -0.1).is_err());
    }

    #[test]
    fn noise_power_matches_sigma() {
        // Law of large numbers: mean |v_i|^2 -> sigma^2 within 3 standard errors.
        let mut rng = RngState::new(2024);
        let n = 100_000;
        let v = draw_noise(&mut rng, n, 1.0).unwrap();
        let mean_power = norm_sq(&v) / n as f64;
        assert!(
            (0.99..=1.01).contains(&mean_power),
            "mean |v|^2 = {mean_power}"
        );
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let mut a = RngState::new(5);
        let mut b = RngState::new(5);
        let va = draw_noise(&mut a, 32, 0.7).unwrap();
        let vb = draw_noise(&mut b, 32, 0.7).unwrap();
        assert_eq!(va, vb);
    }

    #[test]
    fn noise_covariance_is_white() {
        // Empirical covariance over 1e4 draws within 5% of sigma^2 I in
        // Frobenius norm.
        let m = 16;
        let sigma = 0.8;
        let trials = 10_000;
        let mut rng = RngState::new(99);
        let mut cov = vec![Complex64::new(0.0, 0.0); m * m];
        for _ in 0..trials {
            let v = draw_noise(&mut rng, m, sigma).unwrap();
            for i in 0..m {
                for j in 0..m {
                    cov[i * m + j] += v[i] * v[j].conj();
                }
            }
        }
        let scale = 1.0 / trials as f64;
        let mut err_sq = 0.0;
        for i in 0..m {
            for j in 0..m {
                let mut c = cov[i * m + j] * scale;
                if i == j {
                    c -= sigma * sigma;
                }
                err_sq += c.norm_sqr();
            }
        }
        let target = (m as f64).sqrt() * sigma * sigma;
        assert!(
            err_sq.sqrt() / target < 0.05,
            "relative Frobenius deviation {}",
            err_sq.sqrt() / target
        );
    }

    #[test]
    fn boresight_source_gives_constant_snapshot() {
        let geom = make_test_geom();
        let mut rng = RngState::new(0);
        let src = [Source {
            theta_deg: 90.0,
            amplitude: Complex64::new(1.0, 0.0),
        }];
        let x = synthesize_snapshot(&geom, &src, 0.0, &mut rng).unwrap();
        for z in &x {
            assert!((z.re - 0.25).abs() < 1e-12 && z.im.abs() < 1e-12);
        }
    }

    #[test]
    fn opposite_amplitudes_cancel() {
        let geom = make_test_geom();
        let mut rng = RngState::new(0);
        let src = [
            Source {
                theta_deg: 70.0,
                amplitude: Complex64::new(0.6, -0.3),
            },
            Source {
                theta_deg: 70.0,
                amplitude: Complex64::new(-0.6, 0.3),
            },
        ];
        let x = synthesize_snapshot(&geom, &src, 0.0, &mut rng).unwrap();
        assert!(norm_sq(&x) < 1e-24);
    }

    #[test]
    fn three_sources_match_term_by_term_sum() {
        let geom = make_test_geom();
        let mut rng = RngState::new(0);
        let sources = [
            Source {
                theta_deg: 60.0,
                amplitude: Complex64::new(0.8, 0.1),
            },
            Source {
                theta_deg: 90.0,
                amplitude: Complex64::new(-0.2, 0.9),
            },
            Source {
                theta_deg: 120.5,
                amplitude: Complex64::new(0.5, -0.5),
            },
        ];
        let x = synthesize_snapshot(&geom, &sources, 0.0, &mut rng).unwrap();
        let mut expected = vec![Complex64::new(0.0, 0.0); 16];
        for s in &sources {
            let a = steering_vector(&geom, s.theta_deg).unwrap();
            for (e, ai) in expected.iter_mut().zip(&a) {
                *e += ai * s.amplitude;
            }
        }
        for (xi, ei) in x.iter().zip(&expected) {
            assert!((xi - ei).norm() < 1e-12);
        }
    }

    #[test]
    fn empty_source_list_rejected() {
        let geom = make_test_geom();
        let mut rng = RngState::new(0);
        assert!(synthesize_snapshot(&geom, &[], 0.1, &mut rng).is_err());
    }

    #[test]
    fn training_distribution_bounds() {
        let geom = make_test_geom();
        let mut rng = RngState::new(77);
        for _ in 0..2000 {
            let s = sample_training_scenario(&geom, &mut rng).unwrap();
            assert!((1..=3).contains(&s.sources.len()));
            assert!((s.snr_db.round() - s.snr_db).abs() == 0.0);
            assert!((0.0..=40.0).contains(&s.snr_db));
            assert!((s.sigma_v - sigma_for_snr_db(s.snr_db)).abs() < 1e-15);
            for (i, src) in s.sources.iter().enumerate() {
                assert!((45.0..=135.0).contains(&src.theta_deg));
                let mag = src.amplitude.norm();
                if i == 0 {
                    assert!((mag - 1.0).abs() < 1e-12);
                } else {
                    assert!((0.5..=1.0 + 1e-12).contains(&mag));
                }
                // Relative SNR of every source stays in [-6.03, 40] dB; the
                // low end comes from the weakest allowed magnitude 0.5.
                let snr_q = 10.0 * (mag * mag / (s.sigma_v * s.sigma_v)).log10();
                assert!(snr_q >= -6.03 && snr_q <= 40.0 + 1e-9, "snr_q = {snr_q}");
            }
        }
    }

    #[test]
    fn source_count_frequencies() {
        // Binomial CI at 3 sigma for P(Q=2) over 1e5 draws.
        let geom = make_test_geom();
        let mut rng = RngState::new(2025);
        let n = 100_000;
        let mut count2 = 0usize;
        for _ in 0..n {
            if sample_training_scenario(&geom, &mut rng).unwrap().sources.len() == 2 {
                count2 += 1;
            }
        }
        let p = count2 as f64 / n as f64;
        assert!((0.323..=0.343).contains(&p), "P(Q=2) = {p}");
    }

    #[test]
    fn snr_zero_means_unit_sigma() {
        assert_eq!(sigma_for_snr_db(0.0), 1.0);
    }

    #[test]
    fn line_round_trip() {
        let geom = make_test_geom();
        let mut rng = RngState::new(4242);
        for _ in 0..20 {
            let s = sample_training_scenario(&geom, &mut rng).unwrap();
            let line = scenario_to_line(&s);
            let back = scenario_from_line(&line).unwrap();
            assert_eq!(back.sources.len(), s.sources.len());
            assert_eq!(back.sigma_v, s.sigma_v);
            assert_eq!(back.snapshot, s.snapshot);
            for (a, b) in back.sources.iter().zip(&s.sources) {
                assert_eq!(a.theta_deg, b.theta_deg);
                assert_eq!(a.amplitude, b.amplitude);
            }
            assert!((back.snr_db - s.snr_db).abs() < 1e-9);
        }
    }

    #[test]
    fn malformed_lines_rejected() {
        assert!(scenario_from_line("").is_err());
        assert!(scenario_from_line("2 100.0").is_err());
        assert!(scenario_from_line("1 90 1 0 0.1 0.25").is_err());
        assert!(scenario_from_line("1 90 1 0 xyz 0.25 0").is_err());
    }

    fn make_test_geom() -> ArrayGeometry {
        crate::array::make_ula(16).unwrap()
    }
}
