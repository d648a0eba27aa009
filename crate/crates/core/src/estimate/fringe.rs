//! Ramsey fringe fitting: A + C·cos(ωT + φ) to detection fractions.
//!
//! The frequency is seeded from the best single-frequency least-squares
//! fit over a fine grid up to the Nyquist frequency of the T sampling, then
//! all four parameters are refined with Levenberg–Marquardt. Counts-based
//! fits are reweighted with the model's binomial variance.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::error::FitError;
use crate::physics::wrap_phase;

/// Minimum number of distinct free-precession times.
pub const MIN_DISTINCT_T: usize = 8;
/// Fraction of the Nyquist frequency above which a fit is flagged ambiguous.
pub const NYQUIST_GUARD: f64 = 0.95;
const OVERSAMPLE: f64 = 10.0;
const FALSE_ALARM: f64 = 1e-3;
const REWEIGHT_PASSES: usize = 2;

/// A fraction with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringePoint {
    pub t: f64,
    pub y: f64,
    pub sigma: f64,
}

/// Detection counts at one T.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountPoint {
    pub t_bits: u64,
    pub trials: u32,
    pub successes: u32,
}

impl CountPoint {
    pub fn new(t: f64, trials: u32, successes: u32) -> Self {
        Self {
            t_bits: t.to_bits(),
            trials,
            successes,
        }
    }

    pub fn t(&self) -> f64 {
        f64::from_bits(self.t_bits)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FringeFit {
    /// Ramsey frequency, rad/s.
    pub omega: f64,
    pub sigma_omega: f64,
    pub offset: f64,
    pub amplitude: f64,
    /// Phase at T = 0, wrapped to (−π, π].
    pub phase: f64,
    /// Total trials (occupied shots) entering the fit.
    pub events: u64,
    pub chi2: f64,
    pub dof: usize,
    pub converged: bool,
    /// ω̂ lies within the top 5 % of the Nyquist band.
    pub ambiguous: bool,
    pub nyquist: f64,
}

impl FringeFit {
    pub fn reduced_chi2(&self) -> f64 {
        if self.dof == 0 {
            f64::NAN
        } else {
            self.chi2 / self.dof as f64
        }
    }

    pub fn predict(&self, t: f64) -> f64 {
        self.offset + self.amplitude * (self.omega * t + self.phase).cos()
    }
}

/// Result of the frequency scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPeak {
    pub omega: f64,
    /// χ² reduction relative to a constant model.
    pub delta_chi2: f64,
    /// Detection threshold on `delta_chi2`.
    pub threshold: f64,
    pub nyquist: f64,
}

impl SpectralPeak {
    pub fn significant(&self) -> bool {
        self.delta_chi2 > self.threshold
    }
}

struct Problem {
    t: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

impl Problem {
    fn from_points(points: &[FringePoint], t_mid: f64) -> Self {
        Self {
            t: points.iter().map(|p| p.t - t_mid).collect(),
            y: points.iter().map(|p| p.y).collect(),
            w: points.iter().map(|p| 1.0 / (p.sigma * p.sigma)).collect(),
        }
    }

    fn model(p: &Vector4<f64>, t: f64) -> f64 {
        let (s, c) = (p[3] * t).sin_cos();
        p[0] + p[1] * c + p[2] * s
    }

    fn chi2(&self, p: &Vector4<f64>) -> f64 {
        self.t
            .iter()
            .zip(&self.y)
            .zip(&self.w)
            .map(|((&t, &y), &w)| w * (y - Self::model(p, t)).powi(2))
            .sum()
    }

    fn normal_equations(&self, p: &Vector4<f64>) -> (Matrix4<f64>, Vector4<f64>) {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for ((&t, &y), &w) in self.t.iter().zip(&self.y).zip(&self.w) {
            let (s, c) = (p[3] * t).sin_cos();
            let j = Vector4::new(1.0, c, s, t * (p[2] * c - p[1] * s));
            let r = y - (p[0] + p[1] * c + p[2] * s);
            jtj += j * j.transpose() * w;
            jtr += j * (w * r);
        }
        (jtj, jtr)
    }

    /// Weighted linear fit of [1, cos ωt, sin ωt]; returns (coefficients, χ²).
    fn linear_at(&self, omega: f64) -> Option<(Vector3<f64>, f64)> {
        let mut a = Matrix3::zeros();
        let mut b = Vector3::zeros();
        let mut yy = 0.0;
        for ((&t, &y), &w) in self.t.iter().zip(&self.y).zip(&self.w) {
            let (s, c) = (omega * t).sin_cos();
            let x = Vector3::new(1.0, c, s);
            a += x * x.transpose() * w;
            b += x * (w * y);
            yy += w * y * y;
        }
        let beta = a.cholesky()?.solve(&b);
        Some((beta, (yy - beta.dot(&b)).max(0.0)))
    }

    fn lm(&self, start: Vector4<f64>) -> Result<(Vector4<f64>, f64), FitError> {
        let mut p = start;
        let mut chi = self.chi2(&p);
        let mut lambda = 1e-3;
        for _ in 0..500 {
            let (jtj, jtr) = self.normal_equations(&p);
            let mut accepted = None;
            while lambda < 1e16 {
                let mut a = jtj;
                for i in 0..4 {
                    a[(i, i)] += lambda * jtj[(i, i)].max(f64::MIN_POSITIVE);
                }
                if let Some(ch) = a.cholesky() {
                    let step = ch.solve(&jtr);
                    let trial = p + step;
                    let trial_chi = self.chi2(&trial);
                    if trial_chi.is_finite() && trial_chi <= chi {
                        accepted = Some((trial, trial_chi, step));
                        break;
                    }
                }
                lambda *= 10.0;
            }
            let Some((trial, trial_chi, step)) = accepted else {
                break;
            };
            let small_step = step
                .iter()
                .zip(trial.iter())
                .all(|(d, v)| d.abs() <= 1e-14 * v.abs().max(1e-300));
            let stalled = chi - trial_chi <= 1e-16 * chi;
            p = trial;
            chi = trial_chi;
            lambda = (lambda * 0.1).max(1e-15);
            if small_step || (stalled && step[3].abs() <= 1e-12 * p[3].abs()) || chi == 0.0 {
                break;
            }
        }
        if !p.iter().all(|v| v.is_finite()) {
            return Err(FitError::NotConverged("non-finite parameters".into()));
        }
        Ok((p, chi))
    }
}

fn sampling(points: &[FringePoint]) -> Result<(f64, f64, f64), FitError> {
    let mut ts: Vec<f64> = points.iter().map(|p| p.t).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    if ts.len() < MIN_DISTINCT_T {
        return Err(FitError::InsufficientData(format!(
            "{} distinct T values, need {MIN_DISTINCT_T}",
            ts.len()
        )));
    }
    let span = ts[ts.len() - 1] - ts[0];
    let min_gap = ts.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let mid = 0.5 * (ts[0] + ts[ts.len() - 1]);
    Ok((span, min_gap, mid))
}

/// Scans trial frequencies from half a cycle per span up to the Nyquist
/// frequency π/ΔT_min and returns the one with the smallest χ².
pub fn spectral_peak(points: &[FringePoint]) -> Result<SpectralPeak, FitError> {
    let (span, gap, mid) = sampling(points)?;
    let problem = Problem::from_points(points, mid);
    Ok(scan(&problem, span, gap).0)
}

fn scan(problem: &Problem, span: f64, gap: f64) -> (SpectralPeak, Vector4<f64>) {
    let resolution = TAU / span;
    let nyquist = PI / gap;
    let lo = 0.5 * resolution;
    let step = resolution / OVERSAMPLE;
    let n = ((nyquist - lo) / step).floor().max(0.0) as usize + 1;

    let sw: f64 = problem.w.iter().sum();
    let mean = problem.y.iter().zip(&problem.w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let chi_const: f64 = problem
        .y
        .iter()
        .zip(&problem.w)
        .map(|(y, w)| w * (y - mean).powi(2))
        .sum();

    let mut best = (f64::INFINITY, lo, Vector3::new(mean, 0.0, 0.0));
    for i in 0..n {
        let omega = (lo + i as f64 * step).min(nyquist);
        if let Some((beta, chi)) = problem.linear_at(omega) {
            if chi < best.0 {
                best = (chi, omega, beta);
            }
        }
    }
    let independent = ((nyquist - lo) / resolution).max(1.0);
    let peak = SpectralPeak {
        omega: best.1,
        delta_chi2: chi_const - best.0,
        threshold: 2.0 * (independent / FALSE_ALARM).ln(),
        nyquist,
    };
    (peak, Vector4::new(best.2[0], best.2[1], best.2[2], best.1))
}

fn finish(
    problem: &Problem,
    p: Vector4<f64>,
    chi: f64,
    t_mid: f64,
    nyquist: f64,
    events: u64,
) -> Result<FringeFit, FitError> {
    let (jtj, _) = problem.normal_equations(&p);
    let cov = jtj
        .try_inverse()
        .ok_or_else(|| FitError::NotConverged("singular normal matrix".into()))?;
    let dof = problem.t.len().saturating_sub(4);
    let red = if dof > 0 { chi / dof as f64 } else { 0.0 };
    let var_omega = cov[(3, 3)] * red.max(1.0);

    let mut omega = p[3];
    let mut a = p[1];
    let mut b = p[2];
    if omega < 0.0 {
        omega = -omega;
        b = -b;
    }
    let amplitude = a.hypot(b);
    if amplitude == 0.0 {
        a = 1.0;
    }
    // a·cos ωt' + b·sin ωt' = C·cos(ωt' + φ'), t' = T − t_mid
    let phase = wrap_phase((-b).atan2(a) - omega * t_mid);
    let sigma_omega = var_omega.max(0.0).sqrt();
    let converged = omega > 0.0 && sigma_omega > 0.0 && sigma_omega.is_finite();
    Ok(FringeFit {
        omega,
        sigma_omega,
        offset: p[0],
        amplitude,
        phase,
        events,
        chi2: chi,
        dof,
        converged,
        ambiguous: omega > NYQUIST_GUARD * nyquist,
        nyquist,
    })
}

fn non_converged(peak: &SpectralPeak, start: &Vector4<f64>, events: u64, dof: usize) -> FringeFit {
    FringeFit {
        omega: peak.omega,
        sigma_omega: f64::INFINITY,
        offset: start[0],
        amplitude: start[1].hypot(start[2]),
        phase: 0.0,
        events,
        chi2: f64::NAN,
        dof,
        converged: false,
        ambiguous: false,
        nyquist: peak.nyquist,
    }
}

/// Fits fractions with known standard errors.
pub fn fit_fringe_points(points: &[FringePoint]) -> Result<FringeFit, FitError> {
    if points.iter().any(|p| !(p.sigma > 0.0) || !p.y.is_finite()) {
        return Err(FitError::InsufficientData("non-positive sigma or non-finite value".into()));
    }
    let (span, gap, mid) = sampling(points)?;
    let problem = Problem::from_points(points, mid);
    let (peak, start) = scan(&problem, span, gap);
    let dof = points.len().saturating_sub(4);
    if !peak.significant() {
        return Ok(non_converged(&peak, &start, 0, dof));
    }
    let (p, chi) = problem.lm(start)?;
    finish(&problem, p, chi, mid, peak.nyquist, 0)
}

/// Binomial standard error with the continuity-corrected fraction
/// (k + 0.5)/(n + 1), so that 0 and n successes keep a finite weight.
pub fn binomial_sigma(successes: u32, trials: u32) -> f64 {
    let n = trials as f64;
    let p = (successes as f64 + 0.5) / (n + 1.0);
    (p * (1.0 - p) / n).sqrt()
}

/// Fits detection counts per T (one site, one field state).
///
/// First pass weights come from [`binomial_sigma`]; later passes use the
/// fitted model's binomial variance, floored at the same continuity bound.
pub fn fit_fringe(counts: &[CountPoint]) -> Result<FringeFit, FitError> {
    let used: Vec<&CountPoint> = counts.iter().filter(|c| c.trials > 0).collect();
    if used.iter().any(|c| c.successes > c.trials) {
        return Err(FitError::InsufficientData("more detections than trials".into()));
    }
    let events: u64 = used.iter().map(|c| c.trials as u64).sum();
    let mut points: Vec<FringePoint> = used
        .iter()
        .map(|c| FringePoint {
            t: c.t(),
            y: c.successes as f64 / c.trials as f64,
            sigma: binomial_sigma(c.successes, c.trials),
        })
        .collect();
    let (span, gap, mid) = sampling(&points)?;
    let dof = points.len().saturating_sub(4);

    let problem = Problem::from_points(&points, mid);
    let (peak, start) = scan(&problem, span, gap);
    if !peak.significant() {
        return Ok(non_converged(&peak, &start, events, dof));
    }
    let (mut p, mut chi) = problem.lm(start)?;
    let mut problem = problem;
    for _ in 0..REWEIGHT_PASSES {
        for (pt, c) in points.iter_mut().zip(&used) {
            let n = c.trials as f64;
            let floor = 0.5 / (n + 1.0);
            let m = Problem::model(&p, pt.t - mid).clamp(floor, 1.0 - floor);
            pt.sigma = (m * (1.0 - m) / n).sqrt();
        }
        problem = Problem::from_points(&points, mid);
        (p, chi) = problem.lm(p)?;
    }
    finish(&problem, p, chi, mid, peak.nyquist, events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::fringe_model;

    fn grid() -> Vec<f64> {
        (0..55).map(|i| 2e-6 + 2e-6 * i as f64).collect()
    }

    #[test]
    fn noiseless_fringe_is_recovered_exactly() {
        let omega = TAU * 38.7e3;
        let pts: Vec<FringePoint> = grid()
            .into_iter()
            .map(|t| FringePoint { t, y: fringe_model(t, 0.15, 0.14, omega, 0.3), sigma: 0.01 })
            .collect();
        let fit = fit_fringe_points(&pts).unwrap();
        assert!(fit.converged);
        assert!(((fit.omega - omega) / omega).abs() < 1e-9, "{}", fit.omega / TAU);
        assert!((fit.offset - 0.15).abs() < 1e-9);
        assert!((fit.amplitude - 0.14).abs() < 1e-9);
        assert!((fit.phase - 0.3).abs() < 1e-9);
        assert!(!fit.ambiguous);
    }

    #[test]
    fn too_few_t_values() {
        let pts: Vec<FringePoint> = (0..7).map(|i| FringePoint { t: i as f64 * 1e-6, y: 0.1, sigma: 0.1 }).collect();
        assert!(matches!(fit_fringe_points(&pts), Err(FitError::InsufficientData(_))));
        let counts: Vec<CountPoint> = (0..20).map(|i| CountPoint::new(1e-6 * (i % 5) as f64 + 1e-6, 10, 3)).collect();
        assert!(matches!(fit_fringe(&counts), Err(FitError::InsufficientData(_))));
    }

    #[test]
    fn flat_data_is_not_converged() {
        let counts: Vec<CountPoint> = grid().into_iter().map(|t| CountPoint::new(t, 20, 4)).collect();
        let fit = fit_fringe(&counts).unwrap();
        assert!(!fit.converged);
    }

    #[test]
    fn near_nyquist_is_flagged() {
        let nyq = PI / 2e-6;
        let omega = 0.97 * nyq;
        let pts: Vec<FringePoint> = grid()
            .into_iter()
            .map(|t| FringePoint { t, y: fringe_model(t, 0.5, 0.3, omega, 0.2), sigma: 0.01 })
            .collect();
        let fit = fit_fringe_points(&pts).unwrap();
        assert!(fit.ambiguous);
        assert!((fit.nyquist - nyq).abs() < 1e-6 * nyq);
    }

    #[test]
    fn continuity_corrected_sigma_is_positive() {
        assert!(binomial_sigma(0, 10) > 0.0);
        assert!(binomial_sigma(10, 10) > 0.0);
        assert!((binomial_sigma(5, 10) - (0.5f64 * 0.5 / 10.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn counts_fit_from_expected_counts() {
        let omega = TAU * 50e3;
        let counts: Vec<CountPoint> = grid()
            .into_iter()
            .map(|t| {
                let p = fringe_model(t, 0.15, 0.14, omega, -1.0);
                CountPoint::new(t, 1000, (p * 1000.0).round() as u32)
            })
            .collect();
        let fit = fit_fringe(&counts).unwrap();
        assert!(fit.converged);
        assert!((fit.omega - omega).abs() < 5.0 * fit.sigma_omega + 1e-3 * omega);
        assert_eq!(fit.events, 55_000);
    }
}
