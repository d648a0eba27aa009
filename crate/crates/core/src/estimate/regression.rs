//! Weighted least-squares line and plane fits of ΔB over position.

use nalgebra::{DMatrix, DVector};

use super::FieldMap;
use crate::error::FitError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientScope {
    Row(usize),
    Plane,
    Scan,
}

impl std::fmt::Display for GradientScope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Row(r) => write!(f, "row {r}"),
            Self::Plane => f.write_str("plane"),
            Self::Scan => f.write_str("scan"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientFit {
    pub scope: GradientScope,
    /// dΔB/dx, T/m.
    pub slope: f64,
    /// ΔB at x = 0 (and y = 0 for a plane), T.
    pub intercept: f64,
    pub sigma_slope: f64,
    pub sigma_intercept: f64,
    /// dΔB/dy and its uncertainty, plane fits only.
    pub slope_y: Option<(f64, f64)>,
    pub points: usize,
    pub chi2: f64,
}

impl GradientFit {
    /// x where the fitted ΔB vanishes (lines only).
    pub fn zero_crossing(&self) -> f64 {
        -self.intercept / self.slope
    }
}

fn weighted_lsq(design: &DMatrix<f64>, y: &[f64], sigma: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>, f64), FitError> {
    let w = DVector::from_iterator(sigma.len(), sigma.iter().map(|s| 1.0 / (s * s)));
    let y = DVector::from_column_slice(y);
    let mut a = DMatrix::zeros(design.ncols(), design.ncols());
    let mut b = DVector::zeros(design.ncols());
    for i in 0..design.nrows() {
        let row = design.row(i).transpose();
        a += &row * row.transpose() * w[i];
        b += &row * (w[i] * y[i]);
    }
    let cov = a
        .clone()
        .try_inverse()
        .ok_or_else(|| FitError::InsufficientData("degenerate positions".into()))?;
    let beta = &cov * b;
    let resid = y - design * &beta;
    let chi2 = resid.iter().zip(w.iter()).map(|(r, w)| w * r * r).sum();
    Ok((beta, cov, chi2))
}

fn check(x: &[f64], sigma: &[f64], min: usize) -> Result<(), FitError> {
    if x.len() < min {
        return Err(FitError::InsufficientData(format!("{} points, need {min}", x.len())));
    }
    if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(FitError::InsufficientData("non-positive uncertainty".into()));
    }
    Ok(())
}

/// Straight line y = intercept + slope·x, uncertainties from the weighted
/// normal equations.
pub fn fit_line(x: &[f64], y: &[f64], sigma: &[f64], scope: GradientScope) -> Result<GradientFit, FitError> {
    check(x, sigma, 2)?;
    let design = DMatrix::from_fn(x.len(), 2, |i, j| if j == 0 { 1.0 } else { x[i] });
    let (beta, cov, chi2) = weighted_lsq(&design, y, sigma)?;
    Ok(GradientFit {
        scope,
        slope: beta[1],
        intercept: beta[0],
        sigma_slope: cov[(1, 1)].sqrt(),
        sigma_intercept: cov[(0, 0)].sqrt(),
        slope_y: None,
        points: x.len(),
        chi2,
    })
}

/// Line fit of ΔB vs x over the usable pixels of one grid row.
pub fn fit_row_gradient(map: &FieldMap, row: usize) -> Result<GradientFit, FitError> {
    let (mut x, mut y, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for col in 0..map.grid.cols {
        if let Some(p) = map.site(row, col).filter(|p| p.usable()) {
            x.push(p.position[0]);
            y.push(p.delta_b);
            s.push(p.sigma_delta_b);
        }
    }
    check(&x, &s, 3)?;
    fit_line(&x, &y, &s, GradientScope::Row(row))
}

/// Plane ΔB = c + gx·x + gy·y over all usable pixels.
pub fn fit_plane(map: &FieldMap) -> Result<GradientFit, FitError> {
    let px: Vec<_> = map.usable().collect();
    let s: Vec<f64> = px.iter().map(|p| p.sigma_delta_b).collect();
    check(&s, &s, 4)?;
    let design = DMatrix::from_fn(px.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => px[i].position[0],
        _ => px[i].position[1],
    });
    let y: Vec<f64> = px.iter().map(|p| p.delta_b).collect();
    let (beta, cov, chi2) = weighted_lsq(&design, &y, &s)?;
    Ok(GradientFit {
        scope: GradientScope::Plane,
        slope: beta[1],
        intercept: beta[0],
        sigma_slope: cov[(1, 1)].sqrt(),
        sigma_intercept: cov[(0, 0)].sqrt(),
        slope_y: Some((beta[2], cov[(2, 2)].sqrt())),
        points: px.len(),
        chi2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let x: Vec<f64> = (0..18).map(|i| i as f64 * 7e-6).collect();
        let y: Vec<f64> = x.iter().map(|x| 77.3e-3 * (x - 28e-6)).collect();
        let s = vec![98e-9; x.len()];
        let f = fit_line(&x, &y, &s, GradientScope::Row(0)).unwrap();
        assert!((f.slope - 77.3e-3).abs() < 1e-12);
        assert!((f.zero_crossing() - 28e-6).abs() < 1e-15);
        assert!(f.sigma_slope > 0.0 && f.sigma_intercept > 0.0);
        assert!(f.chi2 < 1e-12);
    }

    #[test]
    fn slope_uncertainty_matches_closed_form() {
        let x: Vec<f64> = (0..18).map(|i| i as f64 * 7e-6).collect();
        let y = vec![0.0; 18];
        let s = vec![98e-9; 18];
        let f = fit_line(&x, &y, &s, GradientScope::Scan).unwrap();
        let mean = x.iter().sum::<f64>() / 18.0;
        let sxx: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        assert!((f.sigma_slope - 98e-9 / sxx.sqrt()).abs() < 1e-9 * f.sigma_slope);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_line(&[1.0], &[1.0], &[1.0], GradientScope::Scan).is_err());
        assert!(fit_line(&[1.0, 1.0], &[1.0, 2.0], &[1.0, 1.0], GradientScope::Scan).is_err());
        assert!(fit_line(&[1.0, 2.0], &[1.0, 2.0], &[0.0, 1.0], GradientScope::Scan).is_err());
    }
}
