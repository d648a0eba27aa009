//! Static magnetic field scenes: a homogeneous quantization field plus a
//! switchable quadrupole test field.
//!
//! Frame: origin at array site (row 0, col 0), x along the quantization
//! axis, sensor plane at z = 0.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::FieldError;

pub type Vec3 = Vector3<f64>;

/// Homogeneous bias field defining the quantization axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizationField {
    /// |B_q|, tesla.
    pub magnitude: f64,
    pub axis: Vec3,
}

impl QuantizationField {
    pub fn new(magnitude: f64, axis: Vec3) -> Result<Self, FieldError> {
        if !(magnitude > 0.0) {
            return Err(FieldError::NonPositiveMagnitude(magnitude));
        }
        Ok(Self {
            magnitude,
            axis: unit(axis)?,
        })
    }

    pub fn vector(&self) -> Vec3 {
        self.axis * self.magnitude
    }
}

/// Linear quadrupole field of an anti-Helmholtz pair.
///
/// `B(r) = g·(a·d)·a − (g/2)·(d − (a·d)·a)` with `d = r − center`, which is
/// divergence- and curl-free with transverse gradients −g/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrupoleField {
    pub center: Vec3,
    pub axis: Vec3,
    /// Axial gradient g, tesla per meter.
    pub axial_gradient: f64,
    pub enabled: bool,
}

impl QuadrupoleField {
    pub fn new(center: Vec3, axis: Vec3, axial_gradient: f64) -> Result<Self, FieldError> {
        Ok(Self {
            center,
            axis: unit(axis)?,
            axial_gradient,
            enabled: true,
        })
    }

    /// Field contribution at `r`, ignoring the enabled flag.
    pub fn evaluate(&self, r: &Vec3) -> Vec3 {
        let d = r - self.center;
        let along = self.axis.dot(&d);
        let transverse = d - self.axis * along;
        self.axis * (self.axial_gradient * along) - transverse * (0.5 * self.axial_gradient)
    }

    /// Axial component of the contribution at `r`.
    pub fn axial_component(&self, r: &Vec3) -> f64 {
        self.axial_gradient * self.axis.dot(&(r - self.center))
    }
}

/// Complete static field configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldScene {
    pub quantization: QuantizationField,
    pub test: QuadrupoleField,
    #[serde(default = "Vec3::zeros")]
    pub uniform_offset: Vec3,
}

impl FieldScene {
    pub fn new(quantization: QuantizationField, test: QuadrupoleField) -> Self {
        Self {
            quantization,
            test,
            uniform_offset: Vec3::zeros(),
        }
    }

    /// 283 µT along x, 77.3 nT/µm quadrupole along x crossing zero at x = 28 µm on the row y = 49 µm.
    pub fn paper_default() -> Self {
        Self::new(
            QuantizationField {
                magnitude: 283e-6,
                axis: Vec3::x(),
            },
            QuadrupoleField {
                center: Vec3::new(28e-6, 49e-6, 0.0),
                axis: Vec3::x(),
                axial_gradient: 77.3e-9 / 1e-6,
                enabled: true,
            },
        )
    }

    /// Copy of the scene with the test field switched as requested,
    /// respecting a globally disabled test field.
    pub fn with_test(&self, on: bool) -> Self {
        let mut s = *self;
        s.test.enabled = self.test.enabled && on;
        s
    }
}

impl Default for FieldScene {
    fn default() -> Self {
        Self::paper_default()
    }
}

/// Total field vector at `r`.
pub fn field_at(scene: &FieldScene, r: &Vec3) -> Vec3 {
    let mut b = scene.quantization.vector() + scene.uniform_offset;
    if scene.test.enabled {
        b += scene.test.evaluate(r);
    }
    b
}

/// |B| at `r`: what the atom's Zeeman splitting responds to.
pub fn effective_field_magnitude(scene: &FieldScene, r: &Vec3) -> f64 {
    field_at(scene, r).norm()
}

/// Quadrupole reproducing the least-squares line through `(x, ΔB)` pairs along
/// the x axis, centered on the row at `row_y`.
pub fn solve_scene_from_map(
    axis_values: &[(f64, f64)],
    row_y: f64,
) -> Result<QuadrupoleField, FieldError> {
    let n = axis_values.len() as f64;
    if axis_values.len() < 2 {
        return Err(FieldError::Unsolvable("need at least two points".into()));
    }
    let mx = axis_values.iter().map(|p| p.0).sum::<f64>() / n;
    let my = axis_values.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = axis_values.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = axis_values.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(FieldError::Unsolvable("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if slope == 0.0 {
        if intercept != 0.0 {
            return Err(FieldError::Unsolvable(
                "a constant nonzero shift has no quadrupole equivalent".into(),
            ));
        }
        return QuadrupoleField::new(Vec3::new(0.0, row_y, 0.0), Vec3::x(), 0.0);
    }
    QuadrupoleField::new(Vec3::new(-intercept / slope, row_y, 0.0), Vec3::x(), slope)
}

fn unit(v: Vec3) -> Result<Vec3, FieldError> {
    let n = v.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(FieldError::DegenerateAxis);
    }
    Ok(v / n)
}
