//! Analysis chain: per-source fringe fits, Δω and ΔB maps, gradient
//! regression, resolution and sensitivity.

mod fringe;
mod regression;
pub mod report;

use std::collections::BTreeMap;

use rayon::prelude::*;

pub use fringe::{
    binomial_sigma, fit_fringe, fit_fringe_points, spectral_peak, CountPoint, FringeFit, FringePoint,
    SpectralPeak, MIN_DISTINCT_T, NYQUIST_GUARD,
};
pub use regression::{fit_line, fit_plane, fit_row_gradient, GradientFit, GradientScope};

use crate::array::GridGeometry;
use crate::dataset::{Dataset, DatasetMode, ShotSource};
use crate::error::{DatasetError, FitError};
use crate::physics::FIELD_TO_DETUNING;

/// Susceptibility gain of the stretched pair over the default pair.
pub const STRETCH_FACTOR: f64 = 2.5;

/// Δω = ω_on − ω_off with quadrature uncertainty.
pub fn delta_omega(on: &FringeFit, off: &FringeFit) -> Result<(f64, f64), FitError> {
    if !on.converged || !off.converged {
        return Err(FitError::NotConverged("both field states must converge".into()));
    }
    Ok((on.omega - off.omega, on.sigma_omega.hypot(off.sigma_omega)))
}

/// ΔB for a Ramsey frequency shift; positive Δω means a larger field.
pub fn omega_to_delta_b(delta_omega: f64) -> f64 {
    delta_omega / FIELD_TO_DETUNING
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelStatus {
    Ok,
    /// ω̂ near the Nyquist edge in at least one field state.
    Ambiguous,
    /// Too few T values, no spectral peak, or the optimizer failed.
    FitFailed,
    /// No occupied shots in one of the field states.
    NoData,
}

impl PixelStatus {
    pub fn label(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Ambiguous => "ambiguous",
            Self::FitFailed => "fit_failed",
            Self::NoData => "no_data",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pixel {
    pub source: ShotSource,
    pub position: [f64; 2],
    pub status: PixelStatus,
    /// T.
    pub delta_b: f64,
    pub sigma_delta_b: f64,
    pub fit_on: Option<FringeFit>,
    pub fit_off: Option<FringeFit>,
    /// Occupied shots over both field states.
    pub occupied_shots: u64,
    /// Σ T over occupied shots, s.
    pub occupied_time: f64,
}

impl Pixel {
    pub fn usable(&self) -> bool {
        self.status == PixelStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub mode: DatasetMode,
    pub grid: GridGeometry,
    pub pixels: Vec<Pixel>,
    /// Fraction of occupied atoms that take part in the Ramsey sequence.
    pub prep_efficiency: f64,
}

impl FieldMap {
    pub fn usable(&self) -> impl Iterator<Item = &Pixel> {
        self.pixels.iter().filter(|p| p.usable())
    }

    pub fn usable_count(&self) -> usize {
        self.usable().count()
    }

    /// Array-mode pixel for grid site (row, col).
    pub fn site(&self, row: usize, col: usize) -> Option<&Pixel> {
        let idx = self.grid.index(row, col).ok()? as u32;
        self.pixels
            .iter()
            .find(|p| p.source == ShotSource::Site(idx))
    }
}

type GroupKey = (ShotSource, bool, u64);

/// Per (source, field state, T): (occupied, occupied ∧ detected, T).
fn tally(ds: &Dataset) -> BTreeMap<GroupKey, (u32, u32)> {
    let mut groups: BTreeMap<GroupKey, (u32, u32)> = BTreeMap::new();
    for r in &ds.records {
        let entry = groups.entry((r.source, r.test_on, r.t.to_bits())).or_default();
        if r.occupied_before {
            entry.0 += 1;
            if r.detected_after {
                entry.1 += 1;
            }
        }
    }
    groups
}

fn fit_state(counts: &[CountPoint]) -> Option<FringeFit> {
    fit_fringe(counts).ok()
}

fn pixel(source: ShotSource, position: [f64; 2], on: &[CountPoint], off: &[CountPoint]) -> Pixel {
    let occupied_shots = on.iter().chain(off).map(|c| c.trials as u64).sum();
    let occupied_time = on
        .iter()
        .chain(off)
        .map(|c| c.trials as f64 * c.t())
        .sum();
    let mut px = Pixel {
        source,
        position,
        status: PixelStatus::NoData,
        delta_b: f64::NAN,
        sigma_delta_b: f64::NAN,
        fit_on: None,
        fit_off: None,
        occupied_shots,
        occupied_time,
    };
    let has = |c: &[CountPoint]| c.iter().any(|p| p.trials > 0);
    if !has(on) || !has(off) {
        return px;
    }
    px.fit_on = fit_state(on);
    px.fit_off = fit_state(off);
    px.status = match (&px.fit_on, &px.fit_off) {
        (Some(a), Some(b)) if a.converged && b.converged => {
            let (dw, s) = delta_omega(a, b).expect("both converged");
            px.delta_b = omega_to_delta_b(dw);
            px.sigma_delta_b = omega_to_delta_b(s);
            if a.ambiguous || b.ambiguous {
                PixelStatus::Ambiguous
            } else {
                PixelStatus::Ok
            }
        }
        _ => PixelStatus::FitFailed,
    };
    px
}

/// Fits both field states for every source in the dataset.
///
/// Sources with no records at all still appear (array mode) with
/// [`PixelStatus::NoData`]. Record order does not matter.
pub fn build_field_map(ds: &Dataset) -> Result<FieldMap, DatasetError> {
    if ds.records.is_empty() {
        return Err(DatasetError::Empty);
    }
    let groups = tally(ds);
    let sources: Vec<ShotSource> = match ds.meta.mode {
        DatasetMode::Array => (0..ds.meta.grid.site_count() as u32).map(ShotSource::Site).collect(),
        DatasetMode::Scan => (0..ds.meta.probe_positions.len() as u32).map(ShotSource::Probe).collect(),
    };
    let collect = |src: ShotSource, on: bool| -> Vec<CountPoint> {
        let lo = (src, on, 0u64);
        let hi = (src, on, u64::MAX);
        groups
            .range(lo..=hi)
            .map(|(&(_, _, t), &(n, k))| CountPoint::new(f64::from_bits(t), n, k))
            .collect()
    };
    let pixels = sources
        .par_iter()
        .map(|&src| pixel(src, ds.position(src), &collect(src, true), &collect(src, false)))
        .collect();
    Ok(FieldMap {
        mode: ds.meta.mode,
        grid: ds.meta.grid,
        pixels,
        prep_efficiency: ds.meta.prep_efficiency,
    })
}

/// Mean σ_ΔB over usable pixels and its spread (population standard
/// deviation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub mean: f64,
    pub spread: f64,
    pub pixels: usize,
}

pub fn resolution(map: &FieldMap) -> Result<Resolution, FitError> {
    resolution_of(map.usable().map(|p| p.sigma_delta_b))
}

pub fn resolution_of(sigmas: impl IntoIterator<Item = f64>) -> Result<Resolution, FitError> {
    let s: Vec<f64> = sigmas.into_iter().collect();
    if s.is_empty() {
        return Err(FitError::Empty);
    }
    // shifted by the first value so identical inputs give exactly zero spread
    let n = s.len() as f64;
    let d: Vec<f64> = s.iter().map(|v| v - s[0]).collect();
    let shift = d.iter().sum::<f64>() / n;
    let spread = (d.iter().map(|v| (v - shift).powi(2)).sum::<f64>() / n).sqrt();
    Ok(Resolution {
        mean: s[0] + shift,
        spread,
        pixels: s.len(),
    })
}

/// Lab-time projection: resolution after integrating for `duration` at
/// `cycle_rate`, with `events_per_cycle` Ramsey events per site per cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabProjection {
    pub cycle_rate: f64,
    pub duration: f64,
    pub events_per_cycle: f64,
}

impl Default for LabProjection {
    fn default() -> Self {
        Self {
            cycle_rate: 10.0,
            duration: 3600.0,
            events_per_cycle: 1.0,
        }
    }
}

impl LabProjection {
    pub fn events(&self) -> f64 {
        self.cycle_rate * self.duration * self.events_per_cycle
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityReport {
    /// Resolution δB, T.
    pub delta_b: f64,
    pub delta_b_spread: f64,
    /// Ramsey events per pixel.
    pub events: f64,
    /// 𝒯 = Σ T over events, s.
    pub coherent_time: f64,
    /// δB·√𝒯, T/√Hz.
    pub sensitivity: f64,
    /// δB with the stretched pair.
    pub stretch_delta_b: f64,
    pub stretch_sensitivity: f64,
    /// Stretched-pair δB after the lab-time projection.
    pub projected_delta_b: f64,
    pub projection: LabProjection,
}

impl SensitivityReport {
    /// Arithmetic core, shared by the map and event-list entry points.
    pub fn from_parts(
        delta_b: f64,
        delta_b_spread: f64,
        events: f64,
        coherent_time: f64,
        projection: LabProjection,
    ) -> Result<Self, FitError> {
        if !(events > 0.0) || !(coherent_time > 0.0) {
            return Err(FitError::InsufficientData("zero events".into()));
        }
        let stretch = delta_b / STRETCH_FACTOR;
        Ok(Self {
            delta_b,
            delta_b_spread,
            events,
            coherent_time,
            sensitivity: delta_b * coherent_time.sqrt(),
            stretch_delta_b: stretch,
            stretch_sensitivity: stretch * coherent_time.sqrt(),
            projected_delta_b: stretch * (events / projection.events()).sqrt(),
            projection,
        })
    }
}

/// 𝒯 as an exact sum over event T values.
pub fn coherent_time(t_values: &[f64]) -> f64 {
    t_values.iter().sum()
}

/// Sensitivity from an explicit event list.
pub fn sensitivity_of_events(
    delta_b: f64,
    t_values: &[f64],
    projection: LabProjection,
) -> Result<SensitivityReport, FitError> {
    SensitivityReport::from_parts(delta_b, 0.0, t_values.len() as f64, coherent_time(t_values), projection)
}

/// Sensitivity from a map: events per usable pixel are occupied shots
/// times the preparation efficiency, averaged over usable pixels.
pub fn sensitivity(map: &FieldMap, projection: LabProjection) -> Result<SensitivityReport, FitError> {
    let res = resolution(map)?;
    let n = res.pixels as f64;
    let eff = map.prep_efficiency;
    let events = map.usable().map(|p| p.occupied_shots as f64).sum::<f64>() * eff / n;
    let time = map.usable().map(|p| p.occupied_time).sum::<f64>() * eff / n;
    SensitivityReport::from_parts(res.mean, res.spread, events, time, projection)
}
