//! Sensor-grid geometry, stochastic loading, frozen per-site properties and
//! the steerable tweezer.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::ArrayError;

/// Rectangular tweezer grid. Site `(row, col)` sits at `origin + (col, row)·pitch`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub rows: usize,
    pub cols: usize,
    /// Site spacing, meters.
    pub pitch: f64,
    pub origin: [f64; 2],
}

impl GridGeometry {
    /// 15 × 18 sites at 7.0 µm pitch.
    pub fn paper_default() -> Self {
        Self {
            rows: 15,
            cols: 18,
            pitch: 7.0e-6,
            origin: [0.0, 0.0],
        }
    }

    pub fn site_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn index(&self, row: usize, col: usize) -> Result<usize, ArrayError> {
        if row >= self.rows || col >= self.cols {
            return Err(ArrayError::SiteOutOfRange {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(row * self.cols + col)
    }

    pub fn row_col(&self, site: usize) -> (usize, usize) {
        (site / self.cols, site % self.cols)
    }

    pub fn site_position(&self, row: usize, col: usize) -> Result<[f64; 2], ArrayError> {
        self.index(row, col)?;
        Ok([
            self.origin[0] + col as f64 * self.pitch,
            self.origin[1] + row as f64 * self.pitch,
        ])
    }

    /// Position of a linear site index; panics if out of range.
    pub fn position_of(&self, site: usize) -> [f64; 2] {
        let (r, c) = self.row_col(site);
        self.site_position(r, c).expect("site index in range")
    }

    /// ((cols−1)·pitch, (rows−1)·pitch).
    pub fn extent(&self) -> [f64; 2] {
        [
            self.cols.saturating_sub(1) as f64 * self.pitch,
            self.rows.saturating_sub(1) as f64 * self.pitch,
        ]
    }

    pub fn center(&self) -> [f64; 2] {
        let e = self.extent();
        [self.origin[0] + 0.5 * e[0], self.origin[1] + 0.5 * e[1]]
    }
}

impl Default for GridGeometry {
    fn default() -> Self {
        Self::paper_default()
    }
}

/// Per-site constants frozen for the duration of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteProperties {
    /// Differential light shift added to the transition frequency, rad/s.
    pub light_shift: f64,
    pub detection_true_positive: f64,
    pub detection_false_positive: f64,
    pub survival_probability: f64,
}

/// Imaging fidelity and per-cycle survival shared by all sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    pub true_positive: f64,
    pub false_positive: f64,
    pub survival_probability: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        Self {
            true_positive: 0.99,
            false_positive: 0.005,
            survival_probability: 0.99,
        }
    }
}

impl DetectionModel {
    pub fn ideal() -> Self {
        Self {
            true_positive: 1.0,
            false_positive: 0.0,
            survival_probability: 1.0,
        }
    }
}

/// Which sites hold an atom. At most one atom per site by construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Occupancy {
    sites: Vec<bool>,
    pub probe: Option<bool>,
}

impl Occupancy {
    pub fn empty(n: usize) -> Self {
        Self {
            sites: vec![false; n],
            probe: None,
        }
    }

    pub fn from_sites(sites: Vec<bool>) -> Self {
        Self { sites, probe: None }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn is_occupied(&self, site: usize) -> bool {
        self.sites[site]
    }

    pub fn set(&mut self, site: usize, occupied: bool) {
        self.sites[site] = occupied;
    }

    pub fn count(&self) -> usize {
        self.sites.iter().filter(|&&o| o).count()
    }

    pub fn occupied_sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.sites
            .iter()
            .enumerate()
            .filter_map(|(i, &o)| o.then_some(i))
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.sites
    }
}

/// Independent Bernoulli(p_load) filling of every site.
pub fn stochastic_load<R: Rng + ?Sized>(geom: &GridGeometry, p_load: f64, rng: &mut R) -> Occupancy {
    let p = p_load.clamp(0.0, 1.0);
    Occupancy::from_sites(
        (0..geom.site_count())
            .map(|_| rng.random::<f64>() < p)
            .collect(),
    )
}

/// Draws i.i.d. Gaussian light-shift offsets and attaches the detection model.
pub fn draw_site_properties<R: Rng + ?Sized>(
    geom: &GridGeometry,
    mean_light_shift: f64,
    light_shift_spread: f64,
    detection: &DetectionModel,
    rng: &mut R,
) -> Vec<SiteProperties> {
    let spread = light_shift_spread.max(0.0);
    let normal = Normal::new(mean_light_shift, spread).expect("finite spread");
    (0..geom.site_count())
        .map(|_| SiteProperties {
            light_shift: if spread == 0.0 {
                mean_light_shift
            } else {
                normal.sample(rng)
            },
            detection_true_positive: detection.true_positive,
            detection_false_positive: detection.false_positive,
            survival_probability: detection.survival_probability,
        })
        .collect()
}

/// rms radius per axis of a thermal atom in the harmonic part of a Gaussian
/// tweezer: `waist·sqrt(T/(4U))`, with the depth given as a temperature.
pub fn localization_sigma(temperature: f64, trap_depth: f64, waist: f64) -> Result<f64, ArrayError> {
    if !(temperature < trap_depth) || temperature < 0.0 {
        return Err(ArrayError::OutOfHarmonicRegime {
            temperature,
            depth: trap_depth,
        });
    }
    Ok(waist * (temperature / (4.0 * trap_depth)).sqrt())
}

/// Localization area (2σ)², square meters.
pub fn localization_area(temperature: f64, trap_depth: f64, waist: f64) -> Result<f64, ArrayError> {
    let s = localization_sigma(temperature, trap_depth, waist)?;
    Ok((2.0 * s).powi(2))
}

/// Movable optical tweezer with a finite addressable window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteerableTweezer {
    pub window_center: [f64; 2],
    /// Full width of the square addressable window, meters.
    pub window_size: f64,
    pub waist: f64,
    /// Positioning step, meters.
    pub step: f64,
    pub position: [f64; 2],
}

impl SteerableTweezer {
    /// 400 µm × 400 µm window centered on the grid, 2.0 µm waist, 50 nm steps.
    pub fn for_grid(geom: &GridGeometry) -> Self {
        let c = geom.center();
        Self {
            window_center: c,
            window_size: 400e-6,
            waist: 2.0e-6,
            step: 50e-9,
            position: c,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let h = 0.5 * self.window_size;
        (p[0] - self.window_center[0]).abs() <= h && (p[1] - self.window_center[1]).abs() <= h
    }

    /// Snaps `target` onto the step lattice and moves there.
    pub fn move_to(&mut self, target: [f64; 2]) -> Result<[f64; 2], ArrayError> {
        if !self.contains(target) {
            return Err(ArrayError::OutOfWindow {
                x: target[0],
                y: target[1],
            });
        }
        let snap = |v: f64, c: f64| {
            if self.step > 0.0 {
                c + ((v - c) / self.step).round() * self.step
            } else {
                v
            }
        };
        self.position = [
            snap(target[0], self.window_center[0]),
            snap(target[1], self.window_center[1]),
        ];
        Ok(self.position)
    }
}
