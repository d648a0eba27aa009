//! Text reports: field-map table, gradient table, summary.

use std::fmt::Write as _;

use super::{
    build_field_map, fit_line, fit_plane, fit_row_gradient, resolution, sensitivity, FieldMap, GradientFit,
    GradientScope, LabProjection, Resolution, SensitivityReport,
};
use crate::dataset::{Dataset, DatasetMode, ShotSource};
use crate::error::{DatasetError, FitError};

/// Everything the estimate command produces from one dataset.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub input_hash: String,
    pub map: FieldMap,
    /// Row fits (array mode) or the single scan line fit.
    pub gradients: Vec<(GradientScope, Result<GradientFit, FitError>)>,
    pub plane: Option<GradientFit>,
    pub resolution: Option<Resolution>,
    pub sensitivity: Option<SensitivityReport>,
}

impl Analysis {
    /// `jobs` = 0 uses the global thread pool.
    pub fn run(ds: &Dataset, input_hash: &str, projection: LabProjection, jobs: usize) -> Result<Self, DatasetError> {
        let map = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) if jobs > 0 => pool.install(|| build_field_map(ds))?,
            _ => build_field_map(ds)?,
        };
        let gradients = match map.mode {
            DatasetMode::Array => (0..map.grid.rows)
                .map(|r| (GradientScope::Row(r), fit_row_gradient(&map, r)))
                .collect(),
            DatasetMode::Scan => {
                let px: Vec<_> = map.usable().collect();
                let x: Vec<f64> = px.iter().map(|p| p.position[0]).collect();
                let y: Vec<f64> = px.iter().map(|p| p.delta_b).collect();
                let s: Vec<f64> = px.iter().map(|p| p.sigma_delta_b).collect();
                vec![(GradientScope::Scan, fit_line(&x, &y, &s, GradientScope::Scan))]
            }
        };
        let plane = match map.mode {
            DatasetMode::Array => fit_plane(&map).ok(),
            DatasetMode::Scan => None,
        };
        Ok(Self {
            input_hash: input_hash.to_string(),
            resolution: resolution(&map).ok(),
            sensitivity: sensitivity(&map, projection).ok(),
            gradients,
            plane,
            map,
        })
    }

    pub fn row_fits(&self) -> impl Iterator<Item = &GradientFit> {
        self.gradients.iter().filter_map(|(_, f)| f.as_ref().ok())
    }

    /// Unweighted mean of the successful fitted slopes and its standard error.
    pub fn mean_gradient(&self) -> Option<(f64, f64)> {
        let s: Vec<f64> = self.row_fits().map(|f| f.slope).collect();
        if s.is_empty() {
            return None;
        }
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let sem = if s.len() > 1 {
            (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            f64::NAN
        };
        Some((mean, sem))
    }

    /// Nothing could be estimated at all.
    pub fn failed(&self) -> bool {
        self.map.usable_count() == 0
    }

    pub fn map_table(&self) -> String {
        let mut out = header("field map", &self.input_hash);
        out.push_str(
            "# columns: source x_m y_m status delta_B_T sigma_delta_B_T omega_on_rad_s sigma_on_rad_s omega_off_rad_s sigma_off_rad_s occupied_shots\n",
        );
        for p in &self.map.pixels {
            let src = match p.source {
                ShotSource::Site(s) => format!("site:{s}"),
                ShotSource::Probe(i) => format!("probe:{i}"),
            };
            let fit = |f: &Option<super::FringeFit>| match f {
                Some(f) if f.converged => format!("{:e}\t{:e}", f.omega, f.sigma_omega),
                _ => "nan\tnan".to_string(),
            };
            let _ = writeln!(
                out,
                "{src}\t{:e}\t{:e}\t{}\t{:e}\t{:e}\t{}\t{}\t{}",
                p.position[0],
                p.position[1],
                p.status.label(),
                p.delta_b,
                p.sigma_delta_b,
                fit(&p.fit_on),
                fit(&p.fit_off),
                p.occupied_shots
            );
        }
        out
    }

    pub fn gradient_table(&self) -> String {
        let mut out = header("gradients", &self.input_hash);
        out.push_str("# columns: scope slope_T_per_m sigma_slope_T_per_m intercept_T sigma_intercept_T points chi2 status\n");
        let mut line = |scope: String, r: &Result<GradientFit, FitError>| match r {
            Ok(f) => {
                let _ = writeln!(
                    out,
                    "{scope}\t{:e}\t{:e}\t{:e}\t{:e}\t{}\t{:e}\tok",
                    f.slope, f.sigma_slope, f.intercept, f.sigma_intercept, f.points, f.chi2
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{scope}\tnan\tnan\tnan\tnan\t0\tnan\t{}", e.to_string().replace('\t', " "));
            }
        };
        for (scope, r) in &self.gradients {
            let name = match scope {
                GradientScope::Row(r) => format!("row:{r}"),
                other => other.to_string(),
            };
            line(name, r);
        }
        if let Some(p) = &self.plane {
            line("plane_x".into(), &Ok(*p));
            if let Some((gy, sy)) = p.slope_y {
                let _ = writeln!(out, "plane_y\t{gy:e}\t{sy:e}\tnan\tnan\t{}\tnan\tok", p.points);
            }
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = header("summary", &self.input_hash);
        let total = self.map.pixels.len();
        let _ = writeln!(out, "pixels: {} usable of {total}", self.map.usable_count());
        let mut by_status = std::collections::BTreeMap::new();
        for p in &self.map.pixels {
            *by_status.entry(p.status.label()).or_insert(0usize) += 1;
        }
        for (k, v) in by_status {
            let _ = writeln!(out, "  {k}: {v}");
        }
        let fits: Vec<_> = self.row_fits().collect();
        let _ = writeln!(out, "gradient fits: {} of {}", fits.len(), self.gradients.len());
        if let Some((m, sem)) = self.mean_gradient() {
            let _ = writeln!(out, "mean gradient: {:.2} nT/um (sem {:.2})", m * 1e3, sem * 1e3);
        }
        if let Some(p) = &self.plane {
            let _ = writeln!(
                out,
                "plane gradient: x {:.2}({:.2}) nT/um, y {:.2}({:.2}) nT/um",
                p.slope * 1e3,
                p.sigma_slope * 1e3,
                p.slope_y.map_or(f64::NAN, |v| v.0 * 1e3),
                p.slope_y.map_or(f64::NAN, |v| v.1 * 1e3)
            );
        }
        match &self.resolution {
            Some(r) => {
                let _ = writeln!(out, "resolution: {:.1} nT (spread {:.1} nT over {} pixels)", r.mean * 1e9, r.spread * 1e9, r.pixels);
            }
            None => out.push_str("resolution: unavailable\n"),
        }
        if let Some(s) = &self.sensitivity {
            let _ = writeln!(out, "events per pixel: {:.1}", s.events);
            let _ = writeln!(out, "coherent time: {:.2} ms", s.coherent_time * 1e3);
            let _ = writeln!(out, "sensitivity: {:.2} nT/sqrt(Hz)", s.sensitivity * 1e9);
            let _ = writeln!(
                out,
                "stretched pair: {:.1} nT, {:.2} nT/sqrt(Hz)",
                s.stretch_delta_b * 1e9,
                s.stretch_sensitivity * 1e9
            );
            let _ = writeln!(
                out,
                "projection ({} cycles/s, {} s, {} events/cycle): {:.2} nT",
                s.projection.cycle_rate,
                s.projection.duration,
                s.projection.events_per_cycle,
                s.projected_delta_b * 1e9
            );
        }
        out
    }
}

fn header(kind: &str, hash: &str) -> String {
    format!("# sensorgrid {kind}\n# input_sha256={hash}\n")
}
