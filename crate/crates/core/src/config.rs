//! TOML run configuration with paper defaults.
//!
//! Every key is optional; missing keys take the defaults below. Physical
//! quantities accept SI numbers or prefixed strings (see [`crate::units`]).
//! Frequencies are cyclic (Hz) in the file and angular (rad/s) in memory.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::array::{draw_site_properties, localization_area, DetectionModel, GridGeometry, SteerableTweezer};
use crate::assembly::{AssemblySetup, TargetPattern};
use crate::dataset::sha256_hex;
use crate::engine::{CyclePlan, Experiment, PrepModel, ProbeSetup};
use crate::error::ConfigError;
use crate::estimate::LabProjection;
use crate::fields::{FieldScene, QuadrupoleField, QuantizationField, Vec3};
use crate::physics::{breit_rabi_splitting, AtomicConstants, RamseyParams, SensorStates};
use crate::rng;
use crate::units::{Hertz, Kelvin, Meters, Seconds, Tesla, TeslaPerMeter};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub grid: GridConfig,
    pub atom: AtomConfig,
    pub field: FieldConfig,
    pub ramsey: RamseyConfig,
    pub sites: SiteConfig,
    pub prep: PrepConfig,
    pub detection: DetectionConfig,
    pub plan: PlanConfig,
    pub timing: TimingConfig,
    pub assembly: AssemblyConfig,
    pub probe: ProbeConfig,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            grid: GridConfig::default(),
            atom: AtomConfig::default(),
            field: FieldConfig::default(),
            ramsey: RamseyConfig::default(),
            sites: SiteConfig::default(),
            prep: PrepConfig::default(),
            detection: DetectionConfig::default(),
            plan: PlanConfig::default(),
            timing: TimingConfig::default(),
            assembly: AssemblyConfig::default(),
            probe: ProbeConfig::default(),
            analysis: AnalysisConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub rows: usize,
    pub cols: usize,
    pub pitch: Meters,
    pub origin: [Meters; 2],
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            rows: 15,
            cols: 18,
            pitch: Meters(7e-6),
            origin: [Meters(0.0); 2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StatePair {
    /// |F=3, m=−1⟩ / |F=2, m=−1⟩.
    #[default]
    ClockLike,
    /// |F=3, m=−3⟩ / |F=2, m=−2⟩.
    Stretched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AtomConfig {
    pub states: StatePair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub quantization: Tesla,
    pub quantization_axis: [f64; 3],
    /// Master switch; `false` leaves the test coils off in both halves.
    pub test_enabled: bool,
    pub gradient: TeslaPerMeter,
    pub test_center: [Meters; 3],
    pub test_axis: [f64; 3],
    pub uniform_offset: [Tesla; 3],
    /// Slow drift added per cycle (off by default).
    pub drift_per_cycle: [Tesla; 3],
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            quantization: Tesla(283e-6),
            quantization_axis: [1.0, 0.0, 0.0],
            test_enabled: true,
            gradient: TeslaPerMeter(77.3e-3),
            test_center: [Meters(28e-6), Meters(49e-6), Meters(0.0)],
            test_axis: [1.0, 0.0, 0.0],
            uniform_offset: [Tesla(0.0); 3],
            drift_per_cycle: [Tesla(0.0); 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RamseyConfig {
    pub rabi_frequency: Hertz,
    pub pulse_duration: Seconds,
    /// δ_eff with the test field off at the quantization field and mean
    /// light shift; sets Δ12 unless `two_photon_difference` is given.
    pub reference_detuning: Hertz,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub two_photon_difference: Option<Hertz>,
    pub contrast: f64,
    pub coherence_time: Seconds,
}

impl Default for RamseyConfig {
    fn default() -> Self {
        Self {
            rabi_frequency: Hertz(0.6e6),
            pulse_duration: Seconds(0.42e-6),
            reference_detuning: Hertz(38.7e3),
            two_photon_difference: None,
            contrast: 1.0,
            coherence_time: Seconds(f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiteConfig {
    pub light_shift_mean: Hertz,
    /// Site-to-site standard deviation of the light shift.
    pub light_shift_spread: Hertz,
    /// Per-shot Gaussian position jitter (rms per axis); off when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position_jitter: Option<Meters>,
}

impl Default for SiteConfig {
    fn default() -> Self {
        Self {
            light_shift_mean: Hertz(0.0),
            light_shift_spread: Hertz(1.3e3),
            position_jitter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepConfig {
    pub p_load: f64,
    pub p_prepare_up: f64,
    pub residual_down_population: f64,
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self {
            p_load: 0.5,
            p_prepare_up: 0.3,
            residual_down_population: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub true_positive: f64,
    pub false_positive: f64,
    pub survival_probability: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        let d = DetectionModel::default();
        Self {
            true_positive: d.true_positive,
            false_positive: d.false_positive,
            survival_probability: d.survival_probability,
        }
    }
}

impl DetectionConfig {
    pub fn model(&self) -> DetectionModel {
        DetectionModel {
            true_positive: self.true_positive,
            false_positive: self.false_positive,
            survival_probability: self.survival_probability,
        }
    }
}

/// Which atoms the per-site event target counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EventBasis {
    /// Atoms that enter the Ramsey sequence (loaded × prepared).
    #[default]
    Prepared,
    /// Loaded atoms.
    Loaded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub t_min: Seconds,
    pub t_max: Seconds,
    pub steps: usize,
    /// Cycles per (T, field state); derived from `events_per_site` if absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<usize>,
    /// Target events per site over both field states.
    pub events_per_site: f64,
    pub event_basis: EventBasis,
    pub interleave_test_field: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order_seed: Option<u64>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            t_min: Seconds(2e-6),
            t_max: Seconds(110e-6),
            steps: 55,
            repetitions: None,
            events_per_site: 719.0,
            event_basis: EventBasis::Prepared,
            interleave_test_field: true,
            order_seed: None,
        }
    }
}

/// Cycle timing and trap parameters; used for bookkeeping only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub exposure: Seconds,
    pub trap_depth_imaging: Kelvin,
    pub trap_depth_ramsey: Kelvin,
    pub atom_temperature: Kelvin,
    pub tweezer_waist: Meters,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            exposure: Seconds(60e-3),
            trap_depth_imaging: Kelvin(1e-3),
            trap_depth_ramsey: Kelvin(0.2e-3),
            atom_temperature: Kelvin(52e-6),
            tweezer_waist: Meters(1.45e-6),
        }
    }
}

/// Rectangle `[row, col, rows, cols]` or explicit site list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PatternConfig {
    Rectangle { row: usize, col: usize, rows: usize, cols: usize },
    Sites { sites: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssemblyConfig {
    pub pattern: PatternConfig,
    pub p_move_success: f64,
    pub blocking_radius: Meters,
    pub retention: f64,
    pub rounds: usize,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self {
            pattern: PatternConfig::Rectangle { row: 6, col: 7, rows: 3, cols: 3 },
            p_move_success: 0.98,
            blocking_radius: Meters(2e-6),
            retention: 0.99,
            rounds: 100,
        }
    }
}

/// Explicit positions, or a line `start + i·step` for `i < count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub positions: Vec<[Meters; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<ProbeLine>,
    pub light_shift: Hertz,
    pub window_size: Meters,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            positions: Vec::new(),
            line: Some(ProbeLine {
                start: [Meters(0.0), Meters(49e-6)],
                step: [Meters(1e-6), Meters(0.0)],
                count: 120,
            }),
            light_shift: Hertz(0.0),
            window_size: Meters(400e-6),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeLine {
    pub start: [Meters; 2],
    pub step: [Meters; 2],
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub cycle_rate: Hertz,
    pub integration_time: Seconds,
    /// Ramsey events per site per cycle in the lab-time projection.
    pub events_per_cycle: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let p = LabProjection::default();
        Self {
            cycle_rate: Hertz(p.cycle_rate),
            integration_time: Seconds(p.duration),
            events_per_cycle: p.events_per_cycle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dataset: String,
    pub field_map: String,
    pub gradients: String,
    pub summary: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dataset: "dataset.tsv".into(),
            field_map: "field_map.tsv".into(),
            gradients: "gradients.tsv".into(),
            summary: "summary.txt".into(),
        }
    }
}

fn vec3(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

fn vec3m<T: Copy + Into<f64>>(v: [T; 3]) -> Vec3 {
    Vec3::new(v[0].into(), v[1].into(), v[2].into())
}

macro_rules! into_f64 {
    ($($t:ty),*) => {$(
        impl From<$t> for f64 {
            fn from(q: $t) -> f64 {
                q.0
            }
        }
    )*};
}
into_f64!(Meters, Tesla);

fn probability(path: &str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::invalid(path, format!("{v} is not a probability in [0, 1]")))
    }
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(path, format!("{v} must be positive and finite")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Parse {
            path: String::new(),
            message: e.message().to_string(),
        })?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: e.path().to_string(),
            message: e.inner().message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_toml().as_bytes())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.grid.rows == 0 || self.grid.cols == 0 {
            return Err(ConfigError::invalid("grid", "rows and cols must be at least 1"));
        }
        positive("grid.pitch", self.grid.pitch.0)?;
        positive("field.quantization", self.field.quantization.0)?;
        if !self.field.gradient.0.is_finite() {
            return Err(ConfigError::invalid("field.gradient", "must be finite"));
        }
        for (p, v) in [("field.quantization_axis", self.field.quantization_axis), ("field.test_axis", self.field.test_axis)] {
            let n = vec3(v).norm();
            if !(n > 0.0) || !n.is_finite() {
                return Err(ConfigError::invalid(p, "axis must be a non-zero finite vector"));
            }
        }
        positive("ramsey.rabi_frequency", self.ramsey.rabi_frequency.0)?;
        positive("ramsey.pulse_duration", self.ramsey.pulse_duration.0)?;
        probability("ramsey.contrast", self.ramsey.contrast)?;
        if !(self.ramsey.coherence_time.0 > 0.0) {
            return Err(ConfigError::invalid("ramsey.coherence_time", "must be positive or inf"));
        }
        if !(self.sites.light_shift_spread.0 >= 0.0) {
            return Err(ConfigError::invalid("sites.light_shift_spread", "must be non-negative"));
        }
        if let Some(j) = self.sites.position_jitter {
            positive("sites.position_jitter", j.0)?;
        }
        probability("prep.p_load", self.prep.p_load)?;
        probability("prep.p_prepare_up", self.prep.p_prepare_up)?;
        probability("prep.residual_down_population", self.prep.residual_down_population)?;
        probability("detection.true_positive", self.detection.true_positive)?;
        probability("detection.false_positive", self.detection.false_positive)?;
        probability("detection.survival_probability", self.detection.survival_probability)?;
        positive("plan.t_min", self.plan.t_min.0)?;
        if !(self.plan.t_max.0 >= self.plan.t_min.0) {
            return Err(ConfigError::invalid("plan.t_max", "must not be below t_min"));
        }
        if self.plan.steps == 0 {
            return Err(ConfigError::invalid("plan.steps", "must be at least 1"));
        }
        if self.plan.steps > 1 && self.plan.t_max.0 == self.plan.t_min.0 {
            return Err(ConfigError::invalid("plan.t_max", "must exceed t_min for more than one step"));
        }
        if !(self.plan.events_per_site >= 0.0) {
            return Err(ConfigError::invalid("plan.events_per_site", "must be non-negative"));
        }
        probability("assembly.p_move_success", self.assembly.p_move_success)?;
        probability("assembly.retention", self.assembly.retention)?;
        positive("assembly.blocking_radius", self.assembly.blocking_radius.0)?;
        if self.assembly.rounds == 0 {
            return Err(ConfigError::invalid("assembly.rounds", "must be at least 1"));
        }
        self.pattern()?;
        positive("probe.window_size", self.probe.window_size.0)?;
        positive("analysis.cycle_rate", self.analysis.cycle_rate.0)?;
        positive("analysis.integration_time", self.analysis.integration_time.0)?;
        positive("analysis.events_per_cycle", self.analysis.events_per_cycle)?;
        Ok(())
    }

    pub fn grid(&self) -> GridGeometry {
        GridGeometry {
            rows: self.grid.rows,
            cols: self.grid.cols,
            pitch: self.grid.pitch.0,
            origin: [self.grid.origin[0].0, self.grid.origin[1].0],
        }
    }

    pub fn states(&self) -> SensorStates {
        match self.atom.states {
            StatePair::ClockLike => SensorStates::clock_like(),
            StatePair::Stretched => SensorStates::stretched(),
        }
    }

    pub fn scene(&self) -> Result<FieldScene, ConfigError> {
        let f = &self.field;
        let q = QuantizationField::new(f.quantization.0, vec3(f.quantization_axis))
            .map_err(|e| ConfigError::invalid("field.quantization", e.to_string()))?;
        let mut t = QuadrupoleField::new(vec3m(f.test_center), vec3(f.test_axis), f.gradient.0)
            .map_err(|e| ConfigError::invalid("field.test_axis", e.to_string()))?;
        t.enabled = f.test_enabled;
        let mut scene = FieldScene::new(q, t);
        scene.uniform_offset = vec3m(f.uniform_offset);
        Ok(scene)
    }

    /// Δ12 in rad/s.
    pub fn two_photon_difference(&self) -> f64 {
        match self.ramsey.two_photon_difference {
            Some(d) => d.angular(),
            None => {
                breit_rabi_splitting(self.field.quantization.0, &self.states(), &AtomicConstants::rubidium_85())
                    + self.sites.light_shift_mean.angular()
                    + self.ramsey.reference_detuning.angular()
            }
        }
    }

    pub fn ramsey(&self) -> RamseyParams {
        RamseyParams {
            rabi_frequency: self.ramsey.rabi_frequency.angular(),
            pulse_duration: self.ramsey.pulse_duration.0,
            two_photon_difference: self.two_photon_difference(),
            contrast: self.ramsey.contrast,
            coherence_time: self.ramsey.coherence_time.0,
        }
    }

    pub fn experiment(&self) -> Result<Experiment, ConfigError> {
        let grid = self.grid();
        let detection = self.detection.model();
        let mut props_rng = rng::stream(self.seed, rng::SITE_PROPERTIES_STREAM);
        let sites = draw_site_properties(
            &grid,
            self.sites.light_shift_mean.angular(),
            self.sites.light_shift_spread.angular(),
            &detection,
            &mut props_rng,
        );
        let mut tweezer = SteerableTweezer::for_grid(&grid);
        tweezer.window_size = self.probe.window_size.0;
        Ok(Experiment {
            constants: AtomicConstants::rubidium_85(),
            states: self.states(),
            scene: self.scene()?,
            grid,
            sites,
            prep: PrepModel {
                p_prepare_up: self.prep.p_prepare_up,
                residual_down_population: self.prep.residual_down_population,
            },
            ramsey: self.ramsey(),
            p_load: self.prep.p_load,
            position_jitter: self.sites.position_jitter.map(|j| j.0),
            drift_per_cycle: vec3m(self.field.drift_per_cycle),
            probe: ProbeSetup {
                tweezer,
                light_shift: self.probe.light_shift.angular(),
                detection,
            },
        })
    }

    pub fn repetitions(&self) -> usize {
        self.plan.repetitions.unwrap_or_else(|| {
            let prep = match self.plan.event_basis {
                EventBasis::Prepared => self.prep.p_prepare_up,
                EventBasis::Loaded => 1.0,
            };
            CyclePlan::repetitions_for_events(self.plan.events_per_site, self.plan.steps, self.prep.p_load, prep)
        })
    }

    pub fn cycle_plan(&self) -> CyclePlan {
        CyclePlan {
            t_values: CyclePlan::equidistant(self.plan.t_min.0, self.plan.t_max.0, self.plan.steps),
            repetitions: self.repetitions(),
            interleave_test_field: self.plan.interleave_test_field,
            order_seed: self.plan.order_seed,
        }
    }

    pub fn pattern(&self) -> Result<TargetPattern, ConfigError> {
        let grid = self.grid();
        match &self.assembly.pattern {
            PatternConfig::Rectangle { row, col, rows, cols } => TargetPattern::rectangle(&grid, *row, *col, *rows, *cols),
            PatternConfig::Sites { sites } => TargetPattern::from_sites(&grid, sites.iter().copied()),
        }
        .map_err(|e| ConfigError::invalid("assembly.pattern", e.to_string()))
    }

    pub fn assembly_setup(&self) -> AssemblySetup {
        AssemblySetup {
            geom: self.grid(),
            p_load: self.prep.p_load,
            p_move_success: self.assembly.p_move_success,
            blocking_radius: self.assembly.blocking_radius.0,
            retention: self.assembly.retention,
        }
    }

    /// Explicit positions followed by the line positions.
    pub fn probe_positions(&self) -> Vec<[f64; 2]> {
        let mut out: Vec<[f64; 2]> = self.probe.positions.iter().map(|p| [p[0].0, p[1].0]).collect();
        if let Some(l) = &self.probe.line {
            out.extend((0..l.count).map(|i| {
                let i = i as f64;
                [l.start[0].0 + i * l.step[0].0, l.start[1].0 + i * l.step[1].0]
            }));
        }
        out
    }

    pub fn projection(&self) -> LabProjection {
        LabProjection {
            cycle_rate: self.analysis.cycle_rate.0,
            duration: self.analysis.integration_time.0,
            events_per_cycle: self.analysis.events_per_cycle,
        }
    }

    /// Thermal localization area (2σ)² in the Ramsey trap depth.
    pub fn localization_area(&self) -> Option<f64> {
        let t = &self.timing;
        localization_area(t.atom_temperature.0, t.trap_depth_ramsey.0, t.tweezer_waist.0).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_paper_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.grid().site_count(), 270);
        assert_eq!(c.repetitions(), 44);
        assert_eq!(c.cycle_plan().t_values.len(), 55);
        assert_eq!(c.pattern().unwrap().len(), 9);
        assert_eq!(c.probe_positions().len(), 120);
    }

    #[test]
    fn round_trip_is_lossless() {
        let mut c = RunConfig::default();
        c.sites.position_jitter = Some(Meters(50e-9));
        c.plan.repetitions = Some(3);
        c.assembly.pattern = PatternConfig::Sites { sites: vec![1, 5, 7] };
        c.ramsey.coherence_time = Seconds(1e-3);
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        let d = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&d.to_toml()).unwrap(), d);
        assert!(d.to_toml().contains("inf"));
    }

    #[test]
    fn prefixed_units_are_normalized() {
        let c = RunConfig::from_toml("[grid]\npitch = \"7 um\"\n[field]\ngradient = \"77.3 nT/um\"\n").unwrap();
        assert_eq!(c.grid.pitch.0, 7e-6);
        assert!((c.field.gradient.0 - 77.3e-3).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_key_paths() {
        let e = RunConfig::from_toml("[grid]\npitch = \"7 us\"\n").unwrap_err();
        assert!(e.to_string().contains("grid.pitch"), "{e}");
        let e = RunConfig::from_toml("[prep]\np_load = 1.5\n").unwrap_err();
        assert!(e.to_string().contains("prep.p_load"), "{e}");
        let e = RunConfig::from_toml("[plan]\nstepz = 3\n").unwrap_err();
        assert!(e.to_string().contains("plan"), "{e}");
    }

    #[test]
    fn reference_detuning_sets_delta12() {
        let c = RunConfig::default();
        let e = c.experiment().unwrap();
        let mut flat = e.clone();
        flat.scene.test.enabled = false;
        let d = flat.detuning_at([0.0, 0.0], 0.0, false, 0);
        assert!((d / std::f64::consts::TAU - 38.7e3).abs() < 1e-6);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.seed = 2;
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
    }
}
