//! Shot-level simulation of the measurement cycle: load, prepare, Ramsey
//! sequence, pushout of |↑⟩, fluorescence detection.
//!
//! Every site (and every probe position) draws from its own seeded stream,
//! repositioned at the start of each cycle, so the dataset is a pure
//! function of the configuration and master seed regardless of `jobs`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{DetectionModel, GridGeometry, SiteProperties, SteerableTweezer};
use crate::dataset::{
    Dataset, DatasetMeta, DatasetMode, Prepared, ShotRecord, ShotSource, ShotTruth, SCHEMA_VERSION,
};
use crate::error::ArrayError;
use crate::fields::{effective_field_magnitude, FieldScene, Vec3};
use crate::physics::{
    effective_detuning, ramsey_down_probability, AtomicConstants, RamseyParams, SensorStates,
};
use crate::rng;

/// State preparation into the measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepModel {
    pub p_prepare_up: f64,
    pub residual_down_population: f64,
}

impl Default for PrepModel {
    fn default() -> Self {
        Self {
            p_prepare_up: 0.30,
            residual_down_population: 0.0,
        }
    }
}

/// Acquisition schedule: which T and field state each cycle uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclePlan {
    /// Free precession times, s, ascending.
    pub t_values: Vec<f64>,
    /// Cycles per (T, field state).
    pub repetitions: usize,
    pub interleave_test_field: bool,
    /// Seed of the pseudo-random cycle order; defaults to the master seed.
    pub order_seed: Option<u64>,
}

/// One scheduled measurement cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cycle {
    pub id: u32,
    pub t: f64,
    pub test_on: bool,
}

impl CyclePlan {
    /// `steps` equidistant values from `t_min` to `t_max` inclusive.
    pub fn equidistant(t_min: f64, t_max: f64, steps: usize) -> Vec<f64> {
        match steps {
            0 => Vec::new(),
            1 => vec![t_min],
            _ => (0..steps)
                .map(|i| t_min + (t_max - t_min) * i as f64 / (steps - 1) as f64)
                .collect(),
        }
    }

    /// 55 steps in [2 µs, 110 µs], 44 repetitions per step and field state
    /// (≈ 719 prepared atoms per site at 50 % loading and 30 % preparation).
    pub fn paper_default() -> Self {
        Self {
            t_values: Self::equidistant(2e-6, 110e-6, 55),
            repetitions: 44,
            interleave_test_field: true,
            order_seed: None,
        }
    }

    /// Repetitions needed for `events` prepared atoms per site.
    pub fn repetitions_for_events(events: f64, steps: usize, p_load: f64, p_prepare: f64) -> usize {
        let cycles = events / (p_load * p_prepare);
        (cycles / (2.0 * steps as f64)).round().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.t_values.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err("T values must be positive and finite".into());
        }
        if self.t_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err("T values must be strictly ascending".into());
        }
        Ok(())
    }

    /// Pseudo-random, interleaved cycle order.
    pub fn schedule(&self, master_seed: u64) -> Vec<Cycle> {
        let mut order = rng::stream(self.order_seed.unwrap_or(master_seed), rng::CYCLE_ORDER_STREAM);
        let block: Vec<usize> = (0..self.repetitions)
            .flat_map(|_| 0..self.t_values.len())
            .collect();
        let mut on = block.clone();
        let mut off = block;
        on.shuffle(&mut order);
        off.shuffle(&mut order);

        let mut cycles = Vec::with_capacity(on.len() + off.len());
        let mut push = |ti: usize, test_on: bool| {
            let id = cycles.len() as u32;
            cycles.push(Cycle {
                id,
                t: self.t_values[ti],
                test_on,
            });
        };
        if self.interleave_test_field {
            for (&a, &b) in on.iter().zip(&off) {
                push(a, true);
                push(b, false);
            }
        } else {
            on.iter().for_each(|&a| push(a, true));
            off.iter().for_each(|&b| push(b, false));
        }
        cycles
    }
}

impl Default for CyclePlan {
    fn default() -> Self {
        Self::paper_default()
    }
}

/// Everything the shot simulation depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub constants: AtomicConstants,
    pub states: SensorStates,
    pub scene: FieldScene,
    pub grid: GridGeometry,
    pub sites: Vec<SiteProperties>,
    pub prep: PrepModel,
    pub ramsey: RamseyParams,
    pub p_load: f64,
    /// rms thermal position jitter per axis; `None` samples the field at the trap center.
    pub position_jitter: Option<f64>,
    /// Field change per cycle added to the uniform offset; zero disables drift.
    pub drift_per_cycle: Vec3,
    pub probe: ProbeSetup,
}

/// Steerable single-atom probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSetup {
    pub tweezer: SteerableTweezer,
    pub light_shift: f64,
    pub detection: DetectionModel,
}

/// Per-shot physical context.
#[derive(Debug, Clone, Copy)]
struct ShotSite {
    position: [f64; 2],
    props: SiteProperties,
    /// δ_eff with the test field off / on, when static.
    detuning: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    occupied: bool,
    detected: bool,
    truth: ShotTruth,
}

impl Experiment {
    fn static_fields(&self) -> bool {
        self.position_jitter.is_none() && self.drift_per_cycle == Vec3::zeros()
    }

    /// δ_eff at a point for the given field state and cycle.
    pub fn detuning_at(&self, position: [f64; 2], light_shift: f64, test_on: bool, cycle: u32) -> f64 {
        let mut scene = self.scene.with_test(test_on);
        scene.uniform_offset += self.drift_per_cycle * cycle as f64;
        let b = effective_field_magnitude(&scene, &Vec3::new(position[0], position[1], 0.0));
        effective_detuning(
            self.ramsey.two_photon_difference,
            b,
            light_shift,
            &self.states,
            &self.constants,
        )
    }

    fn shot_site(&self, position: [f64; 2], props: SiteProperties) -> ShotSite {
        let detuning = self.static_fields().then(|| {
            [
                self.detuning_at(position, props.light_shift, false, 0),
                self.detuning_at(position, props.light_shift, true, 0),
            ]
        });
        ShotSite {
            position,
            props,
            detuning,
        }
    }

    fn array_site(&self, site: usize) -> ShotSite {
        self.shot_site(self.grid.position_of(site), self.sites[site])
    }

    fn probe_site(&self, position: [f64; 2]) -> ShotSite {
        self.shot_site(
            position,
            SiteProperties {
                light_shift: self.probe.light_shift,
                detection_true_positive: self.probe.detection.true_positive,
                detection_false_positive: self.probe.detection.false_positive,
                survival_probability: self.probe.detection.survival_probability,
            },
        )
    }

    /// One site through one cycle. Draws a fixed sequence of uniforms from
    /// `rng`, which the caller has positioned at the cycle's block.
    fn shot(&self, site: &ShotSite, cycle: &Cycle, rng: &mut ChaCha8Rng) -> Outcome {
        let u_load: f64 = rng.random();
        let u_prep: f64 = rng.random();
        let u_ramsey: f64 = rng.random();
        let u_survive: f64 = rng.random();
        let u_detect: f64 = rng.random();

        let occupied = u_load < self.p_load;
        let mut prepared = None;
        let mut final_down = false;
        if occupied {
            let p = self.prep;
            let state = if u_prep < p.p_prepare_up {
                Prepared::Up
            } else if u_prep < p.p_prepare_up + p.residual_down_population {
                Prepared::Down
            } else {
                Prepared::Dark
            };
            prepared = Some(state);
            if state != Prepared::Dark {
                let detuning = match site.detuning {
                    Some(d) => d[cycle.test_on as usize],
                    None => {
                        let mut pos = site.position;
                        if let Some(sigma) = self.position_jitter {
                            let dx: f64 = rng.sample(StandardNormal);
                            let dy: f64 = rng.sample(StandardNormal);
                            pos = [pos[0] + sigma * dx, pos[1] + sigma * dy];
                        }
                        self.detuning_at(pos, site.props.light_shift, cycle.test_on, cycle.id)
                    }
                };
                let p_down = ramsey_down_probability(detuning, cycle.t, &self.ramsey);
                let p_end_down = if state == Prepared::Up { p_down } else { 1.0 - p_down };
                final_down = u_ramsey < p_end_down && u_survive < site.props.survival_probability;
            }
        }
        let detected = if final_down {
            u_detect < site.props.detection_true_positive
        } else {
            u_detect < site.props.detection_false_positive
        };
        Outcome {
            occupied,
            detected,
            truth: ShotTruth {
                prepared,
                final_down,
            },
        }
    }

    fn record(source: ShotSource, cycle: &Cycle, o: Outcome, diagnostic: bool) -> ShotRecord {
        ShotRecord {
            cycle: cycle.id,
            source,
            t: cycle.t,
            test_on: cycle.test_on,
            occupied_before: o.occupied,
            detected_after: o.detected,
            truth: diagnostic.then_some(o.truth),
        }
    }

    /// All sites through a single cycle, one record per site.
    pub fn run_cycle(&self, cycle: &Cycle, master_seed: u64, diagnostic: bool) -> Vec<ShotRecord> {
        (0..self.grid.site_count())
            .map(|s| {
                let site = self.array_site(s);
                let mut r = rng::stream(master_seed, s as u64);
                rng::seek_cycle(&mut r, cycle.id as u64);
                let o = self.shot(&site, cycle, &mut r);
                Self::record(ShotSource::Site(s as u32), cycle, o, diagnostic)
            })
            .collect()
    }

    fn simulate_source(&self, site: &ShotSite, stream: u64, cycles: &[Cycle], master_seed: u64) -> Vec<Outcome> {
        let mut r = rng::stream(master_seed, stream);
        cycles
            .iter()
            .map(|c| {
                rng::seek_cycle(&mut r, c.id as u64);
                self.shot(site, c, &mut r)
            })
            .collect()
    }

    fn run_sources(
        &self,
        sources: &[(ShotSource, ShotSite, u64)],
        cycles: &[Cycle],
        master_seed: u64,
        jobs: usize,
        diagnostic: bool,
    ) -> Vec<ShotRecord> {
        let work = || -> Vec<Vec<Outcome>> {
            if jobs == 1 {
                sources
                    .iter()
                    .map(|(_, site, stream)| self.simulate_source(site, *stream, cycles, master_seed))
                    .collect()
            } else {
                sources
                    .par_iter()
                    .map(|(_, site, stream)| self.simulate_source(site, *stream, cycles, master_seed))
                    .collect()
            }
        };
        let outcomes = if jobs > 1 {
            match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
                Ok(pool) => pool.install(work),
                Err(_) => work(),
            }
        } else {
            work()
        };

        let mut records = Vec::with_capacity(cycles.len() * sources.len());
        for (ci, c) in cycles.iter().enumerate() {
            for (si, (source, _, _)) in sources.iter().enumerate() {
                records.push(Self::record(*source, c, outcomes[si][ci], diagnostic));
            }
        }
        records
    }

    fn meta(&self, mode: DatasetMode, master_seed: u64, config_hash: &str, diagnostic: bool, probes: Vec<[f64; 2]>) -> DatasetMeta {
        DatasetMeta {
            schema_version: SCHEMA_VERSION,
            config_hash: config_hash.to_string(),
            seed: master_seed,
            mode,
            grid: self.grid,
            probe_positions: probes,
            prep_efficiency: self.prep.p_prepare_up,
            diagnostic_truth: diagnostic,
        }
    }

    /// Runs the full schedule over the array. `jobs` = 0 uses all cores.
    pub fn run_experiment(
        &self,
        plan: &CyclePlan,
        master_seed: u64,
        config_hash: &str,
        jobs: usize,
        diagnostic: bool,
    ) -> Dataset {
        let cycles = plan.schedule(master_seed);
        let sources: Vec<(ShotSource, ShotSite, u64)> = (0..self.grid.site_count())
            .map(|s| (ShotSource::Site(s as u32), self.array_site(s), s as u64))
            .collect();
        Dataset {
            meta: self.meta(DatasetMode::Array, master_seed, config_hash, diagnostic, Vec::new()),
            records: self.run_sources(&sources, &cycles, master_seed, jobs, diagnostic),
        }
    }

    /// Same schedule, but one probe atom per cycle at each requested position.
    pub fn scanning_probe_run(
        &self,
        positions: &[[f64; 2]],
        plan: &CyclePlan,
        master_seed: u64,
        config_hash: &str,
        jobs: usize,
        diagnostic: bool,
    ) -> Result<Dataset, ArrayError> {
        let mut tweezer = self.probe.tweezer;
        let mut placed = Vec::with_capacity(positions.len());
        for &p in positions {
            placed.push(tweezer.move_to(p)?);
        }
        let cycles = if placed.is_empty() {
            Vec::new()
        } else {
            plan.schedule(master_seed)
        };
        let sources: Vec<(ShotSource, ShotSite, u64)> = placed
            .iter()
            .enumerate()
            .map(|(i, &p)| (ShotSource::Probe(i as u32), self.probe_site(p), rng::PROBE_STREAM_BASE + i as u64))
            .collect();
        Ok(Dataset {
            meta: self.meta(DatasetMode::Scan, master_seed, config_hash, diagnostic, placed),
            records: self.run_sources(&sources, &cycles, master_seed, jobs, diagnostic),
        })
    }

    /// Expected detection probability of an occupied site for one cycle
    /// (static fields only), for checking Monte Carlo output.
    pub fn expected_detection_probability(&self, site: usize, t: f64, test_on: bool) -> f64 {
        let s = self.array_site(site);
        let d = self.detuning_at(s.position, s.props.light_shift, test_on, 0);
        let p_down = ramsey_down_probability(d, t, &self.ramsey);
        let reach = (self.prep.p_prepare_up * p_down
            + self.prep.residual_down_population * (1.0 - p_down))
            * s.props.survival_probability;
        reach * s.props.detection_true_positive + (1.0 - reach) * s.props.detection_false_positive
    }
}
