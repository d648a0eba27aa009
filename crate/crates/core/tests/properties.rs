mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use sensorgrid::array::GridGeometry;
use sensorgrid::assembly::{assign, TargetPattern};
use sensorgrid::config::RunConfig;
use sensorgrid::dataset::{Dataset, DatasetMeta, DatasetMode, ShotRecord, ShotSource, SCHEMA_VERSION};
use sensorgrid::estimate::{build_field_map, delta_omega, omega_to_delta_b, FringeFit};
use sensorgrid::fields::{QuadrupoleField, Vec3};
use sensorgrid::physics::{effective_detuning, AtomicConstants, SensorStates};
use sensorgrid::rng;

fn fit(omega: f64, sigma: f64) -> FringeFit {
    FringeFit {
        omega,
        sigma_omega: sigma,
        offset: 0.15,
        amplitude: 0.1,
        phase: 0.0,
        events: 10,
        chi2: 1.0,
        dof: 1,
        converged: true,
        ambiguous: false,
        nyquist: 1e6,
    }
}

fn small_dataset(seed: u64) -> Dataset {
    let mut cfg = RunConfig::default();
    cfg.grid.rows = 2;
    cfg.grid.cols = 2;
    cfg.plan.repetitions = Some(8);
    cfg.seed = seed;
    cfg.experiment().unwrap().run_experiment(&cfg.cycle_plan(), seed, "", 1, false)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn conversion_is_exactly_linear(dw in -1e6f64..1e6, k in -8i32..8) {
        let scale = 2f64.powi(k);
        prop_assert_eq!(omega_to_delta_b(dw * scale), omega_to_delta_b(dw) * scale);
    }

    #[test]
    fn delta_omega_quadrature(a in 1e4f64..1e6, b in 1e4f64..1e6, sa in 1.0f64..1e4, sb in 1.0f64..1e4) {
        let (d, s) = delta_omega(&fit(a, sa), &fit(b, sb)).unwrap();
        prop_assert_eq!(d, a - b);
        prop_assert!((s * s - (sa * sa + sb * sb)).abs() <= 1e-12 * (sa * sa + sb * sb));
    }

    #[test]
    fn detuning_linear_in_delta12_and_light_shift(d12 in 0.0f64..1e10, ls in -1e5f64..1e5, step in -1e5f64..1e5, b in 0.0f64..1e-3) {
        let s = SensorStates::clock_like();
        let k = AtomicConstants::rubidium_85();
        let base = effective_detuning(d12, b, ls, &s, &k);
        let shifted = effective_detuning(d12 + step, b, ls, &s, &k);
        prop_assert!((shifted - base - step).abs() < 1e-5);
        let shifted = effective_detuning(d12, b, ls + step, &s, &k);
        prop_assert!((shifted - base + step).abs() < 1e-5);
    }

    #[test]
    fn quadrupole_is_divergence_and_curl_free(x in -1e-4f64..1e-4, y in -1e-4f64..1e-4, z in -1e-4f64..1e-4,
                                               ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in 0.1f64..1.0) {
        let q = QuadrupoleField::new(Vec3::new(1e-5, -2e-5, 0.0), Vec3::new(ax, ay, az), 77.3e-3).unwrap();
        let r = Vec3::new(x, y, z);
        let h = 1e-7;
        let mut jac = [[0.0; 3]; 3];
        for j in 0..3 {
            let mut e = Vec3::zeros();
            e[j] = h;
            let d = (q.evaluate(&(r + e)) - q.evaluate(&(r - e))) / (2.0 * h);
            for i in 0..3 {
                jac[i][j] = d[i];
            }
        }
        let div = jac[0][0] + jac[1][1] + jac[2][2];
        prop_assert!(div.abs() < 1e-9);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            prop_assert!((jac[i][j] - jac[j][i]).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_extent_is_exact(rows in 1usize..30, cols in 1usize..30, pitch_nm in 1000u32..20000) {
        let pitch = pitch_nm as f64 * 1e-9;
        let g = GridGeometry { rows, cols, pitch, origin: [0.0, 0.0] };
        prop_assert_eq!(g.extent(), [(cols - 1) as f64 * pitch, (rows - 1) as f64 * pitch]);
        let last = g.position_of(g.site_count() - 1);
        prop_assert_eq!(last, g.extent());
    }

    #[test]
    fn assignment_relabel_and_translation_invariant(seed in any::<u64>(), ox in -1e-4f64..1e-4, oy in -1e-4f64..1e-4) {
        let mut r = rng::stream(seed, 0);
        let geom = GridGeometry { rows: 6, cols: 6, pitch: 7e-6, origin: [0.0, 0.0] };
        let moved = GridGeometry { origin: [ox, oy], ..geom };
        let occ = sensorgrid::array::stochastic_load(&geom, 0.5, &mut r);
        let mut sites: Vec<usize> = (0..36).collect();
        sites.shuffle(&mut r);
        let pattern = TargetPattern::from_sites(&geom, sites[..9].iter().copied()).unwrap();
        let base = assign(&geom, &occ, &pattern);
        let shifted = assign(&moved, &occ, &pattern);
        prop_assert!((base.cost - shifted.cost).abs() <= 1e-9 * base.cost.max(1e-9));
        let mut rev = sites[..9].to_vec();
        rev.reverse();
        let relabeled = assign(&geom, &occ, &TargetPattern::from_sites(&geom, rev).unwrap());
        prop_assert!((base.cost - relabeled.cost).abs() <= 1e-12 * base.cost.max(1e-9));
    }

    #[test]
    fn assignment_beats_greedy(seed in any::<u64>()) {
        let mut r = rng::stream(seed, 1);
        let geom = GridGeometry { rows: 7, cols: 7, pitch: 7e-6, origin: [0.0, 0.0] };
        let occ = sensorgrid::array::stochastic_load(&geom, 0.5, &mut r);
        let pattern = TargetPattern::rectangle(&geom, 2, 2, 3, 3).unwrap();
        let m = assign(&geom, &occ, &pattern);
        // greedy nearest free atom per open target, in pattern order
        let mut free: Vec<usize> = occ.occupied_sites().filter(|&s| !pattern.contains(s)).collect();
        let mut greedy = 0.0;
        for &t in pattern.sites() {
            if occ.is_occupied(t) || free.is_empty() {
                continue;
            }
            let (i, d) = free
                .iter()
                .enumerate()
                .map(|(i, &s)| (i, common::dist(geom.position_of(s), geom.position_of(t))))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            greedy += d;
            free.swap_remove(i);
        }
        prop_assert!(m.cost <= greedy + 1e-15);
    }

    #[test]
    fn field_map_ignores_record_order(seed in 0u64..1000, shuffle in any::<u64>()) {
        let ds = small_dataset(seed);
        let mut shuffled = ds.clone();
        shuffled.records.shuffle(&mut rng::stream(shuffle, 2));
        // Debug text, so that NaN entries of failed pixels compare equal
        let a = format!("{:?}", build_field_map(&ds).unwrap());
        prop_assert_eq!(a, format!("{:?}", build_field_map(&shuffled).unwrap()));
    }

    #[test]
    fn dataset_text_round_trip(records in prop::collection::vec(
        (0u32..1000, 0u32..6, 1u32..100, any::<bool>(), any::<bool>(), any::<bool>()), 0..50)) {
        let grid = GridGeometry { rows: 2, cols: 3, pitch: 7e-6, origin: [0.0, 0.0] };
        let ds = Dataset {
            meta: DatasetMeta {
                schema_version: SCHEMA_VERSION,
                config_hash: "abc".into(),
                seed: 5,
                mode: DatasetMode::Array,
                grid,
                probe_positions: Vec::new(),
                prep_efficiency: 0.3,
                diagnostic_truth: false,
            },
            records: records
                .into_iter()
                .map(|(cycle, s, t, on, occ, det)| ShotRecord {
                    cycle,
                    source: ShotSource::Site(s),
                    t: t as f64 * 1.1e-6,
                    test_on: on,
                    occupied_before: occ,
                    detected_after: det,
                    truth: None,
                })
                .collect(),
        };
        let back = Dataset::read_from(ds.to_text().as_bytes()).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn config_round_trip(seed in any::<u64>(), rows in 1usize..40, pitch in 1e-6f64..2e-5,
                         g in -1.0f64..1.0, tau in 1e-6f64..1.0, reps in prop::option::of(0usize..100)) {
        let mut c = RunConfig::default();
        c.seed = seed;
        c.grid.rows = rows;
        c.grid.pitch = pitch.into();
        c.field.gradient = g.into();
        c.ramsey.coherence_time = tau.into();
        c.plan.repetitions = reps;
        c.assembly.pattern = sensorgrid::config::PatternConfig::Sites { sites: vec![0] };
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn occupancy_after_execution_is_single(seed in any::<u64>(), p in 0.0f64..=1.0) {
        let mut r = rng::stream(seed, 3);
        let geom = GridGeometry { rows: 6, cols: 6, pitch: 7e-6, origin: [0.0, 0.0] };
        let occ = sensorgrid::array::stochastic_load(&geom, 0.5, &mut r);
        let pattern = TargetPattern::rectangle(&geom, 1, 1, 3, 3).unwrap();
        let m = assign(&geom, &occ, &pattern);
        if let Ok(plan) = sensorgrid::assembly::sequence_moves(&geom, &m, &occ, 2e-6) {
            let before = occ.count();
            let (after, lost) = sensorgrid::assembly::execute_plan(&plan, &occ, p, &mut r);
            prop_assert_eq!(after.count() + lost, before);
            prop_assert_eq!(after.len(), occ.len());
        }
    }
}

#[test]
fn interleaved_counts_differ_by_at_most_one() {
    let cfg = RunConfig::default();
    for reps in [0, 1, 5] {
        let mut plan = cfg.cycle_plan();
        plan.repetitions = reps;
        let cycles = plan.schedule(3);
        let on = cycles.iter().filter(|c| c.test_on).count();
        assert!(on.abs_diff(cycles.len() - on) <= 1);
    }
}
