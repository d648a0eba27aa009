mod common;

use rand::Rng;
use sensorgrid::array::{stochastic_load, GridGeometry, Occupancy};
use sensorgrid::assembly::{assign, execute_plan, repeated_assembly, sequence_moves, AssemblySetup, TargetPattern};
use sensorgrid::rng;

fn grid() -> GridGeometry {
    GridGeometry { rows: 15, cols: 18, pitch: 7e-6, origin: [0.0, 0.0] }
}

#[test]
fn executed_paths_clear_every_bystander() {
    let g = grid();
    let mut r = rng::stream(31, 0);
    let mut checked = 0;
    for trial in 0..200 {
        let occ = stochastic_load(&g, r.random_range(0.3..0.7), &mut r);
        let (row, col) = (r.random_range(0..12), r.random_range(0..15));
        let pattern = TargetPattern::rectangle(&g, row, col, 3, 3).unwrap();
        let radius = 2e-6;
        let m = assign(&g, &occ, &pattern);
        let Ok(plan) = sequence_moves(&g, &m, &occ, radius) else { continue };
        // replay: each move must clear all other occupied sites at its time
        let mut now = occ.clone();
        for mv in &plan.moves {
            assert!(now.is_occupied(mv.source), "trial {trial}");
            assert!(!now.is_occupied(mv.target), "trial {trial}");
            let path = mv.path(&g);
            for s in now.occupied_sites().filter(|&s| s != mv.source) {
                let c = common::polyline_clearance(g.position_of(s), &path);
                assert!(c >= radius * (1.0 - 1e-6), "trial {trial}: site {s} at {c}");
            }
            now.set(mv.source, false);
            now.set(mv.target, true);
        }
        assert!(pattern.sites().iter().all(|&t| now.is_occupied(t)) || !m.unfilled.is_empty());
        checked += 1;
    }
    assert!(checked > 150);
}

#[test]
fn fill_rate_matches_the_binomial_expectation() {
    let g = grid();
    let mut r = rng::stream(32, 0);
    let occ = stochastic_load(&g, 0.5, &mut r);
    let pattern = TargetPattern::rectangle(&g, 6, 7, 3, 3).unwrap();
    let m = assign(&g, &occ, &pattern);
    let plan = sequence_moves(&g, &m, &occ, 2e-6).unwrap();
    let p = 0.95;
    let expected = (m.stationary.len() as f64 + plan.moves.len() as f64 * p) / 9.0;
    let sd = (plan.moves.len() as f64 * p * (1.0 - p)).sqrt() / 9.0;
    let trials = 10_000;
    let mut sum = 0.0;
    for _ in 0..trials {
        let (after, _) = execute_plan(&plan, &occ, p, &mut r);
        sum += pattern.filled_count(&after) as f64 / 9.0;
    }
    let mean = sum / trials as f64;
    assert!((mean - expected).abs() < 5.0 * sd / (trials as f64).sqrt(), "{mean} vs {expected}");
}

/// Independent model: per round each target keeps its atom with the
/// retention probability (after the first round) or is refilled from the
/// reservoir by one move that succeeds with `p_move`.
fn reference_duty_cycle(setup: &AssemblySetup, targets: usize, rounds: usize, seed: u64) -> f64 {
    let mut r = rng::stream(seed, 77);
    let mut occ = vec![false; targets];
    let mut full = 0;
    for round in 0..rounds {
        for o in occ.iter_mut() {
            let kept = round > 0 && *o && r.random::<f64>() < setup.retention;
            *o = kept || r.random::<f64>() < setup.p_load || r.random::<f64>() < setup.p_move_success;
        }
        full += usize::from(occ.iter().all(|&o| o));
    }
    full as f64 / rounds as f64
}

#[test]
fn duty_cycle_matches_an_independent_model() {
    let setup = AssemblySetup { geom: grid(), p_load: 0.5, p_move_success: 0.98, blocking_radius: 2e-6, retention: 0.99 };
    let pattern = TargetPattern::rectangle(&setup.geom, 6, 7, 3, 3).unwrap();
    let (runs, rounds) = (300, 20);
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt())
    };
    let sim: Vec<f64> = (0..runs)
        .map(|i| repeated_assembly(&setup, &pattern, rounds, &mut rng::stream(i, rng::ASSEMBLY_STREAM)).duty_cycle())
        .collect();
    let reference: Vec<f64> = (0..runs).map(|i| reference_duty_cycle(&setup, 9, rounds, 10_000 + i)).collect();
    let (a, sa) = stats(&sim);
    let (b, sb) = stats(&reference);
    assert!((a - b).abs() < 5.0 * sa.hypot(sb), "{a}±{sa} vs {b}±{sb}");
}

#[test]
fn full_loading_needs_no_moves() {
    let g = grid();
    let occ = Occupancy::from_sites(vec![true; g.site_count()]);
    let pattern = TargetPattern::rectangle(&g, 6, 7, 3, 3).unwrap();
    let m = assign(&g, &occ, &pattern);
    assert!(m.moves.is_empty());
    assert_eq!(m.cost, 0.0);
}
