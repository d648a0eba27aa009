use std::f64::consts::TAU;

use sensorgrid::config::RunConfig;
use sensorgrid::dataset::{Prepared, ShotSource};
use sensorgrid::estimate::{build_field_map, fit_line, GradientScope};

#[test]
fn detected_fraction_follows_the_analytic_mean() {
    let mut cfg = RunConfig::default();
    cfg.grid.rows = 1;
    cfg.grid.cols = 2;
    cfg.plan.repetitions = Some(600);
    let exp = cfg.experiment().unwrap();
    let ds = exp.run_experiment(&cfg.cycle_plan(), 17, "", 0, false);
    let mut worst: f64 = 0.0;
    for site in 0..2u32 {
        for &t in &cfg.cycle_plan().t_values {
            for on in [false, true] {
                let shots: Vec<_> = ds
                    .records
                    .iter()
                    .filter(|r| r.source == ShotSource::Site(site) && r.t == t && r.test_on == on && r.occupied_before)
                    .collect();
                let n = shots.len() as f64;
                let k = shots.iter().filter(|r| r.detected_after).count() as f64;
                let p = exp.expected_detection_probability(site as usize, t, on);
                let z = (k / n - p) / (p * (1.0 - p) / n).sqrt();
                worst = worst.max(z.abs());
            }
        }
    }
    assert!(worst < 5.0, "worst |z| = {worst}");
}

#[test]
fn prepared_events_per_site_match_the_sizing() {
    let cfg = RunConfig::default();
    let ds = cfg.experiment().unwrap().run_experiment(&cfg.cycle_plan(), 5, "", 0, true);
    let cycles = (2 * cfg.repetitions() * cfg.plan.steps) as f64;
    let p = cfg.prep.p_load * cfg.prep.p_prepare_up;
    let (mean, sd) = (cycles * p, (cycles * p * (1.0 - p)).sqrt());
    assert!((mean / 719.0 - 1.0).abs() < 0.02, "expected {mean}");
    let mut counts = vec![0usize; 270];
    for r in &ds.records {
        if let (ShotSource::Site(s), Some(t)) = (r.source, r.truth) {
            if t.prepared == Some(Prepared::Up) {
                counts[s as usize] += 1;
            }
        }
    }
    for (s, &c) in counts.iter().enumerate() {
        assert!((c as f64 - mean).abs() < 5.0 * sd, "site {s}: {c} vs {mean}±{sd}");
    }
}

#[test]
fn reference_frequency_is_nearly_constant() {
    let cfg = RunConfig::default();
    let ds = cfg.experiment().unwrap().run_experiment(&cfg.cycle_plan(), 21, "", 0, false);
    let map = build_field_map(&ds).unwrap();
    let w: Vec<f64> = map.usable().filter_map(|p| p.fit_off.as_ref()).map(|f| f.omega).collect();
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let sem = sd / n.sqrt();
    assert!((mean - TAU * 38.7e3).abs() < 3.0 * sem, "mean 2π×{} Hz ± {}", mean / TAU, sem / TAU);
    // spread of light shift plus fit noise, of order the configured 1.3 kHz
    assert!(sd / TAU > 1.0e3 && sd / TAU < 2.0e3, "spread 2π×{} Hz", sd / TAU);
}

#[test]
fn probe_line_recovers_the_gradient() {
    let mut cfg = RunConfig::default();
    cfg.plan.repetitions = Some(44);
    let exp = cfg.experiment().unwrap();
    let ds = exp
        .scanning_probe_run(&cfg.probe_positions(), &cfg.cycle_plan(), 9, "", 0, false)
        .unwrap();
    let map = build_field_map(&ds).unwrap();
    assert_eq!(map.pixels.len(), 120);
    let px: Vec<_> = map.usable().collect();
    assert!(px.len() >= 115);
    let x: Vec<f64> = px.iter().map(|p| p.position[0]).collect();
    let y: Vec<f64> = px.iter().map(|p| p.delta_b).collect();
    let s: Vec<f64> = px.iter().map(|p| p.sigma_delta_b).collect();
    let f = fit_line(&x, &y, &s, GradientScope::Scan).unwrap();
    assert!((f.slope - 77.3e-3).abs() < 3.0 * f.sigma_slope, "{} ± {}", f.slope, f.sigma_slope);
    assert!((f.zero_crossing() - 28e-6).abs() < 1e-6);
}
