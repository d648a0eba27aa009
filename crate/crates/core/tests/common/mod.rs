//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;

/// Two-level amplitudes (c_up, c_down) under H/ħ = ½(Ω σx + δ σz),
/// integrated with fixed-step RK4.
pub fn rk4_evolve(c: [Complex64; 2], rabi: f64, detuning: f64, duration: f64, steps: usize) -> [Complex64; 2] {
    let i = Complex64::i();
    let deriv = |c: [Complex64; 2]| -> [Complex64; 2] {
        [
            -i * 0.5 * (detuning * c[0] + rabi * c[1]),
            -i * 0.5 * (rabi * c[0] - detuning * c[1]),
        ]
    };
    let h = duration / steps as f64;
    let mut c = c;
    for _ in 0..steps {
        let add = |a: [Complex64; 2], k: [Complex64; 2], s: f64| [a[0] + k[0] * s, a[1] + k[1] * s];
        let k1 = deriv(c);
        let k2 = deriv(add(c, k1, h / 2.0));
        let k3 = deriv(add(c, k2, h / 2.0));
        let k4 = deriv(add(c, k3, h));
        for j in 0..2 {
            c[j] += (k1[j] + k2[j] * 2.0 + k3[j] * 2.0 + k4[j]) * (h / 6.0);
        }
    }
    c
}

/// |↓⟩ population after pulse, free precession, pulse, from |↑⟩.
pub fn ramsey_ode(rabi: f64, pulse: f64, detuning: f64, t: f64) -> f64 {
    let steps_for = |d: f64| ((d * rabi.hypot(detuning)) / 2e-3).ceil().max(16.0) as usize;
    let mut c = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    c = rk4_evolve(c, rabi, detuning, pulse, steps_for(pulse));
    c = rk4_evolve(c, 0.0, detuning, t, steps_for(t));
    c = rk4_evolve(c, rabi, detuning, pulse, steps_for(pulse));
    c[1].norm_sqr()
}

/// Minimum total cost over all injections of `rows` into `cols` (rows ≤ cols).
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == cost.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                go(cost, row + 1, used, acc + cost[row][j], best);
                used[j] = false;
            }
        }
    }
    if cost.is_empty() {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; cost[0].len()], 0.0, &mut best);
    best
}

pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Smallest distance from `p` to the polyline, by dense sampling plus
/// the vertices; used to check collision clearance independently.
pub fn polyline_clearance(p: [f64; 2], path: &[[f64; 2]]) -> f64 {
    let mut best = f64::INFINITY;
    for w in path.windows(2) {
        let n = 2000;
        for k in 0..=n {
            let s = k as f64 / n as f64;
            let q = [w[0][0] + s * (w[1][0] - w[0][0]), w[0][1] + s * (w[1][1] - w[0][1])];
            best = best.min(dist(p, q));
        }
    }
    best
}
