//! Ground-state hyperfine physics of the sensor atom and the two-pulse
//! Ramsey sequence used to read out the local field.
//!
//! All frequencies are angular (rad/s), fields are in tesla, times in seconds.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Linearized field dependence of the effective detuning for the default
/// `|F=3,m=-1> <-> |F=2,m=-1>` pair: 2π × 9.2777 kHz/µT, in rad/s per tesla.
pub const FIELD_TO_DETUNING: f64 = TAU * 9.2777e3 / 1e-6;

/// Bohr magneton over h for converting a magnetic moment into cyclic frequency, Hz/T.
const BOHR_MAGNETON_OVER_H: f64 = 1.399_624_493_61e10;

/// Hyperfine and Zeeman constants of an alkali ground state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomicConstants {
    /// Zero-field hyperfine splitting, rad/s.
    pub hyperfine_splitting: f64,
    pub electron_g: f64,
    pub nuclear_g: f64,
    pub nuclear_spin: f64,
    /// µ_B/ħ, rad/s per tesla.
    pub bohr_magneton_over_hbar: f64,
}

impl AtomicConstants {
    /// ⁸⁵Rb 5S₁/₂ (I = 5/2).
    pub fn rubidium_85() -> Self {
        Self {
            hyperfine_splitting: TAU * 3.035_732_439e9,
            electron_g: 2.002_331_13,
            nuclear_g: -0.000_293_64,
            nuclear_spin: 2.5,
            bohr_magneton_over_hbar: TAU * BOHR_MAGNETON_OVER_H,
        }
    }

    fn upper_f(&self) -> f64 {
        self.nuclear_spin + 0.5
    }

    /// Dimensionless Breit–Rabi field parameter x(B).
    fn field_parameter(&self, b: f64) -> f64 {
        (self.electron_g - self.nuclear_g) * self.bohr_magneton_over_hbar * b
            / self.hyperfine_splitting
    }

    fn field_parameter_slope(&self) -> f64 {
        (self.electron_g - self.nuclear_g) * self.bohr_magneton_over_hbar
            / self.hyperfine_splitting
    }

    /// Energy (as angular frequency) of the ground-state sublevel `state` at field `b`.
    pub fn level_energy(&self, state: HyperfineState, b: f64) -> f64 {
        let a = self.hyperfine_splitting;
        let two_i_plus_1 = 2.0 * self.nuclear_spin + 1.0;
        let m = state.m as f64;
        let x = self.field_parameter(b);
        let upper = self.is_upper(state);
        let branch = if upper { 1.0 } else { -1.0 };
        let root = if upper && self.is_stretched(state) {
            // sqrt((1 ± x)²) without the absolute value keeps the level analytic through x = 1.
            1.0 + m.signum() * x
        } else {
            (1.0 + 4.0 * m * x / two_i_plus_1 + x * x).sqrt()
        };
        -a / (2.0 * two_i_plus_1)
            + self.nuclear_g * self.bohr_magneton_over_hbar * m * b
            + branch * 0.5 * a * root
    }

    /// d(level_energy)/dB in closed form.
    pub fn level_energy_slope(&self, state: HyperfineState, b: f64) -> f64 {
        let a = self.hyperfine_splitting;
        let two_i_plus_1 = 2.0 * self.nuclear_spin + 1.0;
        let m = state.m as f64;
        let x = self.field_parameter(b);
        let dx = self.field_parameter_slope();
        let upper = self.is_upper(state);
        let branch = if upper { 1.0 } else { -1.0 };
        let droot = if upper && self.is_stretched(state) {
            m.signum() * dx
        } else {
            let root = (1.0 + 4.0 * m * x / two_i_plus_1 + x * x).sqrt();
            (2.0 * m / two_i_plus_1 + x) / root * dx
        };
        self.nuclear_g * self.bohr_magneton_over_hbar * m + branch * 0.5 * a * droot
    }

    fn is_upper(&self, state: HyperfineState) -> bool {
        (state.f as f64 - self.upper_f()).abs() < 1e-9
    }

    fn is_stretched(&self, state: HyperfineState) -> bool {
        ((state.m.unsigned_abs() as f64) - self.upper_f()).abs() < 1e-9
    }
}

impl Default for AtomicConstants {
    fn default() -> Self {
        Self::rubidium_85()
    }
}

/// A ground-state hyperfine sublevel |F, m_F>.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HyperfineState {
    pub f: u8,
    pub m: i8,
}

impl HyperfineState {
    pub const fn new(f: u8, m: i8) -> Self {
        Self { f, m }
    }
}

/// The two levels the Ramsey sequence runs between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorStates {
    pub up: HyperfineState,
    pub down: HyperfineState,
}

impl SensorStates {
    /// |F=3, m=-1> and |F=2, m=-1>.
    pub const fn clock_like() -> Self {
        Self {
            up: HyperfineState::new(3, -1),
            down: HyperfineState::new(2, -1),
        }
    }

    /// Maximal |m_F| pair, |F=3, m=-3> and |F=2, m=-2>.
    pub const fn stretched() -> Self {
        Self {
            up: HyperfineState::new(3, -3),
            down: HyperfineState::new(2, -2),
        }
    }

    pub fn shares_m(&self) -> bool {
        self.up.m == self.down.m
    }
}

impl Default for SensorStates {
    fn default() -> Self {
        Self::clock_like()
    }
}

/// Pulse and readout parameters of the Ramsey sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyParams {
    /// On-resonance Rabi frequency Ω_R, rad/s.
    pub rabi_frequency: f64,
    /// Duration of each π/2 pulse, s.
    pub pulse_duration: f64,
    /// Frequency difference Δ12 of the two spectroscopy components, rad/s.
    pub two_photon_difference: f64,
    /// Fringe contrast C₀ in [0, 1].
    pub contrast: f64,
    /// 1/e decay time of the contrast, s. `f64::INFINITY` disables decay.
    pub coherence_time: f64,
}

impl RamseyParams {
    /// Ω_R = 2π × 0.6 MHz, τ = 0.42 µs, full contrast, no decay.
    pub fn paper_pulses(two_photon_difference: f64) -> Self {
        Self {
            rabi_frequency: TAU * 0.6e6,
            pulse_duration: 0.42e-6,
            two_photon_difference,
            contrast: 1.0,
            coherence_time: f64::INFINITY,
        }
    }

    /// Ideal π/2 pulses of the given duration.
    pub fn ideal(pulse_duration: f64, two_photon_difference: f64) -> Self {
        Self {
            rabi_frequency: FRAC_PI_2 / pulse_duration,
            pulse_duration,
            two_photon_difference,
            contrast: 1.0,
            coherence_time: f64::INFINITY,
        }
    }

    fn envelope(&self, t: f64) -> f64 {
        if self.coherence_time.is_finite() {
            self.contrast * (-t / self.coherence_time).exp()
        } else {
            self.contrast
        }
    }
}

/// Transition frequency Δ↑↓(B) between the two sensor states, rad/s.
///
/// For same-m pairs this reduces to `A·sqrt(1 + 4mx/(2I+1) + x²)`.
pub fn breit_rabi_splitting(b: f64, states: &SensorStates, k: &AtomicConstants) -> f64 {
    k.level_energy(states.up, b) - k.level_energy(states.down, b)
}

/// d(Δ↑↓)/dB in closed form, rad/s per tesla.
pub fn splitting_slope(b: f64, states: &SensorStates, k: &AtomicConstants) -> f64 {
    k.level_energy_slope(states.up, b) - k.level_energy_slope(states.down, b)
}

/// δ_eff = Δ12 − (Δ↑↓(B) + light shift).
pub fn effective_detuning(
    two_photon_difference: f64,
    b_local: f64,
    light_shift: f64,
    states: &SensorStates,
    k: &AtomicConstants,
) -> f64 {
    two_photon_difference - (breit_rabi_splitting(b_local, states, k) + light_shift)
}

type Unitary = Matrix2<Complex64>;

/// Propagator of H/ħ = ½(Ω σx + δ σz) applied for `t`.
fn rotation(rabi: f64, detuning: f64, t: f64) -> Unitary {
    let generalized = rabi.hypot(detuning);
    let i = Complex64::i();
    if generalized == 0.0 {
        return Unitary::identity();
    }
    let half = 0.5 * generalized * t;
    let (s, c) = half.sin_cos();
    let nx = rabi / generalized;
    let nz = detuning / generalized;
    Unitary::new(
        Complex64::new(c, 0.0) - i * s * nz,
        -i * s * nx,
        -i * s * nx,
        Complex64::new(c, 0.0) + i * s * nz,
    )
}

/// Probability of ending in |↓⟩ after π/2 – free precession T – π/2,
/// starting from |↑⟩, with the contrast envelope pulling it toward 1/2.
pub fn ramsey_down_probability(detuning: f64, t: f64, p: &RamseyParams) -> f64 {
    let pulse = rotation(p.rabi_frequency, detuning, p.pulse_duration);
    let free = rotation(0.0, detuning, t);
    let total = pulse * free * pulse;
    let raw = total[(1, 0)].norm_sqr().clamp(0.0, 1.0);
    (0.5 + p.envelope(t) * (raw - 0.5)).clamp(0.0, 1.0)
}

/// Ramsey fringe A + C·cos(ωT + φ).
pub fn fringe_model(t: f64, offset: f64, amplitude: f64, omega: f64, phase: f64) -> f64 {
    offset + amplitude * (omega * t + phase).cos()
}

/// Fringe period 2π/ω.
pub fn fringe_period(omega: f64) -> f64 {
    TAU / omega
}

/// Wraps a phase into (−π, π].
pub(crate) fn wrap_phase(phase: f64) -> f64 {
    let mut p = phase.rem_euclid(TAU);
    if p > PI {
        p -= TAU;
    }
    p
}
