//! Closed-form single-qubit thermalization.
//!
//! The GKLS dissipators with thermal rates gamma(1-f) (decay) and gamma f
//! (excitation) decouple the matrix elements:
//!
//! ```text
//! dP/dt = gamma (f - P)            =>  P(t) = (P0 - f) e^{-gamma t} + f
//! dQ/dt = -Q (gamma - 2 i omega)/2 =>  Q(t) = Q0 e^{-gamma t / 2 + i omega t}
//! ```
//!
//! These solutions are the normative single-qubit propagator; the numerical
//! integrator is reserved for the coupled multi-cell case.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qubit::{BathParams, QubitState};

/// The closed-form free trajectory out of one initial state: a reusable
/// handle for sampling `P(t)` and `Q(t)` at many instants.
#[derive(Debug, Clone, Copy)]
pub struct FreeEvolution {
    p0: f64,
    q0: Complex64,
    bath: BathParams,
}

impl FreeEvolution {
    pub fn new(s0: &QubitState, bath: &BathParams) -> Self {
        Self {
            p0: s0.p(),
            q0: s0.q(),
            bath: *bath,
        }
    }

    /// `P(t) = (P0 - f) e^{-gamma t} + f`.
    pub fn population(&self, t: f64) -> f64 {
        population_at(self.p0, &self.bath, t)
    }

    /// `Q(t) = Q0 e^{-gamma t/2 + i omega t}`; its modulus never grows.
    pub fn coherence(&self, t: f64) -> Complex64 {
        coherence_at(self.q0, &self.bath, t)
    }

    pub fn state_at(&self, t: f64) -> Result<QubitState> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        if t == 0.0 {
            return Ok(QubitState::from_parts(self.p0, self.q0));
        }
        Ok(QubitState::from_parts(
            self.population(t),
            self.coherence(t),
        ))
    }
}

/// Propagate `s0` for a time `t` under purely dissipative dynamics.
pub fn evolve_free(s0: &QubitState, bath: &BathParams, t: f64) -> Result<QubitState> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(*s0);
    }
    Ok(QubitState::from_parts(
        population_at(s0.p(), bath, t),
        coherence_at(s0.q(), bath, t),
    ))
}

pub(crate) fn population_at(p0: f64, bath: &BathParams, t: f64) -> f64 {
    (p0 - bath.f) * (-bath.gamma * t).exp() + bath.f
}

pub(crate) fn coherence_at(q0: Complex64, bath: &BathParams, t: f64) -> Complex64 {
    q0 * Complex64::new(-bath.gamma * t / 2.0, bath.omega * t).exp()
}

/// Gibbs fixed point (P = f, Q = 0) of the dissipative dynamics.
pub fn thermal_state(f: f64) -> Result<QubitState> {
    if !(0.0..0.5).contains(&f) {
        return Err(Error::OutOfRange {
            name: "f",
            value: f,
            lo: 0.0,
            hi: 0.5,
        });
    }
    Ok(QubitState::from_parts(f, Complex64::new(0.0, 0.0)))
}

/// Time at which a freely decaying population starting from `p_start` hits
/// 1/2 and the diagonal state turns passive. `None` when `p_start < 1/2`
/// (already passive, never crosses); exactly 1/2 maps to zero.
pub fn tau_half(p_start: f64, bath: &BathParams) -> Option<f64> {
    if p_start < 0.5 {
        return None;
    }
    if p_start == 0.5 {
        return Some(0.0);
    }
    Some(-(1.0 / bath.gamma) * ((0.5 - bath.f) / (p_start - bath.f)).ln())
}

/// Right-hand side (dP/dt, dQ/dt) of the single-qubit master equation.
/// Used as the n = 1 oracle for the multi-cell integrator.
pub fn lindblad_rhs_single(s: &QubitState, bath: &BathParams) -> (f64, Complex64) {
    let dp = bath.gamma * (bath.f - s.p());
    let dq = -s.q() * Complex64::new(bath.gamma, -2.0 * bath.omega) * 0.5;
    (dp, dq)
}
