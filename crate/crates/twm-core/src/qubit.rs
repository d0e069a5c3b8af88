//! Single-cell battery state and reservoir parameters.
//!
//! A qubit battery is described by the excited population `P` and the
//! coherence `Q = <g|rho|e>`, i.e. the density matrix
//!
//! ```text
//! rho = [[1 - P, Q], [Q*, P]]
//! ```
//!
//! in the `{|g>, |e>}` basis with `H = omega |e><e|` (the ground energy is
//! fixed to zero throughout).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Absolute tolerance for positivity/trace checks on states.
pub const STATE_TOL: f64 = 1e-9;

/// Qubit battery state `(P, Q)` with `0 <= P <= 1` and `|Q|^2 <= P(1-P)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    p: f64,
    q: Complex64,
}

impl QubitState {
    /// Validate and build a state; rejects out-of-range populations and
    /// coherences that would make the 2x2 matrix indefinite.
    pub fn new(p: f64, q: Complex64) -> Result<Self> {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange {
                name: "P",
                value: p,
                lo: 0.0,
                hi: 1.0,
            });
        }
        let qsq = q.norm_sqr();
        let bound = p * (1.0 - p);
        if qsq > bound + STATE_TOL {
            return Err(Error::NonPositive { qsq, bound });
        }
        Ok(Self { p, q })
    }

    /// Build from values already known to satisfy the invariants (closed-form
    /// evolution and measurement outputs); only debug-checked.
    pub(crate) fn from_parts(p: f64, q: Complex64) -> Self {
        debug_assert!((-STATE_TOL..=1.0 + STATE_TOL).contains(&p), "P = {p}");
        debug_assert!(
            q.norm_sqr() <= p * (1.0 - p) + 1e-6,
            "|Q|^2 = {} > P(1-P) = {}",
            q.norm_sqr(),
            p * (1.0 - p)
        );
        Self { p, q }
    }

    /// Excited-state population.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Coherence, the `<g|rho|e>` matrix element.
    pub fn q(&self) -> Complex64 {
        self.q
    }

    /// `|Q|^2`.
    pub fn qsq(&self) -> f64 {
        self.q.norm_sqr()
    }

    /// State purity mu = P^2 + (1-P)^2 + 2|Q|^2, in [1/2, 1].
    pub fn purity(&self) -> f64 {
        self.p * self.p + (1.0 - self.p) * (1.0 - self.p) + 2.0 * self.q.norm_sqr()
    }

    /// Drop the coherence, i.e. dephase in the energy basis.
    pub fn dephased(&self) -> Self {
        Self {
            p: self.p,
            q: Complex64::new(0.0, 0.0),
        }
    }
}

/// Thermal reservoir and coupling parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathParams {
    /// Decay rate gamma > 0.
    pub gamma: f64,
    /// Thermal population f in [0, 1/2).
    pub f: f64,
    /// Qubit energy gap omega > 0.
    pub omega: f64,
}

impl BathParams {
    pub fn new(gamma: f64, f: f64, omega: f64) -> Result<Self> {
        if gamma.is_nan() || gamma <= 0.0 {
            return Err(Error::OutOfRange {
                name: "gamma",
                value: gamma,
                lo: f64::MIN_POSITIVE,
                hi: f64::INFINITY,
            });
        }
        if omega.is_nan() || omega <= 0.0 {
            return Err(Error::OutOfRange {
                name: "omega",
                value: omega,
                lo: f64::MIN_POSITIVE,
                hi: f64::INFINITY,
            });
        }
        if !(0.0..0.5).contains(&f) {
            return Err(Error::OutOfRange {
                name: "f",
                value: f,
                lo: 0.0,
                hi: 0.5,
            });
        }
        Ok(Self { gamma, f, omega })
    }

    /// Characteristic thermalization timescale 1/gamma.
    pub fn tau_gamma(&self) -> f64 {
        1.0 / self.gamma
    }
}

/// Measurement strengths and dissipation time for one single-qubit run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// Weak measurement strength m in [0, 1].
    pub m: f64,
    /// Reversal measurement strength w in [0, 1].
    pub w: f64,
    /// Dissipation time tau >= 0 between the two measurements.
    pub tau: f64,
}

impl ProtocolParams {
    pub fn new(m: f64, w: f64, tau: f64) -> Result<Self> {
        check_strength("m", m)?;
        check_strength("w", w)?;
        if tau.is_nan() || tau < 0.0 {
            return Err(Error::NegativeTime(tau));
        }
        Ok(Self { m, w, tau })
    }
}

pub(crate) fn check_strength(name: &'static str, s: f64) -> Result<()> {
    if !s.is_finite() || !(0.0..=1.0).contains(&s) {
        return Err(Error::OutOfRange {
            name,
            value: s,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(())
}

/// Thermal population f = e^{-beta omega} / (1 + e^{-beta omega}).
///
/// Requires beta > 0 strictly: beta = 0 gives the f = 1/2 boundary, which is
/// excluded from [`BathParams`]; beta = +inf maps to f = 0.
pub fn thermal_population(beta: f64, omega: f64) -> Result<f64> {
    if omega.is_nan() || omega <= 0.0 {
        return Err(Error::OutOfRange {
            name: "omega",
            value: omega,
            lo: f64::MIN_POSITIVE,
            hi: f64::INFINITY,
        });
    }
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::InvalidTemperature(beta));
    }
    if beta.is_infinite() {
        return Ok(0.0);
    }
    let x = (-beta * omega).exp();
    Ok(x / (1.0 + x))
}
