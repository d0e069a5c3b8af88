//! Selective weak measurements and their post-selection probabilities.
//!
//! The weak operator `M_m = |g><g| + sqrt(1-m) |e><e|` partially projects
//! toward the ground state; the reversal `W_w = sqrt(1-w) |g><g| + |e><e|`
//! is its mirror toward the excited state. Only the selected outcome branch
//! is tracked; the discarded Kraus partners (`sqrt(m) |e><e|`,
//! `sqrt(w) |g><g|`) appear solely in the completeness tests.

use crate::error::{Error, Result};
use crate::operator::{cre, embed_single, trace, CMat, DensityMatrix};
use crate::qubit::{check_strength, BathParams, QubitState};

/// Renormalization floor: post-selections less likely than this are treated
/// as impossible rather than divided through.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementKind {
    Weak,
    Reversal,
}

/// Bookkeeping for one selective measurement step.
#[derive(Debug, Clone)]
pub struct MeasurementRecord<S> {
    pub kind: MeasurementKind,
    pub strengths: Vec<f64>,
    pub probability: f64,
    pub pre: S,
    pub post: S,
}

/// Apply `M_m` and renormalize on the selected branch.
///
/// Post state: `P' = P(1-m)/N_m`, `Q' = sqrt(1-m) Q / N_m` with probability
/// `N_m = 1 - mP`.
pub fn weak_measure(s: &QubitState, m: f64) -> Result<(QubitState, f64)> {
    check_strength("m", m)?;
    let n = 1.0 - m * s.p();
    if n < PROB_FLOOR {
        return Err(Error::ZeroProbability(n));
    }
    let post = QubitState::from_parts(s.p() * (1.0 - m) / n, (1.0 - m).sqrt() * s.q() / n);
    Ok((post, n))
}

/// Apply `W_w` and renormalize on the selected branch.
///
/// Post state: `P' = P/N`, `Q' = sqrt(1-w) Q / N` with probability
/// `N = 1 - w(1 - P)`.
pub fn reversal_measure(s: &QubitState, w: f64) -> Result<(QubitState, f64)> {
    check_strength("w", w)?;
    let n = 1.0 - w * (1.0 - s.p());
    if n < PROB_FLOOR {
        return Err(Error::ZeroProbability(n));
    }
    let post = QubitState::from_parts(s.p() / n, (1.0 - w).sqrt() * s.q() / n);
    Ok((post, n))
}

/// Closed-form reversal probability after the weak measurement and a
/// dissipation time `tau`:
///
/// ```text
/// N_mw(tau) = 1 - w + w P(tau)/N_m - w (1-N_m)/N_m [(1-f) e^{-gamma tau} + f]
/// ```
///
/// with `P(tau)` the measurement-free population. Equals the trace-based
/// probability of [`reversal_measure`] applied to the evolved post-weak state.
pub fn n_mw_closed_form(p0: f64, m: f64, w: f64, bath: &BathParams, tau: f64) -> f64 {
    let n_m = 1.0 - m * p0;
    let p_tau = (p0 - bath.f) * (-bath.gamma * tau).exp() + bath.f;
    let decay = (1.0 - bath.f) * (-bath.gamma * tau).exp() + bath.f;
    1.0 - w + w * p_tau / n_m - w * (1.0 - n_m) / n_m * decay
}

/// Product of the stepwise post-selection probabilities.
pub fn success_probability<S>(records: &[MeasurementRecord<S>]) -> f64 {
    records.iter().map(|r| r.probability).product()
}

/// Apply one local measurement operator per cell (zero strength skips the
/// cell) and renormalize: `rho' = K rho K^dag / Tr[K rho K^dag]`.
pub fn local_measurement(
    rho: &DensityMatrix,
    strengths: &[f64],
    kind: MeasurementKind,
) -> Result<(DensityMatrix, f64)> {
    let n = strengths.len();
    if rho.dim() != (1 << n) {
        return Err(Error::DimensionMismatch(rho.dim(), 1 << n));
    }
    for &s in strengths {
        check_strength("strength", s)?;
    }
    let k = local_operator(strengths, kind);
    let mapped = &k * rho.entries() * k.adjoint();
    let p = trace(&mapped).re;
    if p < PROB_FLOOR {
        return Err(Error::ZeroProbability(p));
    }
    Ok((DensityMatrix::from_parts(mapped.map(|z| z / p)), p))
}

/// The tensor-product Kraus operator for the selected branch.
pub fn local_operator(strengths: &[f64], kind: MeasurementKind) -> CMat {
    let n = strengths.len();
    let mut acc = CMat::identity(1 << n, 1 << n);
    for (cell, &s) in strengths.iter().enumerate() {
        let mut single = CMat::zeros(2, 2);
        match kind {
            MeasurementKind::Weak => {
                single[(0, 0)] = cre(1.0);
                single[(1, 1)] = cre((1.0 - s).sqrt());
            }
            MeasurementKind::Reversal => {
                single[(0, 0)] = cre((1.0 - s).sqrt());
                single[(1, 1)] = cre(1.0);
            }
        }
        acc *= embed_single(n, cell, &single);
    }
    acc
}
