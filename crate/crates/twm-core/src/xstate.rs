//! The thermally correlated two-cell X-state family and the Wootters
//! concurrence.
//!
//! Two cells prepared in the same incoherent state with ground population `q`
//! can be unitarily correlated into
//!
//! ```text
//!         [ q/2        0          0          q^2 - q/2 ]
//! rho_X = [ 0          q(1-q)     0          0         ]
//!         [ 0          0          (1-q)^2    0         ]
//!         [ q^2 - q/2  0          0          q/2       ]
//! ```
//!
//! whose ergotropy is `omega |1 - 2q|` for sub-gap coupling while the
//! entanglement dies suddenly below q ~ 0.7.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{cre, CMat, DensityMatrix};

/// An X-state of the correlated family, tagged with its parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct XState {
    q: f64,
    rho: DensityMatrix,
}

impl XState {
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn density(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn into_density(self) -> DensityMatrix {
        self.rho
    }
}

/// Build rho_X(q) from the closed-form entries.
pub fn x_state(q: f64) -> Result<XState> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::OutOfRange {
            name: "q",
            value: q,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let mut m = CMat::zeros(4, 4);
    m[(0, 0)] = cre(q / 2.0);
    m[(3, 3)] = cre(q / 2.0);
    m[(0, 3)] = cre(q * q - q / 2.0);
    m[(3, 0)] = cre(q * q - q / 2.0);
    m[(1, 1)] = cre(q * (1.0 - q));
    m[(2, 2)] = cre((1.0 - q) * (1.0 - q));
    Ok(XState {
        q,
        rho: DensityMatrix::new(m)?,
    })
}

/// Build the same state by conjugating the product state with the correlating
/// unitary U = V2 V1 (V1 swaps |eg> and |ee>; V2 rotates |gg> and |ee> into
/// the Bell pair). Agrees with [`x_state`] to machine precision.
pub fn x_state_from_unitary(q: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::OutOfRange {
            name: "q",
            value: q,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let mut product = CMat::zeros(4, 4);
    product[(0, 0)] = cre(q * q);
    product[(1, 1)] = cre(q * (1.0 - q));
    product[(2, 2)] = cre((1.0 - q) * q);
    product[(3, 3)] = cre((1.0 - q) * (1.0 - q));

    let mut v1 = CMat::zeros(4, 4);
    v1[(0, 0)] = cre(1.0);
    v1[(1, 1)] = cre(1.0);
    v1[(3, 2)] = cre(1.0);
    v1[(2, 3)] = cre(1.0);

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v2 = CMat::zeros(4, 4);
    // |phi+><gg| + |ge><ge| + |eg><eg| + |phi-><ee|
    v2[(0, 0)] = cre(s);
    v2[(3, 0)] = cre(s);
    v2[(1, 1)] = cre(1.0);
    v2[(2, 2)] = cre(1.0);
    v2[(0, 3)] = cre(s);
    v2[(3, 3)] = cre(-s);

    let u = v2 * v1;
    Ok(DensityMatrix::from_parts(&u * product * u.adjoint()))
}

/// Wootters concurrence of a two-qubit state via the spin-flip construction:
/// the eigenvalues of `sqrt(sqrt(rho) rho~ sqrt(rho))` in decreasing order
/// give `C = max(0, l1 - l2 - l3 - l4)`.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch(rho.dim(), 4));
    }
    let yy = sigma_y_pair();
    let flipped = &yy * rho.entries().map(|z| z.conj()) * &yy;

    let (vals, vecs) = crate::operator::eigh(rho.entries());
    let mut sqrt_diag = CMat::zeros(4, 4);
    for (k, &l) in vals.iter().enumerate() {
        sqrt_diag[(k, k)] = cre(l.max(0.0).sqrt());
    }
    let sqrt_rho = &vecs * sqrt_diag * vecs.adjoint();
    let core = &sqrt_rho * flipped * sqrt_rho;
    let (mut lambdas, _) = crate::operator::eigh(&core);
    for l in lambdas.iter_mut() {
        *l = l.max(0.0).sqrt();
    }
    lambdas.reverse();
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0))
}

/// Closed-form concurrence of the rho_X(q) family,
/// `max(0, 2q^2 - q - 2(1-q) sqrt(q(1-q)))`.
pub fn x_state_concurrence(q: f64) -> f64 {
    (2.0 * q * q - q - 2.0 * (1.0 - q) * (q * (1.0 - q)).sqrt()).max(0.0)
}

fn sigma_y_pair() -> CMat {
    let i = Complex64::new(0.0, 1.0);
    let mut sy = CMat::zeros(2, 2);
    sy[(0, 1)] = -i;
    sy[(1, 0)] = i;
    sy.kronecker(&sy.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergotropy::ergotropy;
    use crate::operator::HamiltonianSpec;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn closed_form_entries_at_full_mixing() {
        let x = x_state(1.0).unwrap();
        let m = x.density().entries();
        assert_relative_eq!(m[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(m[(3, 3)].re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(m[(0, 3)].re, 0.5, epsilon = 1e-15);
        assert_eq!(m[(1, 1)], cre(0.0));
        assert_eq!(m[(2, 2)], cre(0.0));
    }

    #[test]
    fn both_construction_routes_agree() {
        for k in 0..=100 {
            let q = k as f64 / 100.0;
            let direct = x_state(q).unwrap();
            let via_unitary = x_state_from_unitary(q).unwrap();
            let diff = (direct.density().entries() - via_unitary.entries())
                .map(|z| z.norm())
                .max();
            assert!(diff < 1e-12, "construction mismatch {diff} at q = {q}");
        }
    }

    #[test]
    fn rejects_out_of_range_parameter() {
        assert!(x_state(-0.1).is_err());
        assert!(x_state(1.1).is_err());
    }

    #[test]
    fn x_state_statics_match_reference_values() {
        let h = HamiltonianSpec::coupled_pair(1.0, 0.02).unwrap();
        let low = x_state(0.1).unwrap();
        assert_relative_eq!(ergotropy(low.density(), &h).unwrap(), 0.8, epsilon = 1e-12);
        assert_eq!(concurrence(low.density()).unwrap(), 0.0);

        let high = x_state(0.9).unwrap();
        assert_relative_eq!(ergotropy(high.density(), &h).unwrap(), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(concurrence(high.density()).unwrap(), 0.66, epsilon = 1e-12);
    }

    #[test]
    fn x_state_ergotropy_is_symmetric_and_piecewise_linear() {
        let h = HamiltonianSpec::coupled_pair(1.0, 0.02).unwrap();
        for k in 0..=50 {
            let x = k as f64 / 100.0;
            let lo = ergotropy(x_state(0.5 - x).unwrap().density(), &h).unwrap();
            let hi = ergotropy(x_state(0.5 + x).unwrap().density(), &h).unwrap();
            assert_relative_eq!(lo, hi, epsilon = 1e-12);
            assert_relative_eq!(lo, 2.0 * x, epsilon = 1e-12);
        }
    }

    #[test]
    fn concurrence_of_separable_and_bell_states() {
        // product state
        let mut prod = CMat::zeros(4, 4);
        prod[(0, 0)] = cre(0.25);
        prod[(1, 1)] = cre(0.25);
        prod[(2, 2)] = cre(0.25);
        prod[(3, 3)] = cre(0.25);
        assert_eq!(
            concurrence(&DensityMatrix::new(prod).unwrap()).unwrap(),
            0.0
        );

        // (|gg> + |ee>)/sqrt(2)
        let mut bell = CMat::zeros(4, 4);
        bell[(0, 0)] = cre(0.5);
        bell[(3, 3)] = cre(0.5);
        bell[(0, 3)] = cre(0.5);
        bell[(3, 0)] = cre(0.5);
        assert_relative_eq!(
            concurrence(&DensityMatrix::new(bell).unwrap()).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn spin_flip_construction_matches_closed_form_on_the_family() {
        for k in 0..=100 {
            let q = k as f64 / 100.0;
            let general = concurrence(x_state(q).unwrap().density()).unwrap();
            assert_abs_diff_eq!(general, x_state_concurrence(q), epsilon = 1e-10);
        }
    }

    #[test]
    fn entanglement_sudden_death_threshold() {
        // zero through q = 0.69 on the centesimal grid, positive from 0.70 on
        // (the analytic root of the closed form sits at q ~ 0.6982)
        for k in 0..=69 {
            let q = k as f64 / 100.0;
            assert_eq!(x_state_concurrence(q), 0.0, "expected zero at q = {q}");
        }
        for k in 70..=100 {
            let q = k as f64 / 100.0;
            assert!(x_state_concurrence(q) > 0.0, "expected positive at q = {q}");
        }
    }

    #[test]
    fn concurrence_needs_two_qubits() {
        let s = crate::qubit::QubitState::new(0.5, cre(0.0)).unwrap();
        assert!(matches!(
            concurrence(&DensityMatrix::from_qubit(&s)),
            Err(Error::DimensionMismatch(2, 4))
        ));
    }
}
