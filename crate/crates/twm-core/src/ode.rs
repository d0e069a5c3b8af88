//! Adaptive Dormand-Prince 5(4) integration for complex matrix right-hand
//! sides. The systems here are tiny (at most 64 x 64) and non-stiff at the
//! decay rates of interest, so an explicit embedded pair with per-step error
//! control is sufficient.

use crate::error::{Error, Result};
use crate::operator::CMat;

/// Default relative tolerance.
pub const DEFAULT_RTOL: f64 = 1e-10;
/// Default absolute tolerance.
pub const DEFAULT_ATOL: f64 = 1e-12;

const STAGES: usize = 7;

const A: [[f64; 6]; STAGES] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Fifth-order weights (the last row of A; the pair is FSAL-style).
const B5: [f64; STAGES] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

/// Error weights, b5 - b4.
const E: [f64; STAGES] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate the autonomous system `dy/dt = rhs(y)` from 0 to `t_end`.
/// `post_step` runs after every accepted step (the callers re-symmetrize
/// density matrices there).
pub(crate) fn integrate_dopri5<F, P>(
    rhs: F,
    y0: &CMat,
    t_end: f64,
    rtol: f64,
    atol: f64,
    mut post_step: P,
) -> Result<CMat>
where
    F: Fn(&CMat) -> CMat,
    P: FnMut(&mut CMat),
{
    if t_end.is_nan() || t_end < 0.0 {
        return Err(Error::NegativeTime(t_end));
    }
    let mut y = y0.clone();
    if t_end == 0.0 {
        return Ok(y);
    }

    let mut t = 0.0;
    let mut h = (t_end * 1e-4).clamp(1e-8, 1.0);
    let h_min = 1e-14 * t_end.max(1.0);
    let mut k: Vec<CMat> = Vec::with_capacity(STAGES);

    while t < t_end {
        if h < h_min {
            return Err(Error::StepFailure(t));
        }
        h = h.min(t_end - t);

        k.clear();
        k.push(rhs(&y));
        for row in A.iter().skip(1) {
            let mut stage = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if row[j] != 0.0 {
                    stage += kj.map(|z| z * (row[j] * h));
                }
            }
            k.push(rhs(&stage));
        }

        let mut y_next = y.clone();
        for (j, kj) in k.iter().enumerate() {
            if B5[j] != 0.0 {
                y_next += kj.map(|z| z * (B5[j] * h));
            }
        }
        let mut err_mat = CMat::zeros(y.nrows(), y.ncols());
        for (j, kj) in k.iter().enumerate() {
            if E[j] != 0.0 {
                err_mat += kj.map(|z| z * (E[j] * h));
            }
        }

        let mut err_norm_sq = 0.0;
        for i in 0..y.nrows() {
            for jj in 0..y.ncols() {
                let scale = atol + rtol * y[(i, jj)].norm().max(y_next[(i, jj)].norm());
                let r = err_mat[(i, jj)].norm() / scale;
                err_norm_sq += r * r;
            }
        }
        let err = (err_norm_sq / (y.nrows() * y.ncols()) as f64).sqrt();

        if err <= 1.0 {
            t += h;
            y = y_next;
            post_step(&mut y);
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 0.9);
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    #[test]
    fn scalar_exponential_decay() {
        let y0 = CMat::from_element(1, 1, Complex64::new(1.0, 0.0));
        let y = integrate_dopri5(
            |y| y.map(|z| z * Complex64::new(-0.7, 0.0)),
            &y0,
            3.0,
            1e-10,
            1e-12,
            |_| {},
        )
        .unwrap();
        assert_relative_eq!(y[(0, 0)].re, (-2.1_f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn oscillator_phase_accuracy() {
        // dy/dt = i w y over many periods
        let y0 = CMat::from_element(1, 1, Complex64::new(1.0, 0.0));
        let w = 2.0;
        let t = 50.0;
        let y = integrate_dopri5(
            |y| y.map(|z| z * Complex64::new(0.0, w)),
            &y0,
            t,
            1e-10,
            1e-12,
            |_| {},
        )
        .unwrap();
        let exact = Complex64::new(0.0, w * t).exp();
        assert!((y[(0, 0)] - exact).norm() < 1e-7);
    }

    #[test]
    fn zero_time_returns_input() {
        let y0 = CMat::from_element(2, 2, Complex64::new(0.25, 0.0));
        let y = integrate_dopri5(|y| y.clone(), &y0, 0.0, 1e-10, 1e-12, |_| {}).unwrap();
        assert_eq!(y, y0);
    }

    #[test]
    fn negative_time_rejected() {
        let y0 = CMat::zeros(1, 1);
        assert!(matches!(
            integrate_dopri5(|y| y.clone(), &y0, -1.0, 1e-10, 1e-12, |_| {}),
            Err(Error::NegativeTime(_))
        ));
    }
}
