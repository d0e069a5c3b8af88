//! N-cell battery dynamics under collective dissipation.
//!
//! The environment couples through the total ladder operators
//! `S_- = sum_k |g><e|_k` (collective lowering) and its adjoint, with rates
//! `gamma (1 - f)` down and `gamma f` up; the exchange coupling enters only
//! through the Hamiltonian. The sign conventions are pinned so that the
//! single-cell reduction reproduces the closed-form thermalization exactly
//! (dP/dt = gamma (f - P)) and the two-cell X-state equations hold entrywise.

use crate::ergotropy::breakdown;
use crate::error::{Error, Result};
use crate::measure::{local_measurement, MeasurementKind};
use crate::ode::{integrate_dopri5, DEFAULT_ATOL, DEFAULT_RTOL};
use crate::operator::{embed_single, hermitize, sigma_lower, CMat, DensityMatrix, HamiltonianSpec};
use crate::protocol::{GainReport, Probabilities, ProtocolOutcome, StepStates};
use crate::qubit::BathParams;
use crate::shifts::{shift_report, OperationalPoint};

/// Assembled generator pieces for one battery model.
#[derive(Debug, Clone)]
pub struct CollectiveModel {
    h: HamiltonianSpec,
    bath: BathParams,
    /// Collective lowering operator sum_k |g><e|_k.
    s_lower: CMat,
    s_raise: CMat,
    lower_number: CMat,
    raise_number: CMat,
}

impl CollectiveModel {
    /// Assemble the dense operators; the Hamiltonian and bath must agree on
    /// the on-site gap.
    pub fn new(h: HamiltonianSpec, bath: BathParams) -> Result<Self> {
        if bath.omega != h.omega() {
            return Err(Error::OutOfRange {
                name: "omega",
                value: bath.omega,
                lo: h.omega(),
                hi: h.omega(),
            });
        }
        let n = h.n_cells();
        let mut s_lower = CMat::zeros(h.dim(), h.dim());
        for k in 0..n {
            s_lower += embed_single(n, k, &sigma_lower());
        }
        let s_raise = s_lower.adjoint();
        let lower_number = &s_raise * &s_lower;
        let raise_number = &s_lower * &s_raise;
        Ok(Self {
            h,
            bath,
            s_lower,
            s_raise,
            lower_number,
            raise_number,
        })
    }

    /// Uniformly coupled pair of cells sharing one reservoir.
    pub fn coupled_pair(omega: f64, j: f64, gamma: f64, f: f64) -> Result<Self> {
        Self::new(
            HamiltonianSpec::coupled_pair(omega, j)?,
            BathParams::new(gamma, f, omega)?,
        )
    }

    /// Single cell; reduces to the closed-form qubit dynamics.
    pub fn single(omega: f64, gamma: f64, f: f64) -> Result<Self> {
        Self::new(
            HamiltonianSpec::qubit(omega),
            BathParams::new(gamma, f, omega)?,
        )
    }

    pub fn hamiltonian(&self) -> &HamiltonianSpec {
        &self.h
    }

    pub fn bath(&self) -> &BathParams {
        &self.bath
    }

    pub fn n_cells(&self) -> usize {
        self.h.n_cells()
    }

    /// Apply the full generator to a (Hermitian) matrix.
    pub fn lindblad_rhs_matrix(&self, rho: &CMat) -> CMat {
        let h = self.h.matrix();
        let i = num_complex::Complex64::new(0.0, 1.0);
        let commutator = h * rho - rho * h;
        let down = &self.s_lower * rho * &self.s_raise
            - (&self.lower_number * rho + rho * &self.lower_number).map(|z| z * 0.5);
        let up = &self.s_raise * rho * &self.s_lower
            - (&self.raise_number * rho + rho * &self.raise_number).map(|z| z * 0.5);
        commutator.map(|z| -i * z)
            + down.map(|z| z * (self.bath.gamma * (1.0 - self.bath.f)))
            + up.map(|z| z * (self.bath.gamma * self.bath.f))
    }

    /// Generator applied to a density matrix.
    pub fn lindblad_rhs(&self, rho: &DensityMatrix) -> Result<CMat> {
        if rho.dim() != self.h.dim() {
            return Err(Error::DimensionMismatch(rho.dim(), self.h.dim()));
        }
        Ok(self.lindblad_rhs_matrix(rho.entries()))
    }

    /// Propagate for a time `t` at the default tolerances.
    pub fn integrate(&self, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        self.integrate_tol(rho0, t, DEFAULT_RTOL, DEFAULT_ATOL)
    }

    /// Propagate with explicit tolerances; the state is re-Hermitized after
    /// every accepted step.
    pub fn integrate_tol(
        &self,
        rho0: &DensityMatrix,
        t: f64,
        rtol: f64,
        atol: f64,
    ) -> Result<DensityMatrix> {
        if rho0.dim() != self.h.dim() {
            return Err(Error::DimensionMismatch(rho0.dim(), self.h.dim()));
        }
        let out = integrate_dopri5(
            |y| self.lindblad_rhs_matrix(y),
            rho0.entries(),
            t,
            rtol,
            atol,
            |y| *y = hermitize(y),
        )?;
        Ok(DensityMatrix::from_parts(out))
    }

    /// States at the (sorted, non-negative) grid instants, integrating each
    /// segment from the previous one.
    pub fn trajectory(&self, rho0: &DensityMatrix, grid: &[f64]) -> Result<Vec<DensityMatrix>> {
        let mut out = Vec::with_capacity(grid.len());
        let mut current = rho0.clone();
        let mut t_prev = 0.0;
        for &t in grid {
            if t < t_prev {
                return Err(Error::NegativeTime(t - t_prev));
            }
            current = self.integrate(&current, t - t_prev)?;
            t_prev = t;
            out.push(current.clone());
        }
        Ok(out)
    }

    /// Run the N-cell protocol: simultaneous local weak measurements,
    /// collective dissipation for `tau`, local reversals. Strength vectors
    /// are per cell; zero entries leave that cell unmeasured.
    pub fn run_twm_multi(
        &self,
        rho0: &DensityMatrix,
        m: &[f64],
        w: &[f64],
        tau: f64,
    ) -> Result<ProtocolOutcome<DensityMatrix>> {
        if m.len() != self.n_cells() || w.len() != self.n_cells() {
            return Err(Error::DimensionMismatch(m.len(), self.n_cells()));
        }
        let (post_weak, n_m) = local_measurement(rho0, m, MeasurementKind::Weak)?;
        let evolved = self.integrate(&post_weak, tau)?;
        let (post_reversal, n_mw) = local_measurement(&evolved, w, MeasurementKind::Reversal)?;
        let baseline_state = self.integrate(rho0, tau)?;

        let states = StepStates {
            initial: rho0.clone(),
            post_weak,
            evolved,
            post_reversal,
        };
        let steps = [
            breakdown(&states.initial, &self.h)?,
            breakdown(&states.post_weak, &self.h)?,
            breakdown(&states.evolved, &self.h)?,
            breakdown(&states.post_reversal, &self.h)?,
        ];
        let baseline = breakdown(&baseline_state, &self.h)?;
        let gains = GainReport {
            total: steps[3].total - baseline.total,
            incoherent: steps[3].incoherent - baseline.incoherent,
            coherent: steps[3].coherent - baseline.coherent,
        };
        let shifts = shift_report(&states, &self.h);
        Ok(ProtocolOutcome {
            states,
            probabilities: Probabilities {
                weak: n_m,
                reversal: n_mw,
                success: n_m * n_mw,
            },
            steps,
            gains,
            shifts,
            baseline,
            baseline_state,
        })
    }

    /// Locate reversal-strength pairs `(w_1, w_2)` nulling both shifts for a
    /// two-cell battery at fixed weak strengths. The energy-shift contour is
    /// traced by per-line bracketing on a `grid_res`-point grid (once in each
    /// orientation, so near-axis-parallel branches are not missed) and the
    /// ergotropy residual is then bracketed and bisected along it. Every
    /// returned point has both residuals below `tol`.
    pub fn find_operational_points_2q(
        &self,
        rho0: &DensityMatrix,
        m: &[f64],
        tau: f64,
        grid_res: usize,
        tol: f64,
    ) -> Result<Vec<OperationalPoint>> {
        if self.n_cells() != 2 {
            return Err(Error::DimensionMismatch(self.n_cells(), 2));
        }
        let grid_res = grid_res.max(32);
        let (post_weak, n_m) = local_measurement(rho0, m, MeasurementKind::Weak)?;
        let evolved = self.integrate(&post_weak, tau)?;
        let baseline_state = self.integrate(rho0, tau)?;

        let e_pre = self.h.energy(&post_weak)? - self.h.energy(rho0)?;
        let r0 = breakdown(rho0, &self.h)?.total;
        let r_m0 = breakdown(&post_weak, &self.h)?.total;
        let r_mt = breakdown(&evolved, &self.h)?.total;
        let r_base = breakdown(&baseline_state, &self.h)?.total;
        let e_mt = self.h.energy(&evolved)?;

        let ctx = SearchCtx {
            model: self,
            evolved: &evolved,
            e_pre,
            e_mt,
            r_pre: r_m0 - r0,
            r_mt,
            r_base,
            n_m,
            m,
            tau,
        };

        let mut points: Vec<OperationalPoint> = Vec::new();
        for transposed in [false, true] {
            ctx.scan_orientation(grid_res, tol, transposed, &mut points);
        }
        points.sort_by(|a, b| a.w.partial_cmp(&b.w).unwrap());
        points.dedup_by(|a, b| (a.w[0] - b.w[0]).hypot(a.w[1] - b.w[1]) < 1e-6);
        Ok(points)
    }
}

struct SearchCtx<'a> {
    model: &'a CollectiveModel,
    evolved: &'a DensityMatrix,
    e_pre: f64,
    e_mt: f64,
    r_pre: f64,
    r_mt: f64,
    r_base: f64,
    n_m: f64,
    m: &'a [f64],
    tau: f64,
}

impl SearchCtx<'_> {
    /// Net energy shift at (w1, w2); `None` where the post-selection dies.
    fn eps(&self, w: [f64; 2]) -> Option<f64> {
        let (post, _) = local_measurement(self.evolved, &w, MeasurementKind::Reversal).ok()?;
        let e_post = self.model.h.energy(&post).ok()?;
        Some(self.e_pre + e_post - self.e_mt)
    }

    fn w_shift(&self, w: [f64; 2]) -> Option<f64> {
        let (post, _) = local_measurement(self.evolved, &w, MeasurementKind::Reversal).ok()?;
        let r_post = breakdown(&post, &self.model.h).ok()?.total;
        Some(self.r_pre + r_post - self.r_mt)
    }

    fn point_at(&self, w: [f64; 2]) -> Option<OperationalPoint> {
        let (post, n_mw) = local_measurement(self.evolved, &w, MeasurementKind::Reversal).ok()?;
        let r_post = breakdown(&post, &self.model.h).ok()?.total;
        let eps = self.eps(w)?;
        let w_shift = self.r_pre + r_post - self.r_mt;
        Some(OperationalPoint {
            m: self.m.to_vec(),
            w: w.to_vec(),
            tau: self.tau,
            gain: r_post - self.r_base,
            probability: self.n_m * n_mw,
            residuals: (eps.abs(), w_shift.abs()),
        })
    }

    fn coords(transposed: bool, fixed: f64, solved: f64) -> [f64; 2] {
        if transposed {
            [fixed, solved]
        } else {
            [solved, fixed]
        }
    }

    /// All roots of eps = 0 along one grid line (`fixed` is w2 in the normal
    /// orientation, w1 when transposed).
    fn contour_roots(&self, fixed: f64, grid_res: usize, transposed: bool) -> Vec<f64> {
        let at = |x: f64| self.eps(Self::coords(transposed, fixed, x));
        let mut roots = Vec::new();
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..=grid_res {
            let x = i as f64 / grid_res as f64;
            let Some(e) = at(x) else {
                prev = None;
                continue;
            };
            if e.abs() < 1e-13 {
                roots.push(x);
                prev = None;
                continue;
            }
            if let Some((px, pe)) = prev {
                if pe * e < 0.0 {
                    roots.push(bisect(px, x, pe, |x| at(x).unwrap_or(f64::NAN)));
                }
            }
            prev = Some((x, e));
        }
        roots
    }

    fn scan_orientation(
        &self,
        grid_res: usize,
        tol: f64,
        transposed: bool,
        points: &mut Vec<OperationalPoint>,
    ) {
        let mut prev: Vec<(f64, f64, f64)> = Vec::new(); // (fixed, root, W)
        for i in 0..=grid_res {
            let fixed = i as f64 / grid_res as f64;
            let roots = self.contour_roots(fixed, grid_res, transposed);
            let mut current = Vec::new();
            for root in roots {
                let w = Self::coords(transposed, fixed, root);
                let Some(shift) = self.w_shift(w) else {
                    continue;
                };
                if shift.abs() < tol {
                    if let Some(p) = self.point_at(w) {
                        push_dedup(points, p);
                    }
                } else if let Some(&(pf, pr, ps)) = prev
                    .iter()
                    .find(|(_, r, _)| (r - root).abs() < 2.0 / grid_res as f64)
                {
                    if ps * shift < 0.0 {
                        if let Some(p) =
                            self.refine_along_contour(pf, fixed, pr, ps, grid_res, tol, transposed)
                        {
                            push_dedup(points, p);
                        }
                    }
                }
                current.push((fixed, root, shift));
            }
            prev = current;
        }
    }

    /// Bisect the ergotropy residual between two contour slices.
    #[allow(clippy::too_many_arguments)]
    fn refine_along_contour(
        &self,
        mut lo: f64,
        mut hi: f64,
        root_hint: f64,
        mut w_lo: f64,
        grid_res: usize,
        tol: f64,
        transposed: bool,
    ) -> Option<OperationalPoint> {
        let mut hint = root_hint;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let root = self.local_root(mid, hint, grid_res, transposed)?;
            hint = root;
            let w = Self::coords(transposed, mid, root);
            let shift = self.w_shift(w)?;
            if shift.abs() < tol.min(1e-11) || hi - lo < 1e-14 {
                return self.point_at(w);
            }
            if w_lo * shift <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
                w_lo = shift;
            }
        }
        None
    }

    /// Re-solve the eps root near `hint` for a new grid-line position.
    fn local_root(&self, fixed: f64, hint: f64, grid_res: usize, transposed: bool) -> Option<f64> {
        let at = |x: f64| self.eps(Self::coords(transposed, fixed, x));
        let span = 2.0 / grid_res as f64;
        let lo = (hint - span).max(0.0);
        let hi = (hint + span).min(1.0);
        let (e_lo, e_hi) = (at(lo)?, at(hi)?);
        if e_lo == 0.0 {
            return Some(lo);
        }
        if e_hi == 0.0 {
            return Some(hi);
        }
        if e_lo * e_hi < 0.0 {
            return Some(bisect(lo, hi, e_lo, |x| at(x).unwrap_or(f64::NAN)));
        }
        // fall back to a full line scan
        self.contour_roots(fixed, grid_res, transposed)
            .into_iter()
            .min_by(|a, b| (a - hint).abs().partial_cmp(&(b - hint).abs()).unwrap())
    }
}

fn push_dedup(points: &mut Vec<OperationalPoint>, p: OperationalPoint) {
    if points
        .iter()
        .all(|q| (q.w[0] - p.w[0]).hypot(q.w[1] - p.w[1]) > 1e-6)
    {
        points.push(p);
    }
}

fn bisect(mut lo: f64, mut hi: f64, mut f_lo: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || !fm.is_finite() {
            return mid;
        }
        if f_lo * fm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = fm;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}
