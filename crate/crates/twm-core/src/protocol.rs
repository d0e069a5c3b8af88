//! End-to-end protocol execution: weak measurement, dissipation window,
//! reversal measurement, and the gain accounting against the purely
//! dissipative baseline started from the same initial state.

use crate::dynamics::evolve_free;
use crate::ergotropy::{qubit_breakdown, qubit_coherent_ergotropy, ErgotropyBreakdown};
use crate::error::Result;
use crate::measure::{reversal_measure, weak_measure};
use crate::qubit::{BathParams, ProtocolParams, QubitState};
use crate::shifts::ShiftReport;

/// The four states recorded along one run.
#[derive(Debug, Clone)]
pub struct StepStates<S> {
    /// rho_0, as prepared.
    pub initial: S,
    /// rho_m(0), after the weak measurement.
    pub post_weak: S,
    /// rho_m(tau), after the dissipation window.
    pub evolved: S,
    /// rho_mw(tau), after the reversal.
    pub post_reversal: S,
}

/// Post-selection probabilities of the two measurements and their product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probabilities {
    pub weak: f64,
    pub reversal: f64,
    pub success: f64,
}

/// Final-minus-baseline ergotropy, component by component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainReport {
    pub total: f64,
    pub incoherent: f64,
    pub coherent: f64,
}

/// Everything measured on one protocol run.
#[derive(Debug, Clone)]
pub struct ProtocolOutcome<S> {
    pub states: StepStates<S>,
    pub probabilities: Probabilities,
    /// Ergotropy decomposition at steps (i)-(iv).
    pub steps: [ErgotropyBreakdown; 4],
    pub gains: GainReport,
    pub shifts: ShiftReport,
    /// Decomposition of the baseline state at tau.
    pub baseline: ErgotropyBreakdown,
    /// The purely dissipated state at tau.
    pub baseline_state: S,
}

/// Run the single-qubit protocol with the closed-form propagator.
pub fn run_twm_single(
    s0: &QubitState,
    bath: &BathParams,
    params: &ProtocolParams,
) -> Result<ProtocolOutcome<QubitState>> {
    let (post_weak, n_m) = weak_measure(s0, params.m)?;
    let evolved = evolve_free(&post_weak, bath, params.tau)?;
    let (post_reversal, n_mw) = reversal_measure(&evolved, params.w)?;
    let baseline_state = evolve_free(s0, bath, params.tau)?;

    let states = StepStates {
        initial: *s0,
        post_weak,
        evolved,
        post_reversal,
    };
    let omega = bath.omega;
    let steps = [
        qubit_breakdown(&states.initial, omega),
        qubit_breakdown(&states.post_weak, omega),
        qubit_breakdown(&states.evolved, omega),
        qubit_breakdown(&states.post_reversal, omega),
    ];
    let baseline = qubit_breakdown(&baseline_state, omega);
    let gains = GainReport {
        total: steps[3].total - baseline.total,
        incoherent: steps[3].incoherent - baseline.incoherent,
        coherent: steps[3].coherent - baseline.coherent,
    };
    let shifts = shift_report_qubit(&states, omega);
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

/// Shift accounting on the qubit closed forms (no operator assembly).
pub(crate) fn shift_report_qubit(states: &StepStates<QubitState>, omega: f64) -> ShiftReport {
    let mean = |s: &QubitState| omega * s.p();
    let passive = |s: &QubitState| {
        let d = 1.0 - 2.0 * s.p();
        omega * (1.0 - (d * d + 4.0 * s.qsq()).sqrt()) / 2.0
    };
    let r = |s: &QubitState| mean(s) - passive(s);

    let delta_e_m = mean(&states.post_weak) - mean(&states.initial);
    let delta_e_mw = mean(&states.post_reversal) - mean(&states.evolved);
    let delta_r_m = r(&states.post_weak) - r(&states.initial);
    let delta_r_mw = r(&states.post_reversal) - r(&states.evolved);
    let epsilon_passive = passive(&states.post_weak) - passive(&states.initial)
        + passive(&states.post_reversal)
        - passive(&states.evolved);
    ShiftReport {
        delta_e_m,
        delta_e_mw,
        epsilon: delta_e_m + delta_e_mw,
        delta_r_m,
        delta_r_mw,
        w_shift: delta_r_m + delta_r_mw,
        epsilon_passive,
    }
}

/// Stepwise coherent ergotropies in closed form.
#[derive(Debug, Clone, Copy)]
pub struct CoherentSteps {
    pub r_i: f64,
    pub r_ii: f64,
    pub r_iv: f64,
    post_weak: QubitState,
    bath: BathParams,
}

impl CoherentSteps {
    /// Coherent ergotropy during the dissipation window.
    pub fn r_iii(&self, t: f64) -> f64 {
        let s = evolve_free(&self.post_weak, &self.bath, t).expect("t >= 0");
        qubit_coherent_ergotropy(&s, self.bath.omega)
    }
}

/// Evaluate the coherent component at each protocol step from the run
/// parameters alone (the measurement jumps expressed through N_m and N_mw).
pub fn coherent_steps(
    s0: &QubitState,
    bath: &BathParams,
    params: &ProtocolParams,
) -> Result<CoherentSteps> {
    let omega = bath.omega;
    let (post_weak, n_m) = weak_measure(s0, params.m)?;
    let evolved = evolve_free(&post_weak, bath, params.tau)?;
    let (_, n_mw) = reversal_measure(&evolved, params.w)?;

    if s0.qsq() == 0.0 {
        return Ok(CoherentSteps {
            r_i: 0.0,
            r_ii: 0.0,
            r_iv: 0.0,
            post_weak,
            bath: *bath,
        });
    }

    let p0 = s0.p();
    let q0sq = s0.qsq();
    let r_i = qubit_coherent_ergotropy(s0, omega);

    let a = 2.0 - 2.0 * p0 - n_m;
    let r_ii =
        omega / (2.0 * n_m) * (-a.abs() + (a * a - 4.0 * q0sq * (1.0 - p0 - n_m) / p0).sqrt());

    let p_m_tau = evolved.p();
    let q_m_tau_sq = evolved.qsq();
    let b = n_mw - 2.0 * p_m_tau;
    let r_iv = omega / (2.0 * n_mw)
        * (-b.abs() + (b * b + 4.0 * q_m_tau_sq * (p_m_tau - n_mw) / (p_m_tau - 1.0)).sqrt());

    Ok(CoherentSteps {
        r_i,
        r_ii,
        r_iv,
        post_weak,
        bath: *bath,
    })
}

/// Where a [`TimeRow`] sits relative to a measurement jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Smooth dissipative stretch.
    Free,
    /// Just before a measurement at this instant.
    PreMeasurement,
    /// Just after a measurement at this instant.
    PostMeasurement,
}

impl Phase {
    pub fn label(&self) -> &'static str {
        match self {
            Phase::Free => "free",
            Phase::PreMeasurement => "pre",
            Phase::PostMeasurement => "post",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    Protocol,
    Baseline,
}

impl Series {
    pub fn label(&self) -> &'static str {
        match self {
            Series::Protocol => "protocol",
            Series::Baseline => "baseline",
        }
    }
}

/// One sampled instant of a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct TimeRow {
    pub t: f64,
    pub series: Series,
    pub phase: Phase,
    pub p: f64,
    pub qsq: f64,
    pub ergotropy: ErgotropyBreakdown,
}

/// Sample the protocol and baseline trajectories on `grid` (sorted,
/// non-negative). The measurement discontinuities at t = 0 and t = tau are
/// emitted as paired pre/post rows; with `params = None` only the baseline is
/// produced. An empty grid yields an empty table.
pub fn timeseries(
    s0: &QubitState,
    bath: &BathParams,
    params: Option<&ProtocolParams>,
    grid: &[f64],
) -> Result<Vec<TimeRow>> {
    debug_assert!(grid.windows(2).all(|w| w[0] <= w[1]), "grid must be sorted");
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    let mut rows = Vec::new();

    if let Some(params) = params {
        let run = run_twm_single(s0, bath, params)?;
        let row = |t, phase, s: &QubitState| TimeRow {
            t,
            series: Series::Protocol,
            phase,
            p: s.p(),
            qsq: s.qsq(),
            ergotropy: qubit_breakdown(s, bath.omega),
        };
        rows.push(row(0.0, Phase::PreMeasurement, &run.states.initial));
        rows.push(row(0.0, Phase::PostMeasurement, &run.states.post_weak));
        for &t in grid.iter().filter(|&&t| t > 0.0 && t < params.tau) {
            let s = evolve_free(&run.states.post_weak, bath, t)?;
            rows.push(row(t, Phase::Free, &s));
        }
        rows.push(row(params.tau, Phase::PreMeasurement, &run.states.evolved));
        rows.push(row(
            params.tau,
            Phase::PostMeasurement,
            &run.states.post_reversal,
        ));
    }

    for &t in grid {
        let s = evolve_free(s0, bath, t)?;
        rows.push(TimeRow {
            t,
            series: Series::Baseline,
            phase: Phase::Free,
            p: s.p(),
            qsq: s.qsq(),
            ergotropy: qubit_breakdown(&s, bath.omega),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bath() -> BathParams {
        BathParams::new(0.01, 0.3, 1.0).unwrap()
    }

    fn state(p: f64, qsq: f64) -> QubitState {
        QubitState::new(p, Complex64::new(qsq.sqrt(), 0.0)).unwrap()
    }

    const W_TILDE_REF: f64 = 0.2022486008661375; // null_energy_w_tilde(0.9, 0.4, tau_gamma)

    #[test]
    fn no_measurement_run_is_the_baseline() {
        let run = run_twm_single(
            &state(0.9, 0.05),
            &bath(),
            &ProtocolParams::new(0.0, 0.0, 100.0).unwrap(),
        )
        .unwrap();
        assert_eq!(run.gains.total, 0.0);
        assert_eq!(run.gains.incoherent, 0.0);
        assert_eq!(run.gains.coherent, 0.0);
        assert_eq!(run.probabilities.success, 1.0);
        assert_eq!(run.states.post_reversal, run.baseline_state);
    }

    #[test]
    fn reference_incoherent_gain() {
        let run = run_twm_single(
            &state(0.9, 0.0),
            &bath(),
            &ProtocolParams::new(0.4, W_TILDE_REF, 100.0).unwrap(),
        )
        .unwrap();
        // ~0.071 omega, an 8.89% saving of the initial charge
        assert_abs_diff_eq!(run.gains.incoherent, 0.071, epsilon = 3e-3);
        assert_abs_diff_eq!(
            100.0 * run.gains.incoherent / run.steps[0].incoherent,
            8.89,
            epsilon = 0.05
        );
        // independent scalar chain for the exact value
        let p_m0: f64 = 0.54 / 0.64;
        let p_m_tau = (p_m0 - 0.3) * (-1.0_f64).exp() + 0.3;
        let n_mw = 1.0 - W_TILDE_REF * (1.0 - p_m_tau);
        let p_base = 0.6 * (-1.0_f64).exp() + 0.3;
        let expected = (2.0 * p_m_tau / n_mw - 1.0) - (2.0 * p_base - 1.0);
        assert_relative_eq!(run.gains.incoherent, expected, epsilon = 1e-12);
    }

    #[test]
    fn reference_coherent_run() {
        let run = run_twm_single(
            &state(0.9, 0.0767),
            &bath(),
            &ProtocolParams::new(0.4, W_TILDE_REF, 100.0).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(run.gains.total, 0.076, epsilon = 3e-3);
        assert_abs_diff_eq!(run.gains.coherent, 0.005, epsilon = 1e-3);
        assert_abs_diff_eq!(run.probabilities.success, 0.57, epsilon = 0.01);
        // the headline percentages
        assert_abs_diff_eq!(
            100.0 * run.gains.total / run.steps[0].total,
            8.57,
            epsilon = 0.05
        );
        assert_abs_diff_eq!(
            100.0 * run.gains.coherent / run.steps[0].coherent,
            5.66,
            epsilon = 0.05
        );
    }

    #[test]
    fn gain_decomposition_closes() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let b = bath();
        for _ in 0..1000 {
            let p0 = rng.gen::<f64>();
            let qsq = p0 * (1.0 - p0) * rng.gen::<f64>();
            let params = ProtocolParams::new(
                rng.gen::<f64>() * 0.95,
                rng.gen::<f64>() * 0.95,
                rng.gen::<f64>() * 300.0,
            )
            .unwrap();
            let Ok(run) = run_twm_single(&state(p0, qsq), &b, &params) else {
                continue;
            };
            assert_abs_diff_eq!(
                run.gains.total,
                run.gains.incoherent + run.gains.coherent,
                epsilon = 1e-10
            );
            assert_relative_eq!(
                run.probabilities.success,
                run.probabilities.weak * run.probabilities.reversal,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn success_probability_ignores_initial_coherence() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let b = bath();
        for _ in 0..500 {
            let p0 = rng.gen::<f64>() * 0.9 + 0.05;
            let qsq = p0 * (1.0 - p0) * rng.gen::<f64>();
            let params = ProtocolParams::new(
                rng.gen::<f64>() * 0.9,
                rng.gen::<f64>() * 0.9,
                rng.gen::<f64>() * 200.0,
            )
            .unwrap();
            let with_q = run_twm_single(&state(p0, qsq), &b, &params).unwrap();
            let without_q = run_twm_single(&state(p0, 0.0), &b, &params).unwrap();
            assert_relative_eq!(
                with_q.probabilities.success,
                without_q.probabilities.success,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn coherent_steps_match_recorded_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let b = bath();
        for _ in 0..500 {
            let p0 = rng.gen::<f64>() * 0.98 + 0.01;
            let qsq = p0 * (1.0 - p0) * rng.gen::<f64>();
            let params = ProtocolParams::new(
                rng.gen::<f64>() * 0.9,
                rng.gen::<f64>() * 0.9,
                rng.gen::<f64>() * 200.0,
            )
            .unwrap();
            let s0 = state(p0, qsq);
            let Ok(run) = run_twm_single(&s0, &b, &params) else {
                continue;
            };
            let steps = coherent_steps(&s0, &b, &params).unwrap();
            assert_abs_diff_eq!(steps.r_i, run.steps[0].coherent, epsilon = 1e-10);
            assert_abs_diff_eq!(steps.r_ii, run.steps[1].coherent, epsilon = 1e-10);
            assert_abs_diff_eq!(
                steps.r_iii(params.tau),
                run.steps[2].coherent,
                epsilon = 1e-10
            );
            assert_abs_diff_eq!(steps.r_iv, run.steps[3].coherent, epsilon = 1e-10);
        }
    }

    #[test]
    fn coherent_steps_vanish_without_coherence() {
        let steps = coherent_steps(
            &state(0.9, 0.0),
            &bath(),
            &ProtocolParams::new(0.4, 0.2, 100.0).unwrap(),
        )
        .unwrap();
        assert_eq!(steps.r_i, 0.0);
        assert_eq!(steps.r_ii, 0.0);
        assert_eq!(steps.r_iii(50.0), 0.0);
        assert_eq!(steps.r_iv, 0.0);
    }

    #[test]
    fn coherent_dissipation_rises_toward_tau_half_for_active_start() {
        // reference coherent setting: P_m(0) > 1/2, so the coherent part grows until the
        // diagonal turns passive; the reversal lands near that maximum.
        let b = bath();
        let params = ProtocolParams::new(0.4, W_TILDE_REF, 100.0).unwrap();
        let steps = coherent_steps(&state(0.9, 0.0767), &b, &params).unwrap();
        let p_m0 = 0.54 / 0.64;
        let tau_half = crate::dynamics::tau_half(p_m0, &b).unwrap();
        let mut prev = steps.r_iii(0.0);
        for k in 1..=40 {
            let t = tau_half * k as f64 / 40.0;
            let val = steps.r_iii(t);
            assert!(val >= prev - 1e-12, "not increasing at t = {t}");
            prev = val;
        }
        // tau_gamma ~ tau_half for these parameters
        assert!(tau_half > 95.0 && tau_half < 105.0);
    }

    #[test]
    fn coherent_dissipation_decays_for_passive_start() {
        let b = bath();
        let params = ProtocolParams::new(0.3, 0.2, 100.0).unwrap();
        // P0 = 0.4 keeps P_m(0) < 1/2
        let steps = coherent_steps(&state(0.4, 0.2), &b, &params).unwrap();
        let mut prev = steps.r_iii(0.0);
        for k in 1..=40 {
            let t = 100.0 * k as f64 / 40.0;
            let val = steps.r_iii(t);
            assert!(val <= prev + 1e-12, "not decreasing at t = {t}");
            prev = val;
        }
    }

    #[test]
    fn timeseries_empty_grid_is_empty() {
        let rows = timeseries(
            &state(0.9, 0.0767),
            &bath(),
            Some(&ProtocolParams::new(0.4, 0.2, 100.0).unwrap()),
            &[],
        )
        .unwrap();
        assert!(rows.is_empty());
    }

    #[test]
    fn timeseries_emits_paired_jump_rows() {
        let params = ProtocolParams::new(0.4, W_TILDE_REF, 100.0).unwrap();
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 5.0).collect();
        let rows = timeseries(&state(0.9, 0.0767), &bath(), Some(&params), &grid).unwrap();
        let jumps: Vec<&TimeRow> = rows
            .iter()
            .filter(|r| r.series == Series::Protocol && r.phase != Phase::Free)
            .collect();
        assert_eq!(jumps.len(), 4);
        assert_eq!(jumps[0].t, 0.0);
        assert_eq!(jumps[1].t, 0.0);
        assert_eq!(jumps[2].t, 100.0);
        assert_eq!(jumps[3].t, 100.0);
        // the weak measurement is an instantaneous drop in total ergotropy
        assert!(jumps[1].ergotropy.total < jumps[0].ergotropy.total);
        // the reversal is an instantaneous rise
        assert!(jumps[3].ergotropy.total > jumps[2].ergotropy.total);
    }

    #[test]
    fn protocol_and_baseline_curves_cross_before_tau() {
        // the measured battery discharges more slowly, so the two
        // total-ergotropy curves cross during the dissipation window.
        let params = ProtocolParams::new(0.4, W_TILDE_REF, 100.0).unwrap();
        let grid: Vec<f64> = (0..=200).map(|k| k as f64 * 0.5).collect();
        let rows = timeseries(&state(0.9, 0.0767), &bath(), Some(&params), &grid).unwrap();
        let protocol: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.series == Series::Protocol && r.phase == Phase::Free)
            .map(|r| (r.t, r.ergotropy.total))
            .collect();
        let baseline: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.series == Series::Baseline && r.t > 0.0 && r.t < 100.0)
            .map(|r| (r.t, r.ergotropy.total))
            .collect();
        let diff_at = |t: f64| {
            let p = protocol
                .iter()
                .find(|(tt, _)| (*tt - t).abs() < 1e-9)
                .unwrap()
                .1;
            let b = baseline
                .iter()
                .find(|(tt, _)| (*tt - t).abs() < 1e-9)
                .unwrap()
                .1;
            p - b
        };
        assert!(diff_at(0.5) < 0.0, "protocol starts below the baseline");
        assert!(diff_at(99.5) > 0.0, "protocol ends above the baseline");
    }

    #[test]
    fn discharge_curves_cross_for_unequal_initial_charges() {
        // a half-charged maximally coherent state out-retains the fully
        // charged battery after enough dissipation
        let b = bath();
        let full = state(1.0, 0.0);
        let half = state(0.5, 0.25);
        let r =
            |s: &QubitState, t: f64| qubit_breakdown(&evolve_free(s, &b, t).unwrap(), 1.0).total;
        assert!(r(&full, 0.0) > r(&half, 0.0));
        let t_late = 250.0;
        assert!(
            r(&full, t_late) < r(&half, t_late),
            "expected the lower-charged state to retain more ergotropy"
        );
        // and everything discharges completely in the end
        assert!(r(&full, 3000.0) < 1e-10);
        assert!(r(&half, 3000.0) < 1e-10);
    }
}
