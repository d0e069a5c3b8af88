//! Baked-in data recipes for the reference plots: each emits one CSV with
//! the defaults of the corresponding study (f = 0.3, gamma = 1e-2, omega = 1,
//! tau = 1/gamma, J = 2 omega gamma unless the figure says otherwise).

use num_complex::Complex64;

use twm_core::collective::CollectiveModel;
use twm_core::ergotropy::ergotropy;
use twm_core::protocol::timeseries;
use twm_core::qubit::{BathParams, ProtocolParams, QubitState};
use twm_core::shifts::{null_energy_w_tilde, WTilde};
use twm_core::xstate::{concurrence, x_state, x_state_concurrence};

use crate::config::{format_float, grid_value, Config, ConfigError, Param};
use crate::sweep::{eval_single_cell, SingleRow};

pub const FIGURE_NAMES: &[&str] = &[
    "fig2", "fig3", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11", "fig12", "fig14",
    "fig15", "fig16", "fig17",
];

pub struct FigureData {
    pub header: String,
    pub rows: Vec<String>,
}

pub fn figure_data(name: &str, cfg: &Config) -> Result<FigureData, ConfigError> {
    match name {
        "fig2" => incoherent_gain_surfaces(cfg),
        "fig3" => stepwise_timeseries(cfg, 0.0),
        "fig5" => coherent_gain_surfaces(cfg),
        "fig6" => coherent_gain_vs_time(cfg),
        "fig7" | "fig10" => stepwise_timeseries(cfg, 0.0767),
        "fig8" => reversal_plane_shift_surfaces(cfg),
        "fig9" => gain_probability_surfaces(cfg),
        "fig11" => x_state_statics(),
        "fig12" => two_qubit_dynamics(cfg),
        "fig14" => w_tilde_surfaces(cfg),
        "fig15" => discharge_curves(cfg),
        "fig16" => ergotropy_shift_surfaces(cfg),
        "fig17" => concurrence_protocol_comparison(cfg),
        _ => Err(ConfigError(format!(
            "unknown figure `{name}`; known: {}",
            FIGURE_NAMES.join(", ")
        ))),
    }
}

fn bath(cfg: &Config) -> Result<BathParams, ConfigError> {
    BathParams::new(cfg.fixed("gamma")?, cfg.fixed("f")?, cfg.fixed("omega")?)
        .map_err(|e| ConfigError(e.to_string()))
}

fn surface_rows(
    cfg: &Config,
    panel: &str,
    p0s: &[f64],
    ms: &[f64],
    q0sq: Param,
    tau: f64,
    rows: &mut Vec<String>,
) -> Result<(), ConfigError> {
    let b = bath(cfg)?;
    let tol = cfg.fixed("tol")?;
    for &p0 in p0s {
        for &m in ms {
            let r: SingleRow = eval_single_cell(p0, q0sq, m, Param::Auto, &b, tau, tol);
            rows.push(format!("{panel},{}", r.csv()));
        }
    }
    Ok(())
}

fn lin(n: usize, a: f64, b: f64) -> Vec<f64> {
    (0..n).map(|i| grid_value(a, b, n, i)).collect()
}

/// Incoherent gain over (P0, m) along the null-shift strength, one panel per
/// dissipation time (tau_gamma/2, tau_gamma, 10 tau_gamma).
fn incoherent_gain_surfaces(cfg: &Config) -> Result<FigureData, ConfigError> {
    let tau_gamma = 1.0 / cfg.fixed("gamma")?;
    let p0s = lin(81, 0.0, 1.0);
    let ms = lin(81, 0.0, 1.0);
    let mut rows = Vec::new();
    for (panel, tau) in [
        ("a", 0.5 * tau_gamma),
        ("b", tau_gamma),
        ("c", 10.0 * tau_gamma),
    ] {
        surface_rows(cfg, panel, &p0s, &ms, Param::Fixed(0.0), tau, &mut rows)?;
    }
    Ok(FigureData {
        header: format!("panel,{}", crate::sweep::SINGLE_HEADER),
        rows,
    })
}

/// Coherent gain over (m, |Q0|^2) along the null-shift strength, one panel
/// per initial population.
fn coherent_gain_surfaces(cfg: &Config) -> Result<FigureData, ConfigError> {
    let b = bath(cfg)?;
    let tau = cfg.tau()?;
    let tol = cfg.fixed("tol")?;
    let ms = lin(81, 0.0, 1.0);
    let mut rows = Vec::new();
    for (panel, p0) in [("a", 0.4), ("b", 0.6), ("c", 0.9)] {
        let qmax = p0 * (1.0 - p0);
        for q0sq in lin(81, 0.0, qmax) {
            for &m in &ms {
                let r = eval_single_cell(p0, Param::Fixed(q0sq), m, Param::Auto, &b, tau, tol);
                rows.push(format!("{panel},{}", r.csv()));
            }
        }
    }
    Ok(FigureData {
        header: format!("panel,{}", crate::sweep::SINGLE_HEADER),
        rows,
    })
}

/// Total gain, coherent gain, and success probability over (P0, m) for the
/// warmer/cooler reservoirs, at maximal initial coherence.
fn gain_probability_surfaces(cfg: &Config) -> Result<FigureData, ConfigError> {
    let tau = cfg.tau()?;
    let tol = cfg.fixed("tol")?;
    let p0s = lin(81, 0.0, 1.0);
    let ms = lin(81, 0.0, 1.0);
    let mut rows = Vec::new();
    for (panel, f) in [("a", 0.30), ("b", 0.15)] {
        let b = BathParams::new(cfg.fixed("gamma")?, f, cfg.fixed("omega")?)
            .map_err(|e| ConfigError(e.to_string()))?;
        for &p0 in &p0s {
            for &m in &ms {
                let r = eval_single_cell(p0, Param::Max, m, Param::Auto, &b, tau, tol);
                rows.push(format!("{panel},{}", r.csv()));
            }
        }
    }
    Ok(FigureData {
        header: format!("panel,{}", crate::sweep::SINGLE_HEADER),
        rows,
    })
}

/// Protocol vs baseline trajectories of every ergotropy component for the
/// reference run (P0 = 0.9, m = 0.4, w = null-shift strength, tau = 1/gamma).
fn stepwise_timeseries(cfg: &Config, q0sq: f64) -> Result<FigureData, ConfigError> {
    let b = bath(cfg)?;
    let tau = cfg.tau()?;
    let p0 = 0.9;
    let m = 0.4;
    let w = null_energy_w_tilde(p0, m, &b, tau)
        .physical()
        .ok_or_else(|| ConfigError("null-shift strength is nonphysical here".into()))?;
    let s0 = QubitState::new(p0, Complex64::new(q0sq.sqrt(), 0.0))
        .map_err(|e| ConfigError(e.to_string()))?;
    let params = ProtocolParams::new(m, w, tau).map_err(|e| ConfigError(e.to_string()))?;
    let n = cfg.usize_value("points")?.max(2);
    let grid = lin(n, 0.0, tau);
    let rows = timeseries(&s0, &b, Some(&params), &grid)
        .map_err(|e| ConfigError(e.to_string()))?
        .into_iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{}",
                format_float(r.t),
                r.series.label(),
                r.phase.label(),
                format_float(r.p),
                format_float(r.qsq),
                format_float(r.ergotropy.total),
                format_float(r.ergotropy.incoherent),
                format_float(r.ergotropy.coherent),
            )
        })
        .collect();
    Ok(FigureData {
        header: "t,series,phase,P,Q0sq,R_total,R_inc,R_coh".into(),
        rows,
    })
}

/// Ergotropy and concurrence of the correlated family against 1 - q.
fn x_state_statics() -> Result<FigureData, ConfigError> {
    let h = twm_core::HamiltonianSpec::coupled_pair(1.0, 0.02)
        .map_err(|e| ConfigError(e.to_string()))?;
    let mut rows = Vec::new();
    for q in lin(201, 0.0, 1.0) {
        let x = x_state(q).map_err(|e| ConfigError(e.to_string()))?;
        let r = ergotropy(x.density(), &h).map_err(|e| ConfigError(e.to_string()))?;
        let c = concurrence(x.density()).map_err(|e| ConfigError(e.to_string()))?;
        rows.push(format!(
            "{},{},{},{},{}",
            format_float(q),
            format_float(1.0 - q),
            format_float(r),
            format_float(c),
            format_float(x_state_concurrence(q)),
        ));
    }
    Ok(FigureData {
        header: "q,one_minus_q,ergotropy,concurrence,concurrence_closed_form".into(),
        rows,
    })
}

/// Free two-cell dissipation of rho_X(0.1) and rho_X(0.9): ergotropy
/// components and concurrence over one decay time.
fn two_qubit_dynamics(cfg: &Config) -> Result<FigureData, ConfigError> {
    let model = CollectiveModel::coupled_pair(
        cfg.fixed("omega")?,
        cfg.coupling()?,
        cfg.fixed("gamma")?,
        cfg.fixed("f")?,
    )
    .map_err(|e| ConfigError(e.to_string()))?;
    let tau = cfg.tau()?;
    let n = cfg.usize_value("points")?.max(2);
    let grid = lin(n, 0.0, tau);
    let mut rows = Vec::new();
    for q in [0.1, 0.9] {
        let rho0 = x_state(q)
            .map_err(|e| ConfigError(e.to_string()))?
            .into_density();
        let h = model.hamiltonian();
        let states = model
            .trajectory(&rho0, &grid)
            .map_err(|e| ConfigError(e.to_string()))?;
        for (t, rho) in grid.iter().zip(&states) {
            let b =
                twm_core::ergotropy::breakdown(rho, h).map_err(|e| ConfigError(e.to_string()))?;
            rows.push(format!(
                "q={q},{},{},{},{},{}",
                format_float(*t),
                format_float(b.total),
                format_float(b.incoherent),
                format_float(b.coherent),
                format_float(concurrence(rho).map_err(|e| ConfigError(e.to_string()))?),
            ));
        }
    }
    Ok(FigureData {
        header: "series,t,R_total,R_inc,R_coh,concurrence".into(),
        rows,
    })
}

/// The null-shift strength surface over (P0, m) at zero and finite
/// temperature; nonphysical cells keep their out-of-range value and a
/// `false` flag.
fn w_tilde_surfaces(cfg: &Config) -> Result<FigureData, ConfigError> {
    let tau = cfg.tau()?;
    let gamma = cfg.fixed("gamma")?;
    let omega = cfg.fixed("omega")?;
    let mut rows = Vec::new();
    for (panel, f) in [("a", 0.0), ("b", 0.3)] {
        let b = BathParams::new(gamma, f, omega).map_err(|e| ConfigError(e.to_string()))?;
        for p0 in lin(81, 0.0, 1.0) {
            for m in lin(81, 0.0, 1.0) {
                let (value, physical) = match null_energy_w_tilde(p0, m, &b, tau) {
                    WTilde::Physical(w) => (w, true),
                    WTilde::NonPhysical(w) => (w, false),
                };
                rows.push(format!(
                    "{panel},{},{},{},{},{},{physical}",
                    format_float(p0),
                    format_float(m),
                    format_float(f),
                    format_float(tau),
                    format_float(value),
                ));
            }
        }
    }
    Ok(FigureData {
        header: "panel,P0,m,f,tau,w_tilde,physical".into(),
        rows,
    })
}

/// Free discharge of a spread of initial states, showing the curve
/// crossings that let a weaker-charged battery out-retain a full one.
fn discharge_curves(cfg: &Config) -> Result<FigureData, ConfigError> {
    let b = bath(cfg)?;
    let n = cfg.usize_value("points")?.max(2);
    let grid = lin(n, 0.0, 4.0 / b.gamma);
    let initial: &[(f64, f64)] = &[
        (1.0, 0.0),
        (0.9, 0.0767),
        (0.8, 0.16),
        (0.5, 0.25),
        (0.3, 0.0),
    ];
    let mut rows = Vec::new();
    for &(p0, q0sq) in initial {
        let s0 = QubitState::new(p0, Complex64::new(q0sq.sqrt(), 0.0))
            .map_err(|e| ConfigError(e.to_string()))?;
        for r in timeseries(&s0, &b, None, &grid).map_err(|e| ConfigError(e.to_string()))? {
            rows.push(format!(
                "P0={p0}|Q0sq={q0sq},{},{},{},{},{},{}",
                format_float(r.t),
                format_float(r.p),
                format_float(r.qsq),
                format_float(r.ergotropy.total),
                format_float(r.ergotropy.incoherent),
                format_float(r.ergotropy.coherent),
            ));
        }
    }
    Ok(FigureData {
        header: "series,t,P,Qsq,R_total,R_inc,R_coh".into(),
        rows,
    })
}

/// Coherent gain against dissipation time and weak strength at maximal
/// initial coherence, for the two reference populations.
fn coherent_gain_vs_time(cfg: &Config) -> Result<FigureData, ConfigError> {
    let b = bath(cfg)?;
    let tol = cfg.fixed("tol")?;
    let tau_gamma = 1.0 / b.gamma;
    let ms = lin(81, 0.0, 1.0);
    let taus = lin(81, 0.0, 5.0 * tau_gamma);
    let mut rows = Vec::new();
    for (panel, p0) in [("a", 0.6), ("b", 0.9)] {
        for &tau in &taus {
            for &m in &ms {
                let r = eval_single_cell(p0, Param::Max, m, Param::Auto, &b, tau, tol);
                rows.push(format!("{panel},{}", r.csv()));
            }
        }
    }
    Ok(FigureData {
        header: format!("panel,{}", crate::sweep::SINGLE_HEADER),
        rows,
    })
}

/// Energy and ergotropy shifts over the reversal plane (w1, w2) for the two
/// reference two-cell runs; the zero contours intersect at the operational
/// points.
fn reversal_plane_shift_surfaces(cfg: &Config) -> Result<FigureData, ConfigError> {
    let model = CollectiveModel::coupled_pair(
        cfg.fixed("omega")?,
        cfg.coupling()?,
        cfg.fixed("gamma")?,
        cfg.fixed("f")?,
    )
    .map_err(|e| ConfigError(e.to_string()))?;
    let tau = cfg.tau()?;
    let err = |e: twm_core::Error| ConfigError(e.to_string());
    let h = model.hamiltonian();
    let ws = lin(65, 0.0, 1.0);
    let mut rows = Vec::new();
    for (panel, q, m) in [("a", 0.1, [0.5, 0.6]), ("b", 0.9, [0.5, 0.9])] {
        let rho0 = x_state(q).map_err(err)?.into_density();
        let (post_weak, n_m) = twm_core::measure::local_measurement(
            &rho0,
            &m,
            twm_core::measure::MeasurementKind::Weak,
        )
        .map_err(err)?;
        let evolved = model.integrate(&post_weak, tau).map_err(err)?;
        let baseline = model.integrate(&rho0, tau).map_err(err)?;
        let e_pre = h.energy(&post_weak).map_err(err)? - h.energy(&rho0).map_err(err)?;
        let e_mt = h.energy(&evolved).map_err(err)?;
        let r0 = twm_core::ergotropy::ergotropy(&rho0, h).map_err(err)?;
        let r_m0 = twm_core::ergotropy::ergotropy(&post_weak, h).map_err(err)?;
        let r_mt = twm_core::ergotropy::ergotropy(&evolved, h).map_err(err)?;
        let r_base = twm_core::ergotropy::ergotropy(&baseline, h).map_err(err)?;
        for &w1 in &ws {
            for &w2 in &ws {
                let result = twm_core::measure::local_measurement(
                    &evolved,
                    &[w1, w2],
                    twm_core::measure::MeasurementKind::Reversal,
                );
                let (eps, wsh, gain, prob) = match result {
                    Ok((post, n_mw)) => {
                        let r_post = twm_core::ergotropy::ergotropy(&post, h).map_err(err)?;
                        let e_post = h.energy(&post).map_err(err)?;
                        (
                            e_pre + e_post - e_mt,
                            r_m0 - r0 + r_post - r_mt,
                            r_post - r_base,
                            n_m * n_mw,
                        )
                    }
                    Err(_) => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
                };
                rows.push(format!(
                    "{panel},{},{},{},{},{},{},{},{},{}",
                    format_float(q),
                    format_float(m[0]),
                    format_float(m[1]),
                    format_float(w1),
                    format_float(w2),
                    format_float(eps),
                    format_float(wsh),
                    format_float(gain),
                    format_float(prob),
                ));
            }
        }
    }
    Ok(FigureData {
        header: "panel,q,m1,m2,w1,w2,epsilon,Wshift,gain_total,probability".into(),
        rows,
    })
}

/// Ergotropy shift along the null-energy strength over (P0, m), at three
/// temperatures, with and without initial coherence.
fn ergotropy_shift_surfaces(cfg: &Config) -> Result<FigureData, ConfigError> {
    let tau = cfg.tau()?;
    let tol = cfg.fixed("tol")?;
    let gamma = cfg.fixed("gamma")?;
    let omega = cfg.fixed("omega")?;
    let p0s = lin(81, 0.0, 1.0);
    let ms = lin(81, 0.0, 1.0);
    let cases: &[(&str, f64, Param)] = &[
        ("a", 0.0, Param::Max),
        ("b", 0.15, Param::Max),
        ("c", 0.30, Param::Max),
        ("d", 0.0, Param::Fixed(0.0)),
        ("e", 0.15, Param::Fixed(0.0)),
        ("f", 0.30, Param::Fixed(0.0)),
    ];
    let mut rows = Vec::new();
    for &(panel, f, q0sq) in cases {
        let b = BathParams::new(gamma, f, omega).map_err(|e| ConfigError(e.to_string()))?;
        for &p0 in &p0s {
            for &m in &ms {
                let r = eval_single_cell(p0, q0sq, m, Param::Auto, &b, tau, tol);
                rows.push(format!("{panel},{}", r.csv()));
            }
        }
    }
    Ok(FigureData {
        header: format!("panel,{}", crate::sweep::SINGLE_HEADER),
        rows,
    })
}

/// Concurrence with and without the protocol for the two reference two-cell
/// runs.
fn concurrence_protocol_comparison(cfg: &Config) -> Result<FigureData, ConfigError> {
    let model = CollectiveModel::coupled_pair(
        cfg.fixed("omega")?,
        cfg.coupling()?,
        cfg.fixed("gamma")?,
        cfg.fixed("f")?,
    )
    .map_err(|e| ConfigError(e.to_string()))?;
    let tau = cfg.tau()?;
    let n = cfg.usize_value("points")?.max(2);
    let grid = lin(n, 0.0, tau);
    let mut rows = Vec::new();
    let cases: &[(&str, f64, [f64; 2], [f64; 2])] = &[
        ("a", 0.1, [0.5, 0.6], [0.21, 0.21]),
        ("b", 0.9, [0.5, 0.9], [0.97, 0.17]),
    ];
    let err = |e: twm_core::Error| ConfigError(e.to_string());
    for &(panel, q, m, w) in cases {
        let rho0 = x_state(q).map_err(err)?.into_density();
        let run = model.run_twm_multi(&rho0, &m, &w, tau).map_err(err)?;

        // protocol branch: concurrence along the post-weak dissipation, with
        // paired rows at the reversal jump
        let states = model
            .trajectory(&run.states.post_weak, &grid)
            .map_err(err)?;
        for (t, rho) in grid.iter().zip(&states) {
            let phase = if *t == tau { "pre" } else { "free" };
            rows.push(format!(
                "{panel},protocol,{phase},{},{}",
                format_float(*t),
                format_float(concurrence(rho).map_err(err)?),
            ));
        }
        rows.push(format!(
            "{panel},protocol,post,{},{}",
            format_float(tau),
            format_float(concurrence(&run.states.post_reversal).map_err(err)?),
        ));

        let states = model.trajectory(&rho0, &grid).map_err(err)?;
        for (t, rho) in grid.iter().zip(&states) {
            rows.push(format!(
                "{panel},baseline,free,{},{}",
                format_float(*t),
                format_float(concurrence(rho).map_err(err)?),
            ));
        }
    }
    Ok(FigureData {
        header: "panel,series,phase,t,concurrence".into(),
        rows,
    })
}
