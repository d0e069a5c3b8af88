//! Grid expansion, parallel row evaluation, and deterministic CSV output.
//!
//! Rows are indexed lexicographically over the ranged axes (in
//! [`config::AXIS_ORDER`]) and always written in that order, so the output
//! is byte-identical for any worker count. Infeasible rows (nonphysical
//! null-shift strength, invalid state, impossible post-selection) are kept,
//! with NaN results and a false operational flag.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use twm_core::collective::CollectiveModel;
use twm_core::protocol::run_twm_single;
use twm_core::qubit::{BathParams, ProtocolParams, QubitState};
use twm_core::shifts::{find_operational_points, null_energy_w_tilde, OperationalPoint, WTilde};
use twm_core::xstate::{concurrence, x_state};

use crate::config::{format_float, grid_value, Config, ConfigError, Param};

pub const SINGLE_HEADER: &str =
    "P0,Q0sq,m,w,tau,f,gamma,omega,gain_total,gain_inc,gain_coh,probability,epsilon,Wshift,operational";
pub const TWO_QUBIT_HEADER: &str = "P0,Q0sq,m,w,tau,f,gamma,omega,gain_total,gain_inc,gain_coh,probability,epsilon,Wshift,operational,q,m1,m2,w1,w2,concurrence_final,concurrence_baseline";
pub const OPFIND_HEADER: &str =
    "P0,Q0sq,tau,f,gamma,omega,m,w,gain,probability,residual_eps,residual_W";
pub const OPFIND_2Q_HEADER: &str =
    "q,m1,m2,tau,f,gamma,omega,J,w1,w2,gain,probability,residual_eps,residual_W";

/// One evaluated single-qubit grid point.
#[derive(Debug, Clone, Copy)]
pub struct SingleRow {
    pub p0: f64,
    pub q0sq: f64,
    pub m: f64,
    pub w: f64,
    pub tau: f64,
    pub f: f64,
    pub gamma: f64,
    pub omega: f64,
    pub gain_total: f64,
    pub gain_inc: f64,
    pub gain_coh: f64,
    pub probability: f64,
    pub epsilon: f64,
    pub w_shift: f64,
    pub operational: bool,
}

impl SingleRow {
    fn infeasible(p0: f64, q0sq: f64, m: f64, w: f64, fixed: &FixedBath) -> Self {
        Self {
            p0,
            q0sq,
            m,
            w,
            tau: fixed.tau,
            f: fixed.bath.f,
            gamma: fixed.bath.gamma,
            omega: fixed.bath.omega,
            gain_total: f64::NAN,
            gain_inc: f64::NAN,
            gain_coh: f64::NAN,
            probability: f64::NAN,
            epsilon: f64::NAN,
            w_shift: f64::NAN,
            operational: false,
        }
    }

    pub fn csv(&self) -> String {
        let f = format_float;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            f(self.p0),
            f(self.q0sq),
            f(self.m),
            f(self.w),
            f(self.tau),
            f(self.f),
            f(self.gamma),
            f(self.omega),
            f(self.gain_total),
            f(self.gain_inc),
            f(self.gain_coh),
            f(self.probability),
            f(self.epsilon),
            f(self.w_shift),
            self.operational,
        )
    }
}

struct FixedBath {
    bath: BathParams,
    tau: f64,
}

/// Evaluate one single-qubit cell; `w_param` distinguishes an explicit
/// reversal strength from the null-shift closed form.
pub fn eval_single_cell(
    p0: f64,
    q0sq_param: Param,
    m: f64,
    w_param: Param,
    bath: &BathParams,
    tau: f64,
    tol: f64,
) -> SingleRow {
    let fixed = FixedBath { bath: *bath, tau };
    let q0sq = match q0sq_param {
        Param::Max => p0 * (1.0 - p0),
        Param::Fixed(v) => v,
        _ => f64::NAN,
    };
    let w = match w_param {
        Param::Auto => match null_energy_w_tilde(p0, m, bath, tau) {
            WTilde::Physical(w) => w,
            WTilde::NonPhysical(w) => {
                return SingleRow::infeasible(p0, q0sq, m, w, &fixed);
            }
        },
        Param::Fixed(v) => v,
        _ => f64::NAN,
    };
    let Ok(state) = QubitState::new(p0, Complex64::new(q0sq.max(0.0).sqrt(), 0.0)) else {
        return SingleRow::infeasible(p0, q0sq, m, w, &fixed);
    };
    let Ok(params) = ProtocolParams::new(m, w, tau) else {
        return SingleRow::infeasible(p0, q0sq, m, w, &fixed);
    };
    let Ok(run) = run_twm_single(&state, bath, &params) else {
        return SingleRow::infeasible(p0, q0sq, m, w, &fixed);
    };
    SingleRow {
        p0,
        q0sq,
        m,
        w,
        tau,
        f: bath.f,
        gamma: bath.gamma,
        omega: bath.omega,
        gain_total: run.gains.total,
        gain_inc: run.gains.incoherent,
        gain_coh: run.gains.coherent,
        probability: run.probabilities.success,
        epsilon: run.shifts.epsilon,
        w_shift: run.shifts.w_shift,
        operational: run.shifts.epsilon.abs() < tol && run.shifts.w_shift.abs() < tol,
    }
}

/// The lexicographic grid over the ranged axes of `cfg`.
pub struct Grid {
    pub axes: Vec<(String, f64, f64, usize)>,
    pub total: usize,
}

impl Grid {
    pub fn from_config(cfg: &Config) -> Result<Self, ConfigError> {
        let axes = cfg.ranged_axes();
        let mut total: usize = 1;
        for (name, _, _, count) in &axes {
            total = total
                .checked_mul(*count)
                .ok_or_else(|| ConfigError(format!("grid too large at axis `{name}`")))?;
        }
        if total > 50_000_000 {
            return Err(ConfigError(format!("grid of {total} points is too large")));
        }
        Ok(Self { axes, total })
    }

    /// Axis values of the `row`-th grid point.
    pub fn values_at(&self, mut row: usize) -> Vec<(String, f64)> {
        let mut out = Vec::with_capacity(self.axes.len());
        for (name, start, stop, count) in self.axes.iter().rev() {
            let i = row % count;
            row /= count;
            out.push((name.clone(), grid_value(*start, *stop, *count, i)));
        }
        out.reverse();
        out
    }
}

fn axis_or_fixed(values: &[(String, f64)], cfg: &Config, key: &str) -> Result<f64, ConfigError> {
    if let Some((_, v)) = values.iter().find(|(k, _)| k == key) {
        return Ok(*v);
    }
    cfg.fixed(key)
}

/// Run the single-qubit sweep and return the rows in grid order.
pub fn single_sweep_rows(cfg: &Config) -> Result<Vec<SingleRow>, ConfigError> {
    let grid = Grid::from_config(cfg)?;
    for (name, ..) in &grid.axes {
        if ["q", "m1", "m2", "w1", "w2"].contains(&name.as_str()) {
            return Err(ConfigError(format!(
                "axis `{name}` belongs to the twoqubit command"
            )));
        }
    }
    let tol = cfg.fixed("tol")?;
    let rows: Result<Vec<SingleRow>, ConfigError> = (0..grid.total)
        .into_par_iter()
        .map(|i| {
            let values = grid.values_at(i);
            let lookup = |key: &str| axis_or_fixed(&values, cfg, key);
            let gamma = lookup("gamma")?;
            let f = lookup("f")?;
            let omega = lookup("omega")?;
            let bath = BathParams::new(gamma, f, omega)
                .map_err(|e| ConfigError(format!("invalid bath: {e}")))?;
            let tau = if values.iter().any(|(k, _)| k == "tau") {
                lookup("tau")?
            } else {
                match cfg.get("tau") {
                    Param::Auto => 1.0 / gamma,
                    _ => cfg.fixed("tau")?,
                }
            };
            let q0sq_param = if let Some((_, v)) = values.iter().find(|(k, _)| k == "Q0sq") {
                Param::Fixed(*v)
            } else {
                cfg.get("Q0sq")
            };
            let w_param = if let Some((_, v)) = values.iter().find(|(k, _)| k == "w") {
                Param::Fixed(*v)
            } else {
                cfg.get("w")
            };
            Ok(eval_single_cell(
                lookup("P0")?,
                q0sq_param,
                lookup("m")?,
                w_param,
                &bath,
                tau,
                tol,
            ))
        })
        .collect();
    rows
}

/// One evaluated two-cell grid point.
#[derive(Debug, Clone, Copy)]
pub struct TwoQubitRow {
    pub q: f64,
    pub m1: f64,
    pub m2: f64,
    pub w1: f64,
    pub w2: f64,
    pub tau: f64,
    pub f: f64,
    pub gamma: f64,
    pub omega: f64,
    pub gain_total: f64,
    pub gain_inc: f64,
    pub gain_coh: f64,
    pub probability: f64,
    pub epsilon: f64,
    pub w_shift: f64,
    pub operational: bool,
    pub concurrence_final: f64,
    pub concurrence_baseline: f64,
}

impl TwoQubitRow {
    pub fn csv(&self) -> String {
        let f = format_float;
        let nan = format_float(f64::NAN);
        format!(
            "{nan},{nan},{nan},{nan},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            f(self.tau),
            f(self.f),
            f(self.gamma),
            f(self.omega),
            f(self.gain_total),
            f(self.gain_inc),
            f(self.gain_coh),
            f(self.probability),
            f(self.epsilon),
            f(self.w_shift),
            self.operational,
            f(self.q),
            f(self.m1),
            f(self.m2),
            f(self.w1),
            f(self.w2),
            f(self.concurrence_final),
            f(self.concurrence_baseline),
        )
    }
}

/// Two-cell sweep. Rows sharing everything but (w1, w2) reuse one weak
/// measurement + dissipation stage, so those axes should be (and are, by
/// [`config::AXIS_ORDER`]) the innermost ones.
pub fn two_qubit_sweep_rows(cfg: &Config) -> Result<Vec<TwoQubitRow>, ConfigError> {
    let grid = Grid::from_config(cfg)?;
    for (name, ..) in &grid.axes {
        if ["P0", "Q0sq", "m", "w"].contains(&name.as_str()) {
            return Err(ConfigError(format!(
                "axis `{name}` belongs to the single-qubit sweep command"
            )));
        }
    }
    let tol = cfg.fixed("tol")?;

    // group size = product of the trailing (w1, w2) axis counts
    let mut inner = 1usize;
    for (name, _, _, count) in &grid.axes {
        if name == "w1" || name == "w2" {
            inner *= count;
        }
    }
    let n_groups = grid.total / inner.max(1);

    let groups: Result<Vec<Vec<TwoQubitRow>>, ConfigError> = (0..n_groups)
        .into_par_iter()
        .map(|g| {
            let mut rows = Vec::with_capacity(inner);
            let mut shared: Option<SharedStage> = None;
            for k in 0..inner.max(1) {
                let i = g * inner.max(1) + k;
                let values = grid.values_at(i);
                let lookup = |key: &str| axis_or_fixed(&values, cfg, key);
                let gamma = lookup("gamma")?;
                let f = lookup("f")?;
                let omega = lookup("omega")?;
                let tau = if values.iter().any(|(k, _)| k == "tau") {
                    lookup("tau")?
                } else {
                    match cfg.get("tau") {
                        Param::Auto => 1.0 / gamma,
                        _ => cfg.fixed("tau")?,
                    }
                };
                let j = match cfg.get("J") {
                    Param::Auto => 2.0 * omega * gamma,
                    _ => cfg.fixed("J")?,
                };
                let q = lookup("q")?;
                let m1 = lookup("m1")?;
                let m2 = lookup("m2")?;
                let w1 = lookup("w1")?;
                let w2 = lookup("w2")?;
                if shared.is_none() {
                    shared = Some(SharedStage::prepare(q, m1, m2, tau, gamma, f, omega, j)?);
                }
                rows.push(shared.as_ref().unwrap().eval(w1, w2, tol));
            }
            Ok(rows)
        })
        .collect();
    Ok(groups?.into_iter().flatten().collect())
}

/// The run prefix shared by all (w1, w2) cells of one group.
struct SharedStage {
    q: f64,
    m1: f64,
    m2: f64,
    tau: f64,
    f: f64,
    gamma: f64,
    omega: f64,
    feasible: Option<SharedFeasible>,
}

struct SharedFeasible {
    model: CollectiveModel,
    evolved: twm_core::DensityMatrix,
    n_m: f64,
    e_pre: f64,
    r_pre: f64,
    e_mt: f64,
    r_mt: twm_core::ErgotropyBreakdown,
    r_base: twm_core::ErgotropyBreakdown,
    c_base: f64,
}

impl SharedStage {
    #[allow(clippy::too_many_arguments)]
    fn prepare(
        q: f64,
        m1: f64,
        m2: f64,
        tau: f64,
        gamma: f64,
        f: f64,
        omega: f64,
        j: f64,
    ) -> Result<Self, ConfigError> {
        let mut stage = Self {
            q,
            m1,
            m2,
            tau,
            f,
            gamma,
            omega,
            feasible: None,
        };
        let Ok(model) = CollectiveModel::coupled_pair(omega, j, gamma, f) else {
            return Ok(stage);
        };
        let Ok(rho0) = x_state(q) else {
            return Ok(stage);
        };
        let rho0 = rho0.into_density();
        let h = model.hamiltonian().clone();
        let Ok((post_weak, n_m)) = twm_core::measure::local_measurement(
            &rho0,
            &[m1, m2],
            twm_core::measure::MeasurementKind::Weak,
        ) else {
            return Ok(stage);
        };
        let Ok(evolved) = model.integrate(&post_weak, tau) else {
            return Ok(stage);
        };
        let Ok(baseline) = model.integrate(&rho0, tau) else {
            return Ok(stage);
        };
        let b0 = twm_core::ergotropy::breakdown(&rho0, &h).map_err(cfg_err)?;
        let bw = twm_core::ergotropy::breakdown(&post_weak, &h).map_err(cfg_err)?;
        let r_mt = twm_core::ergotropy::breakdown(&evolved, &h).map_err(cfg_err)?;
        let r_base = twm_core::ergotropy::breakdown(&baseline, &h).map_err(cfg_err)?;
        let e_pre = h.energy(&post_weak).map_err(cfg_err)? - h.energy(&rho0).map_err(cfg_err)?;
        let e_mt = h.energy(&evolved).map_err(cfg_err)?;
        let c_base = concurrence(&baseline).map_err(cfg_err)?;
        stage.feasible = Some(SharedFeasible {
            model,
            evolved,
            n_m,
            e_pre,
            r_pre: bw.total - b0.total,
            e_mt,
            r_mt,
            r_base,
            c_base,
        });
        Ok(stage)
    }

    fn eval(&self, w1: f64, w2: f64, tol: f64) -> TwoQubitRow {
        let mut row = TwoQubitRow {
            q: self.q,
            m1: self.m1,
            m2: self.m2,
            w1,
            w2,
            tau: self.tau,
            f: self.f,
            gamma: self.gamma,
            omega: self.omega,
            gain_total: f64::NAN,
            gain_inc: f64::NAN,
            gain_coh: f64::NAN,
            probability: f64::NAN,
            epsilon: f64::NAN,
            w_shift: f64::NAN,
            operational: false,
            concurrence_final: f64::NAN,
            concurrence_baseline: f64::NAN,
        };
        let Some(st) = &self.feasible else {
            return row;
        };
        row.concurrence_baseline = st.c_base;
        let h = st.model.hamiltonian();
        let Ok((post, n_mw)) = twm_core::measure::local_measurement(
            &st.evolved,
            &[w1, w2],
            twm_core::measure::MeasurementKind::Reversal,
        ) else {
            return row;
        };
        let Ok(b_post) = twm_core::ergotropy::breakdown(&post, h) else {
            return row;
        };
        let Ok(e_post) = h.energy(&post) else {
            return row;
        };
        row.gain_total = b_post.total - st.r_base.total;
        row.gain_inc = b_post.incoherent - st.r_base.incoherent;
        row.gain_coh = b_post.coherent - st.r_base.coherent;
        row.probability = st.n_m * n_mw;
        row.epsilon = st.e_pre + e_post - st.e_mt;
        row.w_shift = st.r_pre + b_post.total - st.r_mt.total;
        row.operational = row.epsilon.abs() < tol && row.w_shift.abs() < tol;
        row.concurrence_final = concurrence(&post).unwrap_or(f64::NAN);
        row
    }
}

fn cfg_err(e: twm_core::Error) -> ConfigError {
    ConfigError(e.to_string())
}

/// Single-qubit operational-point search over the m grid, with outer loops
/// over ranged P0 and/or tau when present.
pub fn opfind_rows(cfg: &Config) -> Result<Vec<OpfindRow>, ConfigError> {
    let tol = cfg.fixed("tol")?;
    let bath = BathParams::new(cfg.fixed("gamma")?, cfg.fixed("f")?, cfg.fixed("omega")?)
        .map_err(cfg_err)?;

    let m_grid: Vec<f64> = match cfg.get("m") {
        Param::Range { start, stop, count } => (0..count)
            .map(|i| grid_value(start, stop, count, i))
            .collect(),
        _ => (1..100).map(|k| k as f64 / 100.0).collect(),
    };
    let p0_values: Vec<f64> = match cfg.get("P0") {
        Param::Range { start, stop, count } => (0..count)
            .map(|i| grid_value(start, stop, count, i))
            .collect(),
        _ => vec![cfg.fixed("P0")?],
    };
    let tau_values: Vec<f64> = match cfg.get("tau") {
        Param::Range { start, stop, count } => (0..count)
            .map(|i| grid_value(start, stop, count, i))
            .collect(),
        _ => vec![cfg.tau()?],
    };

    let mut rows = Vec::new();
    for &tau in &tau_values {
        for &p0 in &p0_values {
            let q0sq = match cfg.get("Q0sq") {
                Param::Max => p0 * (1.0 - p0),
                _ => cfg.fixed("Q0sq")?,
            };
            let Ok(s0) = QubitState::new(p0, Complex64::new(q0sq.max(0.0).sqrt(), 0.0)) else {
                continue;
            };
            for p in find_operational_points(&s0, &bath, tau, &m_grid, tol) {
                rows.push(OpfindRow {
                    p0,
                    q0sq,
                    tau,
                    f: bath.f,
                    gamma: bath.gamma,
                    omega: bath.omega,
                    point: p,
                });
            }
        }
    }
    Ok(rows)
}

pub struct OpfindRow {
    pub p0: f64,
    pub q0sq: f64,
    pub tau: f64,
    pub f: f64,
    pub gamma: f64,
    pub omega: f64,
    pub point: OperationalPoint,
}

impl OpfindRow {
    pub fn csv(&self) -> String {
        let f = format_float;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            f(self.p0),
            f(self.q0sq),
            f(self.tau),
            f(self.f),
            f(self.gamma),
            f(self.omega),
            f(self.point.m[0]),
            f(self.point.w[0]),
            f(self.point.gain),
            f(self.point.probability),
            f(self.point.residuals.0),
            f(self.point.residuals.1),
        )
    }
}

/// Two-qubit operational-point search (over ranged q/m2 cells if present).
pub fn opfind_2q_rows(cfg: &Config) -> Result<Vec<Opfind2qRow>, ConfigError> {
    let tol = cfg.fixed("tol")?;
    let tau = cfg.tau()?;
    let gamma = cfg.fixed("gamma")?;
    let f = cfg.fixed("f")?;
    let omega = cfg.fixed("omega")?;
    let j = cfg.coupling()?;
    let grid_res = cfg.usize_value("grid_res")?;

    let expand = |key: &str| -> Result<Vec<f64>, ConfigError> {
        Ok(match cfg.get(key) {
            Param::Range { start, stop, count } => (0..count)
                .map(|i| grid_value(start, stop, count, i))
                .collect(),
            _ => vec![cfg.fixed(key)?],
        })
    };
    let qs = expand("q")?;
    let m1s = expand("m1")?;
    let m2s = expand("m2")?;

    let model = CollectiveModel::coupled_pair(omega, j, gamma, f).map_err(cfg_err)?;
    let mut rows = Vec::new();
    for &q in &qs {
        let rho0 = x_state(q).map_err(cfg_err)?.into_density();
        for &m1 in &m1s {
            for &m2 in &m2s {
                let points = model
                    .find_operational_points_2q(&rho0, &[m1, m2], tau, grid_res, tol)
                    .map_err(cfg_err)?;
                for p in points {
                    rows.push(Opfind2qRow {
                        q,
                        m1,
                        m2,
                        tau,
                        f,
                        gamma,
                        omega,
                        j,
                        point: p,
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub struct Opfind2qRow {
    pub q: f64,
    pub m1: f64,
    pub m2: f64,
    pub tau: f64,
    pub f: f64,
    pub gamma: f64,
    pub omega: f64,
    pub j: f64,
    pub point: OperationalPoint,
}

impl Opfind2qRow {
    pub fn csv(&self) -> String {
        let f = format_float;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            f(self.q),
            f(self.m1),
            f(self.m2),
            f(self.tau),
            f(self.f),
            f(self.gamma),
            f(self.omega),
            f(self.j),
            f(self.point.w[0]),
            f(self.point.w[1]),
            f(self.point.gain),
            f(self.point.probability),
            f(self.point.residuals.0),
            f(self.point.residuals.1),
        )
    }
}

/// Write header + rows to `path` atomically: build in a temp file, rename on
/// success, remove on failure.
pub fn write_csv(
    path: &Path,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    let result = (|| {
        let mut file = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        writeln!(file, "{header}")?;
        for row in rows {
            writeln!(file, "{row}")?;
        }
        file.flush()
    })();
    match result {
        Ok(()) => std::fs::rename(&tmp, path),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}
