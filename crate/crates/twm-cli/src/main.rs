//! `twm` — runs, sweeps, operational-point searches, and figure data for the
//! two-time weak measurement battery protocol.
//!
//! Exit codes: 0 success, 2 impossible post-selection, 3 invalid
//! configuration, 4 no operational points found.

mod config;
mod figures;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use twm_core::collective::CollectiveModel;
use twm_core::protocol::{run_twm_single, ProtocolOutcome};
use twm_core::qubit::{BathParams, ProtocolParams, QubitState};
use twm_core::shifts::null_energy_w_tilde;
use twm_core::xstate::{concurrence, x_state};

use config::{format_float, grid_value, Config, ConfigError, Param};

#[derive(Parser)]
#[command(
    name = "twm",
    version,
    about = "Two-time weak measurement protocol for open quantum batteries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the single-qubit protocol once and print the report
    Run(CommonArgs),
    /// Evaluate a parameter grid, one CSV row per point
    Sweep(CommonArgs),
    /// Locate single-qubit operational points (both shifts null)
    Opfind(CommonArgs),
    /// Two-cell battery: run, sweep, or 2-D operational search over (w1, w2)
    Twoqubit(CommonArgs),
    /// Emit the data series behind a named reference figure
    Figure {
        /// One of the known figure names (fig2, fig3, fig5, ...)
        name: String,
        #[command(flatten)]
        args: CommonArgs,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Flat `key = value` configuration file
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output CSV path
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Override one parameter, e.g. --set m=0.4 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Sweep one parameter, e.g. --grid m=0:1:101 (repeatable)
    #[arg(long = "grid", value_name = "KEY=START:STOP:COUNT")]
    grid: Vec<String>,
    /// Residual tolerance for the operational classification
    #[arg(long, value_name = "FLOAT")]
    tol: Option<f64>,
    /// Worker threads for sweeps (0 = all cores)
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Write the effective configuration back to PATH
    #[arg(long, value_name = "PATH")]
    dump_config: Option<PathBuf>,
}

enum CliError {
    Config(String),
    Core(twm_core::Error),
    Io(std::io::Error),
    NoPoints,
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<twm_core::Error> for CliError {
    fn from(e: twm_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(twm_core::Error::ZeroProbability(_)) => 2,
            CliError::Core(twm_core::Error::StepFailure(_)) => 1,
            CliError::Io(_) => 1,
            CliError::NoPoints => 4,
            _ => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(msg) => format!("configuration error: {msg}"),
            CliError::Core(e) => e.to_string(),
            CliError::Io(e) => format!("i/o error: {e}"),
            CliError::NoPoints => "no operational points in the searched grid".into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = effective_config(&args)?;
            cmd_run(&cfg, args.out.as_deref())
        }
        Command::Sweep(args) => {
            let cfg = effective_config(&args)?;
            let out = require_out(&args)?;
            cmd_sweep(&cfg, &out)
        }
        Command::Opfind(args) => {
            let cfg = effective_config(&args)?;
            cmd_opfind(&cfg, args.out.as_deref())
        }
        Command::Twoqubit(args) => {
            let cfg = effective_config(&args)?;
            cmd_twoqubit(&cfg, args.out.as_deref())
        }
        Command::Figure { name, args } => {
            let cfg = effective_config(&args)?;
            let out = args
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
            let data = figures::figure_data(&name, &cfg)?;
            sweep::write_csv(&out, &data.header, data.rows)?;
            eprintln!("wrote {}", out.display());
            Ok(())
        }
    }
}

/// defaults <- config file <- --set/--grid <- --tol/--workers, then spin up
/// the worker pool.
fn effective_config(args: &CommonArgs) -> Result<Config, CliError> {
    let mut cfg = match &args.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    for assignment in &args.set {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            CliError::Config(format!("--set expects KEY=VALUE, got `{assignment}`"))
        })?;
        cfg.set(key.trim(), value.trim())?;
    }
    for assignment in &args.grid {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            CliError::Config(format!("--grid expects KEY=SPEC, got `{assignment}`"))
        })?;
        cfg.set_grid(key.trim(), value.trim())?;
    }
    if let Some(tol) = args.tol {
        cfg.set("tol", &format_float(tol))?;
    }
    if let Some(workers) = args.workers {
        cfg.set("workers", &workers.to_string())?;
    }
    if let Some(path) = &args.dump_config {
        std::fs::write(path, cfg.to_text())?;
    }

    let workers = cfg.usize_value("workers")?;
    if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    }
    Ok(cfg)
}

fn require_out(args: &CommonArgs) -> Result<PathBuf, CliError> {
    args.out
        .clone()
        .ok_or_else(|| CliError::Config("this command writes CSV; provide --out PATH".into()))
}

fn bath_from(cfg: &Config) -> Result<BathParams, CliError> {
    Ok(BathParams::new(
        cfg.fixed("gamma")?,
        cfg.fixed("f")?,
        cfg.fixed("omega")?,
    )?)
}

fn cmd_run(cfg: &Config, out: Option<&Path>) -> Result<(), CliError> {
    let bath = bath_from(cfg)?;
    let tau = cfg.tau()?;
    let p0 = cfg.fixed("P0")?;
    let q0sq = match cfg.get("Q0sq") {
        Param::Max => p0 * (1.0 - p0),
        _ => cfg.fixed("Q0sq")?,
    };
    let m = cfg.fixed("m")?;
    let (w, w_is_auto) = match cfg.get("w") {
        Param::Auto => {
            let wt = null_energy_w_tilde(p0, m, &bath, tau)
                .physical()
                .ok_or_else(|| {
                    CliError::Config(
                        "null-shift reversal strength is nonphysical here; set w explicitly".into(),
                    )
                })?;
            (wt, true)
        }
        _ => (cfg.fixed("w")?, false),
    };
    let s0 = QubitState::new(p0, Complex64::new(q0sq.max(0.0).sqrt(), 0.0))?;
    let params = ProtocolParams::new(m, w, tau)?;
    let run = run_twm_single(&s0, &bath, &params)?;
    let tol = cfg.fixed("tol")?;

    println!("TWM protocol run (single qubit)");
    println!(
        "  P0 = {p0}  |Q0|^2 = {q0sq}  m = {m}  w = {w:.6}{}  tau = {tau} (gamma tau = {})",
        if w_is_auto { " (null-shift)" } else { "" },
        bath.gamma * tau
    );
    println!(
        "  f = {}  gamma = {}  omega = {}",
        bath.f, bath.gamma, bath.omega
    );
    print_outcome_table(&run, tol);

    if let Some(path) = out {
        let n = cfg.usize_value("points")?.max(2);
        let grid: Vec<f64> = (0..n).map(|i| grid_value(0.0, tau, n, i)).collect();
        let rows = twm_core::protocol::timeseries(&s0, &bath, Some(&params), &grid)?
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
            });
        sweep::write_csv(path, "t,series,phase,P,Qsq,R_total,R_inc,R_coh", rows)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn print_outcome_table<S>(run: &ProtocolOutcome<S>, tol: f64) {
    println!("  step ergotropies (units of omega):");
    println!("                       total   incoherent   coherent");
    let labels = [
        "i   initial",
        "ii  post-weak",
        "iii pre-reversal",
        "iv  final",
    ];
    for (label, b) in labels.iter().zip(&run.steps) {
        println!(
            "    {label:<17} {:>9.6}   {:>9.6}  {:>9.6}",
            b.total, b.incoherent, b.coherent
        );
    }
    println!(
        "    baseline at tau   {:>9.6}   {:>9.6}  {:>9.6}",
        run.baseline.total, run.baseline.incoherent, run.baseline.coherent
    );
    println!(
        "  gains:         total = {:+.6}  incoherent = {:+.6}  coherent = {:+.6}",
        run.gains.total, run.gains.incoherent, run.gains.coherent
    );
    println!(
        "  probabilities: N_m = {:.6}  N_mw = {:.6}  Pi = {:.6}",
        run.probabilities.weak, run.probabilities.reversal, run.probabilities.success
    );
    println!(
        "  shifts:        epsilon = {:+.3e}  W = {:+.3e}",
        run.shifts.epsilon, run.shifts.w_shift
    );
    let operational = run.shifts.epsilon.abs() < tol && run.shifts.w_shift.abs() < tol;
    println!("  operational (|eps|, |W| < {tol:.1e}): {operational}");
}

fn cmd_sweep(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let rows = sweep::single_sweep_rows(cfg)?;
    sweep::write_csv(out, sweep::SINGLE_HEADER, rows.iter().map(|r| r.csv()))?;
    eprintln!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

fn cmd_opfind(cfg: &Config, out: Option<&Path>) -> Result<(), CliError> {
    let rows = sweep::opfind_rows(cfg)?;
    if rows.is_empty() {
        return Err(CliError::NoPoints);
    }
    emit(out, sweep::OPFIND_HEADER, rows.iter().map(|r| r.csv()))
}

fn cmd_twoqubit(cfg: &Config, out: Option<&Path>) -> Result<(), CliError> {
    let w1 = cfg.get("w1");
    let w2 = cfg.get("w2");
    match (w1, w2) {
        (Param::Auto, Param::Auto) => {
            let rows = sweep::opfind_2q_rows(cfg)?;
            if rows.is_empty() {
                return Err(CliError::NoPoints);
            }
            emit(out, sweep::OPFIND_2Q_HEADER, rows.iter().map(|r| r.csv()))
        }
        (Param::Auto, _) | (_, Param::Auto) => Err(CliError::Config(
            "w1 and w2 must be both auto (operational search) or both concrete".into(),
        )),
        _ => {
            if cfg.ranged_axes().is_empty() {
                twoqubit_run(cfg, out)
            } else {
                let out = out.ok_or_else(|| {
                    CliError::Config("twoqubit sweeps write CSV; provide --out PATH".into())
                })?;
                let rows = sweep::two_qubit_sweep_rows(cfg)?;
                sweep::write_csv(out, sweep::TWO_QUBIT_HEADER, rows.iter().map(|r| r.csv()))?;
                eprintln!("wrote {} rows to {}", rows.len(), out.display());
                Ok(())
            }
        }
    }
}

fn twoqubit_run(cfg: &Config, out: Option<&Path>) -> Result<(), CliError> {
    let model = CollectiveModel::coupled_pair(
        cfg.fixed("omega")?,
        cfg.coupling()?,
        cfg.fixed("gamma")?,
        cfg.fixed("f")?,
    )?;
    if model.hamiltonian().coupling_warning() {
        eprintln!(
            "warning: |J| >= 0.1 omega is outside the validity regime of the local dissipator"
        );
    }
    let tau = cfg.tau()?;
    let q = cfg.fixed("q")?;
    let m = [cfg.fixed("m1")?, cfg.fixed("m2")?];
    let w = [cfg.fixed("w1")?, cfg.fixed("w2")?];
    let rho0 = x_state(q)?.into_density();
    let run = model.run_twm_multi(&rho0, &m, &w, tau)?;
    let tol = cfg.fixed("tol")?;

    println!("TWM protocol run (two coupled cells, X-state)");
    println!(
        "  q = {q}  m = ({}, {})  w = ({}, {})  tau = {tau}",
        m[0], m[1], w[0], w[1]
    );
    println!(
        "  f = {}  gamma = {}  omega = {}  J = {}",
        cfg.fixed("f")?,
        cfg.fixed("gamma")?,
        cfg.fixed("omega")?,
        cfg.coupling()?
    );
    print_outcome_table(&run, tol);
    println!(
        "  concurrence:   initial = {:.6}  final = {:.6}  baseline = {:.6}",
        concurrence(&run.states.initial)?,
        concurrence(&run.states.post_reversal)?,
        concurrence(&run.baseline_state)?
    );

    if let Some(path) = out {
        let n = cfg.usize_value("points")?.max(2);
        let grid: Vec<f64> = (0..n).map(|i| grid_value(0.0, tau, n, i)).collect();
        let h = model.hamiltonian();
        let mut rows = Vec::new();
        let protocol = model.trajectory(&run.states.post_weak, &grid)?;
        for (t, rho) in grid.iter().zip(&protocol) {
            let b = twm_core::ergotropy::breakdown(rho, h)?;
            let phase = if *t == tau { "pre" } else { "free" };
            rows.push(format!(
                "{},protocol,{phase},{},{},{},{}",
                format_float(*t),
                format_float(b.total),
                format_float(b.incoherent),
                format_float(b.coherent),
                format_float(concurrence(rho)?),
            ));
        }
        let b = &run.steps[3];
        rows.push(format!(
            "{},protocol,post,{},{},{},{}",
            format_float(tau),
            format_float(b.total),
            format_float(b.incoherent),
            format_float(b.coherent),
            format_float(concurrence(&run.states.post_reversal)?),
        ));
        let baseline = model.trajectory(&rho0, &grid)?;
        for (t, rho) in grid.iter().zip(&baseline) {
            let b = twm_core::ergotropy::breakdown(rho, h)?;
            rows.push(format!(
                "{},baseline,free,{},{},{},{}",
                format_float(*t),
                format_float(b.total),
                format_float(b.incoherent),
                format_float(b.coherent),
                format_float(concurrence(rho)?),
            ));
        }
        sweep::write_csv(path, "t,series,phase,R_total,R_inc,R_coh,concurrence", rows)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

/// CSV to `--out` when given, otherwise to stdout.
fn emit(
    out: Option<&Path>,
    header: &str,
    rows: impl Iterator<Item = String>,
) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let collected: Vec<String> = rows.collect();
            let n = collected.len();
            sweep::write_csv(path, header, collected)?;
            eprintln!("wrote {n} rows to {}", path.display());
        }
        None => {
            println!("{header}");
            for row in rows {
                println!("{row}");
            }
        }
    }
    Ok(())
}
