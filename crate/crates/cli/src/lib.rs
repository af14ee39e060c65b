//! Command-line front end. [`run`] parses arguments, dispatches to the
//! numerics and writes a CSV table to standard output or `--output`.
//!
//! Exit status: 0 on success, 2 for usage and input errors, 1 when a
//! computation fails (for example an unstable linearisation).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use quadopo::analytic::{time_grid, EffectiveCouplings, PropagatorMethod};
use quadopo::config::ParamSet;
use quadopo::meanfield::{classical_drift, relax, steady_state, MeanState, Regime};
use quadopo::report::{self, num};
use quadopo::spectra::{frequency_grid, linearize, scan_frequency, scan_pump, stability};
use quadopo::stochastic::{run_ensemble, EnsembleConfig};
use quadopo::{threshold_pump, Error, ValidatedParams};

/// Environment variable capping the worker thread count (0 = automatic).
pub const THREADS_ENV: &str = "QUADOPO_THREADS";

const DEFAULT_SETUP: &str = "chi = 0.01\neps = 400\ngamma = 10\nkappa = 1\n";

#[derive(Parser, Debug)]
#[command(name = "quadopo", version, about = "Entanglement numerics for four concurrent downconversion processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Undepleted-pump correlations against time.
    Analytic(AnalyticArgs),
    /// Mean-field steady state.
    Steady(SystemArgs),
    /// Eigenvalues of the linearised drift.
    Stability(SystemArgs),
    /// Output spectral correlations against frequency.
    Spectrum(SpectrumArgs),
    /// Frequency minima of the correlations against pump ratio.
    ScanPump(ScanPumpArgs),
    /// Positive-P trajectory ensemble.
    Sde(SdeArgs),
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Write the table here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ParamArgs {
    /// Parameter file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a parameter, e.g. `--set eps3=410`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    chi: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Set every pump to this multiple of the threshold (symmetric systems).
    #[arg(long)]
    eps_ratio: Option<f64>,
}

#[derive(Args, Debug)]
struct SystemArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    General,
    Equal,
    Paired,
}

#[derive(Args, Debug)]
struct AnalyticArgs {
    /// One value (equal couplings), two values `a,b` (couplings a,a,b,b) or four values.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    xi: Vec<f64>,
    /// Propagator evaluation; defaults to the closed form matching `--xi`.
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long, default_value_t = 3.0)]
    t_max: f64,
    #[arg(long, default_value_t = 300)]
    points: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 10.0)]
    omega_max: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct ScanPumpArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Pump ratios eps / eps_c.
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.5,0.8,0.95,1.1,1.5,2,3,5")]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = 10.0)]
    omega_max: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct SdeArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 1000)]
    traj: usize,
    #[arg(long, default_value_t = 20.0)]
    tfinal: f64,
    #[arg(long, default_value_t = 0.005)]
    dt: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

/// Failure of a run, with the exit status it maps to.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Compute(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Unstable { .. }
            | Error::NoConvergence { .. }
            | Error::TooManyDivergences { .. }
            | Error::Diverged { .. }
            | Error::DegenerateCovariance { .. }
            | Error::NotAFixedPoint { .. } => Failure::Compute(e),
            other => Failure::Usage(format!("{}: {other}", other.name())),
        }
    }
}

type Settings = Vec<(&'static str, String)>;

impl ParamArgs {
    fn resolve(&self) -> Result<(ValidatedParams, Settings), Failure> {
        let mut set = ParamSet::parse(DEFAULT_SETUP)?;
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            set.merge(&ParamSet::parse(&text)?);
        }
        for (key, value) in [("chi", self.chi), ("eps", self.eps), ("gamma", self.gamma), ("kappa", self.kappa)] {
            if let Some(v) = value {
                set.set(key, v)?;
            }
        }
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{item}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Failure::Usage(format!("--set {k}: `{v}` is not a number")))?;
            set.set(k.trim(), v)?;
        }
        let mut params = set.resolve()?.validate()?;
        let mut settings = Vec::new();
        if let Some(r) = self.eps_ratio {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Failure::Usage(format!("--eps-ratio must be nonnegative, got {r}")));
            }
            let eps_c = threshold_pump(&params)?;
            params = params.with_eps(r * eps_c)?;
            settings.push(("eps_ratio", num(r)));
        }
        Ok((params, settings))
    }
}

/// Steady state: closed form for symmetric systems, relaxation otherwise.
fn find_steady(p: &ValidatedParams) -> Result<(MeanState, Option<Regime>), Error> {
    if p.is_symmetric() {
        let (s, r) = steady_state(p)?;
        return Ok((s, Some(r)));
    }
    let mut init = MeanState::zero();
    for q in 0..4 {
        init.alpha[q] = C64::new(p.eps[q] / p.gamma[q], 0.0);
    }
    for j in 4..8 {
        init.alpha[j] = C64::new(1e-3, 0.0);
    }
    Ok((relax(p, init, 1e5, 1e-10)?.state, None))
}

fn check_grid(omega_max: f64, points: usize) -> Result<Vec<f64>, Failure> {
    if !(omega_max.is_finite() && omega_max > 0.0) {
        return Err(Failure::Usage(format!("--omega-max must be positive, got {omega_max}")));
    }
    if points == 0 {
        return Err(Failure::Usage("--points must be at least 1".into()));
    }
    Ok(frequency_grid(omega_max, points))
}

fn emit(out: &OutputArgs, text: &str) -> Result<(), Failure> {
    match &out.output {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Io(e.to_string()))
        }
    }
}

fn analytic(a: &AnalyticArgs) -> Result<(), Failure> {
    let values: [f64; 4] = match a.xi.as_slice() {
        [x] => [*x; 4],
        [p, q] => [*p, *p, *q, *q],
        [w, x, y, z] => [*w, *x, *y, *z],
        other => return Err(Failure::Usage(format!("--xi takes 1, 2 or 4 values, got {}", other.len()))),
    };
    let method = match a.method {
        Some(Method::General) => PropagatorMethod::General,
        Some(Method::Equal) => PropagatorMethod::ClosedEqual,
        Some(Method::Paired) => PropagatorMethod::ClosedPaired,
        None => match a.xi.len() {
            1 => PropagatorMethod::ClosedEqual,
            2 => PropagatorMethod::ClosedPaired,
            _ => PropagatorMethod::General,
        },
    };
    if !(a.t_max.is_finite() && a.t_max > 0.0) || a.points == 0 {
        return Err(Failure::Usage("--t-max and --points must be positive".into()));
    }
    let xi = EffectiveCouplings::new(values)?;
    let csv = report::analytic_csv(&xi, method, &time_grid(a.t_max, a.points))?;
    emit(&a.out, &csv)
}

fn steady(a: &SystemArgs) -> Result<(), Failure> {
    let (p, _) = a.params.resolve()?;
    let (s, regime) = find_steady(&p)?;
    let residual = classical_drift(&s, &p).max_abs();
    let regime = regime.unwrap_or(if s.low().iter().any(|v| v.norm() > 1e-6) { Regime::Above } else { Regime::Below });
    emit(&a.out, &report::steady_csv(&p, &s, regime, residual))
}

fn stability_cmd(a: &SystemArgs) -> Result<(), Failure> {
    let (p, _) = a.params.resolve()?;
    let (s, _) = find_steady(&p)?;
    let report = stability(&linearize(&p, &s)?)?;
    emit(&a.out, &report::stability_csv(&p, &report))
}

fn spectrum(a: &SpectrumArgs) -> Result<(), Failure> {
    let grid = check_grid(a.omega_max, a.points)?;
    let (p, mut settings) = a.params.resolve()?;
    let (s, _) = find_steady(&p)?;
    let table = scan_frequency(&linearize(&p, &s)?, &grid)?;
    settings.push(("omega_max", num(a.omega_max)));
    settings.push(("points", a.points.to_string()));
    emit(&a.out, &report::spectrum_csv(&p, &settings, &table))
}

fn scan_pump_cmd(a: &ScanPumpArgs) -> Result<(), Failure> {
    let grid = check_grid(a.omega_max, a.points)?;
    let (p, mut settings) = a.params.resolve()?;
    let rows = scan_pump(&p, &a.ratios, &grid)?;
    settings.push(("omega_max", num(a.omega_max)));
    settings.push(("points", a.points.to_string()));
    emit(&a.out, &report::scan_pump_csv(&p, &settings, &rows))
}

fn sde(a: &SdeArgs) -> Result<(), Failure> {
    let (p, mut settings) = a.params.resolve()?;
    let cfg = EnsembleConfig { n_traj: a.traj, t_final: a.tfinal, dt: a.dt, seed: a.seed, initial: None };
    let moments = run_ensemble(&p, &cfg)?;
    settings.extend([
        ("tfinal", num(a.tfinal)),
        ("dt", num(a.dt)),
        ("seed", a.seed.to_string()),
    ]);
    emit(&a.out, &report::sde_csv(&p, &settings, &moments))
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Analytic(a) => analytic(a),
        Command::Steady(a) => steady(a),
        Command::Stability(a) => stability_cmd(a),
        Command::Spectrum(a) => spectrum(a),
        Command::ScanPump(a) => scan_pump_cmd(a),
        Command::Sde(a) => sde(a),
    }
}

fn thread_count() -> Result<usize, String> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v.trim().parse().map_err(|_| format!("{THREADS_ENV} must be a nonnegative integer, got `{v}`")),
    }
}

/// Runs the tool on `argv` (including the program name) and returns the
/// process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let threads = match thread_count() {
        Ok(n) => n,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {}: {e}", e.name());
            1
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}
