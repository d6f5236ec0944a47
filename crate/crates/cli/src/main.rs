//! Command-line driver: symmetric-function evaluation and identity checks,
//! flow runs with CSV diagnostics, the concentrating-family tables, and the
//! subcritical-exponent sweep.
//!
//! Exit codes: 0 success / converged; 1 a frozen tolerance was violated;
//! 2 usage or argument errors; 3 the flow hit its time horizon; 4 cone
//! violation (including inadmissible initial data); 5 step failure.

mod io;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use sigmaflow::experiments::{self, check_against_fixture};
use sigmaflow::flow::{
    self, DiagnosticsRow, DiagnosticsSink, DtPolicy, FlowConfig, FlowError, Scheme,
    TrajectoryStatus,
};
use sigmaflow::functionals;
use sigmaflow::grid::ConformalFactor;
use sigmaflow::sphere::{scalar_sigma1, schouten_eigs_from_hessian, sigma2_point, Convention};
use sigmaflow::symfunc::{
    in_gamma_plus, perturbed_hessian_form, quotient_f, quotient_hessian_form, sigma_k,
    EigenProfile, SymMatrix,
};

use io::{config_hash, fmt17, load_config_file, write_csv, Manifest};

#[derive(Parser)]
#[command(name = "sigmaflow", version, about = "sigma_2 curvature toolbox on the round sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Elementary symmetric functions and the quotient-operator identities
    Sigma {
        #[command(subcommand)]
        cmd: SigmaCmd,
    },
    /// The volume-normalized sigma_2 flow
    Flow {
        #[command(subcommand)]
        cmd: FlowCmd,
    },
    /// The explicit concentrating family and its asymptotics
    Family {
        #[command(subcommand)]
        cmd: FamilyCmd,
    },
    /// Flow sweeps over lists of subcritical exponents
    Sweep {
        #[command(subcommand)]
        cmd: SweepCmd,
    },
}

#[derive(Subcommand)]
enum SigmaCmd {
    /// Evaluate sigma_k on an eigenvalue list and report cone membership
    Eval {
        /// Comma-separated eigenvalues
        #[arg(long, allow_hyphen_values = true)]
        lambdas: String,
        #[arg(long)]
        k: usize,
    },
    /// Randomized check of the quotient Hessian identity and concavity
    CheckIdentity {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Absolute tolerance on closed-form vs finite differences
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
}

#[derive(Subcommand)]
enum FlowCmd {
    /// Integrate the flow and write trajectory + final-profile CSVs
    Run(FlowRunArgs),
}

#[derive(Subcommand)]
enum FamilyCmd {
    /// Tabulate the family integrals against their leading asymptotics
    Sweep(FamilySweepArgs),
}

#[derive(Subcommand)]
enum SweepCmd {
    /// Run the flow once per exponent and tabulate the normalized objective
    Eps(EpsSweepArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PresetKind {
    /// u = 0
    Round,
    /// u = amp * cos(2 theta), e^{+2u} convention
    Cos2,
    /// u = -ell * s^2, e^{+2u} convention
    EllFamily,
    /// values loaded from --profile
    File,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Euler,
    Heun,
    Rk4,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::Euler => Scheme::Euler,
            SchemeArg::Heun => Scheme::Heun,
            SchemeArg::Rk4 => Scheme::Rk4,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Fixed,
    AdaptiveHalving,
}

#[derive(Args)]
struct FlowRunArgs {
    #[arg(long, value_enum, default_value_t = PresetKind::Cos2)]
    preset: PresetKind,
    /// Amplitude for the cos2 preset
    #[arg(long)]
    amp: Option<f64>,
    /// Concentration parameter for the ell-family preset
    #[arg(long)]
    ell: Option<f64>,
    /// Tabulated initial profile (one u value per collocation node, or
    /// "theta,u" lines); interpreted in the e^{+2u} convention
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    /// Number of collocation nodes
    #[arg(long)]
    grid: Option<usize>,
    /// Gauss-Legendre order
    #[arg(long)]
    quad: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    max_time: Option<f64>,
    #[arg(long)]
    residual_tol: Option<f64>,
    #[arg(long)]
    conservation_tol: Option<f64>,
    #[arg(long)]
    sigma1_floor: Option<f64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, value_enum)]
    dt_policy: Option<PolicyArg>,
    /// Flat key=value defaults, overridden by flags
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Print a ready-to-use gnuplot command for the trajectory
    #[arg(long)]
    gnuplot_hint: bool,
}

#[derive(Args)]
struct FamilySweepArgs {
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Comma-separated increasing list of ell values (> 10)
    #[arg(long)]
    ells: String,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Parallelize independent family points
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct EpsSweepArgs {
    /// Comma-separated exponents in (0, 1)
    #[arg(long = "eps-list")]
    eps_list: String,
    #[arg(long, value_enum, default_value_t = PresetKind::Cos2)]
    preset: PresetKind,
    #[arg(long)]
    amp: Option<f64>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    quad: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    max_time: Option<f64>,
    #[arg(long)]
    residual_tol: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Parallelize the independent per-exponent runs
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Sigma { cmd } => match cmd {
            SigmaCmd::Eval { lambdas, k } => sigma_eval(&lambdas, k),
            SigmaCmd::CheckIdentity { n, trials, tol } => check_identity(n, trials, tol),
        },
        Command::Flow { cmd } => match cmd {
            FlowCmd::Run(args) => flow_run(args),
        },
        Command::Family { cmd } => match cmd {
            FamilyCmd::Sweep(args) => family_sweep(args),
        },
        Command::Sweep { cmd } => match cmd {
            SweepCmd::Eps(args) => eps_sweep_cmd(args),
        },
    }
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    if s.trim().is_empty() {
        return Err("empty list".into());
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad number {t:?}: {e}"))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// sigma

fn sigma_eval(lambdas: &str, k: usize) -> ExitCode {
    let vals = match parse_f64_list(lambdas) {
        Ok(v) => v,
        Err(e) => return usage_error(&e),
    };
    let profile = EigenProfile::expanded(vals);
    let value = match sigma_k(&profile, k) {
        Ok(v) => v,
        Err(e) => return usage_error(&e.to_string()),
    };
    println!("{value}");
    if k >= 1 {
        match in_gamma_plus(&profile, k) {
            Ok(label) => println!("Gamma_{k}+: {}", if label.member { "yes" } else { "no" }),
            Err(e) => return usage_error(&e.to_string()),
        }
    }
    ExitCode::SUCCESS
}

fn random_gamma1(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    loop {
        let mut w = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                w.set_sym(i, j, rng.random_range(-1.0..1.0));
            }
        }
        for i in 0..n {
            let v = w.get(i, i);
            w.set_sym(i, i, v + 1.0);
        }
        if w.sigma1() > 0.4 * n as f64 {
            return w;
        }
    }
}

fn random_unit_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    let mut r = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            r.set_sym(i, j, rng.random_range(-1.0..1.0));
        }
    }
    let mut norm = 0.0;
    for i in 0..n {
        for j in 0..n {
            norm += r.get(i, j) * r.get(i, j);
        }
    }
    let norm = norm.sqrt();
    for i in 0..n {
        for j in i..n {
            r.set_sym(i, j, r.get(i, j) / norm);
        }
    }
    r
}

fn check_identity(n: usize, trials: usize, tol: f64) -> ExitCode {
    if n < 2 {
        return usage_error("n must be at least 2");
    }
    let seed: u64 = std::env::var("SIGMAFLOW_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 3e-4;
    let mut max_fd_dev = 0.0f64;
    let mut max_concavity_excess = 0.0f64;
    let mut max_bound_excess = 0.0f64;
    for _ in 0..trials {
        let w = random_gamma1(&mut rng, n);
        let r = random_unit_sym(&mut rng, n);
        let closed = quotient_hessian_form(&w, &r).expect("W is in Gamma_1+");
        let fp = quotient_f(&w.axpy(1.0, &r, h), 0.0).expect("stays in Gamma_1+");
        let f0 = quotient_f(&w, 0.0).unwrap();
        let fm = quotient_f(&w.axpy(1.0, &r, -h), 0.0).expect("stays in Gamma_1+");
        let fd = (fp - 2.0 * f0 + fm) / (h * h);
        max_fd_dev = max_fd_dev.max((closed - fd).abs());
        max_concavity_excess = max_concavity_excess.max(closed);

        let nu = 0.5;
        let s1 = w.sigma1();
        let bound = -2.0 * nu * r.sigma1() * r.sigma1() / (s1 * s1 * s1);
        let pert = perturbed_hessian_form(&w, &r, nu).unwrap();
        max_bound_excess = max_bound_excess.max(pert - bound);
    }
    println!("trials = {trials}, n = {n}, seed = {seed}");
    println!("max |closed - finite difference| = {max_fd_dev:e}");
    println!("max concavity excess = {max_concavity_excess:e}");
    println!("max perturbed-bound excess = {max_bound_excess:e}");
    if max_fd_dev > tol || max_concavity_excess > 1e-12 || max_bound_excess > 1e-10 {
        println!("FAIL (tolerance {tol:e})");
        ExitCode::from(1)
    } else {
        println!("OK (tolerance {tol:e})");
        ExitCode::SUCCESS
    }
}

// ---------------------------------------------------------------------------
// parameter resolution: flag, then config file, then default

struct Resolver {
    map: BTreeMap<String, String>,
}

impl Resolver {
    fn new(config: Option<&PathBuf>) -> Result<Self, String> {
        let map = match config {
            Some(path) => load_config_file(path).map_err(|e| e.to_string())?,
            None => BTreeMap::new(),
        };
        Ok(Resolver { map })
    }

    fn get<T: std::str::FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.map.get(key) {
            Some(s) => s.parse().map_err(|e| format!("config key {key}: {e}")),
            None => Ok(default),
        }
    }

    fn get_opt<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.map.get(key) {
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|e| format!("config key {key}: {e}")),
            None => Ok(None),
        }
    }
}

struct ResolvedFlow {
    config: FlowConfig,
    preset: PresetKind,
    amp: f64,
    ell: f64,
    profile: Option<PathBuf>,
    entries: BTreeMap<String, String>,
}

#[allow(clippy::too_many_arguments)]
fn resolve_flow(
    cfg_file: Option<&PathBuf>,
    preset: PresetKind,
    amp: Option<f64>,
    ell: Option<f64>,
    profile: Option<PathBuf>,
    n: Option<usize>,
    eps: Option<f64>,
    grid: Option<usize>,
    quad: Option<usize>,
    dt: Option<f64>,
    max_time: Option<f64>,
    residual_tol: Option<f64>,
    conservation_tol: Option<f64>,
    sigma1_floor: Option<f64>,
    scheme: Option<SchemeArg>,
    dt_policy: Option<PolicyArg>,
) -> Result<ResolvedFlow, String> {
    let r = Resolver::new(cfg_file)?;
    let n = r.get(n, "n", 5)?;
    let eps = r.get(eps, "eps", 0.1)?;
    let grid = r.get(grid, "grid", 128)?;
    let quad = r.get(quad, "quad", functionals::DEFAULT_QUAD_ORDER)?;
    let dt = r.get_opt(dt, "dt")?;
    let max_time = r.get(max_time, "max_time", 50.0)?;
    let residual_tol = r.get(residual_tol, "residual_tol", 1e-6)?;
    let conservation_tol = r.get(conservation_tol, "conservation_tol", 1e-8)?;
    let sigma1_floor = r.get(sigma1_floor, "sigma1_floor", 0.0)?;
    let amp = r.get(amp, "amp", 0.2)?;
    let ell = r.get(ell, "ell", 1.0)?;

    let scheme = match scheme {
        Some(s) => s.into(),
        None => match r.map.get("scheme").map(String::as_str) {
            Some("euler") => Scheme::Euler,
            Some("heun") => Scheme::Heun,
            Some("rk4") | None => Scheme::Rk4,
            Some(other) => return Err(format!("config key scheme: unknown value {other:?}")),
        },
    };
    let dt_policy = match dt_policy {
        Some(PolicyArg::Fixed) => DtPolicy::Fixed,
        Some(PolicyArg::AdaptiveHalving) => DtPolicy::AdaptiveHalving,
        None => match r.map.get("dt_policy").map(String::as_str) {
            Some("fixed") => DtPolicy::Fixed,
            Some("adaptive-halving") | None => DtPolicy::AdaptiveHalving,
            Some(other) => return Err(format!("config key dt_policy: unknown value {other:?}")),
        },
    };

    let mut config = FlowConfig::new(n, eps).with_grid_size(grid);
    config.quad_order = quad;
    if let Some(dt) = dt {
        config.dt_init = dt;
    }
    config.max_time = max_time;
    config.residual_tol = residual_tol;
    config.conservation_tol = conservation_tol;
    config.sigma1_floor = sigma1_floor;
    config.scheme = scheme;
    config.dt_policy = dt_policy;

    let mut entries = BTreeMap::new();
    entries.insert("n".into(), n.to_string());
    entries.insert("eps".into(), fmt17(eps));
    entries.insert("grid".into(), grid.to_string());
    entries.insert("quad".into(), quad.to_string());
    entries.insert("dt".into(), fmt17(config.dt_init));
    entries.insert("max_time".into(), fmt17(max_time));
    entries.insert("residual_tol".into(), fmt17(residual_tol));
    entries.insert("conservation_tol".into(), fmt17(conservation_tol));
    entries.insert("sigma1_floor".into(), fmt17(sigma1_floor));
    entries.insert(
        "scheme".into(),
        match scheme {
            Scheme::Euler => "euler",
            Scheme::Heun => "heun",
            Scheme::Rk4 => "rk4",
        }
        .into(),
    );
    entries.insert(
        "dt_policy".into(),
        match dt_policy {
            DtPolicy::Fixed => "fixed",
            DtPolicy::AdaptiveHalving => "adaptive-halving",
        }
        .into(),
    );
    entries.insert(
        "preset".into(),
        match preset {
            PresetKind::Round => "round".into(),
            PresetKind::Cos2 => format!("cos2 amp={}", fmt17(amp)),
            PresetKind::EllFamily => format!("ell-family ell={}", fmt17(ell)),
            PresetKind::File => format!("file {}", profile.as_ref().map_or("?".into(), |p| p.display().to_string())),
        },
    );

    Ok(ResolvedFlow {
        config,
        preset,
        amp,
        ell,
        profile,
        entries,
    })
}

fn build_initial(res: &ResolvedFlow) -> Result<ConformalFactor, String> {
    let grid = res.config.build_grid().map_err(|e| e.to_string())?;
    match res.preset {
        PresetKind::Round => Ok(ConformalFactor::round(grid)),
        PresetKind::Cos2 => Ok(ConformalFactor::preset_cos2(grid, res.amp)),
        PresetKind::EllFamily => Ok(ConformalFactor::preset_ell_family(grid, res.ell)),
        PresetKind::File => {
            let path = res
                .profile
                .as_ref()
                .ok_or("--preset file requires --profile")?;
            let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
            let mut values = Vec::new();
            for line in text.lines() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() || line.starts_with("theta") {
                    continue;
                }
                let fields: Vec<&str> = line
                    .split([',', ' ', '\t'])
                    .filter(|f| !f.is_empty())
                    .collect();
                let last = match fields.as_slice() {
                    [u] | [_, u] => *u,
                    _ => return Err(format!("profile lines must be 'u' or 'theta,u', got {line:?}")),
                };
                values.push(
                    last.parse::<f64>()
                        .map_err(|e| format!("bad profile value {last:?}: {e}"))?,
                );
            }
            ConformalFactor::from_values(grid, values, Convention::PlusTwoU)
                .map_err(|e| e.to_string())
        }
    }
}

// ---------------------------------------------------------------------------
// flow run

struct CsvRowSink {
    lines: Vec<String>,
}

impl DiagnosticsSink for CsvRowSink {
    fn record(&mut self, row: &DiagnosticsRow) {
        self.lines.push(
            [
                row.time,
                row.dt,
                row.f2,
                row.f0_eps,
                row.r_eps,
                row.s_eps,
                row.min_sigma1,
                row.min_sigma2,
                row.residual,
            ]
            .iter()
            .map(|x| fmt17(*x))
            .collect::<Vec<_>>()
            .join(","),
        );
    }
}

const TRAJECTORY_HEADER: [&str; 9] = [
    "time", "dt", "F2", "F0eps", "r_eps", "s_eps", "min_sigma1", "min_sigma2", "residual",
];

fn flow_run(args: FlowRunArgs) -> ExitCode {
    let res = match resolve_flow(
        args.config.as_ref(),
        args.preset,
        args.amp,
        args.ell,
        args.profile.clone(),
        args.n,
        args.eps,
        args.grid,
        args.quad,
        args.dt,
        args.max_time,
        args.residual_tol,
        args.conservation_tol,
        args.sigma1_floor,
        args.scheme,
        args.dt_policy,
    ) {
        Ok(r) => r,
        Err(e) => return usage_error(&e),
    };
    let u0 = match build_initial(&res) {
        Ok(u) => u,
        Err(e) => return usage_error(&e),
    };
    let hash = config_hash(&res.entries);
    if let Err(e) = std::fs::create_dir_all(&args.out_dir) {
        return usage_error(&format!("cannot create {}: {e}", args.out_dir.display()));
    }

    let mut sink = CsvRowSink { lines: Vec::new() };
    let traj = match flow::run(&res.config, &u0, &mut sink) {
        Ok(t) => t,
        Err(FlowError::InitialDataOutsideCone { s, sigma1 }) => {
            eprintln!("initial data outside C_1: min sigma_1 = {sigma1:e} at s = {s:.4}");
            return ExitCode::from(4);
        }
        Err(e) => return usage_error(&e.to_string()),
    };

    let mut manifest = Manifest::new(command_line(), hash.clone());
    let traj_path = args.out_dir.join("trajectory.csv");
    if let Err(e) = write_csv(
        &traj_path,
        &hash,
        &TRAJECTORY_HEADER,
        sink.lines.into_iter().map(|l| vec![l]),
    ) {
        return usage_error(&format!("write {}: {e}", traj_path.display()));
    }
    manifest.add_output(traj_path);

    let profile_path = args.out_dir.join("final_profile.csv");
    if let Err(e) = write_final_profile(&profile_path, &hash, &traj.final_state.u) {
        return usage_error(&format!("write {}: {e}", profile_path.display()));
    }
    manifest.add_output(profile_path);
    if let Err(e) = manifest.write(&args.out_dir) {
        return usage_error(&format!("write manifest: {e}"));
    }

    let last = traj.rows.last().expect("at least one row");
    println!(
        "status: {:?}  time: {:.6}  steps: {}  residual: {:e}",
        traj.status,
        last.time,
        traj.rows.len() - 1,
        last.residual
    );
    println!(
        "F2: {}  r_eps: {}  s_eps: {:e}  min_sigma2: {:e}",
        last.f2, last.r_eps, last.s_eps, last.min_sigma2
    );
    println!("F0_eps drift: {:e}  min sigma_1 over run: {:e}", traj.f0_drift, traj.min_sigma1_over_run);
    if args.gnuplot_hint {
        println!(
            "gnuplot -e \"set datafile separator ','; plot '{}' skip 2 using 1:3 with lines title 'F2'\"",
            args.out_dir.join("trajectory.csv").display()
        );
    }

    match traj.status {
        TrajectoryStatus::Converged => ExitCode::SUCCESS,
        TrajectoryStatus::MaxTimeReached => ExitCode::from(3),
        TrajectoryStatus::ConeViolation { s, min_sigma1 } => {
            eprintln!("cone violation: min sigma_1 = {min_sigma1:e} at s = {s:.4}");
            ExitCode::from(4)
        }
        TrajectoryStatus::StepFailure { dt } => {
            eprintln!("step failure at dt = {dt:e}");
            ExitCode::from(5)
        }
    }
}

/// Final profile at the collocation nodes, with s-derivatives and pointwise
/// eigenvalues of the `e^{-2u}` factor.
fn write_final_profile(path: &Path, hash: &str, u: &ConformalFactor) -> std::io::Result<()> {
    let grid = u.grid().clone();
    let values = u.minus_two_u_values();
    let (u_t, u_tt) = grid.collocation_derivatives(&values);
    let n = grid.dim_n();
    let rows = (0..values.len()).map(|j| {
        let theta = grid.theta()[j];
        let s = grid.s_collocation()[j];
        let sin = theta.sin();
        let cot = grid.cot_collocation()[j];
        let du = -u_t[j] / sin;
        let d2u = (u_tt[j] - cot * u_t[j]) / (sin * sin);
        let eigs = schouten_eigs_from_hessian(
            u_tt[j],
            cot * u_t[j],
            u_t[j] * u_t[j],
            Convention::MinusTwoU,
        );
        vec![
            fmt17(theta),
            fmt17(s),
            fmt17(values[j]),
            fmt17(du),
            fmt17(d2u),
            fmt17(eigs.lambda_r),
            fmt17(eigs.lambda_t),
            fmt17(scalar_sigma1(&eigs, n)),
            fmt17(sigma2_point(&eigs, n)),
        ]
    });
    write_csv(
        path,
        hash,
        &["theta", "s", "u", "du", "d2u", "lambda_r", "lambda_t", "sigma1", "sigma2"],
        rows,
    )
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------------------
// family sweep

fn family_sweep(args: FamilySweepArgs) -> ExitCode {
    if args.n < 5 {
        return usage_error("requires n >= 5");
    }
    let ells = match parse_f64_list(&args.ells) {
        Ok(v) => v,
        Err(e) => return usage_error(&e),
    };
    let jobs = args.jobs.max(1);

    // validate the whole sequence up front, then compute the independent
    // points (optionally in bounded waves of threads), keeping input order
    if ells.is_empty() || ells.windows(2).any(|w| w[1] <= w[0]) || ells.iter().any(|&l| l <= 10.0)
    {
        return usage_error("ell values must be strictly increasing and all > 10");
    }
    let rows: Vec<experiments::RatioRow> = if jobs == 1 {
        match experiments::asymptotic_ratios(&ells, args.n) {
            Ok(rows) => rows,
            Err(e) => return usage_error(&e.to_string()),
        }
    } else {
        let mut results: Vec<Option<Result<experiments::RatioRow, experiments::ExperimentError>>> =
            (0..ells.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut pending = results.iter_mut().zip(ells.iter()).peekable();
            while pending.peek().is_some() {
                let wave: Vec<_> = pending.by_ref().take(jobs).collect();
                let mut handles = Vec::new();
                for (slot, &ell) in wave {
                    let n = args.n;
                    handles.push(scope.spawn(move || {
                        (slot, experiments::asymptotic_ratios(&[ell], n).map(|mut v| v.pop().expect("one row")))
                    }));
                }
                for h in handles {
                    let (slot, row) = h.join().expect("family worker panicked");
                    *slot = Some(row);
                }
            }
        });
        let mut rows = Vec::with_capacity(ells.len());
        for r in results {
            match r.expect("all slots filled") {
                Ok(row) => rows.push(row),
                Err(e) => return usage_error(&e.to_string()),
            }
        }
        rows
    };

    let mut entries = BTreeMap::new();
    entries.insert("n".into(), args.n.to_string());
    entries.insert(
        "ells".into(),
        ells.iter().map(|l| fmt17(*l)).collect::<Vec<_>>().join(","),
    );
    let hash = config_hash(&entries);
    if let Err(e) = std::fs::create_dir_all(&args.out_dir) {
        return usage_error(&format!("cannot create {}: {e}", args.out_dir.display()));
    }
    let path = args.out_dir.join("family.csv");
    let csv_rows = rows.iter().map(|r| {
        vec![
            fmt17(r.ell),
            fmt17(r.f2),
            fmt17(r.vol),
            fmt17(r.total_scalar),
            fmt17(r.f2_ratio),
            fmt17(r.vol_ratio),
            fmt17(r.scalar_ratio),
            fmt17(r.quotient_vol),
            fmt17(r.quotient_scalar),
        ]
    });
    if let Err(e) = write_csv(
        &path,
        &hash,
        &[
            "ell",
            "F2",
            "vol",
            "total_scalar",
            "F2_ratio",
            "vol_ratio",
            "scalar_ratio",
            "quotient_vol",
            "quotient_scalar",
        ],
        csv_rows,
    ) {
        return usage_error(&format!("write {}: {e}", path.display()));
    }
    let mut manifest = Manifest::new(command_line(), hash);
    manifest.add_output(path);
    if let Err(e) = manifest.write(&args.out_dir) {
        return usage_error(&format!("write manifest: {e}"));
    }

    let mut ok = true;
    for row in &rows {
        match check_against_fixture(row, args.n) {
            Some(true) => println!(
                "ell = {:>10}: F2 ratio {:.6}, vol ratio {:.6}, scalar ratio {:.6}  [ok]",
                row.ell, row.f2_ratio, row.vol_ratio, row.scalar_ratio
            ),
            Some(false) => {
                ok = false;
                println!(
                    "ell = {:>10}: F2 ratio {:.6}, vol ratio {:.6}, scalar ratio {:.6}  [FROZEN TOLERANCE VIOLATED]",
                    row.ell, row.f2_ratio, row.vol_ratio, row.scalar_ratio
                );
            }
            None => println!(
                "ell = {:>10}: F2 ratio {:.6}, vol ratio {:.6}, scalar ratio {:.6}",
                row.ell, row.f2_ratio, row.vol_ratio, row.scalar_ratio
            ),
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

// ---------------------------------------------------------------------------
// eps sweep

fn eps_sweep_cmd(args: EpsSweepArgs) -> ExitCode {
    let eps_list = match parse_f64_list(&args.eps_list) {
        Ok(v) => v,
        Err(e) => return usage_error(&e),
    };
    let res = match resolve_flow(
        args.config.as_ref(),
        args.preset,
        args.amp,
        args.ell,
        args.profile.clone(),
        args.n,
        eps_list.first().copied(),
        args.grid,
        args.quad,
        args.dt,
        args.max_time,
        args.residual_tol,
        None,
        None,
        None,
        None,
    ) {
        Ok(r) => r,
        Err(e) => return usage_error(&e),
    };
    let u0 = match build_initial(&res) {
        Ok(u) => u,
        Err(e) => return usage_error(&e),
    };

    let jobs = args.jobs.max(1);
    let sweep_result = if jobs == 1 {
        experiments::eps_sweep(&res.config, &u0, &eps_list)
    } else {
        // independent runs, assembled in input order
        let mut slots: Vec<Option<Result<_, _>>> = (0..eps_list.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut pending = slots.iter_mut().zip(eps_list.iter()).peekable();
            while pending.peek().is_some() {
                let wave: Vec<_> = pending.by_ref().take(jobs).collect();
                let mut handles = Vec::new();
                for (slot, &eps) in wave {
                    let config = &res.config;
                    let u0 = &u0;
                    handles.push(scope.spawn(move || {
                        (slot, experiments::eps_sweep(config, u0, &[eps]))
                    }));
                }
                for h in handles {
                    let (slot, rows) = h.join().expect("sweep worker panicked");
                    *slot = Some(rows);
                }
            }
        });
        slots
            .into_iter()
            .map(|r| r.expect("filled").map(|mut v| v.pop().expect("one row")))
            .collect::<Result<Vec<_>, _>>()
    };
    let rows = match sweep_result {
        Ok(rows) => rows,
        Err(experiments::ExperimentError::Flow(FlowError::InitialDataOutsideCone {
            s,
            sigma1,
        })) => {
            eprintln!("initial data outside C_1: min sigma_1 = {sigma1:e} at s = {s:.4}");
            return ExitCode::from(4);
        }
        Err(e) => return usage_error(&e.to_string()),
    };

    let mut entries = res.entries.clone();
    entries.insert(
        "eps_list".into(),
        eps_list.iter().map(|e| fmt17(*e)).collect::<Vec<_>>().join(","),
    );
    let hash = config_hash(&entries);
    if let Err(e) = std::fs::create_dir_all(&args.out_dir) {
        return usage_error(&format!("cannot create {}: {e}", args.out_dir.display()));
    }
    let path = args.out_dir.join("eps_sweep.csv");
    let csv_rows = rows.iter().map(|r| {
        vec![
            fmt17(r.eps),
            format!("{:?}", status_tag(&r.status)).to_lowercase(),
            fmt17(r.f2),
            fmt17(r.f0_eps),
            fmt17(r.r_eps),
            fmt17(r.s_eps),
            fmt17(r.tilde_f2_eps),
            fmt17(r.holder_bound),
            fmt17(r.residual),
        ]
    });
    if let Err(e) = write_csv(
        &path,
        &hash,
        &[
            "eps",
            "status",
            "F2",
            "F0eps",
            "r_eps",
            "s_eps",
            "tildeF2eps",
            "holder_lower_bound",
            "residual",
        ],
        csv_rows,
    ) {
        return usage_error(&format!("write {}: {e}", path.display()));
    }
    let mut manifest = Manifest::new(command_line(), hash);
    manifest.add_output(path);
    if let Err(e) = manifest.write(&args.out_dir) {
        return usage_error(&format!("write manifest: {e}"));
    }

    for r in &rows {
        println!(
            "eps = {:<6} {:<14} tildeF2eps = {}  (holder bound {})",
            r.eps,
            format!("{:?}", status_tag(&r.status)).to_lowercase(),
            r.tilde_f2_eps,
            r.holder_bound
        );
    }
    ExitCode::SUCCESS
}

#[derive(Debug)]
enum StatusTag {
    Converged,
    MaxTime,
    Cone,
    StepFail,
}

fn status_tag(s: &TrajectoryStatus) -> StatusTag {
    match s {
        TrajectoryStatus::Converged => StatusTag::Converged,
        TrajectoryStatus::MaxTimeReached => StatusTag::MaxTime,
        TrajectoryStatus::ConeViolation { .. } => StatusTag::Cone,
        TrajectoryStatus::StepFailure { .. } => StatusTag::StepFail,
    }
}
