//! Command-line front-end: locked-state solving, spectral stability,
//! coupling sweeps, mean-field and finite-ensemble simulation, and the
//! two-Lorentzian branch diagrams, emitted as CSV or JSON.

use std::fmt::Write as _;
use std::io::Write as _;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kd_core::bicauchy::{
    bifurcation_diagram, branch_is_stable, fold, oa_fixed_point, oa_integrate, perturbed,
    psi_map, solve_branches, BranchLabel,
};
use kd_core::dist::FrequencyDistribution;
use kd_core::error::KdError;
use kd_core::finiten::{OscillatorEnsemble, Sampling};
use kd_core::meanfield::{relaxation_experiment, NormParams, Perturbation, SimConfig};
use kd_core::pls::solve_rs;
use kd_core::spectral::SpectralProblem;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "kd", version, about = "Kuramoto locked-state toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the self-consistency equation for the locked-state order parameter.
    Pls(PlsArgs),
    /// Zero-count stability verdict for the locked state at one coupling.
    Stability(StabilityArgs),
    /// Sweep the order parameter (optionally with verdicts) over a coupling range.
    Sweep(SweepArgs),
    /// Mean-field relaxation experiment around a locked state.
    Simulate(SimulateArgs),
    /// Finite ensemble initialized on the locked-state law.
    FiniteN(FiniteNArgs),
    /// Branch diagram for the two-Lorentzian frequency density.
    Bicauchy(BicauchyArgs),
    /// Reduced four-dimensional order-parameter dynamics near a branch.
    OaSim(OaSimArgs),
    /// Geometric-decay certificate: contraction factor and weighted mode norms.
    Norms(NormsArgs),
}

#[derive(Args, serde::Serialize)]
struct OutputOpts {
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args, serde::Serialize)]
struct PlsArgs {
    /// Frequency density, e.g. cauchy:delta=1, gaussian:sigma=1, bicauchy:delta=1,omega0=2.
    #[arg(long)]
    dist: String,
    #[arg(long = "K")]
    k: f64,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args, serde::Serialize)]
struct StabilityArgs {
    #[arg(long)]
    dist: String,
    #[arg(long = "K")]
    k: f64,
    /// Contour offset from the imaginary axis.
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    /// Branch index, largest order parameter first.
    #[arg(long, default_value_t = 0)]
    branch: usize,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args, serde::Serialize)]
struct SweepArgs {
    #[arg(long)]
    dist: String,
    /// Inclusive coupling range lo:hi:step.
    #[arg(long = "K-range")]
    k_range: String,
    /// Also run the (slow) zero-count verdict at every coupling.
    #[arg(long, default_value_t = false)]
    with_stability: bool,
    /// Worker threads (capped by KD_THREADS).
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args, serde::Serialize)]
struct SimulateArgs {
    #[arg(long)]
    dist: String,
    #[arg(long = "K")]
    k: f64,
    /// Perturbation spec: rotate:0.05, dilate:0.02, or bump:eps=..,tau0=..,width=..
    #[arg(long)]
    perturb: String,
    /// Exponential weight rate of the comparison norm.
    #[arg(long, default_value_t = 0.25)]
    a: f64,
    #[arg(long, default_value_t = 0.02)]
    dtau: f64,
    #[arg(long, default_value_t = -30.0, allow_hyphen_values = true)]
    tau_min: f64,
    #[arg(long, default_value_t = 30.0, allow_hyphen_values = true)]
    tau_max: f64,
    #[arg(long, default_value_t = 60.0)]
    tend: f64,
    /// Sampling stride in time steps.
    #[arg(long, default_value_t = 50)]
    record_every: usize,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args, serde::Serialize)]
struct FiniteNArgs {
    #[arg(long)]
    dist: String,
    #[arg(long = "K")]
    k: f64,
    #[arg(long = "N")]
    n: usize,
    /// RNG seed (mandatory: runs are stochastic).
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 100.0)]
    tend: f64,
    /// Time step; defaults to 0.01/max(1, K).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 10)]
    record_every: usize,
    /// Phase noise applied on top of the locked-state law.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Start of the window over which the sup deviation is reported.
    #[arg(long, default_value_t = 20.0)]
    window_start: f64,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args, serde::Serialize)]
struct BicauchyArgs {
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 2.0)]
    omega0: f64,
    /// Inclusive coupling range lo:hi:step.
    #[arg(long = "K-range")]
    k_range: String,
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args, serde::Serialize)]
struct OaSimArgs {
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 2.0)]
    omega0: f64,
    #[arg(long = "K")]
    k: f64,
    /// Which branch's circle the run starts on: plus or minus.
    #[arg(long)]
    branch: String,
    /// Perturbation amplitude applied to the circle point.
    #[arg(long, default_value_t = 1e-3)]
    perturb: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 200.0)]
    tend: f64,
    /// Time step; defaults to 0.01/max(1, K).
    #[arg(long)]
    dt: Option<f64>,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args, serde::Serialize)]
struct NormsArgs {
    #[arg(long)]
    dist: String,
    #[arg(long = "K")]
    k: f64,
    #[arg(long, default_value_t = 0.25)]
    a: f64,
    #[arg(long, default_value_t = 64)]
    l_max: usize,
    #[command(flatten)]
    output: OutputOpts,
}

enum CliError {
    Usage(String),
    Numerical(KdError),
}

impl From<KdError> for CliError {
    fn from(e: KdError) -> Self {
        match e {
            KdError::Config(msg) => CliError::Usage(msg),
            other => CliError::Numerical(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

type CliResult = Result<(), CliError>;

fn error_kind(e: &KdError) -> &'static str {
    match e {
        KdError::PoleHit { .. } => "PoleHit",
        KdError::DegenerateDensity => "DegenerateDensity",
        KdError::UpperHalfPlane { .. } => "UpperHalfPlane",
        KdError::OutOfRange { .. } => "OutOfRange",
        KdError::NoSolution => "NoSolution",
        KdError::WeightTooLarge { .. } => "WeightTooLarge",
        KdError::AxisTooClose { .. } => "AxisTooClose",
        KdError::ContourTooClose { .. } => "ContourTooClose",
        KdError::NonConvergent { .. } => "NonConvergent",
        KdError::NotEven => "NotEven",
        KdError::NotBimodal => "NotBimodal",
        KdError::NoBranch => "NoBranch",
        KdError::DivergenceDetected => "DivergenceDetected",
        KdError::Config(_) => "Config",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Pls(a) => run_pls(a),
        Command::Stability(a) => run_stability(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Simulate(a) => run_simulate(a),
        Command::FiniteN(a) => run_finite_n(a),
        Command::Bicauchy(a) => run_bicauchy(a),
        Command::OaSim(a) => run_oa_sim(a),
        Command::Norms(a) => run_norms(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(e)) => {
            let body = serde_json::json!({
                "error": { "kind": error_kind(&e), "message": e.to_string() }
            });
            eprintln!("{body}");
            ExitCode::from(3)
        }
    }
}

// ---------------------------------------------------------------- plumbing

/// "name:key=val,key=val" → distribution. Parameters are mandatory so a
/// config line reads back unambiguously.
fn parse_dist(spec: &str) -> Result<FrequencyDistribution, CliError> {
    let (name, params) = spec.split_once(':').unwrap_or((spec, ""));
    let mut map = std::collections::BTreeMap::new();
    for pair in params.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("malformed distribution parameter '{pair}'")))?;
        let v: f64 = v
            .parse()
            .map_err(|_| CliError::Usage(format!("non-numeric value in '{pair}'")))?;
        map.insert(k.to_string(), v);
    }
    let get = |key: &str| {
        map.get(key)
            .copied()
            .ok_or_else(|| CliError::Usage(format!("distribution '{name}' needs parameter '{key}'")))
    };
    let d = match name {
        "cauchy" => FrequencyDistribution::cauchy(get("delta")?),
        "gaussian" => FrequencyDistribution::gaussian(get("sigma")?),
        "bicauchy" => FrequencyDistribution::bicauchy(get("delta")?, get("omega0")?),
        other => {
            return Err(CliError::Usage(format!(
                "unknown distribution '{other}' (expected cauchy, gaussian, or bicauchy)"
            )))
        }
    };
    d.validate()?;
    Ok(d)
}

/// Inclusive "lo:hi:step" grid.
fn parse_range(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, step] = parts[..] else {
        return Err(CliError::Usage(format!("range '{spec}' is not lo:hi:step")));
    };
    let (lo, hi, step): (f64, f64, f64) = match (lo.parse(), hi.parse(), step.parse()) {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        _ => return Err(CliError::Usage(format!("non-numeric bound in range '{spec}'"))),
    };
    if !(step > 0.0 && hi >= lo) {
        return Err(CliError::Usage(format!("empty or descending range '{spec}'")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + step * i as f64).collect())
}

/// 17-significant-digit scientific notation: round-trips exactly in f64.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt17_opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

/// FNV-1a over the canonical JSON of the resolved arguments.
fn config_hash<T: serde::Serialize>(cfg: &T) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in json.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

fn write_output(path: &Option<std::path::PathBuf>, body: &str) -> CliResult {
    match path {
        Some(p) => std::fs::write(p, body)?,
        None => std::io::stdout().write_all(body.as_bytes())?,
    }
    Ok(())
}

/// Wraps a payload with the resolved config, its hash, and the library
/// version, then pretty-prints deterministically.
fn emit_json<C: serde::Serialize>(
    out: &Option<std::path::PathBuf>,
    cfg: &C,
    payload: serde_json::Value,
) -> CliResult {
    let doc = serde_json::json!({
        "version": VERSION,
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "config_hash": config_hash(cfg),
        "result": payload,
    });
    let mut body = serde_json::to_string_pretty(&doc).expect("document serializes");
    body.push('\n');
    write_output(out, &body)
}

fn csv_header<C: serde::Serialize>(cfg: &C, columns: &str) -> String {
    format!(
        "# kd {VERSION} config-hash={}\n# units: time and tau in 1/[omega], couplings in [omega]; other columns dimensionless\n{columns}\n",
        config_hash(cfg)
    )
}

/// Worker count: explicit flag, then the KD_THREADS cap, then one core.
fn thread_budget(flag: Option<usize>) -> usize {
    let env_cap = std::env::var("KD_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok());
    let hw = std::thread::available_parallelism().map_or(1, |n| n.get());
    let n = flag.unwrap_or_else(|| env_cap.unwrap_or(hw));
    n.min(env_cap.unwrap_or(usize::MAX)).max(1)
}

/// Order-preserving parallel map over an index range.
fn par_map<U: Send>(n: usize, threads: usize, f: impl Fn(usize) -> U + Sync) -> Vec<U> {
    let slots: Vec<std::sync::Mutex<Option<U>>> =
        (0..n).map(|_| std::sync::Mutex::new(None)).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads.min(n).max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n {
                    break;
                }
                *slots[i].lock().unwrap() = Some(f(i));
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("worker filled slot"))
        .collect()
}

// ------------------------------------------------------------- subcommands

fn run_pls(args: PlsArgs) -> CliResult {
    let d = parse_dist(&args.dist)?;
    let states = solve_rs(&d, args.k, None)?;
    let payload = serde_json::json!({
        "k_c": d.critical_coupling()?,
        "r_s": states[0].r_s,
        "states": states,
    });
    emit_json(&args.output.out, &args, payload)
}

fn run_stability(args: StabilityArgs) -> CliResult {
    let d = parse_dist(&args.dist)?;
    let states = solve_rs(&d, args.k, None)?;
    let state = states
        .get(args.branch)
        .ok_or_else(|| CliError::Usage(format!("branch {} of {} solved", args.branch, states.len())))?
        .clone();
    let report = SpectralProblem::new(state).with_delta(args.delta).stability_verdict();
    emit_json(&args.output.out, &args, serde_json::to_value(&report).expect("report serializes"))
}

fn run_sweep(args: SweepArgs) -> CliResult {
    let d = parse_dist(&args.dist)?;
    let ks = parse_range(&args.k_range)?;
    let threads = thread_budget(args.threads);
    let rows = par_map(ks.len(), threads, |i| {
        let k = ks[i];
        let state = match solve_rs(&d, k, None) {
            Ok(states) => states.into_iter().next(),
            Err(_) => None,
        };
        let verdict = state.as_ref().filter(|_| args.with_stability).map(|s| {
            format!("{:?}", SpectralProblem::new(s.clone()).stability_verdict().verdict)
        });
        (k, state.map(|s| s.r_s), verdict)
    });
    let mut body = csv_header(&args, "k,r_s,verdict");
    for (k, r_s, verdict) in rows {
        let _ = writeln!(body, "{},{},{}", fmt17(k), fmt17_opt(r_s), verdict.unwrap_or_default());
    }
    write_output(&args.output.out, &body)
}

fn parse_perturbation(spec: &str) -> Result<Perturbation, CliError> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let scalar = || {
        rest.parse::<f64>()
            .map_err(|_| CliError::Usage(format!("perturbation '{name}' needs a numeric size")))
    };
    match name {
        "rotate" => Ok(Perturbation::Rotate(scalar()?)),
        "dilate" => Ok(Perturbation::Dilate(scalar()?)),
        "bump" => {
            let mut eps = None;
            let mut tau0 = None;
            let mut width = None;
            for pair in rest.split(',').filter(|p| !p.is_empty()) {
                let (k, v) = pair
                    .split_once('=')
                    .ok_or_else(|| CliError::Usage(format!("malformed bump parameter '{pair}'")))?;
                let v: f64 = v
                    .parse()
                    .map_err(|_| CliError::Usage(format!("non-numeric value in '{pair}'")))?;
                match k {
                    "eps" => eps = Some(v),
                    "tau0" => tau0 = Some(v),
                    "width" => width = Some(v),
                    other => return Err(CliError::Usage(format!("unknown bump parameter '{other}'"))),
                }
            }
            match (eps, tau0, width) {
                (Some(eps), Some(tau0), Some(width)) => Ok(Perturbation::Bump { eps, tau0, width }),
                _ => Err(CliError::Usage("bump needs eps=..,tau0=..,width=..".into())),
            }
        }
        other => Err(CliError::Usage(format!(
            "unknown perturbation '{other}' (expected rotate, dilate, or bump)"
        ))),
    }
}

fn run_simulate(args: SimulateArgs) -> CliResult {
    let d = parse_dist(&args.dist)?;
    let perturbation = parse_perturbation(&args.perturb)?;
    let state = solve_rs(&d, args.k, None)?.remove(0);
    let mut cfg = SimConfig::new(d, args.k);
    cfg.dtau = args.dtau;
    cfg.tau_min = args.tau_min;
    cfg.tau_max = args.tau_max;
    cfg.t_end = args.tend;
    cfg.record_every = args.record_every;
    cfg.validate()?;
    let res = relaxation_experiment(&state, perturbation, &cfg, NormParams::new(args.a, 0.0))?;

    let mut body = csv_header(&args, "t,dist_a0,re_r,im_r,theta_star");
    for s in &res.samples {
        let _ = writeln!(
            body,
            "{},{},{},{},{}",
            fmt17(s.t),
            fmt17(s.distance),
            fmt17(s.r.re),
            fmt17(s.r.im),
            fmt17(s.theta_star)
        );
    }
    write_output(&args.output.out, &body)?;
    if args.output.out.is_some() {
        let summary = serde_json::json!({
            "r_s": state.r_s,
            "rate": res.rate,
            "r_squared": res.r_squared,
            "theta_inf": res.theta_inf,
            "cutoff_warnings": res.cutoff_warnings,
        });
        emit_json(&None, &args, summary)?;
    }
    Ok(())
}

fn run_finite_n(args: FiniteNArgs) -> CliResult {
    let d = parse_dist(&args.dist)?;
    let state = solve_rs(&d, args.k, None)?.remove(0);
    let dt = args.dt.unwrap_or(0.01 / args.k.abs().max(1.0));
    let mut ens = OscillatorEnsemble::new(&d, args.k, args.n, Sampling::IidSample(args.seed))?;
    ens.init_locked_state(state.r_s, args.seed, args.noise);
    let traj = ens.integrate(args.tend, dt, args.record_every)?;

    let mut body = csv_header(&args, "t,abs_z,arg_z");
    for (t, z) in &traj {
        let _ = writeln!(body, "{},{},{}", fmt17(*t), fmt17(z.norm()), fmt17(z.arg()));
    }
    write_output(&args.output.out, &body)?;
    if args.output.out.is_some() {
        let deviation = traj
            .iter()
            .filter(|(t, _)| *t >= args.window_start)
            .map(|(_, z)| (z.norm() - state.r_s).abs())
            .fold(0.0_f64, f64::max);
        let summary = serde_json::json!({ "r_s": state.r_s, "deviation": deviation });
        emit_json(&None, &args, summary)?;
    }
    Ok(())
}

fn run_bicauchy(args: BicauchyArgs) -> CliResult {
    let ks = parse_range(&args.k_range)?;
    let (x_fold, k_fold) = fold(args.delta, args.omega0)?;
    let threads = thread_budget(args.threads);
    let rows = par_map(ks.len(), threads, |i| {
        bifurcation_diagram(args.delta, args.omega0, &ks[i..=i]).map(|mut v| v.remove(0))
    });
    let verdict = |stable: Option<bool>| match stable {
        Some(true) => "Stable",
        Some(false) => "Unstable",
        None => "",
    };
    let landmarks = format!(
        "# k_fold={} x_fold={} k_c={}\nk,rho_minus,rho_plus,r_minus,r_plus,verdict_minus,verdict_plus",
        fmt17(k_fold),
        fmt17(x_fold),
        fmt17(psi_map(args.delta, args.omega0, 0.0))
    );
    let mut body = csv_header(&args, &landmarks);
    for row in rows {
        let row = row?;
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{}",
            fmt17(row.k),
            fmt17_opt(row.rho_minus),
            fmt17_opt(row.rho_plus),
            fmt17_opt(row.r_minus),
            fmt17_opt(row.r_plus),
            verdict(row.minus_stable),
            verdict(row.plus_stable),
        );
    }
    write_output(&args.output.out, &body)
}

fn run_oa_sim(args: OaSimArgs) -> CliResult {
    let label = match args.branch.as_str() {
        "plus" => BranchLabel::Plus,
        "minus" => BranchLabel::Minus,
        other => return Err(CliError::Usage(format!("branch must be plus or minus, got '{other}'"))),
    };
    let branches = solve_branches(args.delta, args.omega0, args.k)?;
    let branch = branches
        .iter()
        .find(|b| b.label == label)
        .ok_or(KdError::NoBranch)?;
    let fixed = oa_fixed_point(branch, 0.0)?;
    let start = perturbed(&fixed, args.perturb, args.seed);
    let dt = args.dt.unwrap_or(0.01 / args.k.abs().max(1.0));
    let (traj, outcome) = oa_integrate(start, args.delta, args.omega0, args.k, args.tend, dt)?;

    let mut body = csv_header(&args, "t,re_z1,im_z1,re_z2,im_z2,circle_dist");
    for (t, s) in &traj {
        let _ = writeln!(
            body,
            "{},{},{},{},{},{}",
            fmt17(*t),
            fmt17(s.z1.re),
            fmt17(s.z1.im),
            fmt17(s.z2.re),
            fmt17(s.z2.im),
            fmt17(s.circle_distance(&fixed)),
        );
    }
    write_output(&args.output.out, &body)?;
    if args.output.out.is_some() {
        let summary = serde_json::json!({
            "branch": branch,
            "stable": branch_is_stable(branch),
            "outcome": outcome,
            "final_circle_dist": traj.last().map(|(_, s)| s.circle_distance(&fixed)),
        });
        emit_json(&None, &args, summary)?;
    }
    Ok(())
}

fn run_norms(args: NormsArgs) -> CliResult {
    let d = parse_dist(&args.dist)?;
    let state = solve_rs(&d, args.k, None)?.remove(0);
    let cert = state.decay_certificate(args.a, args.l_max)?;
    let payload = serde_json::json!({
        "r_s": state.r_s,
        "certificate": cert,
    });
    emit_json(&args.output.out, &args, payload)
}
