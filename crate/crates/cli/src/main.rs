use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vieq::fault::Fault;
use vieq::ode::{self, HighResVariant, Integrator, ScalingFunctions};
use vieq::optimize::{run_agd, run_gd, run_pgd, run_subgradient, PgdConfig};
use vieq::registry::{self, Instance};
use vieq::sample::{run_ula_with_fault, run_underdamped, SampleTrace};
use vieq::suite::{run_suite, Suite};
use vieq::vi::{run_eg_with_fault, run_forward, run_lookahead, run_ogda, run_ppm, LookaheadConfig, ResolventBackend};
use vieq::{ConstraintSet, Error, Metric, Point, RunTrace, ScalarProblem};

mod config;
mod output;
mod plot;

const ALGORITHMS: &[&str] = &["agd", "eg", "forward", "gd", "la", "ogda", "pgd", "ppm", "subgradient"];

/// Optimization, variational-inequality, and dynamics toolkit.
#[derive(Parser, Debug)]
#[command(name = "vieq", version)]
struct Cli {
    /// Flat key = value file whose entries act as default flags.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a discrete algorithm on a named problem and write its trace.
    Run(RunArgs),
    /// Run property suites; exits 1 if any check fails.
    Check(CheckArgs),
    /// Integrate a continuous-time dynamics.
    Ode(OdeArgs),
    /// Sample a Langevin chain.
    Sample(SampleArgs),
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct RunArgs {
    #[arg(long)]
    problem: String,
    /// One of agd, eg, forward, gd, la, ogda, pgd, ppm, subgradient.
    #[arg(long)]
    alg: String,
    #[arg(long)]
    iters: usize,
    /// Step size; algorithm default when omitted.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, env = "VIEQ_SEED", default_value_t = 0)]
    seed: u64,
    /// Trace CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG convergence plot path.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// PGD target accuracy ε (sets r, g_thres, t_thres).
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Resolvent backend for ppm: affine, picard[:TOL], or series[:ORDER].
    #[arg(long, default_value = "affine")]
    resolvent: String,
    /// Lookahead inner GDA steps.
    #[arg(long, default_value_t = 2)]
    inner_steps: usize,
    /// Lookahead averaging weight.
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct CheckArgs {
    /// monotone, resolvent, descent, rates, or all.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, env = "VIEQ_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct OdeArgs {
    /// gradflow, nesterov, bregman:P, or highres:{gda,eg,ogda,la2}.
    #[arg(long)]
    dynamics: String,
    /// euler, rk4, or leapfrog.
    #[arg(long, default_value = "rk4")]
    integrator: String,
    /// Problem name; quadratic-cond100 for objectives, rotation for highres.
    #[arg(long)]
    problem: Option<String>,
    /// Start time; the dynamics' earliest valid time when omitted.
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    t1: f64,
    #[arg(long)]
    dt: f64,
    /// Step size η of the algorithm a high-resolution ODE models.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Lookahead weight for highres:la2.
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    /// Constant C of the polynomial Bregman scaling family.
    #[arg(long, default_value_t = 0.25)]
    bregman_c: f64,
    /// Keep every n-th time sample.
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct SampleArgs {
    /// ula or underdamped.
    #[arg(long)]
    chain: String,
    /// Potential U, a registered objective.
    #[arg(long, default_value = "gaussian")]
    problem: String,
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    delta: f64,
    #[arg(long, env = "VIEQ_SEED", default_value_t = 0)]
    seed: u64,
    /// Underdamped friction γ.
    #[arg(long, default_value_t = 1.0)]
    friction: f64,
    /// Underdamped temperature scale λ.
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    /// States dropped before computing moments; steps/100 when omitted.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Keep every n-th state in the CSV.
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite(_)
            | Error::NonFiniteState { .. }
            | Error::ResolventNotConverged { .. }
            | Error::Singular
            | Error::InsufficientData(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(format!("i/o error: {e}"))
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn fault(name: &Option<String>) -> Result<Option<Fault>, Failure> {
    name.as_deref().map(|s| Fault::parse(s).ok_or_else(|| usage(format!("unknown fault `{s}`")))).transpose()
}

fn instance(name: &str) -> Result<Instance, Failure> {
    Ok(registry::lookup(name)?)
}

fn summary_stream(out: &Option<PathBuf>, line: &str) {
    if out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn cmd_run(a: RunArgs) -> CmdResult {
    if !ALGORITHMS.contains(&a.alg.as_str()) {
        return Err(usage(format!("unknown algorithm `{}`; valid names: {}", a.alg, ALGORITHMS.join(", "))));
    }
    let fault = fault(&a.inject_fault)?;
    let inst = instance(&a.problem)?;
    let x0 = &inst.start;
    let need_eta = |alg: &str| a.eta.ok_or_else(|| usage(format!("`{alg}` needs --eta")));
    let trace: RunTrace = match a.alg.as_str() {
        "subgradient" => run_subgradient(inst.objective()?, x0, a.iters, a.eta)?,
        "gd" => run_gd(inst.objective()?, x0, a.iters, a.eta)?,
        "agd" => run_agd(inst.objective()?, x0, a.iters, a.eta)?,
        "pgd" => {
            let p = inst.objective()?;
            let mut cfg = PgdConfig::from_epsilon(p, a.epsilon, a.seed)?;
            cfg.step = a.eta;
            run_pgd(p, x0, a.iters, &cfg)?
        }
        "forward" => run_forward(inst.field()?, &ConstraintSet::WholeSpace, x0, a.iters, a.eta)?,
        "ppm" => run_ppm(inst.field()?, x0, a.iters, need_eta("ppm")?, resolvent(&a.resolvent)?)?,
        "eg" => run_eg_with_fault(inst.field()?, x0, a.iters, a.eta, fault)?,
        "ogda" => run_ogda(inst.field()?, x0, a.iters, need_eta("ogda")?)?,
        "la" => {
            let cfg = LookaheadConfig { inner_steps: a.inner_steps, alpha: a.alpha };
            run_lookahead(inst.field()?, x0, a.iters, need_eta("la")?, cfg)?
        }
        _ => unreachable!("checked against ALGORITHMS"),
    };
    output::emit(a.out.as_deref(), |w| output::write_trace(w, &trace))?;
    if let Some(path) = &a.plot {
        plot_trace(path, &trace);
    }
    let last = trace.last();
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6e}"));
    summary_stream(
        &a.out,
        &format!(
            "run: alg={} problem={} iters={} eta={} final dist_err={} f_err={} grad_norm={}",
            a.alg,
            a.problem,
            a.iters,
            trace.config().step,
            fmt(last.dist_err),
            fmt(last.f_err),
            fmt(last.grad_norm)
        ),
    );
    Ok(ExitCode::SUCCESS)
}

/// Plotting failures are reported but never change the exit code.
fn plot_trace(path: &Path, trace: &RunTrace) {
    let metric = [(Metric::FErr, "f_err"), (Metric::DistErr, "dist_err"), (Metric::GradNorm, "grad_norm")]
        .into_iter()
        .find(|(m, _)| trace.metric(*m).iter().all(|(_, v)| v.is_some()));
    let Some((metric, label)) = metric else {
        eprintln!("warning: no complete metric to plot");
        return;
    };
    let pts: Vec<(f64, f64)> = trace.metric(metric).into_iter().map(|(k, v)| (k as f64, v.unwrap())).collect();
    let title = format!("{} on {}", trace.config().algorithm, trace.config().problem);
    match plot::log_chart(&title, "k", label, &pts) {
        Some(svg) => {
            if let Err(e) = output::emit(Some(path), |w| w.write_all(svg.as_bytes())) {
                eprintln!("warning: could not write plot: {e}");
            }
        }
        None => eprintln!("warning: fewer than two positive values; no plot written"),
    }
}

fn resolvent(spec: &str) -> Result<ResolventBackend, Failure> {
    let bad = || usage(format!("bad resolvent `{spec}`; valid: affine, picard[:TOL], series[:ORDER]"));
    let (kind, arg) = spec.split_once(':').map_or((spec, None), |(k, v)| (k, Some(v)));
    Ok(match (kind, arg) {
        ("affine", None) => ResolventBackend::ExactAffine,
        ("picard", tol) => ResolventBackend::FixedPointIter {
            tol: tol.map_or(Ok(1e-12), str::parse).map_err(|_| bad())?,
            max_inner: 10_000,
        },
        ("series", order) => {
            ResolventBackend::TruncatedSeries { order: order.map_or(Ok(20), str::parse).map_err(|_| bad())? }
        }
        _ => return Err(bad()),
    })
}

fn cmd_check(a: CheckArgs) -> CmdResult {
    let suite = Suite::parse(&a.suite)
        .ok_or_else(|| usage(format!("unknown suite `{}`; valid: {}", a.suite, Suite::NAMES.join(", "))))?;
    let report = run_suite(suite, a.samples, a.seed, fault(&a.inject_fault)?)?;
    print!("{}", report.render());
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_ode(a: OdeArgs) -> CmdResult {
    let integrator = match a.integrator.as_str() {
        "euler" => Integrator::Euler,
        "rk4" => Integrator::Rk4,
        "leapfrog" => Integrator::Leapfrog,
        other => return Err(usage(format!("unknown integrator `{other}`; valid: euler, rk4, leapfrog"))),
    };
    if a.thin == 0 {
        return Err(usage("--thin must be at least 1"));
    }
    let (kind, param) = a.dynamics.split_once(':').unwrap_or((a.dynamics.as_str(), ""));
    let default_problem = if kind == "highres" { "rotation" } else { "quadratic-cond100" };
    let inst = instance(a.problem.as_deref().unwrap_or(default_problem))?;
    let mut bregman = None;
    let mut start_v = None;
    let dynamics = match (kind, param) {
        ("gradflow", "") => ode::gradient_flow(inst.objective()?)?,
        ("nesterov", "") => ode::nesterov_ode(inst.objective()?)?,
        ("bregman", p) => {
            let pw: f64 = p.parse().map_err(|_| usage(format!("bregman power must be a number, got `{p}`")))?;
            let f = inst.objective()?;
            let h = ScalarProblem::builder("half-sq-norm", f.dim(), |x| 0.5 * x.norm_sq())
                .gradient(|x| x.clone())
                .hvp(|_, v| v.clone())
                .identity_hessian()
                .build()?;
            let s = ScalingFunctions::polynomial(pw, a.bregman_c)?;
            let d = ode::bregman_el(f, &h, &s)?;
            bregman = Some((h, s));
            d
        }
        ("highres", v) => {
            let variant = HighResVariant::parse(v)
                .ok_or_else(|| usage(format!("unknown highres variant `{v}`; valid: gda, eg, ogda, la2")))?;
            let f = inst.field()?;
            start_v = Some(ode::highres_initial_velocity(f, variant, a.alpha, &inst.start));
            ode::highres(f, variant, a.eta, a.alpha)?
        }
        _ => {
            return Err(usage(format!(
                "unknown dynamics `{}`; valid: gradflow, nesterov, bregman:P, highres:VARIANT",
                a.dynamics
            )))
        }
    };
    let second = dynamics.order() == ode::Order::Second;
    let v0 = second.then(|| start_v.clone().unwrap_or_else(|| Point::zeros(inst.start.dim())));
    let t0 = a.t0.unwrap_or(dynamics.t0());
    let tr = ode::integrate(&dynamics, integrator, t0, a.t1, a.dt, &inst.start, v0.as_ref())?;

    let dim = inst.start.dim();
    let mut header = vec!["t".to_string()];
    header.extend((0..dim).map(|i| format!("x_{i}")));
    if second {
        header.extend((0..dim).map(|i| format!("v_{i}")));
    }
    let lyap = match (&bregman, inst.objective.as_ref().and_then(|p| p.optimum())) {
        (Some(_), Some(_)) => {
            header.push("lyapunov".into());
            true
        }
        _ => false,
    };
    let mut rows = Vec::new();
    for s in tr.samples.iter().step_by(a.thin) {
        let mut vals = s.x.as_slice().to_vec();
        if let Some(v) = &s.v {
            vals.extend_from_slice(v.as_slice());
        }
        if lyap {
            let (h, sc) = bregman.as_ref().expect("checked");
            vals.push(ode::lyapunov(inst.objective()?, h, sc, s.t, &s.x, s.v.as_ref().expect("second order"))?);
        }
        rows.push((output::num(s.t), vals));
    }
    output::emit(a.out.as_deref(), |w| output::write_rows(w, &header, rows.into_iter()))?;
    let last = tr.last();
    let f_err = inst.objective.as_ref().and_then(|p| p.excess(&last.x));
    summary_stream(
        &a.out,
        &format!(
            "ode: dynamics={} integrator={} steps={} t={} |x|={:.6e}{}",
            dynamics.name(),
            a.integrator,
            tr.samples.len() - 1,
            last.t,
            last.x.norm(),
            f_err.map_or(String::new(), |e| format!(" f_err={e:.6e}"))
        ),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_sample(a: SampleArgs) -> CmdResult {
    if a.thin == 0 {
        return Err(usage("--thin must be at least 1"));
    }
    let inst = instance(&a.problem)?;
    let u = inst.objective()?;
    let x0 = &inst.start;
    let tr: SampleTrace = match a.chain.as_str() {
        "ula" => run_ula_with_fault(u, x0, a.steps, a.delta, a.seed, fault(&a.inject_fault)?)?,
        "underdamped" => {
            let v0 = Point::zeros(x0.dim());
            run_underdamped(u, x0, &v0, a.steps, a.delta, a.friction, a.temperature, a.seed)?
        }
        other => return Err(usage(format!("unknown chain `{other}`; valid: ula, underdamped"))),
    };
    let dim = tr.dim();
    let mut header = vec!["k".to_string()];
    header.extend((0..dim).map(|i| format!("x_{i}")));
    if tr.has_velocity() {
        header.extend((0..dim).map(|i| format!("v_{i}")));
    }
    let rows = tr.thinned(a.thin).map(|i| {
        let mut vals = tr.x(i).to_vec();
        if let Some(v) = tr.v(i) {
            vals.extend_from_slice(v);
        }
        (i.to_string(), vals)
    });
    output::emit(a.out.as_deref(), |w| output::write_rows(w, &header, rows))?;

    let burn = a.burn_in.unwrap_or(a.steps / 100);
    let join = |v: Vec<f64>| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(",");
    let mut line = format!(
        "summary: chain={} steps={} delta={} seed={} burn_in={burn} mean=[{}] variance=[{}]",
        a.chain,
        a.steps,
        a.delta,
        a.seed,
        join(tr.mean(burn)?),
        join(tr.variance(burn)?)
    );
    if tr.has_velocity() {
        line.push_str(&format!(" velocity_variance=[{}]", join(tr.velocity_variance(burn)?)));
    }
    summary_stream(&a.out, &line);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let args: Vec<OsString> = std::env::args_os().collect();
    let args = match config::expand(args) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::try_parse_from(args).unwrap_or_else(|e| e.exit());
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Check(a) => cmd_check(a),
        Command::Ode(a) => cmd_ode(a),
        Command::Sample(a) => cmd_sample(a),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
