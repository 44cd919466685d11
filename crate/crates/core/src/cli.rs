//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::active_set::{active_set_solve, ActiveSetConfig, EvolutionMode};
use crate::bench::{generate_problem, run_sweep, write_csv, Algorithm, ExperimentSpec, GroupScheme, TrialRng, ERROR_TOL};
use crate::consistency::{consistency_report, recovers_signed_support};
use crate::error::{Error, Result};
use crate::partition::{omega_dual, signed_support, subgradient_certificate, GroupPartition};
use crate::prox::prox_omega;
use crate::solvers::{
    classic_lasso_solve, cyclic_windows, fista_solve, fmt_g17, latent_group_lasso_solve, RegressionProblem,
    SolveReport, SolverConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SPEC: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "exclasso", version, about = "Exclusive group Lasso solvers and recovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw one synthetic problem and write it in the problem text format.
    GenProblem(GenArgs),
    /// Solve one problem at a single regularization value.
    Solve(SolveArgs),
    /// Run the forward active-set method and log its trace.
    ActiveSet(ActiveSetArgs),
    /// Check prox outputs against their optimality certificates on random inputs.
    ProxCheck(ProxCheckArgs),
    /// Run a regularization sweep and write per-trial and mean CSV rows.
    Sweep(SweepArgs),
    /// Write consistency diagnostics, one CSV row per trial.
    ConsistencyReport(ConsistencyArgs),
}

#[derive(Args, Debug)]
struct SpecArgs {
    /// Experiment spec file of `key = value` lines.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the spec seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl SpecArgs {
    fn load(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.spec {
            Some(path) => ExperimentSpec::parse(&read(path)?)?,
            None => ExperimentSpec::default(),
        };
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProblemArgs {
    /// Problem file; a fresh draw from the spec when omitted.
    #[arg(long)]
    problem: Option<PathBuf>,
    /// `modulo(k)`, `singleton` or `file(path)`; defaults to the spec scheme.
    #[arg(long)]
    groups: Option<GroupScheme>,
    #[command(flatten)]
    spec: SpecArgs,
}

impl ProblemArgs {
    fn load(&self) -> Result<(RegressionProblem, GroupPartition, ExperimentSpec)> {
        let spec = self.spec.load()?;
        let problem = match &self.problem {
            Some(path) => RegressionProblem::from_text(&read(path)?)?,
            None => generate_problem(&spec, 0)?,
        };
        let scheme = self.groups.clone().unwrap_or_else(|| spec.group_scheme.clone());
        let part = scheme.partition(problem.p())?;
        Ok((problem, part, spec))
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    input: ProblemArgs,
    /// Penalty weight; `μ` for the active-set algorithms.
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value = "excl-prox")]
    algorithm: Algorithm,
    #[arg(long, default_value_t = 20_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    gap_tol: f64,
    /// Writes `index,value` rows of the estimate (1-based indices).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ActiveSetArgs {
    #[command(flatten)]
    input: ProblemArgs,
    #[arg(long)]
    mu: f64,
    /// Support size cap; defaults to three times the true support, else p.
    #[arg(long)]
    s_max: Option<usize>,
    /// Target duality gap; defaults to `1e-6 · L(0)`.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Restricts the evolution path to at most this many cyclic strings.
    #[arg(long)]
    strings: Option<usize>,
    /// Writes one trace line per iteration: iteration, |J|, added index, phase, gap.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProxCheckArgs {
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 64)]
    max_p: usize,
    #[arg(long, default_value_t = 8)]
    max_groups: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct ConsistencyArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = 0.05)]
    lambda: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Spec(format!("{}: {e}", path.display())))
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(io::BufWriter::new(fs::File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn threads(requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoConvergence { .. } | Error::Singular(_) | Error::NonFinite(_) => EXIT_SOLVER,
        _ => EXIT_SPEC,
    }
}

/// Parses `argv` (program name first) and runs the command.
/// Returns 0 on success, 2 on usage or spec errors, 3 on solver failure.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_SPEC } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::GenProblem(args) => gen_problem(args),
        Command::Solve(args) => solve(args),
        Command::ActiveSet(args) => active_set(args),
        Command::ProxCheck(args) => prox_check(args),
        Command::Sweep(args) => sweep(args),
        Command::ConsistencyReport(args) => consistency(args),
    }
}

fn gen_problem(args: GenArgs) -> Result<i32> {
    let spec = args.spec.load()?;
    let problem = generate_problem(&spec, args.trial)?;
    sink(&args.out)?.write_all(problem.to_text().as_bytes())?;
    Ok(EXIT_OK)
}

fn write_estimate(out: &Option<PathBuf>, x: &[f64]) -> Result<()> {
    if out.is_none() {
        return Ok(());
    }
    let mut w = csv::Writer::from_writer(sink(out)?);
    w.write_record(["index", "value"])?;
    for (i, v) in x.iter().enumerate() {
        w.write_record([(i + 1).to_string(), fmt_g17(*v)])?;
    }
    w.flush()?;
    Ok(())
}

fn summarize(problem: &RegressionProblem, report: &SolveReport) {
    println!("objective {}", fmt_g17(report.objective));
    println!("iterations {}", report.iterations);
    match report.duality_gap {
        Some(g) => println!("duality_gap {}", fmt_g17(g)),
        None => println!("duality_gap none"),
    }
    println!("converged {}", report.converged);
    if let Some(truth) = &problem.x_true {
        let errors = signed_support(&report.x_hat, ERROR_TOL).hamming(&signed_support(truth, 0.0));
        println!("errors {errors}");
    }
}

fn default_s_max(problem: &RegressionProblem) -> usize {
    match &problem.x_true {
        Some(t) => (3 * signed_support(t, 0.0).support().len()).clamp(1, problem.p()),
        None => problem.p(),
    }
}

fn default_epsilon(problem: &RegressionProblem) -> f64 {
    (1e-6 * problem.loss().value(&vec![0.0; problem.p()])).max(f64::MIN_POSITIVE)
}

fn solve(args: SolveArgs) -> Result<i32> {
    let (problem, part, spec) = args.input.load()?;
    let config = SolverConfig { max_iter: args.max_iter, obj_tol: 1e-10, gap_tol: args.gap_tol };
    config.validate()?;
    let start = Instant::now();
    let report = match args.algorithm {
        Algorithm::ExclProx => fista_solve(&problem, &part, args.lambda, &config)?,
        Algorithm::Classic => classic_lasso_solve(&problem, args.lambda, &config)?,
        Algorithm::Latent => {
            let windows = cyclic_windows(problem.p(), spec.latent_width);
            latent_group_lasso_solve(&problem, &windows, args.lambda, &config)?.report
        }
        Algorithm::ExclActive | Algorithm::ExclActiveStrings => {
            let mode = if args.algorithm == Algorithm::ExclActive {
                EvolutionMode::Plain
            } else {
                EvolutionMode::Strings { max_strings: spec.max_strings, wrap: true }
            };
            let cfg = ActiveSetConfig::new(args.lambda, default_s_max(&problem), default_epsilon(&problem), mode);
            active_set_solve(&problem, &part, &cfg)?.report
        }
    };
    log::info!("{} solved in {:.3} ms", args.algorithm, start.elapsed().as_secs_f64() * 1e3);
    summarize(&problem, &report);
    write_estimate(&args.out, &report.x_hat)?;
    Ok(if report.converged { EXIT_OK } else { EXIT_SOLVER })
}

fn active_set(args: ActiveSetArgs) -> Result<i32> {
    let (problem, part, _) = args.input.load()?;
    let mode = match args.strings {
        Some(k) => EvolutionMode::Strings { max_strings: k, wrap: true },
        None => EvolutionMode::Plain,
    };
    let cfg = ActiveSetConfig::new(
        args.mu,
        args.s_max.unwrap_or_else(|| default_s_max(&problem)),
        args.epsilon.unwrap_or_else(|| default_epsilon(&problem)),
        mode,
    );
    let outcome = active_set_solve(&problem, &part, &cfg)?;
    if let Some(path) = &args.trace {
        let mut w = io::BufWriter::new(fs::File::create(path)?);
        for entry in &outcome.trace {
            writeln!(w, "{entry}")?;
        }
        w.flush()?;
    }
    summarize(&problem, &outcome.report);
    println!("support_size {}", outcome.state.support.len());
    write_estimate(&args.out, &outcome.report.x_hat)?;
    Ok(if outcome.report.converged { EXIT_OK } else { EXIT_SOLVER })
}

fn random_partition(rng: &mut TrialRng, p: usize, k: usize) -> Result<GroupPartition> {
    let mut groups = vec![Vec::new(); k];
    for i in 0..p {
        // First k indices seed the groups so none is empty.
        let g = if i < k { i } else { (rng.uniform() * k as f64) as usize % k };
        groups[g].push(i);
    }
    GroupPartition::new(p, groups)
}

fn prox_check(args: ProxCheckArgs) -> Result<i32> {
    if args.max_p == 0 || args.max_groups == 0 {
        return Err(Error::InvalidArgument("max_p and max_groups must be positive".into()));
    }
    let start = Instant::now();
    let mut failures = 0usize;
    let mut worst_dual = 0.0_f64;
    let mut worst_sub = 0.0_f64;
    for t in 0..args.trials {
        let mut rng = TrialRng::new(args.seed, t as u64);
        let p = 1 + (rng.uniform() * args.max_p as f64) as usize % args.max_p;
        let k = 1 + (rng.uniform() * args.max_groups.min(p) as f64) as usize % args.max_groups.min(p);
        let part = random_partition(&mut rng, p, k)?;
        let scale = 10f64.powf(-3.0 + 6.0 * rng.uniform());
        let x: Vec<f64> = (0..p).map(|_| scale * rng.normal()).collect();
        let res = prox_omega(&x, &part, crate::prox::DEFAULT_NEWTON_TOL)?;
        let moreau = x.iter().zip(&res.z).zip(&res.projection).all(|((a, z), q)| z + q == *a);
        let dual = omega_dual(&res.projection, &part)?;
        let sub = subgradient_certificate(&res.z, &res.projection, &part, args.tol)?;
        worst_dual = worst_dual.max(dual - 1.0);
        worst_sub = worst_sub.max(sub.max_violation);
        if !moreau || dual > 1.0 + args.tol || !sub.holds {
            failures += 1;
            log::warn!("trial {t}: moreau {moreau}, dual norm {dual}, residual {}", sub.max_violation);
        }
    }
    println!("trials {}", args.trials);
    println!("failures {failures}");
    println!("max_dual_excess {}", fmt_g17(worst_dual));
    println!("max_subgradient_residual {}", fmt_g17(worst_sub));
    println!("elapsed_ms {}", fmt_g17(start.elapsed().as_secs_f64() * 1e3));
    Ok(if failures == 0 { EXIT_OK } else { EXIT_SOLVER })
}

fn sweep(args: SweepArgs) -> Result<i32> {
    let spec = args.spec.load()?;
    let out = run_sweep(&spec, threads(args.threads))?;
    let failed = out.rows.iter().filter(|r| !r.converged).count();
    if failed > 0 {
        log::warn!("{failed} of {} solves stopped before convergence", out.rows.len());
    }
    write_csv(&out, sink(&args.out)?)?;
    Ok(EXIT_OK)
}

fn consistency(args: ConsistencyArgs) -> Result<i32> {
    use rayon::prelude::*;
    let spec = args.spec.load()?;
    let part = spec.group_scheme.partition(spec.p)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads(args.threads))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let rows = pool.install(|| {
        (0..spec.trials)
            .into_par_iter()
            .map(|t| -> Result<Vec<String>> {
                let problem = generate_problem(&spec, t as u64)?;
                let rep = consistency_report(&problem, &part, args.lambda)?;
                let recovered = recovers_signed_support(&problem, &part, args.lambda)?;
                log::info!("trial {t}: gamma {}", rep.gamma);
                Ok(vec![
                    spec.n.to_string(),
                    spec.seed.to_string(),
                    t.to_string(),
                    fmt_g17(rep.c_min),
                    fmt_g17(rep.c_inf),
                    fmt_g17(rep.gamma),
                    fmt_g17(rep.phi_j),
                    rep.witness_dual_feasible.to_string(),
                    rep.witness_sign_ok.to_string(),
                    recovered.to_string(),
                ])
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut w = csv::Writer::from_writer(sink(&args.out)?);
    w.write_record(["n", "seed", "trial", "c_min", "c_inf", "gamma", "phi_J", "dual_feasible", "sign_ok", "recovered"])?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(EXIT_OK)
}
