//! Synthetic recovery experiments: problem generation, regularization sweeps
//! and CSV output.

mod rng;
mod spec;

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use rng::TrialRng;
pub use spec::{log_grid, Algorithm, ExperimentSpec, GroupScheme};

use crate::active_set::{active_set_solve, ActiveSetConfig, EvolutionMode};
use crate::error::{Error, Result};
use crate::partition::{signed_support, GroupPartition};
use crate::solvers::{
    classic_lasso_from, cyclic_windows, fista_solve_from, fmt_g17, latent_group_lasso_from,
    RegressionProblem, SolveReport, SolverConfig,
};

/// Magnitude below which an estimated entry counts as zero.
pub const ERROR_TOL: f64 = 1e-6;

/// Design with i.i.d. standard normal entries, columns scaled to unit norm.
pub fn unit_column_design(rng: &mut TrialRng, n: usize, p: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, p);
    for j in 0..p {
        for i in 0..n {
            a[(i, j)] = rng.normal();
        }
        let norm = a.column(j).norm();
        a.column_mut(j).unscale_mut(norm);
    }
    a
}

/// Problem for one trial: unit-norm Gaussian columns, ones on the strings,
/// `y = Ax* + w` with `w ~ N(0, σ² I)`. Depends only on `(seed, trial)`.
pub fn generate_problem(spec: &ExperimentSpec, trial: u64) -> Result<RegressionProblem> {
    spec.validate()?;
    let mut rng = TrialRng::new(spec.seed, trial);
    let a = unit_column_design(&mut rng, spec.n, spec.p);
    let mut x = vec![0.0; spec.p];
    for i in spec.true_support() {
        x[i] = 1.0;
    }
    let sigma = spec.sigma2.sqrt();
    let ax = a.clone() * nalgebra::DVector::from_column_slice(&x);
    let y: Vec<f64> = ax.iter().map(|v| v + sigma * rng.normal()).collect();
    RegressionProblem::new(a, y)?.with_truth(x, spec.sigma2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub n: usize,
    pub sigma2: f64,
    pub trial: usize,
    pub errors: usize,
    pub runtime_ms: f64,
    pub converged: bool,
}

/// Per-(algorithm, λ) averages over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub n: usize,
    pub sigma2: f64,
    pub mean_errors: f64,
    pub mean_runtime_ms: f64,
    pub converged_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
}

impl SweepOutput {
    /// Smallest mean error over the grid for one algorithm.
    pub fn best(&self, algorithm: Algorithm) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .filter(|s| s.algorithm == algorithm)
            .min_by(|a, b| a.mean_errors.total_cmp(&b.mean_errors))
    }

    pub fn at(&self, algorithm: Algorithm, lambda: f64) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.algorithm == algorithm && s.lambda == lambda)
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "algorithm", "lambda", "n", "sigma2", "trial", "errors", "runtime_ms", "converged",
];

/// Writes trial rows, then summary rows with `trial = mean`.
pub fn write_csv<W: Write>(out: &SweepOutput, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in &out.rows {
        w.write_record([
            r.algorithm.name().to_string(),
            fmt_g17(r.lambda),
            r.n.to_string(),
            fmt_g17(r.sigma2),
            r.trial.to_string(),
            r.errors.to_string(),
            fmt_g17(r.runtime_ms),
            r.converged.to_string(),
        ])?;
    }
    for s in &out.summary {
        w.write_record([
            s.algorithm.name().to_string(),
            fmt_g17(s.lambda),
            s.n.to_string(),
            fmt_g17(s.sigma2),
            "mean".to_string(),
            fmt_g17(s.mean_errors),
            fmt_g17(s.mean_runtime_ms),
            fmt_g17(s.converged_fraction),
        ])?;
    }
    w.flush()?;
    Ok(())
}

struct TrialContext<'a> {
    spec: &'a ExperimentSpec,
    part: &'a GroupPartition,
    windows: &'a [Vec<usize>],
}

fn solve_grid(ctx: &TrialContext<'_>, problem: &RegressionProblem, alg: Algorithm, trial: usize) -> Result<Vec<SweepRow>> {
    let spec = ctx.spec;
    let truth = signed_support(problem.x_true.as_deref().unwrap_or(&[]), 0.0);
    let l0 = problem.loss().value(&vec![0.0; problem.p()]);
    let fista_cfg = SolverConfig {
        max_iter: spec.max_iter,
        obj_tol: 1e-10,
        gap_tol: (spec.gap_rel_tol * l0).max(f64::MIN_POSITIVE),
    };
    let s_max = (3 * truth.support().len()).clamp(1, problem.p());
    let epsilon = (1e-6 * l0).max(f64::MIN_POSITIVE);
    let mut warm: Option<Vec<f64>> = None;
    let mut rows = Vec::with_capacity(spec.lambda_grid.len());
    for &lambda in spec.lambda_grid.iter().rev() {
        let start = Instant::now();
        let (report, next_warm): (SolveReport, Option<Vec<f64>>) = match alg {
            Algorithm::ExclProx => {
                let r = fista_solve_from(problem, ctx.part, lambda, &fista_cfg, warm.as_deref())?;
                let w = r.x_hat.clone();
                (r, Some(w))
            }
            Algorithm::Classic => {
                let r = classic_lasso_from(problem, lambda, &fista_cfg, warm.as_deref())?;
                let w = r.x_hat.clone();
                (r, Some(w))
            }
            Algorithm::Latent => {
                let r = latent_group_lasso_from(problem, ctx.windows, lambda, &fista_cfg, warm.as_deref())?;
                (r.report, Some(r.latent))
            }
            Algorithm::ExclActive | Algorithm::ExclActiveStrings => {
                let mode = if alg == Algorithm::ExclActive {
                    EvolutionMode::Plain
                } else {
                    EvolutionMode::Strings { max_strings: spec.max_strings, wrap: true }
                };
                let cfg = ActiveSetConfig::new(lambda, s_max, epsilon, mode);
                (active_set_solve(problem, ctx.part, &cfg)?.report, None)
            }
        };
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        warm = next_warm;
        rows.push(SweepRow {
            algorithm: alg,
            lambda,
            n: problem.n(),
            sigma2: spec.sigma2,
            trial,
            errors: signed_support(&report.x_hat, ERROR_TOL).hamming(&truth),
            runtime_ms,
            converged: report.converged,
        });
    }
    rows.reverse();
    Ok(rows)
}

/// Runs every trial × algorithm × grid point on a pool of `threads` workers.
///
/// Each trial draws one problem shared by all algorithms. Grid points are
/// solved from the largest value down with warm starts; rows are returned in
/// trial, algorithm and ascending-λ order regardless of the thread count.
pub fn run_sweep(spec: &ExperimentSpec, threads: usize) -> Result<SweepOutput> {
    spec.validate()?;
    let part = spec.group_scheme.partition(spec.p)?;
    let windows = cyclic_windows(spec.p, spec.latent_width);
    let ctx = TrialContext { spec, part: &part, windows: &windows };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let per_trial: Vec<Vec<SweepRow>> = pool.install(|| {
        (0..spec.trials)
            .into_par_iter()
            .map(|t| -> Result<Vec<SweepRow>> {
                let problem = generate_problem(spec, t as u64)?;
                let mut rows = Vec::new();
                for &alg in &spec.algorithms {
                    rows.extend(solve_grid(&ctx, &problem, alg, t)?);
                }
                Ok(rows)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rows: Vec<SweepRow> = per_trial.into_iter().flatten().collect();
    let summary = summarize(spec, &rows);
    Ok(SweepOutput { rows, summary })
}

fn summarize(spec: &ExperimentSpec, rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &alg in &spec.algorithms {
        for &lambda in &spec.lambda_grid {
            let sel: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.algorithm == alg && r.lambda == lambda)
                .collect();
            let k = sel.len() as f64;
            out.push(SummaryRow {
                algorithm: alg,
                lambda,
                n: spec.n,
                sigma2: spec.sigma2,
                mean_errors: sel.iter().map(|r| r.errors as f64).sum::<f64>() / k,
                mean_runtime_ms: sel.iter().map(|r| r.runtime_ms).sum::<f64>() / k,
                converged_fraction: sel.iter().filter(|r| r.converged).count() as f64 / k,
            });
        }
    }
    out
}
