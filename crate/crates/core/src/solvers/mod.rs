//! Least-squares solvers for the exclusive group norm and the baselines.

mod baselines;
mod fista;
mod irls;
mod penalty;
mod problem;

pub use baselines::{
    classic_lasso_from, classic_lasso_solve, cyclic_windows, group_lasso_solve,
    latent_group_lasso_from, latent_group_lasso_solve, LatentDesign, LatentReport,
};
pub use fista::{fenchel_gap, fista_minimize, SolveReport, SolverConfig};
pub use irls::{irls_restricted_from, irls_restricted_solve, restricted_kkt_residual};
pub use penalty::{Exclusive, GroupL2, Penalty, L1};
pub use problem::{
    fmt_g17, lipschitz_constant, ls_grad, ls_loss, LeastSquares, LinearModel, RegressionProblem,
};

use crate::error::{check_len, check_finite, Error, Result};
use crate::partition::{omega, omega_dual, omega_dual_restricted, GroupPartition, RestrictedView};

/// Which penalized problem a gap refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    /// `L(x) + λ Ω(x)`.
    Norm(f64),
    /// `L(x) + (μ/2) Ω(x)²`.
    Squared(f64),
}

/// FISTA on `min L(x) + λ Ω(x)` from zero.
pub fn fista_solve(
    problem: &RegressionProblem,
    part: &GroupPartition,
    lambda: f64,
    config: &SolverConfig,
) -> Result<SolveReport> {
    fista_solve_from(problem, part, lambda, config, None)
}

pub fn fista_solve_from(
    problem: &RegressionProblem,
    part: &GroupPartition,
    lambda: f64,
    config: &SolverConfig,
    x0: Option<&[f64]>,
) -> Result<SolveReport> {
    check_len(problem.p(), part.p())?;
    check_finite(problem.a.as_slice(), "design")?;
    fista_minimize(&problem.loss(), &Exclusive(part), lambda, config, x0)
}

/// Duality gap of `x` for either penalized problem.
///
/// For `μ/2 Ω²` this is `xᵀu + (μ/2)Ω(x)² + Ω*(u)²/(2μ)` with `u = ∇L(x)`.
pub fn duality_gap(
    problem: &RegressionProblem,
    part: &GroupPartition,
    x: &[f64],
    reg: Regularizer,
) -> Result<f64> {
    check_len(problem.p(), part.p())?;
    check_len(problem.p(), x.len())?;
    check_finite(x, "point")?;
    match reg {
        Regularizer::Norm(lambda) => {
            if !(lambda >= 0.0) {
                return Err(Error::InvalidArgument(format!("lambda must be nonnegative, got {lambda}")));
            }
            Ok(fenchel_gap(&problem.loss(), &Exclusive(part), x, lambda))
        }
        Regularizer::Squared(mu) => {
            if !(mu > 0.0) {
                return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
            }
            let u = problem.loss().gradient(x);
            let xu: f64 = x.iter().zip(&u).map(|(a, b)| a * b).sum();
            let om = omega(x, part)?;
            let dn = omega_dual(&u, part)?;
            Ok((xu + 0.5 * mu * om * om + 0.5 * dn * dn / mu).max(0.0))
        }
    }
}

/// Gap of a restricted optimum extended by zeros, `(Ω*(u)² − Ω*_J(u_J)²)/(2μ)`.
/// Valid when `x_hat` solves the restricted problem on `view`.
pub fn restricted_gap(
    problem: &RegressionProblem,
    part: &GroupPartition,
    view: &RestrictedView,
    x_hat: &[f64],
    mu: f64,
) -> Result<f64> {
    check_len(problem.p(), x_hat.len())?;
    let u = problem.loss().gradient(x_hat);
    let full = omega_dual(&u, part)?;
    let restricted = omega_dual_restricted(&view.gather(&u), view)?;
    Ok(((full * full - restricted * restricted) / (2.0 * mu)).max(0.0))
}
