//! Diagnostics for signed-support consistency: eigenvalue and operator-norm
//! bounds on the restricted Gram matrix, the incoherence margin, support
//! balance, and a primal-dual witness check.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::bench::{TrialRng, ERROR_TOL};
use crate::error::{check_len, Error, Result};
use crate::partition::{canonical_subgradient, omega, omega_restricted, signed_support, GroupPartition, RestrictedView};
use crate::solvers::{fista_solve, RegressionProblem, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    /// Smallest eigenvalue of `A_Jᵀ A_J / n`.
    pub c_min: f64,
    /// `‖(A_Jᵀ A_J / n)⁻¹‖` from `(R^J, Ω*_J)` to `(R^J, ‖·‖∞)`.
    pub c_inf: f64,
    pub gamma: f64,
    pub phi_j: f64,
    /// `max_G |G ∩ J| / min_G |G ∩ J|`; infinite when some group misses `J`.
    pub balance_ratio: f64,
    pub witness_dual_feasible: bool,
    pub witness_sign_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport {
    pub dual_feasible: bool,
    pub sign_ok: bool,
    /// Per group: `‖x̌_G‖₁/Ω(x̌) − ‖ǔ_{G∩Jᶜ}‖∞`; `-∞` everywhere when `x̌ = 0`.
    pub margins: Vec<f64>,
    /// Restricted solution, zero-extended.
    pub x_check: Vec<f64>,
    /// Witness dual vector on all coordinates.
    pub u_check: Vec<f64>,
}

fn true_support(x_true: &[f64]) -> Result<Vec<usize>> {
    let s: Vec<usize> = (0..x_true.len()).filter(|&i| x_true[i] != 0.0).collect();
    if s.is_empty() {
        return Err(Error::InvalidArgument("x_true must be nonzero".into()));
    }
    Ok(s)
}

fn truth_of(problem: &RegressionProblem) -> Result<&[f64]> {
    problem
        .x_true
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("problem has no ground truth".into()))
}

/// `A_Jᵀ A_J / n`.
pub fn restricted_gram(problem: &RegressionProblem, support: &[usize]) -> DMatrix<f64> {
    let aj = problem.columns(support);
    aj.tr_mul(&aj) / problem.n() as f64
}

/// Smallest eigenvalue by a dense symmetric eigendecomposition, clamped at zero.
pub fn c_min_dense(gram: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(gram.clone()).eigenvalues.min().max(0.0)
}

/// Smallest eigenvalue by inverse power iteration with Rayleigh quotients.
pub fn c_min_power(gram: &DMatrix<f64>) -> Result<f64> {
    let m = gram.nrows();
    if m == 0 {
        return Err(Error::InvalidArgument("empty Gram matrix".into()));
    }
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("restricted Gram".into()))?;
    let mut v = DVector::from_fn(m, |i, _| 1.0 + 0.01 * i as f64);
    v.normalize_mut();
    let mut last = f64::INFINITY;
    for _ in 0..10_000 {
        let mut w = chol.solve(&v);
        let norm = w.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Singular("restricted Gram".into()));
        }
        w /= norm;
        let rq = w.dot(&(gram * &w));
        v = w;
        if (rq - last).abs() <= 1e-15 * rq.abs() {
            return Ok(rq.max(0.0));
        }
        last = rq;
    }
    Err(Error::NoConvergence { what: "inverse power iteration", iterations: 10_000 })
}

/// `sup { ‖Bz‖∞ : Ω*_J(z) ≤ 1 } = max_i Ω_J(β_i)` over the rows `β_i` of `B`.
pub fn opnorm_omega_dual_to_inf(b: &DMatrix<f64>, view: &RestrictedView) -> Result<f64> {
    check_len(view.len(), b.ncols())?;
    let mut best = 0.0_f64;
    for i in 0..b.nrows() {
        let row: Vec<f64> = b.row(i).iter().copied().collect();
        best = best.max(omega_restricted(&row, view)?);
    }
    Ok(best)
}

/// `c_inf` through a Cholesky inverse.
pub fn c_inf_cholesky(gram: &DMatrix<f64>, view: &RestrictedView) -> Result<f64> {
    let inv = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("restricted Gram".into()))?
        .inverse();
    opnorm_omega_dual_to_inf(&inv, view)
}

/// `c_inf` through the eigendecomposition `V diag(1/λ) Vᵀ`.
pub fn c_inf_eigen(gram: &DMatrix<f64>, view: &RestrictedView) -> Result<f64> {
    let eig = SymmetricEigen::new(gram.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Singular("restricted Gram".into()));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    let inv = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    opnorm_omega_dual_to_inf(&inv, view)
}

/// Per-group incoherence terms
/// `‖x*_G‖₁/Ω(x*) − ‖A_{G∩Jᶜ}ᵀ A_J (A_Jᵀ A_J)⁻¹‖_{Ω*_J→∞}`.
pub fn incoherence_terms(
    problem: &RegressionProblem,
    part: &GroupPartition,
    x_true: &[f64],
) -> Result<Vec<f64>> {
    check_len(problem.p(), part.p())?;
    check_len(problem.p(), x_true.len())?;
    let support = true_support(x_true)?;
    let view = RestrictedView::new(part, &support)?;
    let aj = problem.columns(&support);
    let chol = aj
        .tr_mul(&aj)
        .cholesky()
        .ok_or_else(|| Error::Singular("restricted Gram".into()))?;
    // Row i of Aᵀ A_J (A_Jᵀ A_J)⁻¹, for every column i of A.
    let cross = chol.solve(&aj.tr_mul(&problem.a)).transpose();
    let om = omega(x_true, part)?;
    let l1 = part.group_l1(x_true);
    let mut in_j = vec![false; problem.p()];
    for &i in &support {
        in_j[i] = true;
    }
    let mut terms = Vec::with_capacity(part.num_groups());
    for (g, members) in part.groups().iter().enumerate() {
        let mut norm = 0.0_f64;
        for &i in members.iter().filter(|&&i| !in_j[i]) {
            let row: Vec<f64> = cross.row(i).iter().copied().collect();
            norm = norm.max(omega_restricted(&row, &view)?);
        }
        terms.push(l1[g] / om - norm);
    }
    Ok(terms)
}

/// Incoherence margin: the minimum of [`incoherence_terms`]. May be negative.
pub fn incoherence_gamma(
    problem: &RegressionProblem,
    part: &GroupPartition,
    x_true: &[f64],
) -> Result<f64> {
    Ok(incoherence_terms(problem, part, x_true)?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

/// `sqrt(Σ_G |G ∩ J|²)`.
pub fn phi_j(part: &GroupPartition, support: &[usize]) -> Result<f64> {
    let view = RestrictedView::new(part, support)?;
    Ok(view
        .induced_groups()
        .iter()
        .map(|g| (g.len() * g.len()) as f64)
        .sum::<f64>()
        .sqrt())
}

pub fn balance_ratio(part: &GroupPartition, support: &[usize]) -> Result<f64> {
    let view = RestrictedView::new(part, support)?;
    if view.is_empty() {
        return Err(Error::InvalidArgument("support is empty".into()));
    }
    let mut counts = vec![0usize; part.num_groups()];
    for (g, ind) in view.parent_groups().iter().zip(view.induced_groups()) {
        counts[*g] = ind.len();
    }
    let max = *counts.iter().max().unwrap_or(&0) as f64;
    let min = *counts.iter().min().unwrap_or(&0) as f64;
    Ok(if min == 0.0 { f64::INFINITY } else { max / min })
}

/// Tolerances for solves whose support is compared against the truth.
pub fn tight_config(problem: &RegressionProblem) -> SolverConfig {
    let l0 = problem.loss().value(&vec![0.0; problem.p()]);
    SolverConfig {
        max_iter: 200_000,
        obj_tol: 1e-12,
        gap_tol: (1e-13 * l0).max(f64::MIN_POSITIVE),
    }
}

pub fn witness_check(
    problem: &RegressionProblem,
    part: &GroupPartition,
    x_true: &[f64],
    lambda: f64,
) -> Result<WitnessReport> {
    witness_check_with(problem, part, x_true, lambda, &tight_config(problem))
}

/// Primal-dual witness on `J = supp(x*)`.
///
/// Solves the restricted problem on `J`, takes the canonical subgradient
/// `ǔ_J`, and sets `ǔ_{Jᶜ} = A_{Jᶜ}ᵀ [A_J (A_Jᵀ A_J)⁻¹ ǔ_J + Π⊥w/(nλ)]` with
/// `w = y − A x*` and `Π⊥` the projector onto the orthogonal complement of
/// the span of `A_J`.
pub fn witness_check_with(
    problem: &RegressionProblem,
    part: &GroupPartition,
    x_true: &[f64],
    lambda: f64,
    config: &SolverConfig,
) -> Result<WitnessReport> {
    check_len(problem.p(), part.p())?;
    check_len(problem.p(), x_true.len())?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let support = true_support(x_true)?;
    let view = RestrictedView::new(part, &support)?;
    let local = view.local_partition()?;
    let aj = problem.columns(&support);
    let chol = aj
        .tr_mul(&aj)
        .cholesky()
        .ok_or_else(|| Error::Singular("restricted Gram".into()))?;

    let sub = problem.restricted(&support)?;
    let x_loc = fista_solve(&sub, &local, lambda, config)?.x_hat;
    let x_check = view.extend(&x_loc);
    let om = omega(&x_loc, &local)?;
    let sign_ok = signed_support(&x_check, ERROR_TOL) == signed_support(x_true, 0.0);
    if om == 0.0 {
        return Ok(WitnessReport {
            dual_feasible: false,
            sign_ok,
            margins: vec![f64::NEG_INFINITY; part.num_groups()],
            x_check,
            u_check: vec![0.0; problem.p()],
        });
    }

    let u_j = DVector::from_vec(canonical_subgradient(&x_loc, &local)?);
    let x_star = DVector::from_column_slice(x_true);
    let y = DVector::from_column_slice(&problem.y);
    let w = y - &problem.a * x_star;
    let w_perp = &w - &aj * chol.solve(&aj.tr_mul(&w));
    let v = &aj * chol.solve(&u_j) + w_perp / (problem.n() as f64 * lambda);
    let mut u_check = (problem.a.tr_mul(&v)).as_slice().to_vec();
    for (&i, &u) in support.iter().zip(u_j.iter()) {
        u_check[i] = u;
    }

    let mut in_j = vec![false; problem.p()];
    for &i in &support {
        in_j[i] = true;
    }
    let l1 = part.group_l1(&x_check);
    let mut margins = Vec::with_capacity(part.num_groups());
    let mut dual_feasible = true;
    for (g, members) in part.groups().iter().enumerate() {
        let off: Vec<usize> = members.iter().copied().filter(|&i| !in_j[i]).collect();
        let max_off = off.iter().fold(0.0_f64, |m, &i| m.max(u_check[i].abs()));
        let margin = l1[g] / om - max_off;
        if !off.is_empty() && !(margin > 0.0) {
            dual_feasible = false;
        }
        margins.push(margin);
    }
    Ok(WitnessReport { dual_feasible, sign_ok, margins, x_check, u_check })
}

/// All diagnostics for a problem carrying its ground truth.
pub fn consistency_report(
    problem: &RegressionProblem,
    part: &GroupPartition,
    lambda: f64,
) -> Result<ConsistencyReport> {
    let x_true = truth_of(problem)?;
    let support = true_support(x_true)?;
    let view = RestrictedView::new(part, &support)?;
    let gram = restricted_gram(problem, &support);
    let witness = witness_check(problem, part, x_true, lambda)?;
    Ok(ConsistencyReport {
        c_min: c_min_dense(&gram),
        c_inf: c_inf_cholesky(&gram, &view)?,
        gamma: incoherence_gamma(problem, part, x_true)?,
        phi_j: phi_j(part, &support)?,
        balance_ratio: balance_ratio(part, &support)?,
        witness_dual_feasible: witness.dual_feasible,
        witness_sign_ok: witness.sign_ok,
    })
}

/// Whether a full solve at `lambda` recovers the signed support of the truth.
pub fn recovers_signed_support(
    problem: &RegressionProblem,
    part: &GroupPartition,
    lambda: f64,
) -> Result<bool> {
    let x_true = truth_of(problem)?;
    let rep = fista_solve(problem, part, lambda, &tight_config(problem))?;
    Ok(signed_support(&rep.x_hat, ERROR_TOL) == signed_support(x_true, 0.0))
}

/// Recovery experiment over growing sample sizes with orthogonalized designs
/// `A = √n Q`, `QᵀQ = I`, and `λ_n = lambda_scale · n^(−lambda_exponent)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendConfig {
    pub ns: Vec<usize>,
    pub p: usize,
    /// Groups are `{i : i mod k = r}`.
    pub groups_modulo: usize,
    pub support: Vec<usize>,
    pub amplitude: f64,
    pub sigma2: f64,
    pub lambda_scale: f64,
    pub lambda_exponent: f64,
    pub trials: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for TrendConfig {
    fn default() -> Self {
        Self {
            ns: vec![100, 200, 400, 800],
            p: 16,
            groups_modulo: 2,
            support: vec![0, 1, 2, 3],
            amplitude: 1.0,
            sigma2: 1.0,
            lambda_scale: 1.0,
            lambda_exponent: 0.25,
            trials: 50,
            seed: 2024,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendRow {
    pub n: usize,
    pub lambda: f64,
    pub trials: usize,
    pub recovered: usize,
    pub fraction: f64,
    pub mean_gamma: f64,
}

/// Design with orthonormal columns scaled by `√n`, so `AᵀA = n I`.
pub fn orthogonal_design(rng: &mut TrialRng, n: usize, p: usize) -> Result<DMatrix<f64>> {
    if n < p {
        return Err(Error::InvalidArgument(format!("orthogonal design needs n >= p, got n={n}, p={p}")));
    }
    let g = DMatrix::from_fn(n, p, |_, _| rng.normal());
    Ok(g.qr().q() * (n as f64).sqrt())
}

fn trend_trial(cfg: &TrendConfig, part: &GroupPartition, n: usize, lambda: f64, trial: usize) -> Result<(bool, f64)> {
    let mut rng = TrialRng::new(cfg.seed, ((n as u64) << 32) | trial as u64);
    let a = orthogonal_design(&mut rng, n, cfg.p)?;
    let mut x = vec![0.0; cfg.p];
    for &i in &cfg.support {
        x[i] = cfg.amplitude;
    }
    let sigma = cfg.sigma2.sqrt();
    let ax = &a * DVector::from_column_slice(&x);
    let y: Vec<f64> = ax.iter().map(|v| v + sigma * rng.normal()).collect();
    let problem = RegressionProblem::new(a, y)?.with_truth(x.clone(), cfg.sigma2)?;
    let gamma = incoherence_gamma(&problem, part, &x)?;
    Ok((recovers_signed_support(&problem, part, lambda)?, gamma))
}

pub fn recovery_trend(cfg: &TrendConfig) -> Result<Vec<TrendRow>> {
    if cfg.ns.is_empty() || cfg.trials == 0 {
        return Err(Error::InvalidArgument("need at least one n and one trial".into()));
    }
    if cfg.support.is_empty() || cfg.support.iter().any(|&i| i >= cfg.p) {
        return Err(Error::InvalidArgument("support must be nonempty and inside 0..p".into()));
    }
    let part = GroupPartition::modulo(cfg.p, cfg.groups_modulo)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rows = Vec::with_capacity(cfg.ns.len());
    for &n in &cfg.ns {
        let lambda = cfg.lambda_scale * (n as f64).powf(-cfg.lambda_exponent);
        let outcomes: Vec<(bool, f64)> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| trend_trial(cfg, &part, n, lambda, t))
                .collect::<Result<Vec<_>>>()
        })?;
        let recovered = outcomes.iter().filter(|o| o.0).count();
        rows.push(TrendRow {
            n,
            lambda,
            trials: cfg.trials,
            recovered,
            fraction: recovered as f64 / cfg.trials as f64,
            mean_gamma: outcomes.iter().map(|o| o.1).sum::<f64>() / cfg.trials as f64,
        });
    }
    Ok(rows)
}
