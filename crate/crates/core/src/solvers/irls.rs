//! Restricted squared-penalty problem `min L_J(x) + (μ/2) Ω_J(x)²`.
//!
//! IRLS uses `(Σ_{i∈G} |x_i|)² = min_θ Σ_i x_i² / θ_i` over the simplex, with
//! `θ_i ∝ |x_i| + ε`. Each step solves a ridge-like system. Once the iterate
//! reveals a support and sign pattern, the problem is piecewise quadratic and a
//! direct solve on that piece gives the exact minimizer, checked against the
//! stationarity conditions.

use nalgebra::{DMatrix, DVector};

use super::fista::{SolveReport, SolverConfig};
use super::problem::RegressionProblem;
use crate::error::{check_len, Error, Result};
use crate::partition::RestrictedView;

const JITTER: f64 = 1e-12;
const EPS_START: f64 = 1e-10;

/// Dense data of the restricted problem in local coordinates.
pub(crate) struct Restricted<'a> {
    pub gram: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub groups: &'a [Vec<usize>],
    pub group_of: Vec<usize>,
}

impl<'a> Restricted<'a> {
    pub fn new(problem: &RegressionProblem, view: &'a RestrictedView) -> Self {
        let n = problem.n() as f64;
        let aj = problem.columns(view.support());
        let gram = aj.tr_mul(&aj) / n;
        let rhs = aj.tr_mul(&DVector::from_column_slice(&problem.y)) / n;
        let mut group_of = vec![0; view.len()];
        for (g, members) in view.induced_groups().iter().enumerate() {
            for &k in members {
                group_of[k] = g;
            }
        }
        Self { gram, rhs, groups: view.induced_groups(), group_of }
    }

    fn m(&self) -> usize {
        self.rhs.len()
    }

    /// Gradient of the restricted loss, `Gx − b`.
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.gram * x - &self.rhs
    }

    fn group_l1(&self, x: &DVector<f64>) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&k| x[k].abs()).sum())
            .collect()
    }

    /// ∞-norm of the stationarity violation:
    /// `|∇_i + μ c_G sign(x_i)|` on nonzeros and `max(0, |∇_i| − μ c_G)` on zeros.
    pub fn kkt_residual(&self, x: &DVector<f64>, mu: f64) -> f64 {
        let g = self.gradient(x);
        let c = self.group_l1(x);
        (0..self.m())
            .map(|k| {
                let cg = mu * c[self.group_of[k]];
                if x[k] != 0.0 {
                    (g[k] + cg * x[k].signum()).abs()
                } else {
                    (g[k].abs() - cg).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn objective(&self, problem: &RegressionProblem, view: &RestrictedView, x: &DVector<f64>, mu: f64) -> f64 {
        let full = view.extend(x.as_slice());
        let om2: f64 = self.group_l1(x).iter().map(|v| v * v).sum();
        problem.loss().value(&full) + 0.5 * mu * om2
    }

    /// Restricted duality gap `x·∇ + (μ/2)Ω_J(x)² + Ω*_J(∇)²/(2μ)`.
    pub fn gap(&self, x: &DVector<f64>, mu: f64) -> f64 {
        let g = self.gradient(x);
        let om2: f64 = self.group_l1(x).iter().map(|v| v * v).sum();
        let dual2: f64 = self
            .groups
            .iter()
            .map(|grp| grp.iter().fold(0.0_f64, |m, &k| m.max(g[k].abs())).powi(2))
            .sum();
        (x.dot(&g) + 0.5 * mu * om2 + 0.5 * dual2 / mu).max(0.0)
    }

    /// One reweighted solve with weights from `x`, in the scaled variable
    /// `x = Θ^{1/2} z`: `(Θ^{1/2} G Θ^{1/2} + μ I) z = Θ^{1/2} b`.
    fn irls_step(&self, x: &DVector<f64>, mu: f64, eps: f64) -> Result<DVector<f64>> {
        let m = self.m();
        let mut theta = DVector::zeros(m);
        for g in self.groups {
            let total: f64 = g.iter().map(|&k| x[k].abs() + eps).sum();
            for &k in g {
                theta[k] = (x[k].abs() + eps) / total;
            }
        }
        let s = theta.map(f64::sqrt);
        let mut sys = self.gram.clone();
        for i in 0..m {
            for j in 0..m {
                sys[(i, j)] *= s[i] * s[j];
            }
            sys[(i, i)] += mu + JITTER;
        }
        let rhs = self.rhs.component_mul(&s);
        let chol = sys
            .cholesky()
            .ok_or_else(|| Error::Singular("reweighted system".into()))?;
        Ok(chol.solve(&rhs).component_mul(&s))
    }

    /// Exact minimizer on the piece with support `sup` and signs `sgn`:
    /// `(G_SS + μ M) x_S = b_S` with `M` block diagonal, blocks `s_G s_Gᵀ`.
    fn piece_solve(&self, sup: &[usize], sgn: &[f64], mu: f64) -> Option<DVector<f64>> {
        let k = sup.len();
        let mut sys = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                sys[(a, b)] = self.gram[(sup[a], sup[b])];
                if self.group_of[sup[a]] == self.group_of[sup[b]] {
                    sys[(a, b)] += mu * sgn[a] * sgn[b];
                }
            }
        }
        let rhs = DVector::from_iterator(k, sup.iter().map(|&i| self.rhs[i]));
        let sol = sys.cholesky()?.solve(&rhs);
        let mut x = DVector::zeros(self.m());
        for (a, &i) in sup.iter().enumerate() {
            x[i] = sol[a];
        }
        Some(x)
    }

    /// Refines the sign pattern of `x` by single-entry moves and solves each
    /// piece exactly. Returns a point with KKT residual at most `tol`.
    fn polish(&self, x: &DVector<f64>, mu: f64, tol: f64) -> Option<DVector<f64>> {
        let m = self.m();
        let scale = x.amax();
        if scale == 0.0 {
            return None;
        }
        let mut sgn: Vec<f64> = (0..m)
            .map(|k| if x[k].abs() > 1e-8 * scale { x[k].signum() } else { 0.0 })
            .collect();
        for _ in 0..(2 * m + 4) {
            let sup: Vec<usize> = (0..m).filter(|&k| sgn[k] != 0.0).collect();
            if sup.is_empty() {
                return None;
            }
            let s_sup: Vec<f64> = sup.iter().map(|&k| sgn[k]).collect();
            let cand = self.piece_solve(&sup, &s_sup, mu)?;
            // Entries that changed sign leave the support, worst first.
            let flipped = sup
                .iter()
                .copied()
                .filter(|&k| cand[k] * sgn[k] <= 0.0)
                .min_by(|&a, &b| (cand[a] * sgn[a]).total_cmp(&(cand[b] * sgn[b])));
            if let Some(k) = flipped {
                sgn[k] = 0.0;
                continue;
            }
            let g = self.gradient(&cand);
            let c = self.group_l1(&cand);
            let worst = (0..m)
                .filter(|&k| sgn[k] == 0.0)
                .map(|k| (k, g[k].abs() - mu * c[self.group_of[k]]))
                .filter(|&(_, v)| v > tol)
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            match worst {
                Some((k, _)) => sgn[k] = -g[k].signum(),
                None => {
                    return (self.kkt_residual(&cand, mu) <= tol).then_some(cand);
                }
            }
        }
        None
    }
}

/// IRLS with exact piece polishing for the restricted squared-penalty problem.
/// The returned `x_hat` is zero-extended to the ambient dimension.
pub fn irls_restricted_solve(
    problem: &RegressionProblem,
    view: &RestrictedView,
    mu: f64,
    config: &SolverConfig,
) -> Result<SolveReport> {
    irls_restricted_from(problem, view, mu, config, None)
}

/// As [`irls_restricted_solve`], starting the weights from `x0` (local coordinates).
pub fn irls_restricted_from(
    problem: &RegressionProblem,
    view: &RestrictedView,
    mu: f64,
    config: &SolverConfig,
    x0: Option<&[f64]>,
) -> Result<SolveReport> {
    config.validate()?;
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    if view.is_empty() {
        return Err(Error::InvalidArgument("restricted support is empty".into()));
    }
    check_len(problem.p(), view.ambient_dim())?;
    let rp = Restricted::new(problem, view);
    let m = view.len();

    let mut x = match x0 {
        Some(x0) => {
            check_len(m, x0.len())?;
            DVector::from_column_slice(x0)
        }
        None => {
            // Ridge start: (G + μ I) x = b.
            let mut sys = rp.gram.clone();
            for i in 0..m {
                sys[(i, i)] += mu + JITTER;
            }
            sys.cholesky()
                .ok_or_else(|| Error::Singular("ridge start".into()))?
                .solve(&rp.rhs)
        }
    };

    let mut eps = EPS_START;
    let mut converged = false;
    let mut iterations = 0;
    if let Some(p) = rp.polish(&x, mu, config.obj_tol) {
        x = p;
        converged = true;
    }
    while !converged && iterations < config.max_iter {
        iterations += 1;
        x = rp.irls_step(&x, mu, eps)?;
        if iterations % 10 == 0 {
            eps *= 0.1;
        }
        if let Some(p) = rp.polish(&x, mu, config.obj_tol) {
            x = p;
            converged = true;
        } else if rp.kkt_residual(&x, mu) <= config.obj_tol {
            converged = true;
        }
    }
    let objective = rp.objective(problem, view, &x, mu);
    if !objective.is_finite() {
        return Err(Error::NonFinite("objective"));
    }
    Ok(SolveReport {
        x_hat: view.extend(x.as_slice()),
        objective,
        iterations,
        duality_gap: Some(rp.gap(&x, mu)),
        converged,
    })
}

/// KKT residual of a zero-extended restricted solution.
pub fn restricted_kkt_residual(
    problem: &RegressionProblem,
    view: &RestrictedView,
    x_hat: &[f64],
    mu: f64,
) -> Result<f64> {
    check_len(problem.p(), x_hat.len())?;
    let rp = Restricted::new(problem, view);
    Ok(rp.kkt_residual(&DVector::from_vec(view.gather(x_hat)), mu))
}
