use nalgebra::DMatrix;

use super::fista::{fista_minimize, SolveReport, SolverConfig};
use super::penalty::{GroupL2, L1};
use super::problem::{LeastSquares, LinearModel, RegressionProblem};
use crate::error::{check_len, Error, Result};

/// `min L(x) + λ‖x‖₁` by FISTA.
pub fn classic_lasso_solve(
    problem: &RegressionProblem,
    lambda: f64,
    config: &SolverConfig,
) -> Result<SolveReport> {
    classic_lasso_from(problem, lambda, config, None)
}

pub fn classic_lasso_from(
    problem: &RegressionProblem,
    lambda: f64,
    config: &SolverConfig,
    x0: Option<&[f64]>,
) -> Result<SolveReport> {
    fista_minimize(&problem.loss(), &L1 { dim: problem.p() }, lambda, config, x0)
}

/// `min L(x) + λ Σ_H ‖x_H‖₂` over disjoint groups.
pub fn group_lasso_solve(
    problem: &RegressionProblem,
    groups: &[Vec<usize>],
    lambda: f64,
    config: &SolverConfig,
) -> Result<SolveReport> {
    let pen = GroupL2::new(problem.p(), groups.to_vec())?;
    fista_minimize(&problem.loss(), &pen, lambda, config, None)
}

/// Design with one copy of each column per latent group containing it.
/// Latent coordinates are stored group after group.
pub struct LatentDesign<'a> {
    a: &'a DMatrix<f64>,
    /// Ambient column of each latent coordinate.
    columns: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

impl<'a> LatentDesign<'a> {
    pub fn new(a: &'a DMatrix<f64>, groups: &[Vec<usize>]) -> Result<Self> {
        let p = a.ncols();
        let mut columns = Vec::new();
        let mut blocks = Vec::new();
        for g in groups {
            if g.is_empty() {
                return Err(Error::InvalidArgument("empty latent group".into()));
            }
            let start = columns.len();
            for &i in g {
                if i >= p {
                    return Err(Error::InvalidArgument(format!("latent index {} out of range", i + 1)));
                }
                columns.push(i);
            }
            blocks.push((start..columns.len()).collect());
        }
        Ok(Self { a, columns, blocks })
    }

    /// Ambient indices that belong to no latent group; they stay at zero.
    pub fn uncovered(&self) -> Vec<usize> {
        let mut covered = vec![false; self.a.ncols()];
        for &i in &self.columns {
            covered[i] = true;
        }
        (0..covered.len()).filter(|&i| !covered[i]).collect()
    }

    pub fn latent_dim(&self) -> usize {
        self.columns.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Sum of latent copies: `x_i = Σ_{H∋i} v_{H,i}`.
    pub fn collapse(&self, v: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.a.ncols()];
        for (k, &i) in self.columns.iter().enumerate() {
            x[i] += v[k];
        }
        x
    }
}

impl LinearModel for LatentDesign<'_> {
    fn nrows(&self) -> usize {
        self.a.nrows()
    }

    fn ncols(&self) -> usize {
        self.columns.len()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.a.apply(&self.collapse(v))
    }

    fn apply_adjoint(&self, r: &[f64]) -> Vec<f64> {
        let full = self.a.apply_adjoint(r);
        self.columns.iter().map(|&i| full[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentReport {
    /// `x_hat` is the collapsed estimate in the ambient space.
    pub report: SolveReport,
    pub latent: Vec<f64>,
    /// `Σ_H d_H ‖v_H‖₂` at the solution.
    pub penalty_value: f64,
    /// Group weight `d_H`, the same for every group.
    pub weight: f64,
}

/// Latent group Lasso with weights `d_H = 1`, solved in the duplicated space.
pub fn latent_group_lasso_solve(
    problem: &RegressionProblem,
    latent_groups: &[Vec<usize>],
    lambda: f64,
    config: &SolverConfig,
) -> Result<LatentReport> {
    latent_group_lasso_from(problem, latent_groups, lambda, config, None)
}

pub fn latent_group_lasso_from(
    problem: &RegressionProblem,
    latent_groups: &[Vec<usize>],
    lambda: f64,
    config: &SolverConfig,
    v0: Option<&[f64]>,
) -> Result<LatentReport> {
    let design = LatentDesign::new(&problem.a, latent_groups)?;
    if let Some(x) = &problem.x_true {
        check_len(problem.p(), x.len())?;
        for i in design.uncovered() {
            if x[i] != 0.0 {
                log::warn!("index {} of the true support is in no latent group", i + 1);
            }
        }
    }
    let pen = GroupL2::new(design.latent_dim(), design.blocks().to_vec())?;
    let loss = LeastSquares::new(&design, &problem.y)?;
    let rep = fista_minimize(&loss, &pen, lambda, config, v0)?;
    let penalty_value = super::penalty::Penalty::value(&pen, &rep.x_hat);
    let x_hat = design.collapse(&rep.x_hat);
    Ok(LatentReport {
        latent: rep.x_hat,
        penalty_value,
        weight: 1.0,
        report: SolveReport { x_hat, ..rep },
    })
}

/// `p` windows of `width` consecutive indices, wrapping around modulo `p`.
pub fn cyclic_windows(p: usize, width: usize) -> Vec<Vec<usize>> {
    (0..p).map(|s| (0..width.min(p)).map(|k| (s + k) % p).collect()).collect()
}
