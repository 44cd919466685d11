use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};

/// Linear operator `x ↦ Ax` with its adjoint.
pub trait LinearModel: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_adjoint(&self, r: &[f64]) -> Vec<f64>;
}

impl LinearModel for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = DVector::zeros(self.nrows());
        out.gemv(1.0, self, &DVector::from_column_slice(x), 0.0);
        out.data.into()
    }

    fn apply_adjoint(&self, r: &[f64]) -> Vec<f64> {
        let mut out = DVector::zeros(self.ncols());
        out.gemv_tr(1.0, self, &DVector::from_column_slice(r), 0.0);
        out.data.into()
    }
}

/// `L(x) = ‖y − Ax‖² / (2n)` over any linear model.
pub struct LeastSquares<'a, M: LinearModel + ?Sized> {
    pub model: &'a M,
    pub y: &'a [f64],
}

impl<'a, M: LinearModel + ?Sized> LeastSquares<'a, M> {
    pub fn new(model: &'a M, y: &'a [f64]) -> Result<Self> {
        check_len(model.nrows(), y.len())?;
        Ok(Self { model, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.model.ncols()
    }

    /// `y − Ax`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let ax = self.model.apply(x);
        self.y.iter().zip(ax).map(|(y, a)| y - a).collect()
    }

    pub fn value_from_residual(&self, r: &[f64]) -> f64 {
        r.iter().map(|v| v * v).sum::<f64>() / (2.0 * self.n() as f64)
    }

    /// `∇L = Aᵀ(Ax − y)/n` from a residual `y − Ax`.
    pub fn gradient_from_residual(&self, r: &[f64]) -> Vec<f64> {
        let n = self.n() as f64;
        self.model.apply_adjoint(r).into_iter().map(|v| -v / n).collect()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.value_from_residual(&self.residual(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.gradient_from_residual(&self.residual(x))
    }

    /// Upper bound on the largest eigenvalue of `AᵀA/n` by power iteration.
    pub fn lipschitz(&self) -> Result<f64> {
        power_lipschitz(self.model, self.n())
    }
}

const LIPSCHITZ_SAFETY: f64 = 1.0 + 1e-6;

fn power_lipschitz<M: LinearModel + ?Sized>(model: &M, n: usize) -> Result<f64> {
    let p = model.ncols();
    let mut v: Vec<f64> = (0..p).map(|i| 1.0 + (i % 7) as f64 / 7.0).collect();
    normalize(&mut v);
    let mut est = 0.0;
    for _ in 0..10_000 {
        let w = model.apply_adjoint(&model.apply(&v));
        let rq: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("design matrix is zero".into()));
        }
        v = w.into_iter().map(|a| a / norm).collect();
        let done = (rq - est).abs() <= 1e-13 * rq;
        est = rq;
        if done {
            break;
        }
    }
    // vᵀMv ≤ ‖Mv‖ ≤ λ_max for unit v; take the tighter of the two.
    let w = model.apply_adjoint(&model.apply(&v));
    let bound = w.iter().map(|a| a * a).sum::<f64>().sqrt() / n as f64;
    Ok(est.max(bound) * LIPSCHITZ_SAFETY)
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
}

/// Design, observations and optional ground truth of a linear regression.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub a: DMatrix<f64>,
    pub y: Vec<f64>,
    pub x_true: Option<Vec<f64>>,
    pub noise_sigma2: Option<f64>,
}

impl RegressionProblem {
    pub fn new(a: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::InvalidArgument("design must have n ≥ 1 and p ≥ 1".into()));
        }
        check_len(a.nrows(), y.len())?;
        Ok(Self { a, y, x_true: None, noise_sigma2: None })
    }

    pub fn with_truth(mut self, x_true: Vec<f64>, noise_sigma2: f64) -> Result<Self> {
        check_len(self.p(), x_true.len())?;
        self.x_true = Some(x_true);
        self.noise_sigma2 = Some(noise_sigma2);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn p(&self) -> usize {
        self.a.ncols()
    }

    pub fn loss(&self) -> LeastSquares<'_, DMatrix<f64>> {
        LeastSquares { model: &self.a, y: &self.y }
    }

    /// Columns of `A` indexed by `support`.
    pub fn columns(&self, support: &[usize]) -> DMatrix<f64> {
        self.a.select_columns(support)
    }

    /// The problem restricted to the columns in `support`.
    pub fn restricted(&self, support: &[usize]) -> Result<RegressionProblem> {
        RegressionProblem::new(self.columns(support), self.y.clone())
    }

    /// Reads the text format: `n p`, then `y` on one line, then `A` row by row,
    /// then optionally `truth sigma2 x*_1 .. x*_p`.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let parse_row = |lineno: usize, line: &str, len: usize| -> Result<Vec<f64>> {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line: lineno + 1, msg: e.to_string() })?;
            if row.len() != len {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected {len} values, found {}", row.len()),
                });
            }
            Ok(row)
        };
        let (l0, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: l0 + 1, msg: e.to_string() })?;
        let [n, p] = dims[..] else {
            return Err(Error::Parse { line: l0 + 1, msg: "header must be `n p`".into() });
        };
        let (ly, yline) = lines.next().ok_or(Error::Parse { line: l0 + 2, msg: "missing y".into() })?;
        let y = parse_row(ly, yline, n)?;
        let mut data = Vec::with_capacity(n * p);
        for k in 0..n {
            let (lr, row) = lines.next().ok_or(Error::Parse {
                line: ly + 2 + k,
                msg: "missing matrix row".into(),
            })?;
            data.extend(parse_row(lr, row, p)?);
        }
        let mut problem = Self::new(DMatrix::from_row_slice(n, p, &data), y)?;
        if let Some((lt, line)) = lines.next() {
            let Some(rest) = line.trim_start().strip_prefix("truth") else {
                return Err(Error::Parse { line: lt + 1, msg: "trailing data".into() });
            };
            let mut values = parse_row(lt, rest, p + 1)?;
            let sigma2 = values.remove(0);
            problem = problem.with_truth(values, sigma2)?;
        }
        if let Some((l, _)) = lines.next() {
            return Err(Error::Parse { line: l + 1, msg: "trailing data".into() });
        }
        Ok(problem)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n(), self.p());
        let _ = writeln!(out, "{}", join_g17(self.y.iter().copied()));
        for row in self.a.row_iter() {
            let _ = writeln!(out, "{}", join_g17(row.iter().copied()));
        }
        if let Some(x) = &self.x_true {
            let sigma2 = self.noise_sigma2.unwrap_or(0.0);
            let _ = writeln!(out, "truth {}", join_g17(std::iter::once(sigma2).chain(x.iter().copied())));
        }
        out
    }
}

/// Formats with 17 significant digits.
pub fn fmt_g17(v: f64) -> String {
    format!("{v:.16e}")
}

fn join_g17(values: impl Iterator<Item = f64>) -> String {
    values.map(fmt_g17).collect::<Vec<_>>().join(" ")
}

pub fn ls_loss(problem: &RegressionProblem, x: &[f64]) -> Result<f64> {
    check_len(problem.p(), x.len())?;
    Ok(problem.loss().value(x))
}

pub fn ls_grad(problem: &RegressionProblem, x: &[f64]) -> Result<Vec<f64>> {
    check_len(problem.p(), x.len())?;
    Ok(problem.loss().gradient(x))
}

/// Upper bound on `σ_max(A)² / n`.
pub fn lipschitz_constant(problem: &RegressionProblem) -> Result<f64> {
    problem.loss().lipschitz()
}
