//! C ABI over the exclasso library.
//!
//! Partitions and problems are opaque handles created by `*_new` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`ExclStatus`] and writes results through caller-provided pointers.
//! Panics never cross the boundary; they are reported as `EXCL_STATUS_PANIC`.

use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use exclasso::active_set::{active_set_solve, ActiveSetConfig, EvolutionMode};
use exclasso::partition::{omega, omega_dual, GroupPartition};
use exclasso::prox::prox_scaled;
use exclasso::solvers::{fista_solve, RegressionProblem, SolverConfig};
use exclasso::Error;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExclStatus {
    Ok = 0,
    NullPointer = 1,
    DimensionMismatch = 2,
    InvalidArgument = 3,
    SolverFailure = 4,
    Panic = 5,
}

impl From<Error> for ExclStatus {
    fn from(e: Error) -> Self {
        match e {
            Error::DimensionMismatch { .. } => ExclStatus::DimensionMismatch,
            Error::NoConvergence { .. } | Error::Singular(_) | Error::NonFinite(_) => ExclStatus::SolverFailure,
            _ => ExclStatus::InvalidArgument,
        }
    }
}

/// Opaque partition handle.
pub struct ExclPartition(GroupPartition);

/// Opaque regression problem handle.
pub struct ExclProblem(RegressionProblem);

/// Summary of a solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExclSolveInfo {
    pub objective: f64,
    pub iterations: usize,
    /// Negative when no gap is available.
    pub duality_gap: f64,
    pub converged: bool,
}

fn guard(f: impl FnOnce() -> Result<(), ExclStatus>) -> ExclStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ExclStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => ExclStatus::Panic,
    }
}

unsafe fn input<'a>(ptr: *const f64, len: usize) -> Result<&'a [f64], ExclStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(ExclStatus::NullPointer);
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a>(ptr: *mut f64, len: usize) -> Result<&'a mut [f64], ExclStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(ExclStatus::NullPointer);
    }
    Ok(slice::from_raw_parts_mut(ptr, len))
}

unsafe fn handle<'a, T>(ptr: *const T) -> Result<&'a T, ExclStatus> {
    ptr.as_ref().ok_or(ExclStatus::NullPointer)
}

unsafe fn write<T>(ptr: *mut T, value: T) -> Result<(), ExclStatus> {
    if ptr.is_null() {
        return Err(ExclStatus::NullPointer);
    }
    ptr.write(value);
    Ok(())
}

fn check_len(expected: usize, got: usize) -> Result<(), ExclStatus> {
    if expected == got {
        Ok(())
    } else {
        Err(ExclStatus::DimensionMismatch)
    }
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn excl_status_message(status: ExclStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        ExclStatus::Ok => b"ok\0",
        ExclStatus::NullPointer => b"null pointer\0",
        ExclStatus::DimensionMismatch => b"dimension mismatch\0",
        ExclStatus::InvalidArgument => b"invalid argument\0",
        ExclStatus::SolverFailure => b"solver failure\0",
        ExclStatus::Panic => b"internal panic\0",
    };
    s.as_ptr().cast()
}

/// Partition from 0-based group labels, one per coordinate. Labels must
/// cover `0..k` without gaps.
///
/// # Safety
/// `labels` must point to `p` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn excl_partition_new(
    p: usize,
    labels: *const usize,
    out: *mut *mut ExclPartition,
) -> ExclStatus {
    guard(|| {
        if labels.is_null() || out.is_null() {
            return Err(ExclStatus::NullPointer);
        }
        let labels = slice::from_raw_parts(labels, p);
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut groups = vec![Vec::new(); k];
        for (i, &g) in labels.iter().enumerate() {
            groups[g].push(i);
        }
        let part = GroupPartition::new(p, groups)?;
        write(out, Box::into_raw(Box::new(ExclPartition(part))))
    })
}

/// Partition into the residue classes `{i : i mod k = r}`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn excl_partition_modulo(p: usize, k: usize, out: *mut *mut ExclPartition) -> ExclStatus {
    guard(|| {
        let part = GroupPartition::modulo(p, k)?;
        write(out, Box::into_raw(Box::new(ExclPartition(part))))
    })
}

/// # Safety
/// `part` must come from a partition constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn excl_partition_free(part: *mut ExclPartition) {
    if !part.is_null() {
        drop(Box::from_raw(part));
    }
}

/// Number of coordinates, or 0 for a null handle.
///
/// # Safety
/// `part` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn excl_partition_dim(part: *const ExclPartition) -> usize {
    part.as_ref().map_or(0, |p| p.0.p())
}

/// # Safety
/// `x` must point to `len` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn excl_omega(
    part: *const ExclPartition,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> ExclStatus {
    guard(|| {
        let part = handle(part)?;
        let v = omega(input(x, len)?, &part.0)?;
        write(out, v)
    })
}

/// # Safety
/// As [`excl_omega`].
#[no_mangle]
pub unsafe extern "C" fn excl_omega_dual(
    part: *const ExclPartition,
    u: *const f64,
    len: usize,
    out: *mut f64,
) -> ExclStatus {
    guard(|| {
        let part = handle(part)?;
        let v = omega_dual(input(u, len)?, &part.0)?;
        write(out, v)
    })
}

/// Prox of `scale · Ω`. Writes the prox into `z` and `x − z` into
/// `projection` (may be null).
///
/// # Safety
/// `x`, `z` and a non-null `projection` must each hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn excl_prox(
    part: *const ExclPartition,
    x: *const f64,
    len: usize,
    scale: f64,
    z: *mut f64,
    projection: *mut f64,
) -> ExclStatus {
    guard(|| {
        let part = handle(part)?;
        let x = input(x, len)?;
        let res = prox_scaled(x, scale, &part.0)?;
        output(z, len)?.copy_from_slice(&res.z);
        if !projection.is_null() {
            output(projection, len)?.copy_from_slice(&res.projection);
        }
        Ok(())
    })
}

/// Least-squares problem `(1/2n)‖y − Ax‖²` with `A` given row-major.
///
/// # Safety
/// `a` must hold `n·p` values and `y` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn excl_problem_new(
    n: usize,
    p: usize,
    a: *const f64,
    y: *const f64,
    out: *mut *mut ExclProblem,
) -> ExclStatus {
    guard(|| {
        let len = n.checked_mul(p).ok_or(ExclStatus::InvalidArgument)?;
        let a = DMatrix::from_row_slice(n, p, input(a, len)?);
        let problem = RegressionProblem::new(a, input(y, n)?.to_vec())?;
        write(out, Box::into_raw(Box::new(ExclProblem(problem))))
    })
}

/// # Safety
/// `problem` must come from [`excl_problem_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn excl_problem_free(problem: *mut ExclProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Proximal gradient solve of `L(x) + λ Ω(x)` from zero.
///
/// # Safety
/// `x_out` must hold `len` values; `info` may be null.
#[no_mangle]
pub unsafe extern "C" fn excl_fista_solve(
    problem: *const ExclProblem,
    part: *const ExclPartition,
    lambda: f64,
    max_iter: usize,
    gap_tol: f64,
    x_out: *mut f64,
    len: usize,
    info: *mut ExclSolveInfo,
) -> ExclStatus {
    guard(|| {
        let (problem, part) = (handle(problem)?, handle(part)?);
        check_len(problem.0.p(), len)?;
        let config = SolverConfig { max_iter, obj_tol: 1e-10, gap_tol };
        config.validate()?;
        let rep = fista_solve(&problem.0, &part.0, lambda, &config)?;
        output(x_out, len)?.copy_from_slice(&rep.x_hat);
        if !info.is_null() {
            info.write(ExclSolveInfo {
                objective: rep.objective,
                iterations: rep.iterations,
                duality_gap: rep.duality_gap.unwrap_or(-1.0),
                converged: rep.converged,
            });
        }
        Ok(())
    })
}

/// Forward active-set solve of `L(x) + (μ/2) Ω(x)²`. `max_strings = 0`
/// selects the unrestricted evolution path.
///
/// # Safety
/// As [`excl_fista_solve`].
#[no_mangle]
pub unsafe extern "C" fn excl_active_set_solve(
    problem: *const ExclProblem,
    part: *const ExclPartition,
    mu: f64,
    s_max: usize,
    epsilon: f64,
    max_strings: usize,
    x_out: *mut f64,
    len: usize,
    info: *mut ExclSolveInfo,
) -> ExclStatus {
    guard(|| {
        let (problem, part) = (handle(problem)?, handle(part)?);
        check_len(problem.0.p(), len)?;
        let mode = if max_strings == 0 {
            EvolutionMode::Plain
        } else {
            EvolutionMode::Strings { max_strings, wrap: true }
        };
        let out = active_set_solve(&problem.0, &part.0, &ActiveSetConfig::new(mu, s_max, epsilon, mode))?;
        output(x_out, len)?.copy_from_slice(&out.report.x_hat);
        if !info.is_null() {
            info.write(ExclSolveInfo {
                objective: out.report.objective,
                iterations: out.report.iterations,
                duality_gap: out.report.duality_gap.unwrap_or(-1.0),
                converged: out.report.converged,
            });
        }
        Ok(())
    })
}
