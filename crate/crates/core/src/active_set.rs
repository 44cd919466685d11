//! Greedy forward active-set method for `min L(x) + (μ/2) Ω(x)²`.
//!
//! The support grows one index at a time. Each step re-solves the problem
//! restricted to the support and checks two optimality tests on the full
//! gradient: a necessary one on per-group gradient ratios and a sufficient one
//! that bounds the duality gap of the zero-extended solution.

use std::fmt;

use crate::error::{check_len, Error, Result};
use crate::partition::{omega, GroupPartition};
use crate::solvers::{duality_gap, irls_restricted_from, RegressionProblem, Regularizer, SolveReport, SolverConfig};

/// Which supports the method may move to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvolutionMode {
    /// Any addition of at most one index per group.
    Plain,
    /// Supports stay a union of at most `max_strings` contiguous runs.
    Strings { max_strings: usize, wrap: bool },
}

impl EvolutionMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            EvolutionMode::Strings { max_strings: 0, .. } => {
                Err(Error::InvalidArgument("max_strings must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Current support, restricted solution and its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportState {
    pub support: Vec<usize>,
    pub x_hat: Vec<f64>,
    pub grad: Vec<f64>,
    /// Duality gap of `x_hat` for the full squared-penalty problem.
    pub gap: f64,
}

impl SupportState {
    /// State at the empty support.
    pub fn empty(problem: &RegressionProblem, part: &GroupPartition, mu: f64) -> Result<Self> {
        Self::new(problem, part, Vec::new(), vec![0.0; problem.p()], mu)
    }

    pub fn new(
        problem: &RegressionProblem,
        part: &GroupPartition,
        mut support: Vec<usize>,
        x_hat: Vec<f64>,
        mu: f64,
    ) -> Result<Self> {
        check_len(problem.p(), x_hat.len())?;
        support.sort_unstable();
        support.dedup();
        let grad = problem.loss().gradient(&x_hat);
        let gap = duality_gap(problem, part, &x_hat, Regularizer::Squared(mu))?;
        Ok(Self { support, x_hat, grad, gap })
    }

    fn membership(&self, p: usize) -> Vec<bool> {
        let mut m = vec![false; p];
        for &i in &self.support {
            m[i] = true;
        }
        m
    }
}

/// Number of maximal runs of consecutive indices in `in_j`.
fn count_runs(in_j: &[bool], wrap: bool) -> usize {
    let p = in_j.len();
    let starts = (0..p)
        .filter(|&i| {
            in_j[i]
                && if i == 0 {
                    !(wrap && in_j[p - 1])
                } else {
                    !in_j[i - 1]
                }
        })
        .count();
    if starts == 0 && in_j.iter().any(|&b| b) {
        1
    } else {
        starts
    }
}

/// Indices outside the support that a single step may add.
pub fn allowed_additions(support: &[usize], p: usize, mode: EvolutionMode) -> Vec<bool> {
    let mut in_j = vec![false; p];
    for &i in support {
        in_j[i] = true;
    }
    match mode {
        EvolutionMode::Plain => in_j.iter().map(|b| !b).collect(),
        EvolutionMode::Strings { max_strings, wrap } => {
            let can_open = count_runs(&in_j, wrap) < max_strings;
            (0..p)
                .map(|i| {
                    if in_j[i] {
                        return false;
                    }
                    let left = if i > 0 { Some(i - 1) } else if wrap { Some(p - 1) } else { None };
                    let right = if i + 1 < p { Some(i + 1) } else if wrap { Some(0) } else { None };
                    can_open
                        || left.is_some_and(|k| in_j[k])
                        || right.is_some_and(|k| in_j[k])
                })
                .collect()
        }
    }
}

const MAX_CANDIDATES: usize = 1 << 20;

/// One-step successors of the support, as sorted sets of added indices.
///
/// Plain mode adds at most one index per group, and every group must be met
/// by the enlarged support. Strings mode adds a single index that extends a
/// run or opens a new one. The plain enumeration is exponential in the number
/// of groups and fails beyond 2²⁰ candidates.
pub fn evolution_candidates(
    support: &[usize],
    part: &GroupPartition,
    mode: EvolutionMode,
) -> Result<Vec<Vec<usize>>> {
    mode.validate()?;
    let p = part.p();
    let allowed = allowed_additions(support, p, mode);
    match mode {
        EvolutionMode::Strings { .. } => Ok((0..p).filter(|&i| allowed[i]).map(|i| vec![i]).collect()),
        EvolutionMode::Plain => {
            let mut in_j = vec![false; p];
            for &i in support {
                in_j[i] = true;
            }
            // Per group: the free indices and whether the group may be skipped.
            let choices: Vec<(Vec<usize>, bool)> = part
                .groups()
                .iter()
                .map(|g| {
                    let free: Vec<usize> = g.iter().copied().filter(|&i| !in_j[i]).collect();
                    let met = g.iter().any(|&i| in_j[i]);
                    (free.clone(), met || free.is_empty())
                })
                .collect();
            let total = choices.iter().try_fold(1usize, |acc, (free, skip)| {
                acc.checked_mul(free.len() + usize::from(*skip))
            });
            match total {
                Some(t) if t <= MAX_CANDIDATES => {}
                _ => {
                    return Err(Error::InvalidArgument(
                        "too many plain-mode candidates to enumerate".into(),
                    ))
                }
            }
            let mut out: Vec<Vec<usize>> = vec![Vec::new()];
            for (free, skip) in &choices {
                let mut next = Vec::new();
                for partial in &out {
                    if *skip {
                        next.push(partial.clone());
                    }
                    for &i in free {
                        let mut s = partial.clone();
                        s.push(i);
                        next.push(s);
                    }
                }
                out = next;
            }
            out.retain(|s| !s.is_empty());
            for s in &mut out {
                s.sort_unstable();
            }
            out.sort();
            Ok(out)
        }
    }
}

/// A group that fails the necessary condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Violator {
    pub group: usize,
    /// Index with the largest gradient magnitude among the group's addable entries.
    pub index: usize,
    /// Gradient ratio `‖∇L_{G∖J}‖∞ / ‖x̂_{G∩J}‖₁` for active groups,
    /// `‖∇L_G‖∞` for inactive ones.
    pub score: f64,
    /// Violation in gradient units; groups are ranked by it.
    pub excess: f64,
    pub active_group: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NecessaryReport {
    pub pass: bool,
    pub worst: Option<Violator>,
    /// Largest ratio over active groups (`0` if none has addable entries).
    pub max_active_ratio: f64,
    /// Largest addable gradient magnitude over inactive groups.
    pub max_inactive_grad: f64,
}

/// Relative slack on the ratio test.
const RATIO_SLACK: f64 = 1e-9;

/// Necessary optimality test for the zero-extended restricted solution.
///
/// An active group passes when its largest addable gradient entry is at most
/// `μ ‖x̂_{G∩J}‖₁`; an inactive group passes when its largest addable gradient
/// entry is at most `zero_tol`.
pub fn necessary_condition(
    state: &SupportState,
    part: &GroupPartition,
    mode: EvolutionMode,
    mu: f64,
    zero_tol: f64,
) -> Result<NecessaryReport> {
    check_len(part.p(), state.grad.len())?;
    mode.validate()?;
    let in_j = state.membership(part.p());
    let allowed = allowed_additions(&state.support, part.p(), mode);
    let mut worst: Option<Violator> = None;
    let mut max_active_ratio = 0.0_f64;
    let mut max_inactive_grad = 0.0_f64;
    for (g, members) in part.groups().iter().enumerate() {
        let Some(index) = argmax_abs(&state.grad, members.iter().copied().filter(|&i| allowed[i])) else {
            continue;
        };
        let m = state.grad[index].abs();
        let c: f64 = members.iter().filter(|&&i| in_j[i]).map(|&i| state.x_hat[i].abs()).sum();
        let active = members.iter().any(|&i| in_j[i]);
        let (score, excess, violated) = if active {
            let ratio = if c > 0.0 { m / c } else { f64::INFINITY };
            max_active_ratio = max_active_ratio.max(ratio);
            (ratio, m - mu * c, ratio > mu * (1.0 + RATIO_SLACK))
        } else {
            max_inactive_grad = max_inactive_grad.max(m);
            (m, m - zero_tol, m > zero_tol)
        };
        if violated && worst.as_ref().is_none_or(|w| excess > w.excess) {
            worst = Some(Violator { group: g, index, score, excess, active_group: active });
        }
    }
    Ok(NecessaryReport { pass: worst.is_none(), worst, max_active_ratio, max_inactive_grad })
}

fn argmax_abs(v: &[f64], idx: impl Iterator<Item = usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in idx {
        if best.is_none_or(|b| v[i].abs() > v[b].abs() || (v[i].abs() == v[b].abs() && i < b)) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct SufficientReport {
    pub pass: bool,
    /// Gap bound `Σ_G term_G / (2μ)` certified by the per-group test.
    pub certified_gap: f64,
    /// `Σ_{G active} ‖∇L_{G∖J}‖∞²`.
    pub active_off_sum: f64,
    /// `Σ_{G inactive} ‖∇L_G‖∞²`.
    pub inactive_sum: f64,
    /// `2με + μ² Ω(x̂)²`, the common right-hand side of the aggregate form.
    pub aggregate_rhs: f64,
    /// Whether both aggregate sums are at most `aggregate_rhs`.
    pub aggregate_pass: bool,
}

/// Sufficient test: the zero-extended restricted optimum is `ε`-optimal.
///
/// At a restricted optimum the gap equals `(Ω*(u)² − Ω*_J(u_J)²)/(2μ)` with
/// `u = ∇L(x̂)`. Per group that is `max(0, ‖u_{G∖J}‖∞² − ‖u_{G∩J}‖∞²)` for
/// active groups and `‖u_G‖∞²` for inactive ones, and the test passes when the
/// sum is at most `2με`. The aggregate sums are reported alongside.
pub fn sufficient_condition(
    state: &SupportState,
    part: &GroupPartition,
    mu: f64,
    epsilon: f64,
) -> Result<SufficientReport> {
    check_len(part.p(), state.grad.len())?;
    let in_j = state.membership(part.p());
    let u = &state.grad;
    let mut terms = 0.0;
    let mut active_off_sum = 0.0;
    let mut inactive_sum = 0.0;
    for members in part.groups() {
        let mut on = 0.0_f64;
        let mut off = 0.0_f64;
        let mut active = false;
        for &i in members {
            if in_j[i] {
                active = true;
                on = on.max(u[i].abs());
            } else {
                off = off.max(u[i].abs());
            }
        }
        if active {
            active_off_sum += off * off;
            terms += (off * off - on * on).max(0.0);
        } else {
            inactive_sum += off * off;
            terms += off * off;
        }
    }
    let om = omega(&state.x_hat, part)?;
    let aggregate_rhs = 2.0 * mu * epsilon + mu * mu * om * om;
    Ok(SufficientReport {
        pass: terms <= 2.0 * mu * epsilon,
        certified_gap: terms / (2.0 * mu),
        active_off_sum,
        inactive_sum,
        aggregate_rhs,
        aggregate_pass: active_off_sum <= aggregate_rhs && inactive_sum <= aggregate_rhs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveSetConfig {
    pub mu: f64,
    pub s_max: usize,
    pub epsilon: f64,
    pub mode: EvolutionMode,
    pub restricted: SolverConfig,
}

impl ActiveSetConfig {
    pub fn new(mu: f64, s_max: usize, epsilon: f64, mode: EvolutionMode) -> Self {
        Self {
            mu,
            s_max,
            epsilon,
            mode,
            restricted: SolverConfig { max_iter: 500, obj_tol: 1e-12, gap_tol: 1e-12 },
        }
    }

    /// Threshold on inactive-group gradients, `√(2με)`.
    pub fn zero_tol(&self) -> f64 {
        (2.0 * self.mu * self.epsilon).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Necessary,
    Sufficient,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Necessary => "necessary",
            Phase::Sufficient => "sufficient",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub support_size: usize,
    pub added: usize,
    pub phase: Phase,
    pub gap: f64,
}

impl fmt::Display for TraceEntry {
    /// `iteration |J| added(1-based) phase gap`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {:.16e}",
            self.iteration,
            self.support_size,
            self.added + 1,
            self.phase,
            self.gap
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSetOutcome {
    pub state: SupportState,
    pub report: SolveReport,
    pub trace: Vec<TraceEntry>,
    pub necessary_passed: bool,
}

fn add_and_resolve(
    problem: &RegressionProblem,
    part: &GroupPartition,
    state: &SupportState,
    index: usize,
    config: &ActiveSetConfig,
) -> Result<SupportState> {
    let mut support = state.support.clone();
    support.push(index);
    support.sort_unstable();
    let mut warm = state.x_hat.clone();
    warm[index] = -state.grad[index].signum() * 1e-6;
    let view = part.restrict(&support)?;
    let rep = irls_restricted_from(problem, &view, config.mu, &config.restricted, Some(&view.gather(&warm)))?;
    if !rep.converged {
        log::warn!("restricted solve on {} indices did not converge", support.len());
    }
    SupportState::new(problem, part, support, rep.x_hat, config.mu)
}

/// Runs the two-phase forward method from the empty support.
pub fn active_set_solve(
    problem: &RegressionProblem,
    part: &GroupPartition,
    config: &ActiveSetConfig,
) -> Result<ActiveSetOutcome> {
    let mu = config.mu;
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    if !(config.epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    if config.s_max == 0 || config.s_max > part.p() {
        return Err(Error::InvalidArgument(format!("s_max must lie in 1..={}", part.p())));
    }
    check_len(problem.p(), part.p())?;
    config.mode.validate()?;
    config.restricted.validate()?;

    let zero_tol = config.zero_tol();
    let mut state = SupportState::empty(problem, part, mu)?;
    let mut trace = Vec::new();
    let mut necessary_passed = false;

    while state.support.len() < config.s_max {
        let nec = necessary_condition(&state, part, config.mode, mu, zero_tol)?;
        let Some(v) = nec.worst else {
            necessary_passed = true;
            break;
        };
        state = add_and_resolve(problem, part, &state, v.index, config)?;
        trace.push(TraceEntry {
            iteration: trace.len() + 1,
            support_size: state.support.len(),
            added: v.index,
            phase: Phase::Necessary,
            gap: state.gap,
        });
    }
    if !necessary_passed {
        necessary_passed = necessary_condition(&state, part, config.mode, mu, zero_tol)?.pass;
    }

    let mut sufficient = sufficient_condition(&state, part, mu, config.epsilon)?.pass;
    if necessary_passed {
        while !sufficient && state.support.len() < config.s_max {
            let allowed = allowed_additions(&state.support, part.p(), config.mode);
            let Some(index) = argmax_abs(&state.grad, (0..part.p()).filter(|&i| allowed[i])) else {
                break;
            };
            state = add_and_resolve(problem, part, &state, index, config)?;
            trace.push(TraceEntry {
                iteration: trace.len() + 1,
                support_size: state.support.len(),
                added: index,
                phase: Phase::Sufficient,
                gap: state.gap,
            });
            sufficient = sufficient_condition(&state, part, mu, config.epsilon)?.pass;
        }
    }

    let om = omega(&state.x_hat, part)?;
    let objective = problem.loss().value(&state.x_hat) + 0.5 * mu * om * om;
    let report = SolveReport {
        x_hat: state.x_hat.clone(),
        objective,
        iterations: trace.len(),
        duality_gap: Some(state.gap),
        converged: sufficient,
    };
    Ok(ActiveSetOutcome { state, report, trace, necessary_passed })
}
