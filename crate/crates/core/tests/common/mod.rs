#![allow(dead_code)]

use exclasso::bench::TrialRng;
use exclasso::active_set::{evolution_candidates, EvolutionMode, SupportState};
use exclasso::partition::{canonical_subgradient, omega, omega_dual, GroupPartition};
use exclasso::solvers::{irls_restricted_solve, RegressionProblem, SolverConfig};
use nalgebra::DMatrix;

pub fn rng(seed: u64, stream: u64) -> TrialRng {
    TrialRng::new(seed, stream)
}

/// Uniform integer in `lo..=hi`.
pub fn int(rng: &mut TrialRng, lo: usize, hi: usize) -> usize {
    lo + ((rng.uniform() * (hi - lo + 1) as f64) as usize).min(hi - lo)
}

/// Random partition of `0..p` into `k` nonempty groups.
pub fn random_partition(rng: &mut TrialRng, p: usize, k: usize) -> GroupPartition {
    let mut groups = vec![Vec::new(); k];
    for i in 0..p {
        let g = if i < k { i } else { int(rng, 0, k - 1) };
        groups[g].push(i);
    }
    GroupPartition::new(p, groups).unwrap()
}

pub fn gaussian_vec(rng: &mut TrialRng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| scale * rng.normal()).collect()
}

pub fn gaussian_problem(rng: &mut TrialRng, n: usize, p: usize) -> RegressionProblem {
    let a = DMatrix::from_fn(n, p, |_, _| rng.normal());
    let y = gaussian_vec(rng, n, 1.0);
    RegressionProblem::new(a, y).unwrap()
}

/// Sparse-truth problem: `y = A x* + σ w` with `x*` of the given support.
pub fn planted_problem(rng: &mut TrialRng, n: usize, p: usize, support: &[usize], sigma: f64) -> RegressionProblem {
    let a = DMatrix::from_fn(n, p, |_, _| rng.normal());
    let mut x = vec![0.0; p];
    for &i in support {
        let s = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
        x[i] = s * (0.5 + rng.uniform());
    }
    let ax = &a * nalgebra::DVector::from_column_slice(&x);
    let y: Vec<f64> = ax.iter().map(|v| v + sigma * rng.normal()).collect();
    RegressionProblem::new(a, y).unwrap().with_truth(x, sigma * sigma).unwrap()
}

pub fn prox_objective(z: &[f64], x: &[f64], part: &GroupPartition) -> f64 {
    let d: f64 = z.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
    0.5 * d + omega(z, part).unwrap()
}

/// Exact minimum of `½‖z − x‖² + Ω(z)` over the grid `h ℤ^p ∩ [−‖x‖∞, ‖x‖∞]^p`.
///
/// With `a = z_ref` and any `v ∈ ∂f(a)`, strong convexity gives
/// `f(g) ≥ f(a) − ½‖v‖² + ½‖g − (a − v)‖²`. Grid points outside the ball where
/// that bound exceeds a known grid value cannot be the minimum, so only the
/// ball is enumerated. The bound holds for any `a`, optimal or not.
pub fn grid_minimum(x: &[f64], part: &GroupPartition, z_ref: &[f64], h: f64) -> f64 {
    let p = x.len();
    let bound = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let kmax = (bound / h).floor() as i64;
    let f = |g: &[f64]| prox_objective(g, x, part);
    let om = omega(z_ref, part).unwrap();
    let u: Vec<f64> = if om > 0.0 {
        // Smallest-norm element of ∂f(a): free entries of ∂Ω(a) clamped toward x − a.
        let l1 = part.group_l1(z_ref);
        let sub = canonical_subgradient(z_ref, part).unwrap();
        (0..p)
            .map(|i| {
                if z_ref[i] != 0.0 {
                    sub[i]
                } else {
                    let c = l1[part.group_of(i)] / om;
                    (x[i] - z_ref[i]).clamp(-c, c)
                }
            })
            .collect()
    } else {
        let d = omega_dual(x, part).unwrap().max(1.0);
        x.iter().map(|v| v / d).collect()
    };
    let v: Vec<f64> = (0..p).map(|i| z_ref[i] - x[i] + u[i]).collect();
    let fa = f(z_ref);
    let vv: f64 = v.iter().map(|t| t * t).sum();
    let clamp = |k: i64| k.clamp(-kmax, kmax);

    // Upper bound from the 3^p grid neighbours of the rounded reference.
    let base: Vec<i64> = z_ref.iter().map(|&t| clamp((t / h).round() as i64)).collect();
    let mut best = f64::INFINITY;
    let mut idx = vec![-1i64; p];
    loop {
        let g: Vec<f64> = (0..p).map(|i| clamp(base[i] + idx[i]) as f64 * h).collect();
        best = best.min(f(&g));
        let mut d = 0;
        while d < p && idx[d] == 1 {
            idx[d] = -1;
            d += 1;
        }
        if d == p {
            break;
        }
        idx[d] += 1;
    }

    let c: Vec<f64> = (0..p).map(|i| z_ref[i] - v[i]).collect();
    let r2 = (2.0 * (best - fa) + vv).max(0.0) * (1.0 + 1e-9) + 1e-18;
    let r = r2.sqrt();
    let lo: Vec<i64> = c.iter().map(|&t| clamp(((t - r) / h).floor() as i64)).collect();
    let hi: Vec<i64> = c.iter().map(|&t| clamp(((t + r) / h).ceil() as i64)).collect();
    let mut k = lo.clone();
    loop {
        let g: Vec<f64> = k.iter().map(|&t| t as f64 * h).collect();
        let dist: f64 = g.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist <= r2 {
            best = best.min(f(&g));
        }
        let mut d = 0;
        while d < p && k[d] == hi[d] {
            k[d] = lo[d];
            d += 1;
        }
        if d == p {
            break;
        }
        k[d] += 1;
    }
    best
}

/// Threshold `t` solving `Σ_{i∈G} (|x_i| − t)₊ = η t` by bisection.
pub fn waterfill_threshold(x: &[f64], members: &[usize], eta: f64) -> f64 {
    let top = members.iter().fold(0.0f64, |m, &i| m.max(x[i].abs()));
    let excess = |t: f64| members.iter().map(|&i| (x[i].abs() - t).max(0.0)).sum::<f64>() - eta * t;
    let (mut lo, mut hi) = (0.0, top);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `Σ_G t_G(η)²`.
pub fn waterfill_sum(x: &[f64], part: &GroupPartition, eta: f64) -> f64 {
    part.groups()
        .iter()
        .map(|g| waterfill_threshold(x, g, eta).powi(2))
        .sum()
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = f(&xp);
        xp[i] = xi - h;
        let fm = f(&xp);
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Gap of `x` for `L + (μ/2)Ω²`, computed from scratch.
pub fn squared_gap(pb: &RegressionProblem, part: &GroupPartition, x: &[f64], mu: f64) -> f64 {
    let n = pb.n() as f64;
    let ax = &pb.a * nalgebra::DVector::from_column_slice(x);
    let r: Vec<f64> = pb.y.iter().zip(ax.iter()).map(|(y, v)| v - y).collect();
    let u: Vec<f64> = (0..pb.p()).map(|j| pb.a.column(j).iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / n).collect();
    let xu: f64 = x.iter().zip(&u).map(|(a, b)| a * b).sum();
    let om = part.groups().iter().map(|g| g.iter().map(|&i| x[i].abs()).sum::<f64>().powi(2)).sum::<f64>();
    let dn = part.groups().iter().map(|g| g.iter().fold(0.0f64, |m, &i| m.max(u[i].abs())).powi(2)).sum::<f64>();
    xu + 0.5 * mu * om + 0.5 * dn / mu
}

pub fn restricted_state(pb: &RegressionProblem, part: &GroupPartition, support: Vec<usize>, mu: f64) -> SupportState {
    if support.is_empty() {
        return SupportState::empty(pb, part, mu).unwrap();
    }
    let view = part.restrict(&support).unwrap();
    let cfg = SolverConfig { max_iter: 1000, obj_tol: 1e-12, gap_tol: 1e-12 };
    let rep = irls_restricted_solve(pb, &view, mu, &cfg).unwrap();
    SupportState::new(pb, part, support, rep.x_hat, mu).unwrap()
}

/// Plain-mode necessary test by enumerating every successor support.
pub fn exhaustive_necessary(state: &SupportState, part: &GroupPartition, mu: f64, zero_tol: f64) -> bool {
    let cands = evolution_candidates(&state.support, part, EvolutionMode::Plain).unwrap();
    let in_j: Vec<bool> = (0..part.p()).map(|i| state.support.contains(&i)).collect();
    for added in cands {
        for members in part.groups() {
            let new: Vec<usize> = members.iter().copied().filter(|i| added.contains(i)).collect();
            if new.is_empty() {
                continue;
            }
            let m = new.iter().fold(0.0f64, |a, &i| a.max(state.grad[i].abs()));
            let c: f64 = members.iter().filter(|&&i| in_j[i]).map(|&i| state.x_hat[i].abs()).sum();
            let active = members.iter().any(|&i| in_j[i]);
            let ok = if active { c > 0.0 && m <= mu * c * (1.0 + 1e-9) } else { m <= zero_tol };
            if !ok {
                return false;
            }
        }
    }
    true
}
