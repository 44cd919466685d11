//! Soft-thresholding and the proximal operator of the exclusive group norm.
//!
//! `prox_Ω(x)` thresholds each group with its own level `t_G`. The levels share
//! one multiplier `η`: `t_G = S_G / (n_G + η)` where `S_G` is the sum of the `n_G`
//! largest magnitudes in the group, and `Σ_G t_G² = 1`. The active counts `n_G`
//! are grown one entry at a time until every group sits inside its bracket.

use crate::error::{check_finite, check_len, Error, Result};
use crate::partition::{omega_dual, GroupPartition};

pub const DEFAULT_NEWTON_TOL: f64 = 1e-12;
pub const MAX_NEWTON_ITER: usize = 200;

/// KKT record of a prox evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxCertificate {
    /// Multiplier `η`; `None` when the input lies in the dual ball and `z = 0`.
    pub eta: Option<f64>,
    /// Ball radius the thresholds are normalized to (`Σ t_G² = scale²`).
    pub scale: f64,
    /// Per-group thresholds in input units.
    pub thresholds: Vec<f64>,
    /// Per-group active entries, largest magnitude first.
    pub active_sets: Vec<Vec<usize>>,
    pub counts: Vec<usize>,
    /// Entries activated after the initial one-per-group start.
    pub activations: usize,
    /// Total Newton steps over all pieces.
    pub newton_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub z: Vec<f64>,
    pub projection: Vec<f64>,
    pub certificate: ProxCertificate,
}

/// Entry-wise `sign(x_i) max(|x_i| - t, 0)`.
pub fn soft_threshold(x: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be nonnegative, got {t}")));
    }
    Ok(x.iter().map(|&v| soft(v, t)).collect())
}

fn soft(v: f64, t: f64) -> f64 {
    if v.abs() <= t {
        0.0
    } else {
        v - v.signum() * t
    }
}

/// `prox_Ω(x) = argmin_z ½‖z − x‖² + Ω(z)`.
pub fn prox_omega(x: &[f64], part: &GroupPartition, newton_tol: f64) -> Result<ProxResult> {
    prox_impl(x, 1.0, part, newton_tol)
}

/// `prox_{sΩ}(x) = s · prox_Ω(x / s)`.
pub fn prox_scaled(x: &[f64], scale: f64, part: &GroupPartition) -> Result<ProxResult> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    prox_impl(x, scale, part, DEFAULT_NEWTON_TOL)
}

/// Projection of `x` onto the unit ball of `Ω*`, computed as `x − prox_Ω(x)`.
pub fn project_dual_ball(x: &[f64], part: &GroupPartition) -> Result<Vec<f64>> {
    Ok(prox_omega(x, part, DEFAULT_NEWTON_TOL)?.projection)
}

struct GroupState {
    /// Group members ordered by decreasing magnitude, ties by index.
    order: Vec<usize>,
    mags: Vec<f64>,
    prefix: Vec<f64>,
    k: usize,
}

impl GroupState {
    fn new(x: &[f64], members: &[usize]) -> Self {
        let mut order = members.to_vec();
        order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
        let mags: Vec<f64> = order.iter().map(|&i| x[i].abs()).collect();
        let mut prefix = Vec::with_capacity(mags.len());
        let mut acc = 0.0;
        for &m in &mags {
            acc += m;
            prefix.push(acc);
        }
        let k = usize::from(mags[0] > 0.0);
        Self { order, mags, prefix, k }
    }

    fn sum(&self) -> f64 {
        if self.k == 0 {
            0.0
        } else {
            self.prefix[self.k - 1]
        }
    }

    /// Value of `η` at which the next entry joins the active set.
    fn breakpoint(&self) -> f64 {
        if self.k == 0 || self.k >= self.mags.len() || self.mags[self.k] == 0.0 {
            f64::INFINITY
        } else {
            self.prefix[self.k - 1] / self.mags[self.k] - self.k as f64
        }
    }
}

/// Solves `Σ_G S_G² / (k_G + η)² = r²` for `η ≥ lo` by safeguarded Newton.
fn solve_eta(groups: &[GroupState], r2: f64, lo: f64, tol: f64) -> Result<(f64, usize)> {
    let terms: Vec<(f64, f64)> = groups
        .iter()
        .filter(|g| g.k > 0)
        .map(|g| (g.sum() * g.sum(), g.k as f64))
        .collect();
    let g = |eta: f64| -> (f64, f64) {
        let mut val = -r2;
        let mut der = 0.0;
        for &(s2, k) in &terms {
            let d = k + eta;
            val += s2 / (d * d);
            der -= 2.0 * s2 / (d * d * d);
        }
        (val, der)
    };
    let mut lo = lo;
    let mut hi = terms.iter().map(|t| t.0).sum::<f64>().sqrt() / r2.sqrt();
    if hi < lo {
        hi = lo;
    }
    let mut eta = lo;
    for step in 1..=MAX_NEWTON_ITER {
        let (val, der) = g(eta);
        if val.abs() <= tol * r2 {
            return Ok((eta, step));
        }
        if val > 0.0 {
            lo = eta;
        } else {
            hi = eta;
        }
        let mut next = eta - val / der;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == eta {
            return Ok((eta, step));
        }
        eta = next;
    }
    Err(Error::NoConvergence {
        what: "waterfilling Newton",
        iterations: MAX_NEWTON_ITER,
    })
}

fn prox_impl(x: &[f64], scale: f64, part: &GroupPartition, tol: f64) -> Result<ProxResult> {
    check_len(part.p(), x.len())?;
    check_finite(x, "prox input")?;
    let ng = part.num_groups();
    if omega_dual(x, part)? <= scale {
        return Ok(ProxResult {
            z: vec![0.0; x.len()],
            projection: x.to_vec(),
            certificate: ProxCertificate {
                eta: None,
                scale,
                thresholds: part.group_linf(x),
                active_sets: vec![Vec::new(); ng],
                counts: vec![0; ng],
                activations: 0,
                newton_steps: 0,
            },
        });
    }

    let mut groups: Vec<GroupState> = part.groups().iter().map(|g| GroupState::new(x, g)).collect();
    let r2 = scale * scale;
    let mut eta = 0.0;
    let mut activations = 0usize;
    let mut newton_steps = 0usize;
    loop {
        let (root, steps) = solve_eta(&groups, r2, eta, tol)?;
        newton_steps += steps;
        eta = root;
        // Among groups whose next entry has already been reached, take the
        // breakpoint nearest to eta; ties go to the lowest group.
        let mut pick: Option<(usize, f64)> = None;
        for (gi, g) in groups.iter().enumerate() {
            let b = g.breakpoint();
            if b <= eta && pick.is_none_or(|(_, pb)| b > pb) {
                pick = Some((gi, b));
            }
        }
        match pick {
            Some((gi, _)) => {
                groups[gi].k += 1;
                activations += 1;
                if activations > x.len() {
                    return Err(Error::NoConvergence {
                        what: "waterfilling activation loop",
                        iterations: activations,
                    });
                }
            }
            None => break,
        }
    }

    let thresholds: Vec<f64> = groups
        .iter()
        .map(|g| if g.k == 0 { 0.0 } else { g.sum() / (g.k as f64 + eta) })
        .collect();
    // z = x − p with p the clipped input; then x − z reproduces p exactly.
    let mut z = vec![0.0; x.len()];
    let mut projection = vec![0.0; x.len()];
    for (gi, members) in part.groups().iter().enumerate() {
        let t = thresholds[gi];
        for &i in members {
            let p = x[i].signum() * x[i].abs().min(t);
            z[i] = x[i] - p;
        }
    }
    for i in 0..x.len() {
        projection[i] = x[i] - z[i];
    }
    Ok(ProxResult {
        z,
        projection,
        certificate: ProxCertificate {
            eta: Some(eta),
            scale,
            thresholds,
            active_sets: groups.iter().map(|g| g.order[..g.k].to_vec()).collect(),
            counts: groups.iter().map(|g| g.k).collect(),
            activations,
            newton_steps,
        },
    })
}

/// Checks the per-group "change of piece" brackets of a certificate against `x`:
/// with sorted magnitudes `a_1 ≥ a_2 ≥ ..` and `S_k = a_1 + .. + a_k`,
/// `S_{n−1}/a_n − (n−1) ≤ η < S_n/a_{n+1} − n` (with `a_{|G|+1} = 0`).
/// A relative slack `rel` absorbs rounding in `η`.
pub fn brackets_hold(x: &[f64], part: &GroupPartition, cert: &ProxCertificate, rel: f64) -> bool {
    let Some(eta) = cert.eta else {
        return true;
    };
    let slack = rel * (1.0 + eta);
    part.groups().iter().enumerate().all(|(gi, members)| {
        let g = GroupState::new(x, members);
        let n = cert.counts[gi];
        if n == 0 {
            return g.mags[0] == 0.0;
        }
        let lower = if n == 1 { 0.0 } else { g.prefix[n - 2] / g.mags[n - 1] - (n - 1) as f64 };
        let upper = if n >= g.mags.len() || g.mags[n] == 0.0 {
            f64::INFINITY
        } else {
            g.prefix[n - 1] / g.mags[n] - n as f64
        };
        lower <= eta + slack && eta < upper + slack
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{omega, subgradient_certificate};

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&[3.0, -2.0, 0.5], 1.0).unwrap(), vec![2.0, -1.0, 0.0]);
        assert_eq!(soft_threshold(&[3.0, -2.0], 0.0).unwrap(), vec![3.0, -2.0]);
        assert_eq!(soft_threshold(&[3.0, -2.0], 3.0).unwrap(), vec![0.0, 0.0]);
        assert!(soft_threshold(&[1.0], -0.1).is_err());
    }

    #[test]
    fn single_group_is_soft_threshold() {
        let g = GroupPartition::single_group(3).unwrap();
        let r = prox_omega(&[3.0, -2.0, 0.5], &g, DEFAULT_NEWTON_TOL).unwrap();
        assert_eq!(r.z, vec![2.0, -1.0, 0.0]);
        let eta = r.certificate.eta.unwrap();
        assert!((eta - 3.0).abs() < 1e-12);
        assert!((r.certificate.thresholds[0] - 1.0).abs() < 1e-12);
        assert_eq!(r.certificate.counts, vec![2]);
        assert!(brackets_hold(&[3.0, -2.0, 0.5], &g, &r.certificate, 1e-12));
    }

    #[test]
    fn inside_dual_ball_gives_zero() {
        let g = GroupPartition::singletons(2).unwrap();
        let r = prox_omega(&[0.6, 0.8], &g, DEFAULT_NEWTON_TOL).unwrap();
        assert_eq!(r.z, vec![0.0, 0.0]);
        assert_eq!(r.certificate.eta, None);
        assert_eq!(r.projection, vec![0.6, 0.8]);
    }

    // Frozen from an independent scalar Newton solve of
    // 16/(2+η)² + 4/(1+η)² = 1 (see `two_group_oracle`).
    const ETA_3120: f64 = 2.735_824_666_536_894;

    fn two_group_oracle() -> f64 {
        let mut e = 3.0_f64;
        for _ in 0..100 {
            let f = 16.0 / (2.0 + e).powi(2) + 4.0 / (1.0 + e).powi(2) - 1.0;
            let d = -32.0 / (2.0 + e).powi(3) - 8.0 / (1.0 + e).powi(3);
            e -= f / d;
        }
        e
    }

    #[test]
    fn two_group_example() {
        assert!((two_group_oracle() - ETA_3120).abs() < 1e-12);
        let g = GroupPartition::contiguous(4, 2).unwrap();
        let x = [3.0, 1.0, 2.0, 0.0];
        let r = prox_omega(&x, &g, DEFAULT_NEWTON_TOL).unwrap();
        let c = &r.certificate;
        assert!((c.eta.unwrap() - ETA_3120).abs() < 1e-10);
        assert!((c.thresholds[0] - 4.0 / (2.0 + ETA_3120)).abs() < 1e-10);
        assert!((c.thresholds[1] - 2.0 / (1.0 + ETA_3120)).abs() < 1e-10);
        let expect = [2.1554, 0.1554, 1.4646, 0.0];
        for (a, b) in r.z.iter().zip(expect) {
            assert!((a - b).abs() < 1e-3, "{:?}", r.z);
        }
        assert_eq!(c.counts, vec![2, 1]);
        assert!(brackets_hold(&x, &g, c, 1e-12));
        let cert = subgradient_certificate(&r.z, &r.projection, &g, 1e-10).unwrap();
        assert!(cert.holds, "{cert:?}");
        assert!((omega(&r.z, &g).unwrap() - c.eta.unwrap()).abs() < 1e-10);
    }

    #[test]
    fn projection_examples() {
        let g = GroupPartition::single_group(3).unwrap();
        assert_eq!(project_dual_ball(&[3.0, -2.0, 0.5], &g).unwrap(), vec![1.0, -1.0, 0.5]);
        let s = GroupPartition::singletons(2).unwrap();
        assert_eq!(project_dual_ball(&[0.6, 0.8], &s).unwrap(), vec![0.6, 0.8]);
        let c = GroupPartition::contiguous(4, 2).unwrap();
        let p = project_dual_ball(&[3.0, 1.0, 2.0, 0.0], &c).unwrap();
        assert!((p[0] - 0.8446).abs() < 1e-3 && (p[1] - 0.8446).abs() < 1e-3);
        assert!((p[2] - 0.5354).abs() < 1e-3 && p[3] == 0.0);
    }

    #[test]
    fn scaled_examples() {
        let g = GroupPartition::single_group(3).unwrap();
        let r = prox_scaled(&[3.0, -2.0, 0.5], 0.5, &g).unwrap();
        assert_eq!(r.z, vec![2.5, -1.5, 0.0]);
        let x = [0.3, -1.7, 2.2, 0.05];
        let c = GroupPartition::contiguous(4, 2).unwrap();
        assert_eq!(
            prox_scaled(&x, 1.0, &c).unwrap(),
            prox_omega(&x, &c, DEFAULT_NEWTON_TOL).unwrap()
        );
        assert!(prox_scaled(&x, 0.0, &c).is_err());
        assert!(prox_scaled(&x, -1.0, &c).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let g = GroupPartition::single_group(2).unwrap();
        assert!(matches!(
            prox_omega(&[f64::NAN, 1.0], &g, DEFAULT_NEWTON_TOL),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn zero_group_gets_zero_threshold() {
        let g = GroupPartition::contiguous(4, 2).unwrap();
        let r = prox_omega(&[0.0, 0.0, 5.0, -1.0], &g, DEFAULT_NEWTON_TOL).unwrap();
        assert_eq!(r.certificate.thresholds[0], 0.0);
        assert_eq!(r.certificate.counts[0], 0);
        assert_eq!(r.z, soft_threshold(&[0.0, 0.0, 5.0, -1.0], 1.0).unwrap());
    }
}
