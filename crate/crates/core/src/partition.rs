//! Coordinate partitions, the exclusive group norm and its dual.
//!
//! For a partition `G` of `{0, .., p-1}` the norm is
//! `Ω(x) = sqrt(Σ_G ‖x_G‖₁²)` and its dual is `Ω*(u) = sqrt(Σ_G ‖u_G‖∞²)`.

use std::fmt::Write as _;

use crate::error::{check_len, Error, Result};

/// Default absolute tolerance for sign and support decisions.
pub const SUPPORT_TOL: f64 = 1e-9;

/// A disjoint, exhaustive grouping of `{0, .., p-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition {
    p: usize,
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

impl GroupPartition {
    /// Builds a partition from 0-based index lists. Indices inside a group are sorted.
    pub fn new(p: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidPartition("dimension must be positive".into()));
        }
        let mut group_of = vec![usize::MAX; p];
        let mut groups = groups;
        for (g, members) in groups.iter_mut().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidPartition(format!("group {} is empty", g + 1)));
            }
            members.sort_unstable();
            for &i in members.iter() {
                if i >= p {
                    return Err(Error::InvalidPartition(format!(
                        "index {} out of range 1..={p}",
                        i + 1
                    )));
                }
                if group_of[i] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "index {} appears more than once",
                        i + 1
                    )));
                }
                group_of[i] = g;
            }
        }
        if let Some(i) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(Error::InvalidPartition(format!(
                "index {} is not covered",
                i + 1
            )));
        }
        Ok(Self { p, groups, group_of })
    }

    /// Groups of indices congruent modulo `k`: group `r` holds `{i : i mod k == r}`.
    pub fn modulo(p: usize, k: usize) -> Result<Self> {
        if k == 0 || k > p {
            return Err(Error::InvalidPartition(format!(
                "modulus {k} must lie in 1..={p}"
            )));
        }
        let groups = (0..k).map(|r| (r..p).step_by(k).collect()).collect();
        Self::new(p, groups)
    }

    /// Consecutive blocks of `size` indices; the last block may be shorter.
    pub fn contiguous(p: usize, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidPartition("block size must be positive".into()));
        }
        let groups = (0..p)
            .step_by(size)
            .map(|s| (s..(s + size).min(p)).collect())
            .collect();
        Self::new(p, groups)
    }

    pub fn singletons(p: usize) -> Result<Self> {
        Self::new(p, (0..p).map(|i| vec![i]).collect())
    }

    pub fn single_group(p: usize) -> Result<Self> {
        Self::new(p, vec![(0..p).collect()])
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    /// Index of the group containing coordinate `i`.
    pub fn group_of(&self, i: usize) -> usize {
        self.group_of[i]
    }

    /// Per-group ℓ₁ norms.
    pub fn group_l1(&self, x: &[f64]) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&i| x[i].abs()).sum())
            .collect()
    }

    /// Per-group ℓ∞ norms.
    pub fn group_linf(&self, u: &[f64]) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| g.iter().fold(0.0_f64, |m, &i| m.max(u[i].abs())))
            .collect()
    }

    pub fn restrict(&self, support: &[usize]) -> Result<RestrictedView> {
        RestrictedView::new(self, support)
    }

    /// Parses the text format: line `k` lists the 1-based indices of group `k`.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut groups = Vec::new();
        let mut max_index = 0usize;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut members = Vec::new();
            for tok in line.split_whitespace() {
                let idx: usize = tok.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("bad index {tok:?}"),
                })?;
                if idx == 0 {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: "indices are 1-based".into(),
                    });
                }
                max_index = max_index.max(idx);
                members.push(idx - 1);
            }
            groups.push(members);
        }
        if groups.is_empty() {
            return Err(Error::InvalidPartition("no groups".into()));
        }
        Self::new(max_index, groups)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for g in &self.groups {
            let line: Vec<String> = g.iter().map(|i| (i + 1).to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

/// The partition induced on a support `J`: groups `G ∩ J` for the groups that meet `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedView {
    support: Vec<usize>,
    /// Induced groups as positions into `support`.
    induced: Vec<Vec<usize>>,
    /// Parent group of each induced group.
    parent_group: Vec<usize>,
    p: usize,
}

impl RestrictedView {
    pub fn new(part: &GroupPartition, support: &[usize]) -> Result<Self> {
        let mut support = support.to_vec();
        support.sort_unstable();
        support.dedup();
        if let Some(&i) = support.last() {
            if i >= part.p() {
                return Err(Error::InvalidArgument(format!(
                    "support index {} out of range 1..={}",
                    i + 1,
                    part.p()
                )));
            }
        }
        let mut slot = vec![usize::MAX; part.num_groups()];
        let mut induced: Vec<Vec<usize>> = Vec::new();
        let mut parent_group = Vec::new();
        // Induced groups are ordered by parent group index.
        let mut touched: Vec<usize> = support.iter().map(|&i| part.group_of(i)).collect();
        touched.sort_unstable();
        touched.dedup();
        for g in touched {
            slot[g] = induced.len();
            induced.push(Vec::new());
            parent_group.push(g);
        }
        for (pos, &i) in support.iter().enumerate() {
            induced[slot[part.group_of(i)]].push(pos);
        }
        Ok(Self {
            support,
            induced,
            parent_group,
            p: part.p(),
        })
    }

    /// Sorted support indices in the ambient space.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.p
    }

    /// Induced groups as positions into [`Self::support`].
    pub fn induced_groups(&self) -> &[Vec<usize>] {
        &self.induced
    }

    /// Parent group index of each induced group.
    pub fn parent_groups(&self) -> &[usize] {
        &self.parent_group
    }

    /// The induced partition as a standalone partition of `{0, .., |J|-1}`.
    pub fn local_partition(&self) -> Result<GroupPartition> {
        GroupPartition::new(self.support.len(), self.induced.clone())
    }

    /// Zero-padded extension of a vector indexed by the support.
    pub fn extend(&self, x_j: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.p];
        for (&i, &v) in self.support.iter().zip(x_j) {
            x[i] = v;
        }
        x
    }

    /// Entries of `x` on the support.
    pub fn gather(&self, x: &[f64]) -> Vec<f64> {
        self.support.iter().map(|&i| x[i]).collect()
    }

    /// Inactive entries of active groups.
    pub fn off_indices(&self, part: &GroupPartition) -> Vec<usize> {
        let mut in_j = vec![false; self.p];
        for &i in &self.support {
            in_j[i] = true;
        }
        self.parent_group
            .iter()
            .flat_map(|&g| part.group(g).iter().copied())
            .filter(|&i| !in_j[i])
            .collect()
    }

    /// Entries of groups that do not meet the support.
    pub fn inactive_indices(&self, part: &GroupPartition) -> Vec<usize> {
        let mut active = vec![false; part.num_groups()];
        for &g in &self.parent_group {
            active[g] = true;
        }
        (0..self.p).filter(|&i| !active[part.group_of(i)]).collect()
    }
}

fn l2_of(values: impl Iterator<Item = f64>) -> f64 {
    values.map(|v| v * v).sum::<f64>().sqrt()
}

/// Exclusive group norm `sqrt(Σ_G ‖x_G‖₁²)`.
pub fn omega(x: &[f64], part: &GroupPartition) -> Result<f64> {
    check_len(part.p(), x.len())?;
    Ok(l2_of(part.group_l1(x).into_iter()))
}

/// Dual norm `sqrt(Σ_G ‖u_G‖∞²)`.
pub fn omega_dual(u: &[f64], part: &GroupPartition) -> Result<f64> {
    check_len(part.p(), u.len())?;
    Ok(l2_of(part.group_linf(u).into_iter()))
}

/// Norm restricted to the support of `view`; `x_j` is indexed by the support.
pub fn omega_restricted(x_j: &[f64], view: &RestrictedView) -> Result<f64> {
    check_len(view.len(), x_j.len())?;
    Ok(l2_of(
        view.induced_groups()
            .iter()
            .map(|g| g.iter().map(|&k| x_j[k].abs()).sum::<f64>()),
    ))
}

pub fn omega_dual_restricted(u_j: &[f64], view: &RestrictedView) -> Result<f64> {
    check_len(view.len(), u_j.len())?;
    Ok(l2_of(view.induced_groups().iter().map(|g| {
        g.iter().fold(0.0_f64, |m, &k| m.max(u_j[k].abs()))
    })))
}

/// Outcome of a subdifferential membership test.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientReport {
    pub holds: bool,
    pub max_violation: f64,
    /// Coordinate with the largest violation; `None` when `x = 0`.
    pub worst_index: Option<usize>,
}

/// Tests whether `u ∈ ∂Ω(x)`.
///
/// For `x ≠ 0` every entry is checked against `c_G = ‖x_G‖₁ / Ω(x)`:
/// `u_i = sign(x_i) c_G` on the support and `|u_i| ≤ c_G` off it.
/// For `x = 0` the test is `Ω*(u) ≤ 1 + tol`.
pub fn subgradient_certificate(
    x: &[f64],
    u: &[f64],
    part: &GroupPartition,
    tol: f64,
) -> Result<SubgradientReport> {
    check_len(part.p(), x.len())?;
    check_len(part.p(), u.len())?;
    let l1 = part.group_l1(x);
    let om = l2_of(l1.iter().copied());
    if om == 0.0 {
        let excess = (omega_dual(u, part)? - 1.0).max(0.0);
        return Ok(SubgradientReport {
            holds: excess <= tol,
            max_violation: excess,
            worst_index: None,
        });
    }
    let mut worst = 0.0_f64;
    let mut worst_index = None;
    for i in 0..x.len() {
        let c = l1[part.group_of(i)] / om;
        let v = if x[i] != 0.0 {
            (u[i] - x[i].signum() * c).abs()
        } else {
            (u[i].abs() - c).max(0.0)
        };
        if v > worst || worst_index.is_none() {
            worst = worst.max(v);
            worst_index = Some(i);
        }
    }
    Ok(SubgradientReport {
        holds: worst <= tol,
        max_violation: worst,
        worst_index,
    })
}

/// The canonical subgradient `u_i = sign(x_i) ‖x_{G_i}‖₁ / Ω(x)`; zero vector for `x = 0`.
pub fn canonical_subgradient(x: &[f64], part: &GroupPartition) -> Result<Vec<f64>> {
    check_len(part.p(), x.len())?;
    let l1 = part.group_l1(x);
    let om = l2_of(l1.iter().copied());
    if om == 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    Ok((0..x.len())
        .map(|i| {
            if x[i] == 0.0 {
                0.0
            } else {
                x[i].signum() * l1[part.group_of(i)] / om
            }
        })
        .collect())
}

/// Entry signs in `{-1, 0, +1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Indices with nonzero sign.
    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i] != 0).collect()
    }

    /// Number of positions where the signs differ.
    pub fn hamming(&self, other: &SignVector) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .filter(|(a, b)| a != b)
            .count()
            + self.0.len().abs_diff(other.0.len())
    }
}

/// Signs of `x` with entries of magnitude at most `tol` mapped to zero.
pub fn signed_support(x: &[f64], tol: f64) -> SignVector {
    SignVector(
        x.iter()
            .map(|&v| {
                if v.abs() <= tol {
                    0
                } else if v > 0.0 {
                    1
                } else {
                    -1
                }
            })
            .collect(),
    )
}
