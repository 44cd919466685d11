use crate::error::{Error, Result};
use crate::partition::{omega, omega_dual, GroupPartition};
use crate::prox::{prox_scaled, soft_threshold};

/// A norm penalty with a computable proximal map and dual norm.
pub trait Penalty: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn dual_norm(&self, u: &[f64]) -> f64;
    /// `argmin_z ½‖z − x‖² + step · value(z)`.
    fn prox(&self, x: &[f64], step: f64) -> Result<Vec<f64>>;
}

/// The exclusive group norm over a partition.
pub struct Exclusive<'a>(pub &'a GroupPartition);

impl Penalty for Exclusive<'_> {
    fn dim(&self) -> usize {
        self.0.p()
    }

    fn value(&self, x: &[f64]) -> f64 {
        omega(x, self.0).unwrap_or(f64::NAN)
    }

    fn dual_norm(&self, u: &[f64]) -> f64 {
        omega_dual(u, self.0).unwrap_or(f64::NAN)
    }

    fn prox(&self, x: &[f64], step: f64) -> Result<Vec<f64>> {
        if step == 0.0 {
            return Ok(x.to_vec());
        }
        Ok(prox_scaled(x, step, self.0)?.z)
    }
}

pub struct L1 {
    pub dim: usize,
}

impl Penalty for L1 {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v.abs()).sum()
    }

    fn dual_norm(&self, u: &[f64]) -> f64 {
        u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn prox(&self, x: &[f64], step: f64) -> Result<Vec<f64>> {
        soft_threshold(x, step)
    }
}

/// `Σ_H ‖x_H‖₂` over disjoint index groups.
pub struct GroupL2 {
    dim: usize,
    groups: Vec<Vec<usize>>,
}

impl GroupL2 {
    pub fn new(dim: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; dim];
        for &i in groups.iter().flatten() {
            if i >= dim || seen[i] {
                return Err(Error::InvalidArgument(format!(
                    "group index {} is out of range or repeated",
                    i + 1
                )));
            }
            seen[i] = true;
        }
        Ok(Self { dim, groups })
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }
}

fn l2(x: &[f64], g: &[usize]) -> f64 {
    g.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt()
}

impl Penalty for GroupL2 {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.groups.iter().map(|g| l2(x, g)).sum()
    }

    fn dual_norm(&self, u: &[f64]) -> f64 {
        self.groups.iter().fold(0.0, |m, g| m.max(l2(u, g)))
    }

    fn prox(&self, x: &[f64], step: f64) -> Result<Vec<f64>> {
        let mut z = x.to_vec();
        for g in &self.groups {
            let norm = l2(x, g);
            let shrink = if norm <= step { 0.0 } else { 1.0 - step / norm };
            for &i in g {
                z[i] = x[i] * shrink;
            }
        }
        Ok(z)
    }
}
