use std::collections::BTreeMap;

use super::sparse::SparseSystem;
use crate::error::{Error, Result};

/// `sum_d w_d x_d = 0` enforced through the unknown `multiplier`.
#[derive(Debug, Clone)]
pub struct MeanConstraint {
    pub multiplier: usize,
    pub weights: Vec<(usize, f64)>,
}

/// Strong Dirichlet values and mean-value multiplier constraints.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    dirichlet: BTreeMap<usize, f64>,
    pub means: Vec<MeanConstraint>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_dirichlet(&mut self, dof: usize, value: f64) -> Result<()> {
        if self.dirichlet.insert(dof, value).is_some() {
            return Err(Error::DuplicateConstraint { dof });
        }
        Ok(())
    }

    pub fn add_mean(&mut self, c: MeanConstraint) -> Result<()> {
        if self.dirichlet.contains_key(&c.multiplier) || self.means.iter().any(|m| m.multiplier == c.multiplier) {
            return Err(Error::DuplicateConstraint { dof: c.multiplier });
        }
        self.means.push(c);
        Ok(())
    }

    pub fn dirichlet(&self) -> &BTreeMap<usize, f64> {
        &self.dirichlet
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.dirichlet.contains_key(&dof)
    }

    /// Applies the constraints to an assembled system.
    ///
    /// With `linearize_at = Some(x)` the system is a Newton correction
    /// `J dx = -R(x)`: Dirichlet rows prescribe `g - x` and the multiplier
    /// terms of the residual are added at `x`.
    pub fn apply(&self, system: &mut SparseSystem, linearize_at: Option<&[f64]>) -> Result<()> {
        let n = system.n();
        if let Some(x) = linearize_at {
            if x.len() != n {
                return Err(Error::DimensionMismatch(format!("state has {} entries, system {n}", x.len())));
            }
        }
        for m in &self.means {
            for &(d, w) in &m.weights {
                system.add(m.multiplier, d, w)?;
                system.add(d, m.multiplier, w)?;
                if let Some(x) = linearize_at {
                    system.rhs[m.multiplier] -= w * x[d];
                    system.rhs[d] -= w * x[m.multiplier];
                }
            }
        }

        let mut target = vec![None; n];
        for (&d, &g) in &self.dirichlet {
            if d >= n {
                return Err(Error::DimensionMismatch(format!("constrained dof {d} out of range {n}")));
            }
            target[d] = Some(match linearize_at {
                Some(x) => g - x[d],
                None => g,
            });
        }
        let p = system.pattern.clone();
        for i in 0..n {
            let range = p.row_ptr[i]..p.row_ptr[i + 1];
            if let Some(t) = target[i] {
                for k in range {
                    system.values[k] = if p.col_idx[k] == i { 1.0 } else { 0.0 };
                }
                system.rhs[i] = t;
            } else {
                for k in range {
                    if let Some(t) = target[p.col_idx[k]] {
                        system.rhs[i] -= system.values[k] * t;
                        system.values[k] = 0.0;
                    }
                }
            }
        }
        Ok(())
    }
}
