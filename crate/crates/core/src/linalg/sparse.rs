use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;

use crate::discretization::{DofLayout, MixedSpace};
use crate::error::{Error, Result};

/// Square compressed-row sparsity pattern with sorted columns, plus the
/// permutation to compressed-column order used by the factorization.
#[derive(Debug)]
pub struct SparsityPattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub(crate) col_ptr: Vec<usize>,
    pub(crate) row_idx: Vec<usize>,
    /// `csc_pos[k]` is the column-major position of row-major entry `k`.
    pub(crate) csc_pos: Vec<usize>,
}

impl SparsityPattern {
    /// Builds a pattern from per-row column sets. The diagonal is always
    /// included and the result is symmetrized.
    pub fn from_rows(mut rows: Vec<BTreeSet<usize>>) -> Self {
        let n = rows.len();
        for (i, r) in rows.iter_mut().enumerate() {
            r.insert(i);
        }
        let mut extra: Vec<(usize, usize)> = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for &j in r {
                extra.push((j, i));
            }
        }
        for (j, i) in extra {
            rows[j].insert(i);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for r in &rows {
            col_idx.extend(r.iter().copied());
            row_ptr.push(col_idx.len());
        }
        // pattern is symmetric, so the column structure mirrors the rows
        let col_ptr = row_ptr.clone();
        let row_idx = col_idx.clone();
        let mut next = col_ptr.clone();
        let mut csc_pos = vec![0; col_idx.len()];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                let j = col_idx[k];
                csc_pos[k] = next[j];
                next[j] += 1;
            }
        }
        Self { n, row_ptr, col_idx, col_ptr, row_idx, csc_pos }
    }

    /// Pattern of the mixed system: all local couplings of each element plus
    /// the two mean-value multipliers coupled to their pressure fields.
    pub fn for_mixed(space: &MixedSpace) -> Self {
        let layout = space.layout();
        let mut rows = vec![BTreeSet::new(); layout.total()];
        let mut dofs = Vec::new();
        for e in 0..space.n_elements() {
            space.element_global_dofs(e, &mut dofs);
            for &i in &dofs {
                rows[i].extend(dofs.iter().copied());
            }
        }
        for d in 0..layout.n_pressure {
            rows[layout.pressure_multiplier()].insert(layout.pressure(d));
            rows[layout.fine_multiplier()].insert(layout.fine_pressure(d));
        }
        Self::from_rows(rows)
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let cols = &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]];
        cols.binary_search(&col).ok().map(|k| self.row_ptr[row] + k)
    }
}

/// Assembled matrix (values over a shared pattern) and right-hand side.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub pattern: Arc<SparsityPattern>,
    pub values: Vec<f64>,
    pub rhs: Vec<f64>,
    pub layout: Option<DofLayout>,
}

impl SparseSystem {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let nnz = pattern.nnz();
        let n = pattern.n;
        Self { pattern, values: vec![0.0; nnz], rhs: vec![0.0; n], layout: None }
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.position(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn add(&mut self, row: usize, col: usize, v: f64) -> Result<()> {
        let k = self.pattern.position(row, col).ok_or_else(|| {
            Error::DimensionMismatch(format!("entry ({row}, {col}) is outside the sparsity pattern"))
        })?;
        self.values[k] += v;
        Ok(())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let p = &self.pattern;
        (0..p.n)
            .map(|i| (p.row_ptr[i]..p.row_ptr[i + 1]).map(|k| self.values[k] * x[p.col_idx[k]]).sum())
            .collect()
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let p = &self.pattern;
        (0..p.n)
            .map(|i| self.values[p.row_ptr[i]..p.row_ptr[i + 1]].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let p = &self.pattern;
        let mut m = nalgebra::DMatrix::zeros(p.n, p.n);
        for i in 0..p.n {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                m[(i, p.col_idx[k])] += self.values[k];
            }
        }
        m
    }
}

/// Dense element matrix (row-major) and vector over `dofs`.
#[derive(Debug, Clone, Default)]
pub struct ElementContribution {
    pub dofs: Vec<usize>,
    pub matrix: Vec<f64>,
    pub vector: Vec<f64>,
}

impl ElementContribution {
    pub fn reset(&mut self, n: usize) {
        self.matrix.clear();
        self.matrix.resize(n * n, 0.0);
        self.vector.clear();
        self.vector.resize(n, 0.0);
    }

    pub fn n(&self) -> usize {
        self.vector.len()
    }

    #[inline]
    pub fn entry(&mut self, i: usize, j: usize) -> &mut f64 {
        let n = self.vector.len();
        &mut self.matrix[i * n + j]
    }
}

const CHUNK: usize = 512;

/// Assembles element contributions into a system over `pattern`.
///
/// Elements are evaluated in parallel in fixed-size chunks and scattered
/// sequentially in element order, so repeated assembly is bit-identical.
pub fn assemble<S, I, K>(pattern: &Arc<SparsityPattern>, n_elements: usize, init: I, kernel: K) -> Result<SparseSystem>
where
    S: Send,
    I: Fn() -> S + Sync + Send,
    K: Fn(&mut S, usize, &mut ElementContribution) -> Result<()> + Sync + Send,
{
    let mut system = SparseSystem::zeros(pattern.clone());
    let mut start = 0;
    while start < n_elements {
        let end = (start + CHUNK).min(n_elements);
        let contributions: Vec<Result<ElementContribution>> = (start..end)
            .into_par_iter()
            .map_init(&init, |scratch, e| {
                let mut c = ElementContribution::default();
                kernel(scratch, e, &mut c)?;
                Ok(c)
            })
            .collect();
        for c in contributions {
            scatter(&mut system, &c?)?;
        }
        start = end;
    }
    Ok(system)
}

pub fn scatter(system: &mut SparseSystem, c: &ElementContribution) -> Result<()> {
    let n = c.dofs.len();
    if c.matrix.len() != n * n || c.vector.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "element contribution has {} dofs but a {}-entry matrix and {}-entry vector",
            n,
            c.matrix.len(),
            c.vector.len()
        )));
    }
    let p = system.pattern.clone();
    for (a, &i) in c.dofs.iter().enumerate() {
        if i >= p.n {
            return Err(Error::DimensionMismatch(format!("dof {i} out of range {}", p.n)));
        }
        system.rhs[i] += c.vector[a];
        let row = &p.col_idx[p.row_ptr[i]..p.row_ptr[i + 1]];
        for (b, &j) in c.dofs.iter().enumerate() {
            let v = c.matrix[a * n + b];
            if v == 0.0 {
                continue;
            }
            let k = row.binary_search(&j).map_err(|_| {
                Error::DimensionMismatch(format!("entry ({i}, {j}) is outside the sparsity pattern"))
            })?;
            system.values[p.row_ptr[i] + k] += v;
        }
    }
    Ok(())
}
