use std::cell::Cell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Once};

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Conj, Mat};

use super::sparse::{SparseSystem, SparsityPattern};
use crate::error::{Error, Result};

thread_local! {
    static QUIET: Cell<bool> = const { Cell::new(false) };
}

/// `catch_unwind` that keeps the panic hook from printing: faer reports a
/// zero pivot by panicking, which is converted into [`Error::Singular`].
fn quietly<T>(f: impl FnOnce() -> T) -> std::thread::Result<T> {
    static HOOK: Once = Once::new();
    HOOK.call_once(|| {
        let previous = std::panic::take_hook();
        std::panic::set_hook(Box::new(move |info| {
            if !QUIET.with(Cell::get) {
                previous(info);
            }
        }));
    });
    QUIET.with(|q| q.set(true));
    let r = catch_unwind(AssertUnwindSafe(f));
    QUIET.with(|q| q.set(false));
    r
}

/// Largest accepted `|Ax - b|_inf / (|A|_inf |x|_inf + |b|_inf)`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Sparse LU solver that reuses the symbolic factorization while the
/// sparsity pattern stays the same.
///
/// Mean-value multiplier rows couple to every pressure unknown, and keeping
/// them in the factorization multiplies the fill several times. When the
/// system carries a [`DofLayout`](crate::discretization::DofLayout), the
/// multipliers and one pressure unknown per constrained field are replaced
/// by identity rows and columns; the resulting sparse matrix is factored
/// and the solution of the full system is recovered with a low-rank
/// (Woodbury) correction followed by iterative refinement against the
/// original matrix.
///
/// With `reuse_numeric` set, the last numeric factorization is kept and the
/// next system on the same pattern is first solved by refinement against
/// that stale factorization. A fresh factorization is computed only when
/// the refinement does not reach [`STALE_TARGET`] quickly. Newton
/// iterations and time steps whose Jacobians change little then cost a few
/// triangular solves instead of a factorization.
#[derive(Default)]
pub struct DirectSolver {
    cache: Option<Factorization>,
    pub reuse_numeric: bool,
    numeric: Option<Numeric>,
    factorizations: usize,
}

struct Factorization {
    pattern: Arc<SparsityPattern>,
    /// Rows and columns replaced by the identity in the factored matrix.
    border: Vec<usize>,
    symbolic: SymbolicSparseColMat<usize>,
    lu: SymbolicLu<usize>,
    /// CSR index of each stored entry of the factored matrix, `None` for the
    /// unit diagonal of a border row.
    source: Vec<Option<usize>>,
}

impl std::fmt::Debug for DirectSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirectSolver")
            .field("cached", &self.cache.is_some())
            .field("reuse_numeric", &self.reuse_numeric)
            .field("factorizations", &self.factorizations)
            .finish()
    }
}

pub fn solve_direct(system: &SparseSystem) -> Result<Vec<f64>> {
    DirectSolver::default().solve(system)
}

const REFINEMENT_STEPS: usize = 3;

/// Scaled residual a solve against a stale factorization must reach.
pub const STALE_TARGET: f64 = 1e-13;
const STALE_STEPS: usize = 30;
/// A stale factorization is dropped once one refinement step reduces the
/// residual by less than this factor.
const STALE_CONTRACTION: f64 = 0.5;

/// Multiplier rows with off-diagonal entries, each paired with the coupled
/// unknown of largest weight.
fn border_of(system: &SparseSystem) -> Vec<usize> {
    let Some(layout) = system.layout else { return Vec::new() };
    let p = &system.pattern;
    let mut border = Vec::new();
    for m in [layout.pressure_multiplier(), layout.fine_multiplier()] {
        if m >= p.n {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for k in p.row_ptr[m]..p.row_ptr[m + 1] {
            let j = p.col_idx[k];
            let v = system.values[k].abs();
            if j != m && v > 0.0 && !border.contains(&j) && best.is_none_or(|(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        if let Some((pin, _)) = best {
            border.push(m);
            border.push(pin);
        }
    }
    border.sort_unstable();
    border
}

impl Factorization {
    fn new(pattern: Arc<SparsityPattern>, border: Vec<usize>) -> Result<Self> {
        let p = &pattern;
        let n = p.n;
        let mut is_border = vec![false; n];
        for &b in &border {
            is_border[b] = true;
        }
        let mut csr_of_csc = vec![0; p.nnz()];
        for (k, &pos) in p.csc_pos.iter().enumerate() {
            csr_of_csc[pos] = k;
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(p.nnz());
        let mut source = Vec::with_capacity(p.nnz());
        col_ptr.push(0);
        for j in 0..n {
            if is_border[j] {
                row_idx.push(j);
                source.push(None);
            } else {
                for pos in p.col_ptr[j]..p.col_ptr[j + 1] {
                    let i = p.row_idx[pos];
                    if !is_border[i] {
                        row_idx.push(i);
                        source.push(Some(csr_of_csc[pos]));
                    }
                }
            }
            col_ptr.push(row_idx.len());
        }
        let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        let lu = SymbolicLu::try_new(symbolic.as_ref())
            .map_err(|e| Error::Configuration(format!("symbolic factorization failed: {e:?}")))?;
        Ok(Self { pattern, border, symbolic, lu, source })
    }

    fn numeric(&self, system: &SparseSystem) -> Result<Lu<usize, f64>> {
        let csc: Vec<f64> = self.source.iter().map(|s| s.map_or(1.0, |k| system.values[k])).collect();
        let mat = SparseColMatRef::new(self.symbolic.as_ref(), &csc);
        let factor = quietly(|| Lu::try_new_with_symbolic(self.lu.clone(), mat));
        match factor {
            Ok(Ok(lu)) => Ok(lu),
            Ok(Err(faer::sparse::linalg::LuError::SymbolicSingular { index })) => {
                Err(Error::SingularMatrix { pivot: Some(index) })
            }
            Ok(Err(e)) => Err(Error::Configuration(format!("numeric factorization failed: {e:?}"))),
            Err(_) => Err(Error::SingularMatrix { pivot: None }),
        }
    }
}

fn lu_solve(lu: &Lu<usize, f64>, b: &[f64]) -> Vec<f64> {
    let mut rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
    lu.solve_in_place_with_conj(Conj::No, rhs.as_mut());
    (0..b.len()).map(|i| rhs[(i, 0)]).collect()
}

/// Inverse of `K = K0 + U V^T` from a factorization of `K0`.
struct Numeric {
    pattern: Arc<SparsityPattern>,
    lu: Lu<usize, f64>,
    border: Vec<usize>,
    /// Stored entries `(column, value)` of the border rows of `K`.
    border_rows: Vec<Vec<(usize, f64)>>,
    /// `K0^{-1} U`, one column per rank-one term.
    z: Vec<Vec<f64>>,
    capacitance: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl Numeric {
    /// Rank-one terms: for each border row `i`, `e_i (K[i,:] - e_i^T)`; for
    /// each border column `j`, `K[not border, j] e_j^T`.
    fn new(lu: Lu<usize, f64>, system: &SparseSystem, border: &[usize]) -> Result<Self> {
        let n = system.n();
        let p = &system.pattern;
        let mut us = Vec::new();
        for &i in border {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            us.push(e);
        }
        for &j in border {
            let mut c = vec![0.0; n];
            for pos in p.col_ptr[j]..p.col_ptr[j + 1] {
                let i = p.row_idx[pos];
                if border.binary_search(&i).is_err() {
                    c[i] = system.get(i, j);
                }
            }
            us.push(c);
        }
        let border_rows = border
            .iter()
            .map(|&i| (p.row_ptr[i]..p.row_ptr[i + 1]).map(|k| (p.col_idx[k], system.values[k])).collect())
            .collect();
        let z: Vec<Vec<f64>> = us.iter().map(|u| lu_solve(&lu, u)).collect();
        let mut this =
            Self { pattern: p.clone(), lu, border: border.to_vec(), border_rows, z, capacitance: None };
        if border.is_empty() {
            return Ok(this);
        }
        let m = this.z.len();
        let mut cap = nalgebra::DMatrix::<f64>::identity(m, m);
        for (c, zc) in this.z.iter().enumerate() {
            let vz = this.v_dot(zc);
            for r in 0..m {
                cap[(r, c)] += vz[r];
            }
        }
        let f = cap.lu();
        if !f.is_invertible() {
            return Err(Error::SingularMatrix { pivot: border.first().copied() });
        }
        this.capacitance = Some(f);
        Ok(this)
    }

    /// `V^T x`
    fn v_dot(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.border.len());
        for (&i, row) in self.border.iter().zip(&self.border_rows) {
            out.push(row.iter().map(|&(j, v)| v * x[j]).sum::<f64>() - x[i]);
        }
        for &j in &self.border {
            out.push(x[j]);
        }
        out
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y = lu_solve(&self.lu, b);
        if let Some(cap) = &self.capacitance {
            let vy = nalgebra::DVector::from_vec(self.v_dot(&y));
            let w = cap.solve(&vy).unwrap_or_else(|| nalgebra::DVector::from_element(vy.len(), f64::NAN));
            for (c, zc) in self.z.iter().enumerate() {
                for (yi, zi) in y.iter_mut().zip(zc) {
                    *yi -= w[c] * zi;
                }
            }
        }
        y
    }

    /// Iterative refinement of `inverse(b)` against `system`. Stops at
    /// `target`, after `steps` corrections, or when a step contracts the
    /// residual by less than `contraction`. Returns the best iterate and its
    /// scaled residual.
    fn refine(&self, system: &SparseSystem, steps: usize, target: f64, contraction: f64) -> (Vec<f64>, f64) {
        let mut x = self.solve(&system.rhs);
        if x.iter().any(|v| !v.is_finite()) {
            return (x, f64::INFINITY);
        }
        let mut residual = scaled_residual(system, &x);
        for _ in 0..steps {
            if residual <= target {
                break;
            }
            let ax = system.matvec(&x);
            let r: Vec<f64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let dx = self.solve(&r);
            let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let next = scaled_residual(system, &candidate);
            if !(next < residual) {
                break;
            }
            x = candidate;
            let ratio = next / residual;
            residual = next;
            if ratio > contraction {
                break;
            }
        }
        (x, residual)
    }
}

impl DirectSolver {
    /// Solver that keeps its numeric factorization between calls.
    pub fn reusing() -> Self {
        Self { reuse_numeric: true, ..Self::default() }
    }

    /// Number of numeric factorizations computed so far.
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    pub fn solve(&mut self, system: &SparseSystem) -> Result<Vec<f64>> {
        let p = &system.pattern;
        let n = p.n;
        if system.rhs.len() != n || system.values.len() != p.nnz() {
            return Err(Error::DimensionMismatch("system storage does not match its pattern".into()));
        }
        if let Some(bad) = empty_line(system) {
            return Err(Error::SingularMatrix { pivot: Some(bad) });
        }

        let border = border_of(system);
        let reuse = matches!(&self.cache, Some(f) if Arc::ptr_eq(&f.pattern, p) && f.border == border);
        if !reuse {
            self.cache = Some(Factorization::new(p.clone(), border.clone())?);
            self.numeric = None;
        }
        if self.reuse_numeric {
            if let Some(stale) = self.numeric.as_ref().filter(|s| Arc::ptr_eq(&s.pattern, p) && s.border == border) {
                let (x, residual) = stale.refine(system, STALE_STEPS, STALE_TARGET, STALE_CONTRACTION);
                if residual <= STALE_TARGET {
                    return Ok(x);
                }
            }
        }

        let factorization = self.cache.as_ref().expect("cache filled above");
        let lu = factorization.numeric(system)?;
        self.factorizations += 1;
        let fresh = Numeric::new(lu, system, &factorization.border)?;
        let (x, residual) = fresh.refine(system, REFINEMENT_STEPS, f64::EPSILON, 1.0);
        if !residual.is_finite() {
            return Err(Error::SingularMatrix { pivot: None });
        }
        if residual > RESIDUAL_TOLERANCE {
            return Err(Error::InaccurateSolve { residual });
        }
        self.numeric = if self.reuse_numeric { Some(fresh) } else { None };
        Ok(x)
    }
}

/// `|Ax - b|_inf / (|A|_inf |x|_inf + |b|_inf)`.
pub fn scaled_residual(system: &SparseSystem, x: &[f64]) -> f64 {
    let ax = system.matvec(x);
    let r = ax.iter().zip(&system.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let xn = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let bn = system.rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let denom = system.norm_inf() * xn + bn;
    if denom == 0.0 {
        0.0
    } else {
        r / denom
    }
}

fn empty_line(system: &SparseSystem) -> Option<usize> {
    let p = &system.pattern;
    let mut col_nonzero = vec![false; p.n];
    let mut first_empty_row = None;
    for i in 0..p.n {
        let mut any = false;
        for k in p.row_ptr[i]..p.row_ptr[i + 1] {
            if system.values[k] != 0.0 {
                any = true;
                col_nonzero[p.col_idx[k]] = true;
            }
        }
        if !any && first_empty_row.is_none() {
            first_empty_row = Some(i);
        }
    }
    first_empty_row.or_else(|| col_nonzero.iter().position(|&c| !c))
}
