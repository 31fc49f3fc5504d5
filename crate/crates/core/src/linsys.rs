//! Complex sparse systems: COO assembly, CSR storage, boundary
//! constraint elimination and a direct LU solve.
//!
//! The factorization is delegated to faer. Everything around it is kept
//! deliberately plain: assembly pushes triplets in whatever order the
//! caller produces them, `finalize` sorts and sums duplicates into CSR,
//! and the solve recomputes the true residual by an explicit matvec so
//! the report never depends on solver internals. The solver runs
//! sequentially unless a thread budget is set explicitly; repeated runs
//! of the same assembly must produce bitwise identical solutions.

use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use faer::prelude::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};

#[derive(Debug, thiserror::Error)]
pub enum LinSysError {
    #[error("index ({row}, {col}) outside {nrows} x {ncols} matrix")]
    IndexOutOfRange { row: usize, col: usize, nrows: usize, ncols: usize },
    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("conflicting constraint for dof {idx}: {a} vs {b}")]
    ConflictingConstraint { idx: usize, a: Complex64, b: Complex64 },
    #[error("constraint dof {idx} outside system of size {n}")]
    ConstraintOutOfRange { idx: usize, n: usize },
    #[error("rhs length {got} does not match system size {want}")]
    RhsLength { got: usize, want: usize },
    #[error("matrix is singular or structurally deficient")]
    Singular,
    #[error("matrix must be finalized before {op}")]
    NotFinalized { op: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Outcome of one linear solve. `iterations` is 1 for the direct path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

/// Square complex sparse matrix. Entries are pushed into a COO buffer
/// and merged into CSR by `finalize`; duplicates sum.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n: usize,
    triplets: Vec<(usize, usize, Complex64)>,
    row_ptr: Vec<usize>,
    col_ind: Vec<usize>,
    vals: Vec<Complex64>,
    finalized: bool,
}

impl SparseMatrix {
    pub fn new(n: usize) -> Self {
        SparseMatrix {
            n,
            triplets: Vec::new(),
            row_ptr: Vec::new(),
            col_ind: Vec::new(),
            vals: Vec::new(),
            finalized: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn push(&mut self, row: usize, col: usize, v: Complex64) -> Result<(), LinSysError> {
        if row >= self.n || col >= self.n {
            return Err(LinSysError::IndexOutOfRange { row, col, nrows: self.n, ncols: self.n });
        }
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(LinSysError::NonFiniteEntry { row, col });
        }
        self.triplets.push((row, col, v));
        Ok(())
    }

    pub fn finalize(&mut self) {
        if self.finalized {
            return;
        }
        self.triplets.sort_by_key(|(r, c, _)| (*r, *c));
        let mut rows: Vec<usize> = Vec::with_capacity(self.triplets.len());
        let mut col_ind = Vec::with_capacity(self.triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(self.triplets.len());
        for (r, c, v) in self.triplets.drain(..) {
            if rows.last() == Some(&r) && col_ind.last() == Some(&c) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                col_ind.push(c);
                vals.push(v);
            }
        }
        let mut row_ptr = vec![0usize; self.n + 1];
        for r in &rows {
            row_ptr[r + 1] += 1;
        }
        for k in 0..self.n {
            row_ptr[k + 1] += row_ptr[k];
        }
        self.row_ptr = row_ptr;
        self.col_ind = col_ind;
        self.vals = vals;
        self.finalized = true;
    }

    pub fn nnz(&self) -> usize {
        if self.finalized {
            self.vals.len()
        } else {
            self.triplets.len()
        }
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    pub fn csr(&self) -> Result<(&[usize], &[usize], &[Complex64]), LinSysError> {
        if !self.finalized {
            return Err(LinSysError::NotFinalized { op: "csr access" });
        }
        Ok((&self.row_ptr, &self.col_ind, &self.vals))
    }

    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>, LinSysError> {
        if !self.finalized {
            return Err(LinSysError::NotFinalized { op: "matvec" });
        }
        if x.len() != self.n {
            return Err(LinSysError::RhsLength { got: x.len(), want: self.n });
        }
        let mut y = vec![Complex64::default(); self.n];
        for r in 0..self.n {
            let mut acc = Complex64::default();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_ind[k]];
            }
            y[r] = acc;
        }
        Ok(y)
    }

    /// Bilinear pairing `y^T A x` without conjugation.
    pub fn bilinear(&self, y: &[Complex64], x: &[Complex64]) -> Result<Complex64, LinSysError> {
        let ax = self.matvec(x)?;
        Ok(y.iter().zip(&ax).map(|(a, b)| a * b).sum())
    }

    pub fn write_matrix_market(&self, path: &std::path::Path) -> Result<(), LinSysError> {
        if !self.finalized {
            return Err(LinSysError::NotFinalized { op: "matrix market dump" });
        }
        let mut out = String::new();
        let _ = writeln!(out, "%%MatrixMarket matrix coordinate complex general");
        let _ = writeln!(out, "{} {} {}", self.n, self.n, self.vals.len());
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.vals[k];
                let _ = writeln!(out, "{} {} {} {}", r + 1, self.col_ind[k] + 1, v.re, v.im);
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Prescribed values for a set of dofs. Insertion order does not
/// matter; the map keeps dofs sorted so elimination is deterministic.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    values: BTreeMap<usize, Complex64>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Re-inserting the same dof with the same value is a no-op;
    /// a different value is an error.
    pub fn insert(&mut self, idx: usize, v: Complex64) -> Result<(), LinSysError> {
        if let Some(prev) = self.values.get(&idx) {
            if *prev != v {
                return Err(LinSysError::ConflictingConstraint { idx, a: *prev, b: v });
            }
            return Ok(());
        }
        self.values.insert(idx, v);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.values.contains_key(&idx)
    }

    pub fn get(&self, idx: usize) -> Option<Complex64> {
        self.values.get(&idx).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.values.iter().map(|(k, v)| (*k, *v))
    }
}

/// Eliminate constrained dofs symmetrically: constrained rows become
/// identity rows carrying the prescribed value, and constrained columns
/// move their contribution to the right-hand side. Free rows and
/// columns keep their sparsity. Must run before `finalize`.
pub fn apply_constraints(
    matrix: &mut SparseMatrix,
    rhs: &mut [Complex64],
    constraints: &ConstraintSet,
) -> Result<(), LinSysError> {
    if matrix.finalized {
        return Err(LinSysError::NotFinalized { op: "constraint elimination (needs COO stage)" });
    }
    if rhs.len() != matrix.n {
        return Err(LinSysError::RhsLength { got: rhs.len(), want: matrix.n });
    }
    for (idx, _) in constraints.iter() {
        if idx >= matrix.n {
            return Err(LinSysError::ConstraintOutOfRange { idx, n: matrix.n });
        }
    }
    if constraints.is_empty() {
        return Ok(());
    }
    let mut kept = Vec::with_capacity(matrix.triplets.len());
    for (r, c, v) in matrix.triplets.drain(..) {
        if constraints.contains(r) {
            continue;
        }
        if let Some(g) = constraints.get(c) {
            rhs[r] -= v * g;
            continue;
        }
        kept.push((r, c, v));
    }
    matrix.triplets = kept;
    for (idx, g) in constraints.iter() {
        matrix.triplets.push((idx, idx, Complex64::new(1.0, 0.0)));
        rhs[idx] = g;
    }
    Ok(())
}

static THREAD_BUDGET: AtomicUsize = AtomicUsize::new(1);

/// Cap the solver's internal parallelism. The default budget of one
/// keeps factorizations sequential and run-to-run reproducible.
pub fn set_solver_threads(n: usize) {
    THREAD_BUDGET.store(n.max(1), Ordering::Relaxed);
}

fn current_par() -> faer::Par {
    match THREAD_BUDGET.load(Ordering::Relaxed) {
        0 | 1 => faer::Par::Seq,
        n => faer::Par::rayon(n),
    }
}

/// Reusable symbolic factorization. The sparsity pattern of repeated
/// solves in a reconstruction loop never changes, so the analysis phase
/// is paid once.
#[derive(Default)]
pub struct FactorizationCache {
    pattern: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
}

impl FactorizationCache {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Nearest power of two to the magnitude `v`, as an inverse scale.
/// Powers of two are exact in floating point, so equilibrating with
/// them perturbs no entry and keeps runs bitwise reproducible.
fn pow2_inverse_scale(v: f64) -> f64 {
    if v > 0.0 && v.is_finite() {
        (-v.log2().round()).exp2()
    } else {
        1.0
    }
}

/// Row and column scales that bring every row and column of the scaled
/// matrix close to unit magnitude. The assembled saddle point systems
/// mix momentum rows of order 1e5 with continuity rows of order 1e-3,
/// and factorizing them unscaled loses several digits to pivot growth.
fn equilibration(m: &SparseMatrix) -> Result<(Vec<f64>, Vec<f64>), LinSysError> {
    let (row_ptr, col_ind, vals) = m.csr()?;
    let mut row_scale = vec![0.0f64; m.n];
    for r in 0..m.n {
        for k in row_ptr[r]..row_ptr[r + 1] {
            row_scale[r] = row_scale[r].max(vals[k].norm());
        }
    }
    for s in &mut row_scale {
        *s = pow2_inverse_scale(*s);
    }
    let mut col_scale = vec![0.0f64; m.n];
    for r in 0..m.n {
        for k in row_ptr[r]..row_ptr[r + 1] {
            let scaled = vals[k].norm() * row_scale[r];
            col_scale[col_ind[k]] = col_scale[col_ind[k]].max(scaled);
        }
    }
    for s in &mut col_scale {
        *s = pow2_inverse_scale(*s);
    }
    Ok((row_scale, col_scale))
}

fn to_faer_scaled(
    m: &SparseMatrix,
    row_scale: &[f64],
    col_scale: &[f64],
) -> Result<SparseColMat<usize, Complex64>, LinSysError> {
    let (row_ptr, col_ind, vals) = m.csr()?;
    let mut triplets = Vec::with_capacity(vals.len());
    for r in 0..m.n {
        for k in row_ptr[r]..row_ptr[r + 1] {
            let c = col_ind[k];
            triplets.push(Triplet::new(r, c, vals[k] * (row_scale[r] * col_scale[c])));
        }
    }
    SparseColMat::try_new_from_triplets(m.n, m.n, &triplets).map_err(|_| LinSysError::Singular)
}

/// Direct sparse solve with a configurable residual acceptance
/// threshold. The factorization runs on the equilibrated matrix and the
/// solution is polished by iterative refinement against the original
/// entries; the residual in the report is recomputed from the CSR data,
/// not taken from the factorization.
pub fn solve_with_cache(
    matrix: &SparseMatrix,
    rhs: &[Complex64],
    tol: f64,
    cache: &mut FactorizationCache,
) -> Result<(Vec<Complex64>, SolveReport), LinSysError> {
    if rhs.len() != matrix.n {
        return Err(LinSysError::RhsLength { got: rhs.len(), want: matrix.n });
    }
    let (row_scale, col_scale) = equilibration(matrix)?;
    let a = to_faer_scaled(matrix, &row_scale, &col_scale)?;
    faer::set_global_parallelism(current_par());

    let symbolic = {
        let (rp, ci, _) = matrix.csr()?;
        let hit = cache
            .pattern
            .as_ref()
            .map(|(crp, cci, _)| crp == rp && cci == ci)
            .unwrap_or(false);
        if !hit {
            let sym = SymbolicLu::try_new(a.symbolic()).map_err(|_| LinSysError::Singular)?;
            cache.pattern = Some((rp.to_vec(), ci.to_vec(), sym));
        }
        &cache.pattern.as_ref().unwrap().2
    };
    let lu = Lu::try_new_with_symbolic(symbolic.clone(), a.as_ref())
        .map_err(|_| LinSysError::Singular)?;

    let scaled_solve = |residual: &[Complex64]| -> Vec<Complex64> {
        let mut b = faer::Mat::<Complex64>::zeros(matrix.n, 1);
        for (k, v) in residual.iter().enumerate() {
            b[(k, 0)] = v * row_scale[k];
        }
        let y = lu.solve(&b);
        (0..matrix.n).map(|k| y[(k, 0)] * col_scale[k]).collect()
    };

    let b_norm = rhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let residual_norm = |x: &[Complex64]| -> Result<f64, LinSysError> {
        let ax = matrix.matvec(x)?;
        Ok(ax.iter().zip(rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt())
    };

    let mut solution = scaled_solve(rhs);
    if solution.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(LinSysError::Singular);
    }
    let mut res = residual_norm(&solution)?;
    let mut iterations = 1usize;
    for _ in 0..2 {
        let floor = f64::EPSILON * b_norm;
        if res <= floor {
            break;
        }
        let ax = matrix.matvec(&solution)?;
        let r: Vec<Complex64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = scaled_solve(&r);
        let candidate: Vec<Complex64> =
            solution.iter().zip(&dx).map(|(x, d)| x + d).collect();
        if candidate.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            break;
        }
        let cres = residual_norm(&candidate)?;
        if cres >= res {
            break;
        }
        solution = candidate;
        res = cres;
        iterations += 1;
    }

    let rel = if b_norm > 0.0 { res / b_norm } else { res };
    let report = SolveReport { iterations, rel_residual: rel, converged: rel <= tol };
    Ok((solution, report))
}

pub fn solve(
    matrix: &SparseMatrix,
    rhs: &[Complex64],
    tol: f64,
) -> Result<(Vec<Complex64>, SolveReport), LinSysError> {
    solve_with_cache(matrix, rhs, tol, &mut FactorizationCache::new())
}
