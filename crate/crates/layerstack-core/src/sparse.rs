//! Sparse symmetric positive-definite linear algebra.
//!
//! Compressed-sparse-row storage for the assembled stiffness matrices,
//! symmetric Dirichlet elimination with a back-substitution map, and a
//! Jacobi-preconditioned conjugate-gradient solver. A single solve is
//! deterministic: fixed iteration order, fixed dot-product order, no
//! data-dependent reductions.

use thiserror::Error;

/// Errors raised by the sparse linear-algebra layer.
#[derive(Debug, Error)]
pub enum LsolveError {
    #[error("dimension mismatch: matrix is {n}×{n} but vector has length {len}")]
    DimensionMismatch { n: usize, len: usize },
    #[error("constrained DOF {dof} out of range for a {n}-DOF system")]
    DofOutOfRange { dof: usize, n: usize },
    #[error("DOF {dof} constrained twice with conflicting values {first} and {second}")]
    DirichletConflict { dof: usize, first: f64, second: f64 },
    #[error("matrix row {row} has no diagonal entry (needed by the Jacobi preconditioner)")]
    MissingDiagonal { row: usize },
    #[error(
        "conjugate gradients stalled at relative residual {rel_residual:.3e} after {iterations} iterations (tail of residual history: {history:?})"
    )]
    NotConverged {
        iterations: usize,
        rel_residual: f64,
        history: Vec<f64>,
    },
}

/// Symmetric positive-(semi)definite sparse matrix in CSR form.
///
/// Symmetry is a construction-time contract: assembly always inserts both
/// `(i, j)` and `(j, i)`; [`SparseSpd::is_symmetric`] verifies it in tests.
/// Definiteness holds after Dirichlet elimination, which is when solves run.
#[derive(Debug, Clone)]
pub struct SparseSpd {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSpd {
    /// Build from (row, col, value) triplets, summing duplicates.
    ///
    /// The triplet list is sorted stably by (row, col), so identical input
    /// produces identical storage — bit-reproducibility of every later solve
    /// starts here.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut current_row = 0;
        for (r, c, v) in triplets {
            debug_assert!(r < n && c < n, "triplet ({r},{c}) outside {n}×{n}");
            while current_row < r {
                row_ptr.push(col_idx.len());
                current_row += 1;
            }
            if col_idx.len() > row_ptr[current_row] && *col_idx.last().unwrap() == c {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
            }
        }
        while current_row < n {
            row_ptr.push(col_idx.len());
            current_row += 1;
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Identity matrix (test convenience).
    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `i` as (column, value) pairs, ascending by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    /// Convenience allocating matvec.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// xᵀ A x.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            let mut row_acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row_acc += self.values[k] * x[self.col_idx[k]];
            }
            acc += x[i] * row_acc;
        }
        acc
    }

    /// Diagonal entries; zero where a row has no stored diagonal.
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    d[i] = self.values[k];
                }
            }
        }
        d
    }

    /// The stored value at (i, j), or zero if absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.col_idx[k] == j {
                return self.values[k];
            }
        }
        0.0
    }

    /// Exact structural and numerical symmetry check (test support).
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self
            .values
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
            .max(1e-300);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                if (self.values[k] - self.get(j, i)).abs() > rel_tol * scale {
                    return false;
                }
            }
        }
        true
    }

    /// Dense copy, for handing to the dense test oracles.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                dense[i][self.col_idx[k]] = self.values[k];
            }
        }
        dense
    }
}

/// Outcome of [`apply_dirichlet`]: the reduced SPD system plus the map that
/// reinserts prescribed values into a full-length solution vector.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub matrix: SparseSpd,
    pub rhs: Vec<f64>,
    full_dim: usize,
    full_of_free: Vec<usize>,
    prescribed: Vec<(usize, f64)>,
}

impl ReducedSystem {
    /// Number of retained (free) DOFs.
    pub fn free_dim(&self) -> usize {
        self.full_of_free.len()
    }

    /// Map a reduced solution back to the full DOF numbering, reinserting the
    /// prescribed values.
    pub fn expand(&self, x_reduced: &[f64]) -> Vec<f64> {
        assert_eq!(x_reduced.len(), self.full_of_free.len());
        let mut full = vec![0.0; self.full_dim];
        for (&value, &i) in x_reduced.iter().zip(self.full_of_free.iter()) {
            full[i] = value;
        }
        for &(i, v) in &self.prescribed {
            full[i] = v;
        }
        full
    }

    /// Restrict a full-length vector to the free DOFs (warm starts).
    pub fn restrict(&self, x_full: &[f64]) -> Vec<f64> {
        assert_eq!(x_full.len(), self.full_dim);
        self.full_of_free.iter().map(|&i| x_full[i]).collect()
    }
}

/// Symmetric Dirichlet elimination.
///
/// Constrained DOFs are removed from the system; the right-hand side of every
/// retained row i picks up −A[i, dof]·value for each constrained dof. A
/// duplicate constraint is accepted only when it prescribes the identical
/// value.
pub fn apply_dirichlet(
    a: &SparseSpd,
    b: &[f64],
    constraints: &[(usize, f64)],
) -> Result<ReducedSystem, LsolveError> {
    let n = a.dim();
    if b.len() != n {
        return Err(LsolveError::DimensionMismatch { n, len: b.len() });
    }
    let mut prescribed_value: Vec<Option<f64>> = vec![None; n];
    for &(dof, value) in constraints {
        if dof >= n {
            return Err(LsolveError::DofOutOfRange { dof, n });
        }
        match prescribed_value[dof] {
            None => prescribed_value[dof] = Some(value),
            Some(existing) if existing == value => {}
            Some(existing) => {
                return Err(LsolveError::DirichletConflict {
                    dof,
                    first: existing,
                    second: value,
                })
            }
        }
    }

    let mut free_of_full: Vec<Option<usize>> = vec![None; n];
    let mut full_of_free = Vec::new();
    for i in 0..n {
        if prescribed_value[i].is_none() {
            free_of_full[i] = Some(full_of_free.len());
            full_of_free.push(i);
        }
    }

    let m = full_of_free.len();
    let mut rhs = Vec::with_capacity(m);
    let mut triplets = Vec::new();
    for (fi, &i) in full_of_free.iter().enumerate() {
        let mut acc = b[i];
        for (j, v) in a.row(i) {
            match free_of_full[j] {
                Some(fj) => triplets.push((fi, fj, v)),
                None => acc -= v * prescribed_value[j].unwrap(),
            }
        }
        rhs.push(acc);
    }

    let prescribed = (0..n)
        .filter_map(|i| prescribed_value[i].map(|v| (i, v)))
        .collect();
    Ok(ReducedSystem {
        matrix: SparseSpd::from_triplets(m, triplets),
        rhs,
        full_dim: n,
        full_of_free,
        prescribed,
    })
}

/// Result of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients to a relative residual.
///
/// `x0` warm-starts the iteration. Convergence target is
/// ‖Ax − b‖₂ ≤ `tol_lin`·‖b‖₂; a zero right-hand side short-circuits to the
/// exact answer x = 0.
pub fn solve_spd(
    a: &SparseSpd,
    b: &[f64],
    x0: Option<&[f64]>,
    tol_lin: f64,
    max_iters: usize,
) -> Result<CgSolution, LsolveError> {
    solve_spd_observed(a, b, x0, tol_lin, max_iters, |_| {})
}

/// [`solve_spd`] with a per-iteration observer receiving each iterate.
///
/// The observer exists for convergence diagnostics and tests (e.g. checking
/// the energy-norm error decreases); it does not influence the iteration.
pub fn solve_spd_observed(
    a: &SparseSpd,
    b: &[f64],
    x0: Option<&[f64]>,
    tol_lin: f64,
    max_iters: usize,
    mut observer: impl FnMut(&[f64]),
) -> Result<CgSolution, LsolveError> {
    let n = a.dim();
    if b.len() != n {
        return Err(LsolveError::DimensionMismatch { n, len: b.len() });
    }
    if n == 0 {
        return Ok(CgSolution {
            x: Vec::new(),
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            rel_residual: 0.0,
        });
    }

    let diag = a.diagonal();
    let mut diag_inv = vec![0.0; n];
    for i in 0..n {
        if diag[i] <= 0.0 {
            return Err(LsolveError::MissingDiagonal { row: i });
        }
        diag_inv[i] = 1.0 / diag[i];
    }

    let mut x = match x0 {
        Some(x0) => {
            assert_eq!(x0.len(), n);
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    a.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = (0..n).map(|i| diag_inv[i] * r[i]).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    let mut ap = vec![0.0; n];

    for iter in 0..max_iters {
        let r_norm = norm2(&r);
        history.push(r_norm / b_norm);
        if r_norm <= tol_lin * b_norm {
            return Ok(CgSolution {
                x,
                iterations: iter,
                rel_residual: r_norm / b_norm,
            });
        }
        a.matvec(&p, &mut ap);
        let p_ap = dot(&p, &ap);
        if p_ap <= 0.0 {
            // Not positive definite along p: report as non-convergence with
            // the evidence collected so far.
            break;
        }
        let alpha = rz / p_ap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        observer(&x);
        for i in 0..n {
            z[i] = diag_inv[i] * r[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    let rel_residual = norm2(&r) / b_norm;
    let tail_start = history.len().saturating_sub(8);
    Err(LsolveError::NotConverged {
        iterations: history.len(),
        rel_residual,
        history: history[tail_start..].to_vec(),
    })
}

/// Default iteration cap used by callers that do not have a better bound.
pub fn default_cg_cap(n: usize) -> usize {
    (20 * n).max(2000)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
