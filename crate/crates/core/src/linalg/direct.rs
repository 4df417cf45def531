//! Sparse and dense direct factorizations, backed by faer.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};

use super::SparseMatrix;
use crate::error::{Error, Result};

fn to_faer(a: &SparseMatrix) -> SparseColMat<usize, f64> {
    let (col_ptr, row_idx, vals) = a.to_csc();
    let sym = SymbolicSparseColMat::new_checked(a.nrows(), a.ncols(), col_ptr, None, row_idx);
    SparseColMat::new(sym, vals)
}

fn check_square(a: &SparseMatrix, b: &[f64]) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::dim("square matrix columns", a.nrows(), a.ncols()));
    }
    if b.len() != a.nrows() {
        return Err(Error::dim("right-hand side", a.nrows(), b.len()));
    }
    Ok(())
}

/// Sparse LU with partial pivoting. Reuses the symbolic analysis as long as
/// the sparsity pattern does not change.
#[derive(Default)]
pub struct SparseLu {
    cached: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
}

impl SparseLu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&mut self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
        check_square(a, b)?;
        if a.nrows() == 0 {
            return Ok(Vec::new());
        }
        let mat = to_faer(a);
        let reuse = matches!(&self.cached, Some((rp, ci, _)) if rp == a.row_ptr() && ci == a.col_idx());
        if !reuse {
            let sym = SymbolicLu::try_new(mat.symbolic())
                .map_err(|e| Error::Singular(format!("symbolic LU failed: {e:?}")))?;
            self.cached = Some((a.row_ptr().to_vec(), a.col_idx().to_vec(), sym));
        }
        let sym = self.cached.as_ref().map(|c| c.2.clone()).expect("cached above");
        let lu = Lu::try_new_with_symbolic(sym, mat.as_ref())
            .map_err(|e| Error::Singular(format!("numeric LU failed: {e:?}")))?;
        let mut rhs = faer::Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        lu.solve_in_place(rhs.as_mut());
        let x: Vec<f64> = (0..b.len()).map(|i| rhs[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("zero pivot in sparse LU".into()));
        }
        Ok(x)
    }
}

/// One-shot sparse direct solve.
pub fn lu_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    SparseLu::new().solve(a, b)
}

/// Exact 1-norm condition number through a dense inverse; infinite for
/// singular input.
pub fn cond1_exact(a: &SparseMatrix) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::dim("square matrix columns", a.nrows(), a.ncols()));
    }
    let n = a.nrows();
    if n > 2000 {
        return Err(Error::InvalidArgument(format!(
            "dense condition number limited to 2000 unknowns, got {n}"
        )));
    }
    let dense = a.to_dense();
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| dense[i][j]);
    let inv = m.partial_piv_lu().inverse();
    let mut inv_norm: f64 = 0.0;
    for j in 0..n {
        let mut s = 0.0;
        for i in 0..n {
            s += inv[(i, j)].abs();
        }
        inv_norm = inv_norm.max(s);
    }
    if !inv_norm.is_finite() {
        return Ok(f64::INFINITY);
    }
    Ok(a.norm_one() * inv_norm)
}
