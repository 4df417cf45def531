//! Restarted flexible GMRES with ILU(0) and SIMPLE-type preconditioners.

use super::{dot, norm2, SparseMatrix};
use crate::error::{Error, Result};

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec(x, y)
    }
}

/// Approximate inverse `z ~ A^{-1} r`. May differ between calls.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPrecond;

impl Preconditioner for IdentityPrecond {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &SparseMatrix) -> Self {
        Jacobi {
            inv_diag: a
                .diagonal()
                .iter()
                .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterativeStats {
    pub iterations: usize,
    /// True relative residual `|b - A x| / |b|` of the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
    pub breakdown: bool,
    /// Estimated relative residual after every iteration.
    pub history: Vec<f64>,
}

/// Right-preconditioned restarted FGMRES starting from zero.
pub fn fgmres(
    op: &dyn LinearOperator,
    b: &[f64],
    precond: &dyn Preconditioner,
    restart: usize,
    target_reduction: f64,
    max_iter: usize,
) -> (Vec<f64>, IterativeStats) {
    let n = op.dim();
    let restart = restart.max(1);
    let mut x = vec![0.0; n];
    let mut stats = IterativeStats::default();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        stats.converged = true;
        return (x, stats);
    }
    let tol = target_reduction * bnorm;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    loop {
        op.apply(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = norm2(&r);
        stats.relative_residual = beta / bnorm;
        if beta <= tol {
            stats.converged = true;
            break;
        }
        if stats.iterations >= max_iter || stats.breakdown {
            break;
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::new();
        let mut h: Vec<Vec<f64>> = Vec::new(); // column j has j + 2 entries
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        let mut g = vec![beta];
        for j in 0..restart {
            let mut zj = vec![0.0; n];
            precond.apply(&v[j], &mut zj);
            op.apply(&zj, &mut w);
            z.push(zj);
            stats.iterations += 1;
            let mut col = vec![0.0; j + 2];
            for (i, vi) in v.iter().enumerate() {
                let hij = dot(&w, vi);
                col[i] = hij;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
            let hnext = norm2(&w);
            col[j + 1] = hnext;
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let rho = col[j].hypot(col[j + 1]);
            let (c, s) = if rho == 0.0 {
                (1.0, 0.0)
            } else {
                (col[j] / rho, col[j + 1] / rho)
            };
            col[j] = rho;
            col[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g.push(-s * g[j]);
            g[j] *= c;
            h.push(col);
            let resid = g[j + 1].abs();
            stats.history.push(resid / bnorm);
            let happy = hnext <= 1e-14 * beta;
            if happy {
                stats.breakdown = true;
            }
            if happy || resid <= tol || stats.iterations >= max_iter {
                break;
            }
            v.push(w.iter().map(|wi| wi / hnext).collect());
        }
        // back substitution for the least-squares coefficients
        let k = h.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for (jj, yj) in y.iter().enumerate().skip(i + 1) {
                s -= h[jj][i] * yj;
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        for (yi, zi) in y.iter().zip(&z) {
            for (xk, zk) in x.iter_mut().zip(zi) {
                *xk += yi * zk;
            }
        }
    }
    (x, stats)
}

/// Incomplete LU without fill-in: factors share the pattern of `A`. Unit
/// lower part and upper part are stored in one matrix.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: SparseMatrix,
    diag_pos: Vec<usize>,
    /// A zero pivot was replaced by a small shift.
    pub shifted: bool,
}

pub fn ilu0(a: &SparseMatrix) -> Result<Ilu0> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::dim("square matrix columns", n, a.ncols()));
    }
    let mut diag_pos = Vec::with_capacity(n);
    for i in 0..n {
        diag_pos.push(a.find(i, i).ok_or_else(|| {
            Error::InvalidArgument(format!("row {i} has no diagonal entry in its pattern"))
        })?);
    }
    let shift = {
        let s = 1e-12 * a.norm_inf();
        if s > 0.0 {
            s
        } else {
            1e-12
        }
    };
    let mut lu = a.clone();
    let mut shifted = false;
    let row_ptr = lu.row_ptr().to_vec();
    let cols = lu.col_idx().to_vec();
    let mut pos_of = vec![usize::MAX; n];
    for i in 0..n {
        let (start, end) = (row_ptr[i], row_ptr[i + 1]);
        for k in start..end {
            pos_of[cols[k]] = k;
        }
        let vals = lu.values_mut();
        for kk in start..end {
            let k = cols[kk];
            if k >= i {
                break;
            }
            let lik = vals[kk] / vals[diag_pos[k]];
            vals[kk] = lik;
            for kj in diag_pos[k] + 1..row_ptr[k + 1] {
                let p = pos_of[cols[kj]];
                if p != usize::MAX {
                    vals[p] -= lik * vals[kj];
                }
            }
        }
        let d = &mut vals[diag_pos[i]];
        if *d == 0.0 || !d.is_finite() {
            *d = shift;
            shifted = true;
        }
        for k in start..end {
            pos_of[cols[k]] = usize::MAX;
        }
    }
    Ok(Ilu0 {
        lu,
        diag_pos,
        shifted,
    })
}

impl Ilu0 {
    pub fn factors(&self) -> &SparseMatrix {
        &self.lu
    }

    pub fn solve(&self, r: &[f64], z: &mut [f64]) {
        let n = self.diag_pos.len();
        let rp = self.lu.row_ptr();
        let ci = self.lu.col_idx();
        let v = self.lu.values();
        for i in 0..n {
            let mut s = r[i];
            for k in rp[i]..self.diag_pos[i] {
                s -= v[k] * z[ci[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in self.diag_pos[i] + 1..rp[i + 1] {
                s -= v[k] * z[ci[k]];
            }
            z[i] = s / v[self.diag_pos[i]];
        }
    }
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.solve(r, z)
    }
}

/// SIMPLE-type block preconditioner for a 2x2 block matrix split into
/// `first` and `second` unknowns. The first block is approximated by its
/// diagonal `D`; the Schur complement `A22 - A21 D^{-1} A12` is formed
/// explicitly and approximated by ILU(0).
pub struct Simple {
    first: Vec<usize>,
    second: Vec<usize>,
    inv_d: Vec<f64>,
    a12: SparseMatrix,
    a21: SparseMatrix,
    schur: Ilu0,
    pub shifted: bool,
}

pub fn simple_precond(a: &SparseMatrix, first: &[usize], second: &[usize]) -> Result<Simple> {
    if first.len() + second.len() != a.nrows() {
        return Err(Error::dim("block index sets", a.nrows(), first.len() + second.len()));
    }
    let a11 = a.submatrix(first, first);
    let a12 = a.submatrix(first, second);
    let a21 = a.submatrix(second, first);
    let a22 = a.submatrix(second, second);
    let shift = {
        let s = 1e-12 * a.norm_inf();
        if s > 0.0 {
            s
        } else {
            1e-12
        }
    };
    let mut shifted = false;
    let inv_d: Vec<f64> = a11
        .diagonal()
        .into_iter()
        .map(|d| {
            if d == 0.0 {
                shifted = true;
                1.0 / shift
            } else {
                1.0 / d
            }
        })
        .collect();

    let m = second.len();
    let mut acc = vec![0.0; m];
    let mut mark = vec![false; m];
    let mut rows: Vec<Vec<usize>> = Vec::with_capacity(m);
    let mut triplets = Vec::new();
    for i in 0..m {
        let mut touched = vec![i];
        mark[i] = true;
        let (c22, v22) = a22.row(i);
        for (&j, &x) in c22.iter().zip(v22) {
            if !mark[j] {
                mark[j] = true;
                touched.push(j);
            }
            acc[j] += x;
        }
        let (c21, v21) = a21.row(i);
        for (&k, &x) in c21.iter().zip(v21) {
            let f = x * inv_d[k];
            let (c12, v12) = a12.row(k);
            for (&j, &y) in c12.iter().zip(v12) {
                if !mark[j] {
                    mark[j] = true;
                    touched.push(j);
                }
                acc[j] -= f * y;
            }
        }
        for &j in &touched {
            triplets.push((i, j, acc[j]));
            acc[j] = 0.0;
            mark[j] = false;
        }
        rows.push(touched);
    }
    let mut s = SparseMatrix::from_pattern(m, m, rows);
    for (i, j, v) in triplets {
        s.add(i, j, v);
    }
    let schur = ilu0(&s)?;
    shifted |= schur.shifted;
    Ok(Simple {
        first: first.to_vec(),
        second: second.to_vec(),
        inv_d,
        a12,
        a21,
        schur,
        shifted,
    })
}

impl Preconditioner for Simple {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let y1: Vec<f64> = self
            .first
            .iter()
            .zip(&self.inv_d)
            .map(|(&i, d)| r[i] * d)
            .collect();
        let mut rhs2 = self.a21.mul(&y1);
        for (k, &i) in self.second.iter().enumerate() {
            rhs2[k] = r[i] - rhs2[k];
        }
        let mut x2 = vec![0.0; rhs2.len()];
        self.schur.solve(&rhs2, &mut x2);
        let corr = self.a12.mul(&x2);
        for (k, &i) in self.first.iter().enumerate() {
            z[i] = y1[k] - self.inv_d[k] * corr[k];
        }
        for (k, &i) in self.second.iter().enumerate() {
            z[i] = x2[k];
        }
    }
}
