//! Sparse linear algebra and the linear-solver abstraction used by Newton.

mod direct;
mod iterative;
mod sparse;

pub use direct::{cond1_exact, lu_solve, SparseLu};
pub use iterative::{
    fgmres, ilu0, simple_precond, IdentityPrecond, Ilu0, IterativeStats, Jacobi, LinearOperator,
    Preconditioner, Simple,
};
pub use sparse::{dot, norm2, SparseMatrix};

use crate::error::Result;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinearStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` to a relative residual reduction `rel_reduction`
/// (ignored by direct solvers).
pub trait LinearSolver {
    fn solve(&mut self, a: &SparseMatrix, b: &[f64], rel_reduction: f64)
        -> Result<(Vec<f64>, LinearStats)>;
}

#[derive(Default)]
pub struct DirectSolver {
    lu: SparseLu,
}

impl DirectSolver {
    pub fn new() -> Self {
        Self::default()
    }
}

impl LinearSolver for DirectSolver {
    fn solve(
        &mut self,
        a: &SparseMatrix,
        b: &[f64],
        _rel_reduction: f64,
    ) -> Result<(Vec<f64>, LinearStats)> {
        let x = self.lu.solve(a, b)?;
        let r: Vec<f64> = a.mul(&x).iter().zip(b).map(|(p, q)| p - q).collect();
        let bn = norm2(b);
        let stats = LinearStats {
            iterations: 1,
            relative_residual: if bn > 0.0 { norm2(&r) / bn } else { 0.0 },
            converged: true,
        };
        Ok((x, stats))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrecondKind {
    None,
    Ilu0,
    /// SIMPLE split into the given local index sets.
    Simple { first: Vec<usize>, second: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FgmresSolver {
    pub precond: PrecondKind,
    pub restart: usize,
    pub max_iter: usize,
}

impl FgmresSolver {
    pub fn ilu0(max_iter: usize) -> Self {
        FgmresSolver {
            precond: PrecondKind::Ilu0,
            restart: 200,
            max_iter,
        }
    }
}

impl LinearSolver for FgmresSolver {
    fn solve(
        &mut self,
        a: &SparseMatrix,
        b: &[f64],
        rel_reduction: f64,
    ) -> Result<(Vec<f64>, LinearStats)> {
        let (x, s) = match &self.precond {
            PrecondKind::None => fgmres(a, b, &IdentityPrecond, self.restart, rel_reduction, self.max_iter),
            PrecondKind::Ilu0 => {
                let p = ilu0(a)?;
                fgmres(a, b, &p, self.restart, rel_reduction, self.max_iter)
            }
            PrecondKind::Simple { first, second } => {
                let p = simple_precond(a, first, second)?;
                fgmres(a, b, &p, self.restart, rel_reduction, self.max_iter)
            }
        };
        Ok((
            x,
            LinearStats {
                iterations: s.iterations,
                relative_residual: s.relative_residual,
                converged: s.converged,
            },
        ))
    }
}
