//! Newton's method with a defect-reducing line search and adaptive linear
//! tolerances.

use crate::error::{Error, Result};
use crate::linalg::{norm2, LinearSolver, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub min_lin_red: f64,
    pub max_line_search: usize,
    pub damping: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            max_iter: 100,
            rel_tol: 1e-7,
            abs_tol: 1e-9,
            min_lin_red: 1e-3,
            max_line_search: 100,
            damping: 0.5,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.rel_tol, self.abs_tol, self.min_lin_red];
        if self.max_iter == 0 || self.max_line_search == 0 || pos.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument(
                "Newton iteration counts and tolerances must be positive".into(),
            ));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "line-search damping {} outside (0, 1)",
                self.damping
            )));
        }
        Ok(())
    }

    /// Stopping threshold for an initial residual norm.
    pub fn max_tol(&self, r0: f64) -> f64 {
        (r0 * self.rel_tol).max(self.abs_tol)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonStats {
    pub iterations: usize,
    /// Residual norms `|r^0|, ..., |r^m|`.
    pub residual_norms: Vec<f64>,
    /// Trials used by the line search in each iteration.
    pub line_search_steps: Vec<usize>,
    /// Iterations whose line search ran out of trials.
    pub line_search_exhausted: Vec<usize>,
    pub linear_iterations: Vec<usize>,
    pub converged: bool,
    pub max_tol: f64,
}

impl NewtonStats {
    pub fn total_linear_iterations(&self) -> usize {
        self.linear_iterations.iter().sum()
    }
}

/// Linear-solve target for iteration `m` given the current and previous
/// residual norms.
pub fn linear_reduction(cfg: &NewtonConfig, max_tol: f64, r: f64, r_prev: Option<f64>) -> f64 {
    let inner = match r_prev {
        Some(rp) if rp > 0.0 => cfg.min_lin_red.min(r * r / (rp * rp)),
        _ => cfg.min_lin_red,
    };
    (max_tol / (10.0 * r)).max(inner)
}

fn checked_norm(r: &[f64]) -> Result<f64> {
    let n = norm2(r);
    if n.is_finite() {
        Ok(n)
    } else {
        Err(Error::Numeric("Newton residual".into()))
    }
}

/// Solve `r(x) = 0` from `x0`. The stopping threshold is derived from the
/// initial residual.
pub fn newton_solve<R, J>(
    residual: R,
    jacobian: J,
    linear: &mut dyn LinearSolver,
    x0: Vec<f64>,
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, NewtonStats)>
where
    R: FnMut(&[f64]) -> Result<Vec<f64>>,
    J: FnMut(&[f64]) -> Result<SparseMatrix>,
{
    newton_solve_to(residual, jacobian, linear, x0, cfg, None)
}

/// As [`newton_solve`] but with an externally fixed stopping threshold
/// when `max_tol` is given.
pub fn newton_solve_to<R, J>(
    mut residual: R,
    mut jacobian: J,
    linear: &mut dyn LinearSolver,
    x0: Vec<f64>,
    cfg: &NewtonConfig,
    max_tol: Option<f64>,
) -> Result<(Vec<f64>, NewtonStats)>
where
    R: FnMut(&[f64]) -> Result<Vec<f64>>,
    J: FnMut(&[f64]) -> Result<SparseMatrix>,
{
    cfg.validate()?;
    let mut x = x0;
    let mut r = residual(&x)?;
    let mut rn = checked_norm(&r)?;
    let tol = max_tol.unwrap_or_else(|| cfg.max_tol(rn));
    let mut stats = NewtonStats {
        residual_norms: vec![rn],
        max_tol: tol,
        ..Default::default()
    };
    let mut r_prev = None;
    while rn > tol {
        if stats.iterations >= cfg.max_iter {
            return Ok((x, stats));
        }
        let m = stats.iterations;
        let a = jacobian(&x)?;
        let b: Vec<f64> = r.iter().map(|v| -v).collect();
        let red = linear_reduction(cfg, tol, rn, r_prev);
        let (dx, ls) = linear.solve(&a, &b, red).map_err(|e| Error::Solver {
            iteration: m,
            source: Box::new(e),
        })?;
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver {
                iteration: m,
                source: Box::new(Error::Numeric("Newton update".into())),
            });
        }
        stats.linear_iterations.push(ls.iterations);

        let mut lambda = 1.0;
        let mut trials = 0;
        let mut accepted = None;
        let mut last = None;
        while trials < cfg.max_line_search {
            trials += 1;
            let xt: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + lambda * d).collect();
            // a trial that leaves the admissible set counts as rejected
            let rt = match residual(&xt) {
                Ok(rt) => rt,
                Err(Error::Numeric(_)) => {
                    lambda *= cfg.damping;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let rtn = norm2(&rt);
            if rtn.is_finite() && rtn <= (1.0 - lambda / 4.0) * rn {
                accepted = Some((xt, rt, rtn));
                break;
            }
            if rtn.is_finite() {
                last = Some((xt, rt, rtn));
            }
            lambda *= cfg.damping;
        }
        stats.line_search_steps.push(trials);
        let (xn, rnew, rnn) = match accepted.or_else(|| {
            stats.line_search_exhausted.push(m);
            last
        }) {
            Some(v) => v,
            None => return Err(Error::Numeric("every line-search trial".into())),
        };
        x = xn;
        r = rnew;
        r_prev = Some(rn);
        rn = rnn;
        stats.iterations += 1;
        stats.residual_norms.push(rn);
    }
    stats.converged = true;
    Ok((x, stats))
}
