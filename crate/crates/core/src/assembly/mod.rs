//! Residual and Jacobian of the fully discrete coupled system.
//!
//! Global unknowns are ordered `(phi, mu, [c], v, p)`: the P1 fields by
//! vertex, velocity interleaved per P2 node (`2 i + k`), pressure by vertex.
//! The Cahn-Hilliard block is `(phi, mu, [c])`, the Navier-Stokes block
//! `(v, p)`.

pub(crate) mod kernel;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fespace::{build_p1, build_p2vec, quadrature, QuadratureRule, ScalarSpaceP1, VectorSpaceP2};
use crate::linalg::SparseMatrix;
use crate::mesh::{BoundaryTag, TriMesh};
use crate::physics::ModelParams;

pub(crate) use kernel::QuadTables;

/// Default volume quadrature degree.
pub const QUAD_DEGREE: usize = 5;

/// Offsets of the field blocks inside the global unknown vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_p1: usize,
    pub n_p2_nodes: usize,
    pub reactive: bool,
}

impl Layout {
    pub fn phi(&self) -> usize {
        0
    }
    pub fn mu(&self) -> usize {
        self.n_p1
    }
    pub fn c(&self) -> Option<usize> {
        self.reactive.then_some(2 * self.n_p1)
    }
    pub fn v(&self) -> usize {
        if self.reactive {
            3 * self.n_p1
        } else {
            2 * self.n_p1
        }
    }
    pub fn p(&self) -> usize {
        self.v() + 2 * self.n_p2_nodes
    }
    pub fn n_ch(&self) -> usize {
        self.v()
    }
    pub fn n_ns(&self) -> usize {
        2 * self.n_p2_nodes + self.n_p1
    }
    pub fn total(&self) -> usize {
        self.n_ch() + self.n_ns()
    }
    /// Indices of the Cahn-Hilliard unknowns (phase field, potential and,
    /// when present, concentration).
    pub fn ch_indices(&self) -> Vec<usize> {
        (0..self.n_ch()).collect()
    }
    pub fn ns_indices(&self) -> Vec<usize> {
        (self.n_ch()..self.total()).collect()
    }
}

/// Coefficients of all fields at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub phi: Vec<f64>,
    pub mu: Vec<f64>,
    pub c: Option<Vec<f64>>,
    /// Interleaved P2 velocity.
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub time: f64,
}

impl SystemState {
    pub fn zeros(layout: &Layout) -> Self {
        SystemState {
            phi: vec![0.0; layout.n_p1],
            mu: vec![0.0; layout.n_p1],
            c: layout.reactive.then(|| vec![0.0; layout.n_p1]),
            v: vec![0.0; 2 * layout.n_p2_nodes],
            p: vec![0.0; layout.n_p1],
            time: 0.0,
        }
    }

    pub fn check(&self, layout: &Layout) -> Result<()> {
        let n = layout.n_p1;
        for (what, len, exp) in [
            ("phi", self.phi.len(), n),
            ("mu", self.mu.len(), n),
            ("p", self.p.len(), n),
            ("v", self.v.len(), 2 * layout.n_p2_nodes),
        ] {
            if len != exp {
                return Err(Error::dim(what, exp, len));
            }
        }
        match (&self.c, layout.reactive) {
            (Some(c), true) if c.len() == n => Ok(()),
            (Some(c), true) => Err(Error::dim("c", n, c.len())),
            (None, false) => Ok(()),
            (Some(_), false) => Err(Error::InvalidArgument(
                "concentration present but the reactive model is off".into(),
            )),
            (None, true) => Err(Error::InvalidArgument(
                "reactive model needs a concentration field".into(),
            )),
        }
    }

    pub fn pack(&self, layout: &Layout) -> Vec<f64> {
        let mut x = Vec::with_capacity(layout.total());
        x.extend_from_slice(&self.phi);
        x.extend_from_slice(&self.mu);
        if let Some(c) = &self.c {
            x.extend_from_slice(c);
        }
        x.extend_from_slice(&self.v);
        x.extend_from_slice(&self.p);
        x
    }

    pub fn unpack(layout: &Layout, x: &[f64], time: f64) -> Self {
        let n = layout.n_p1;
        SystemState {
            phi: x[..n].to_vec(),
            mu: x[layout.mu()..layout.mu() + n].to_vec(),
            c: layout.c().map(|o| x[o..o + n].to_vec()),
            v: x[layout.v()..layout.p()].to_vec(),
            p: x[layout.p()..layout.p() + n].to_vec(),
            time,
        }
    }
}

/// Which terms the residual contains.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AssemblyFlags {
    /// Use the preprocessing mobility and drop the flow equations.
    pub preprocessing: bool,
    /// Concentration equation and reaction couplings.
    pub reactive: bool,
}

/// Prescribed values for individual global unknowns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Constraints {
    pub dofs: Vec<usize>,
    pub values: Vec<f64>,
}

impl Constraints {
    pub fn push(&mut self, dof: usize, value: f64) {
        self.dofs.push(dof);
        self.values.push(value);
    }

    /// Overwrite constrained entries of `x` with their prescribed values.
    pub fn apply(&self, x: &mut [f64]) {
        for (&d, &v) in self.dofs.iter().zip(&self.values) {
            x[d] = v;
        }
    }
}

/// Mesh, spaces and assembly tables for one discretization.
pub struct Discretization {
    pub mesh: Arc<TriMesh>,
    pub p1: Arc<ScalarSpaceP1>,
    pub p2: Arc<VectorSpaceP2>,
    pub layout: Layout,
    pub quad: QuadratureRule,
    pub(crate) tables: QuadTables,
    pattern: SparseMatrix,
}

impl Discretization {
    pub fn new(mesh: Arc<TriMesh>, velocity_dirichlet: &[BoundaryTag], reactive: bool) -> Result<Self> {
        Self::with_quadrature(mesh, velocity_dirichlet, reactive, QUAD_DEGREE)
    }

    pub fn with_quadrature(
        mesh: Arc<TriMesh>,
        velocity_dirichlet: &[BoundaryTag],
        reactive: bool,
        degree: usize,
    ) -> Result<Self> {
        let p1 = Arc::new(build_p1(mesh.clone()));
        let p2 = Arc::new(build_p2vec(mesh.clone(), velocity_dirichlet));
        let layout = Layout {
            n_p1: p1.n_dofs(),
            n_p2_nodes: p2.n_nodes(),
            reactive,
        };
        let quad = quadrature(degree)?;
        let tables = QuadTables::new(&quad);
        let pattern = build_pattern(&mesh, &p2, &layout);
        Ok(Discretization {
            mesh,
            p1,
            p2,
            layout,
            quad,
            tables,
            pattern,
        })
    }

    /// Global indices of the local element unknowns, in kernel order.
    pub(crate) fn element_dofs(&self, t: usize, out: &mut Vec<usize>) {
        element_dofs(&self.mesh, &self.p2, &self.layout, t, out)
    }

    pub fn pattern(&self) -> &SparseMatrix {
        &self.pattern
    }
}

fn element_dofs(mesh: &TriMesh, p2: &VectorSpaceP2, l: &Layout, t: usize, out: &mut Vec<usize>) {
    out.clear();
    let tri = mesh.triangles()[t];
    for &v in &tri {
        out.push(l.phi() + v);
    }
    for &v in &tri {
        out.push(l.mu() + v);
    }
    if let Some(oc) = l.c() {
        for &v in &tri {
            out.push(oc + v);
        }
    }
    for n in p2.element_nodes(t) {
        out.push(l.v() + 2 * n);
        out.push(l.v() + 2 * n + 1);
    }
    for &v in &tri {
        out.push(l.p() + v);
    }
}

/// Field of a local dof in kernel order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fld {
    Phi,
    Mu,
    C,
    V,
    P,
}

fn local_fields(reactive: bool) -> Vec<Fld> {
    let mut f = vec![Fld::Phi; 3];
    f.extend([Fld::Mu; 3]);
    if reactive {
        f.extend([Fld::C; 3]);
    }
    f.extend([Fld::V; 12]);
    f.extend([Fld::P; 3]);
    f
}

fn couples(row: Fld, col: Fld) -> bool {
    use Fld::*;
    match row {
        P => matches!(col, Phi | V | P),
        V => true,
        Phi => matches!(col, Phi | Mu | V | C),
        Mu => matches!(col, Phi | Mu),
        C => matches!(col, Phi | Mu | V | C),
    }
}

fn build_pattern(mesh: &TriMesh, p2: &VectorSpaceP2, layout: &Layout) -> SparseMatrix {
    let n = layout.total();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    let fields = local_fields(layout.reactive);
    let mut dofs = Vec::new();
    for t in 0..mesh.n_triangles() {
        element_dofs(mesh, p2, layout, t, &mut dofs);
        for (i, &gi) in dofs.iter().enumerate() {
            for (j, &gj) in dofs.iter().enumerate() {
                if couples(fields[i], fields[j]) {
                    rows[gi].push(gj);
                }
            }
        }
    }
    // every row keeps its diagonal so Dirichlet rows can become unit rows
    for (i, r) in rows.iter_mut().enumerate() {
        r.push(i);
    }
    SparseMatrix::from_pattern(n, n, rows)
}

/// Assembled Jacobian with right-hand side and the block index sets.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub ch: Vec<usize>,
    pub ns: Vec<usize>,
}

/// `(A_CH, A_NS, C_T, C_I)`: CH-CH, NS-NS, CH rows x NS columns and NS rows
/// x CH columns.
pub struct Blocks {
    pub a_ch: SparseMatrix,
    pub a_ns: SparseMatrix,
    pub c_t: SparseMatrix,
    pub c_i: SparseMatrix,
}

pub fn extract_blocks(system: &BlockSystem) -> Blocks {
    let m = &system.matrix;
    Blocks {
        a_ch: m.submatrix(&system.ch, &system.ch),
        a_ns: m.submatrix(&system.ns, &system.ns),
        c_t: m.submatrix(&system.ch, &system.ns),
        c_i: m.submatrix(&system.ns, &system.ch),
    }
}

fn check_inputs(disc: &Discretization, old: &[f64], guess: &[f64], flags: AssemblyFlags) -> Result<()> {
    let n = disc.layout.total();
    if old.len() != n {
        return Err(Error::dim("old state", n, old.len()));
    }
    if guess.len() != n {
        return Err(Error::dim("guess", n, guess.len()));
    }
    if flags.reactive != disc.layout.reactive {
        return Err(Error::InvalidArgument(format!(
            "reactive flag {} does not match discretization ({})",
            flags.reactive, disc.layout.reactive
        )));
    }
    if old.iter().chain(guess).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("assembly input".into()));
    }
    Ok(())
}

/// Residual and, if requested, Jacobian. Constrained rows become
/// `x - g` and unit rows.
pub fn assemble(
    disc: &Discretization,
    params: &ModelParams,
    old: &[f64],
    guess: &[f64],
    flags: AssemblyFlags,
    constraints: &Constraints,
    with_jacobian: bool,
) -> Result<(Vec<f64>, Option<SparseMatrix>)> {
    check_inputs(disc, old, guess, flags)?;
    let n = disc.layout.total();
    let mut res = vec![0.0; n];
    let mut jac = with_jacobian.then(|| disc.pattern.clone());
    let nloc = if flags.reactive { 24 } else { 21 };
    let mut dofs = Vec::with_capacity(nloc);
    let mut kern = kernel::ElementKernel::new(flags, params);
    for t in 0..disc.mesh.n_triangles() {
        disc.element_dofs(t, &mut dofs);
        kern.compute(disc, t, &dofs, old, guess, with_jacobian);
        for (i, &gi) in dofs.iter().enumerate() {
            res[gi] += kern.res[i];
        }
        if let Some(j) = jac.as_mut() {
            for (i, &gi) in dofs.iter().enumerate() {
                let row = &kern.jac[i * nloc..(i + 1) * nloc];
                for (k, &gk) in dofs.iter().enumerate() {
                    if row[k] != 0.0 {
                        j.add(gi, gk, row[k]);
                    }
                }
            }
        }
    }
    for (&d, &g) in constraints.dofs.iter().zip(&constraints.values) {
        res[d] = guess[d] - g;
        if let Some(j) = jac.as_mut() {
            j.set_identity_row(d);
        }
    }
    if res.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("residual".into()));
    }
    Ok((res, jac))
}

pub fn assemble_residual(
    disc: &Discretization,
    params: &ModelParams,
    old: &[f64],
    guess: &[f64],
    flags: AssemblyFlags,
    constraints: &Constraints,
) -> Result<Vec<f64>> {
    Ok(assemble(disc, params, old, guess, flags, constraints, false)?.0)
}

pub fn assemble_jacobian(
    disc: &Discretization,
    params: &ModelParams,
    old: &[f64],
    guess: &[f64],
    flags: AssemblyFlags,
    constraints: &Constraints,
) -> Result<BlockSystem> {
    let (res, jac) = assemble(disc, params, old, guess, flags, constraints, true)?;
    Ok(BlockSystem {
        matrix: jac.expect("requested"),
        rhs: res.iter().map(|r| -r).collect(),
        ch: disc.layout.ch_indices(),
        ns: disc.layout.ns_indices(),
    })
}

#[cfg(test)]
mod tests;
