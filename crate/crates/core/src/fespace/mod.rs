//! Lagrange spaces: P1 scalars for phase field, potential, pressure and
//! concentration; P2 vectors for velocity.

mod quadrature;

use std::sync::Arc;

pub use quadrature::{quadrature, QuadratureRule};

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, ParentMap, TriMesh};

/// Affine element map data: Jacobian determinant and constant barycentric
/// gradients.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub det: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(p: [[f64; 2]; 3]) -> Self {
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
            - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let g1 = [(p[2][1] - p[0][1]) / det, -(p[2][0] - p[0][0]) / det];
        let g2 = [-(p[1][1] - p[0][1]) / det, (p[1][0] - p[0][0]) / det];
        let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
        ElementGeometry {
            det,
            grad_lambda: [g0, g1, g2],
        }
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det
    }
}

/// P2 shape function values at barycentric point `l`; nodes ordered as the
/// three vertices followed by the edge midpoints opposite vertex 0, 1, 2.
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
        4.0 * l[0] * l[1],
    ]
}

/// Coefficients `c[j][k]` with `grad N_j = sum_k c[j][k] grad lambda_k`.
pub fn p2_gradient_coeffs(l: [f64; 3]) -> [[f64; 3]; 6] {
    [
        [4.0 * l[0] - 1.0, 0.0, 0.0],
        [0.0, 4.0 * l[1] - 1.0, 0.0],
        [0.0, 0.0, 4.0 * l[2] - 1.0],
        [0.0, 4.0 * l[2], 4.0 * l[1]],
        [4.0 * l[2], 0.0, 4.0 * l[0]],
        [4.0 * l[1], 4.0 * l[0], 0.0],
    ]
}

pub fn p2_gradients(l: [f64; 3], geo: &ElementGeometry) -> [[f64; 2]; 6] {
    let c = p2_gradient_coeffs(l);
    let g = &geo.grad_lambda;
    let mut out = [[0.0; 2]; 6];
    for j in 0..6 {
        for d in 0..2 {
            out[j][d] = c[j][0] * g[0][d] + c[j][1] * g[1][d] + c[j][2] * g[2][d];
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct ScalarSpaceP1 {
    mesh: Arc<TriMesh>,
}

pub fn build_p1(mesh: Arc<TriMesh>) -> ScalarSpaceP1 {
    ScalarSpaceP1 { mesh }
}

impl ScalarSpaceP1 {
    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.mesh.vertices()[i]
    }

    pub fn element_dofs(&self, t: usize) -> [usize; 3] {
        self.mesh.triangles()[t]
    }

    /// Vertices touching a boundary edge with the given tag.
    pub fn boundary_dofs(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut flag = vec![false; self.n_dofs()];
        for (e, &[a, b]) in self.mesh.edges().iter().enumerate() {
            if self.mesh.boundary_tag(e) == Some(tag) {
                flag[a] = true;
                flag[b] = true;
            }
        }
        (0..flag.len()).filter(|&i| flag[i]).collect()
    }
}

/// Continuous P2 vector field space. Scalar nodes are the mesh vertices
/// followed by edge midpoints; component `k` of node `i` is dof `2 i + k`.
#[derive(Debug, Clone)]
pub struct VectorSpaceP2 {
    mesh: Arc<TriMesh>,
    dirichlet_tags: Vec<BoundaryTag>,
    dirichlet_nodes: Vec<usize>,
}

/// Builds the velocity space; nodes on edges carrying one of `dirichlet_tags`
/// are flagged as constrained.
pub fn build_p2vec(mesh: Arc<TriMesh>, dirichlet_tags: &[BoundaryTag]) -> VectorSpaceP2 {
    let mut space = VectorSpaceP2 {
        mesh,
        dirichlet_tags: dirichlet_tags.to_vec(),
        dirichlet_nodes: Vec::new(),
    };
    let mut flag = vec![false; space.n_nodes()];
    for &tag in dirichlet_tags {
        for n in space.boundary_nodes(tag) {
            flag[n] = true;
        }
    }
    space.dirichlet_nodes = (0..flag.len()).filter(|&i| flag[i]).collect();
    space
}

impl VectorSpaceP2 {
    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_vertices() + self.mesh.n_edges()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes()
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        let nv = self.mesh.n_vertices();
        if i < nv {
            self.mesh.vertices()[i]
        } else {
            let [a, b] = self.mesh.edges()[i - nv];
            let (p, q) = (self.mesh.vertices()[a], self.mesh.vertices()[b]);
            [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
        }
    }

    /// Scalar node indices of triangle `t` in local P2 order.
    pub fn element_nodes(&self, t: usize) -> [usize; 6] {
        let [a, b, c] = self.mesh.triangles()[t];
        let e = self.mesh.triangle_edges(t);
        let nv = self.mesh.n_vertices();
        [a, b, c, nv + e[0], nv + e[1], nv + e[2]]
    }

    pub fn boundary_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let nv = self.mesh.n_vertices();
        let mut flag = vec![false; self.n_nodes()];
        for (e, &[a, b]) in self.mesh.edges().iter().enumerate() {
            if self.mesh.boundary_tag(e) == Some(tag) {
                flag[a] = true;
                flag[b] = true;
                flag[nv + e] = true;
            }
        }
        (0..flag.len()).filter(|&i| flag[i]).collect()
    }

    pub fn dirichlet_tags(&self) -> &[BoundaryTag] {
        &self.dirichlet_tags
    }

    /// Scalar nodes whose both components are prescribed.
    pub fn dirichlet_nodes(&self) -> &[usize] {
        &self.dirichlet_nodes
    }
}

#[derive(Debug, Clone)]
pub enum SpaceRef {
    P1(Arc<ScalarSpaceP1>),
    P2Vec(Arc<VectorSpaceP2>),
}

impl SpaceRef {
    pub fn mesh(&self) -> &Arc<TriMesh> {
        match self {
            SpaceRef::P1(s) => s.mesh(),
            SpaceRef::P2Vec(s) => s.mesh(),
        }
    }

    pub fn n_dofs(&self) -> usize {
        match self {
            SpaceRef::P1(s) => s.n_dofs(),
            SpaceRef::P2Vec(s) => s.n_dofs(),
        }
    }

    fn n_components(&self) -> usize {
        match self {
            SpaceRef::P1(_) => 1,
            SpaceRef::P2Vec(_) => 2,
        }
    }
}

/// A finite-element function: space plus coefficient vector.
#[derive(Debug, Clone)]
pub struct Field {
    space: SpaceRef,
    coeffs: Vec<f64>,
}

impl Field {
    pub fn new(space: SpaceRef, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n_dofs() {
            return Err(Error::dim("field coefficients", space.n_dofs(), coeffs.len()));
        }
        Ok(Field { space, coeffs })
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Value(s) of the field on triangle `t` at barycentric point `l`.
    fn eval_on(&self, t: usize, l: [f64; 3]) -> Vec<f64> {
        match &self.space {
            SpaceRef::P1(s) => {
                let d = s.element_dofs(t);
                vec![(0..3).map(|k| l[k] * self.coeffs[d[k]]).sum()]
            }
            SpaceRef::P2Vec(s) => {
                let n = s.element_nodes(t);
                let phi = p2_values(l);
                let mut v = vec![0.0; 2];
                for j in 0..6 {
                    v[0] += phi[j] * self.coeffs[2 * n[j]];
                    v[1] += phi[j] * self.coeffs[2 * n[j] + 1];
                }
                v
            }
        }
    }

    fn grad_on(&self, t: usize, l: [f64; 3]) -> Vec<[f64; 2]> {
        let mesh = self.space.mesh();
        let geo = ElementGeometry::new(mesh.triangle_coords(t));
        match &self.space {
            SpaceRef::P1(s) => {
                let d = s.element_dofs(t);
                let mut g = [0.0; 2];
                for k in 0..3 {
                    for c in 0..2 {
                        g[c] += self.coeffs[d[k]] * geo.grad_lambda[k][c];
                    }
                }
                vec![g]
            }
            SpaceRef::P2Vec(s) => {
                let n = s.element_nodes(t);
                let dphi = p2_gradients(l, &geo);
                let mut g = vec![[0.0; 2]; 2];
                for j in 0..6 {
                    for comp in 0..2 {
                        for c in 0..2 {
                            g[comp][c] += self.coeffs[2 * n[j] + comp] * dphi[j][c];
                        }
                    }
                }
                g
            }
        }
    }
}

/// Point value(s): one entry for scalar fields, two for vector fields.
pub fn evaluate(field: &Field, x: [f64; 2]) -> Result<Vec<f64>> {
    let mesh = field.space.mesh();
    let t = mesh.locate(x)?;
    Ok(field.eval_on(t, mesh.barycentric(t, x)))
}

/// Gradient of each component at `x`.
pub fn evaluate_gradient(field: &Field, x: [f64; 2]) -> Result<Vec<[f64; 2]>> {
    let mesh = field.space.mesh();
    let t = mesh.locate(x)?;
    Ok(field.grad_on(t, mesh.barycentric(t, x)))
}

pub fn interpolate_p1(space: &Arc<ScalarSpaceP1>, f: impl Fn([f64; 2]) -> f64) -> Field {
    let coeffs = (0..space.n_dofs()).map(|i| f(space.node(i))).collect();
    Field {
        space: SpaceRef::P1(space.clone()),
        coeffs,
    }
}

pub fn interpolate_p2vec(space: &Arc<VectorSpaceP2>, f: impl Fn([f64; 2]) -> [f64; 2]) -> Field {
    let mut coeffs = vec![0.0; space.n_dofs()];
    for i in 0..space.n_nodes() {
        let v = f(space.node(i));
        coeffs[2 * i] = v[0];
        coeffs[2 * i + 1] = v[1];
    }
    Field {
        space: SpaceRef::P2Vec(space.clone()),
        coeffs,
    }
}

/// Exact integral of a P1 function given by vertex values.
pub fn integrate_p1(mesh: &TriMesh, values: &[f64]) -> f64 {
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(t, &[a, b, c])| mesh.signed_area(t) * (values[a] + values[b] + values[c]) / 3.0)
        .sum()
}

/// Subtract the mean of a P1 function in place.
pub fn zero_mean_in_place(mesh: &TriMesh, values: &mut [f64]) {
    let mean = integrate_p1(mesh, values) / mesh.total_area();
    for v in values {
        *v -= mean;
    }
}

pub fn zero_mean_project(p: &Field) -> Result<Field> {
    let SpaceRef::P1(space) = &p.space else {
        return Err(Error::InvalidArgument(
            "zero-mean projection needs a scalar P1 field".into(),
        ));
    };
    let mut coeffs = p.coeffs.clone();
    zero_mean_in_place(space.mesh(), &mut coeffs);
    Ok(Field {
        space: p.space.clone(),
        coeffs,
    })
}

/// Nodal interpolation of `old` onto `new_space`, a space over the refined
/// mesh described by `parents`.
pub fn transfer(parents: &ParentMap, old: &Field, new_space: &SpaceRef) -> Result<Field> {
    let new_mesh = new_space.mesh();
    let old_mesh = old.space.mesh();
    if parents.parent_of.len() != new_mesh.n_triangles() {
        return Err(Error::dim(
            "parent map length",
            new_mesh.n_triangles(),
            parents.parent_of.len(),
        ));
    }
    if old.space.n_components() != new_space.n_components() {
        return Err(Error::dim(
            "field components",
            old.space.n_components(),
            new_space.n_components(),
        ));
    }
    if let Some(&bad) = parents.parent_of.iter().find(|&&p| p >= old_mesh.n_triangles()) {
        return Err(Error::dim("parent triangle index", old_mesh.n_triangles(), bad));
    }
    let mut coeffs = vec![0.0; new_space.n_dofs()];
    match new_space {
        SpaceRef::P1(s) => {
            let mut done = vec![false; s.n_dofs()];
            for (t, &parent) in parents.parent_of.iter().enumerate() {
                for i in s.element_dofs(t) {
                    if !done[i] {
                        let l = old_mesh.barycentric(parent, s.node(i));
                        coeffs[i] = old.eval_on(parent, l)[0];
                        done[i] = true;
                    }
                }
            }
        }
        SpaceRef::P2Vec(s) => {
            let mut done = vec![false; s.n_nodes()];
            for (t, &parent) in parents.parent_of.iter().enumerate() {
                for i in s.element_nodes(t) {
                    if !done[i] {
                        let l = old_mesh.barycentric(parent, s.node(i));
                        let v = old.eval_on(parent, l);
                        coeffs[2 * i] = v[0];
                        coeffs[2 * i + 1] = v[1];
                        done[i] = true;
                    }
                }
            }
        }
    }
    Field::new(new_space.clone(), coeffs)
}
