//! Conforming triangulations of rectangles with newest-vertex bisection.
//!
//! Triangles are stored counterclockwise as `[newest, a, b]`; the refinement
//! edge of a triangle is always `(a, b)`, i.e. local edge 0. Local edge `k`
//! is the edge opposite local vertex `k`.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Side of the rectangle a boundary edge lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Left,
    Right,
    Bottom,
    Top,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [
        BoundaryTag::Left,
        BoundaryTag::Right,
        BoundaryTag::Bottom,
        BoundaryTag::Top,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Left => "left",
            BoundaryTag::Right => "right",
            BoundaryTag::Bottom => "bottom",
            BoundaryTag::Top => "top",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    lx: f64,
    ly: f64,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    levels: Vec<u32>,
    edges: Vec<[usize; 2]>,
    edge_triangles: Vec<[Option<usize>; 2]>,
    tri_edges: Vec<[usize; 3]>,
    boundary_tags: Vec<Option<BoundaryTag>>,
}

/// Whether a triangle should be bisected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkAction {
    Refine,
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefinementMark {
    pub triangle: usize,
    pub action: MarkAction,
}

/// For every triangle of a refined mesh, the index of the triangle of the
/// pre-refinement mesh that contains it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParentMap {
    pub parent_of: Vec<usize>,
}

impl TriMesh {
    /// Structured mesh of `[0, lx] x [0, ly]`: `nx * ny` cells, each split
    /// along the lower-left to upper-right diagonal.
    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "domain extents must be positive, got {lx} x {ly}"
            )));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument(format!(
                "cell counts must be at least 1, got {nx} x {ny}"
            )));
        }
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let a = id(i, j);
                let b = id(i + 1, j);
                let c = id(i + 1, j + 1);
                let d = id(i, j + 1);
                // Both halves take the diagonal a-c as refinement edge.
                triangles.push([b, c, a]);
                triangles.push([d, a, c]);
            }
        }
        let levels = vec![0; triangles.len()];
        Ok(Self::from_parts(lx, ly, vertices, triangles, levels))
    }

    fn from_parts(
        lx: f64,
        ly: f64,
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        levels: Vec<u32>,
    ) -> Self {
        let mut edge_index: HashMap<(usize, usize), usize> =
            HashMap::with_capacity(triangles.len() * 2);
        let mut edges = Vec::with_capacity(triangles.len() * 2);
        let mut edge_triangles: Vec<[Option<usize>; 2]> = Vec::with_capacity(triangles.len() * 2);
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0usize; 3];
            for (k, slot) in te.iter_mut().enumerate() {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                let key = (a.min(b), a.max(b));
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_triangles.push([None, None]);
                    edges.len() - 1
                });
                let adj = &mut edge_triangles[e];
                if adj[0].is_none() {
                    adj[0] = Some(t);
                } else {
                    // A third triangle on one edge is caught by `check_conforming`.
                    adj[1] = Some(t);
                }
                *slot = e;
            }
            tri_edges.push(te);
        }
        let tol = 1e-12 * lx.max(ly);
        let boundary_tags = edges
            .iter()
            .zip(&edge_triangles)
            .map(|(&[a, b], adj)| {
                if adj[1].is_some() {
                    return None;
                }
                let (pa, pb) = (vertices[a], vertices[b]);
                if pa[0].abs() < tol && pb[0].abs() < tol {
                    Some(BoundaryTag::Left)
                } else if (pa[0] - lx).abs() < tol && (pb[0] - lx).abs() < tol {
                    Some(BoundaryTag::Right)
                } else if pa[1].abs() < tol && pb[1].abs() < tol {
                    Some(BoundaryTag::Bottom)
                } else if (pa[1] - ly).abs() < tol && (pb[1] - ly).abs() < tol {
                    Some(BoundaryTag::Top)
                } else {
                    None
                }
            })
            .collect();
        TriMesh {
            lx,
            ly,
            vertices,
            triangles,
            levels,
            edges,
            edge_triangles,
            tri_edges,
            boundary_tags,
        }
    }

    pub fn extents(&self) -> (f64, f64) {
        (self.lx, self.ly)
    }

    pub fn domain_area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_triangles(&self) -> &[[Option<usize>; 2]] {
        &self.edge_triangles
    }

    /// Edge indices of a triangle; entry `k` is the edge opposite vertex `k`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn boundary_tag(&self, edge: usize) -> Option<BoundaryTag> {
        self.boundary_tags[edge]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area (positive for counterclockwise orientation).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_coords(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.signed_area(t)).sum()
    }

    /// Triangle diameter, i.e. the longest edge.
    pub fn diameter(&self, t: usize) -> f64 {
        let p = self.triangle_coords(t);
        (0..3)
            .map(|k| {
                let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
                (a[0] - b[0]).hypot(a[1] - b[1])
            })
            .fold(0.0, f64::max)
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.diameter(t)).fold(0.0, f64::max)
    }

    /// Tags of the boundary edges touching each vertex (empty for interior
    /// vertices, two entries at corners).
    pub fn vertex_tags(&self) -> Vec<Vec<BoundaryTag>> {
        let mut tags = vec![Vec::new(); self.n_vertices()];
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            if let Some(tag) = self.boundary_tags[e] {
                for v in [a, b] {
                    if !tags[v].contains(&tag) {
                        tags[v].push(tag);
                    }
                }
            }
        }
        tags
    }

    /// Exhaustive structural check: positive areas, at most two triangles
    /// per edge, single-triangle edges exactly on the rectangle boundary,
    /// and areas tiling the rectangle.
    pub fn check_conforming(&self) -> Result<()> {
        for t in 0..self.n_triangles() {
            if self.signed_area(t) <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "triangle {t} has non-positive area"
                )));
            }
        }
        let mut count = vec![0usize; self.n_edges()];
        for te in &self.tri_edges {
            for &e in te {
                count[e] += 1;
            }
        }
        for (e, &c) in count.iter().enumerate() {
            let on_boundary = self.boundary_tags[e].is_some();
            match c {
                1 if on_boundary => {}
                2 if !on_boundary => {}
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "edge {e} has {c} adjacent triangles (boundary: {on_boundary})"
                    )))
                }
            }
        }
        let area = self.total_area();
        let expected = self.domain_area();
        if (area - expected).abs() > 1e-12 * expected {
            return Err(Error::InvalidArgument(format!(
                "triangles cover area {area}, domain has {expected}"
            )));
        }
        Ok(())
    }

    /// Newest-vertex bisection of the marked triangles, closed so that the
    /// result has no hanging vertices.
    pub fn refine(&self, marks: &[RefinementMark]) -> Result<(TriMesh, ParentMap)> {
        let mut marked_edges: HashMap<(usize, usize), Option<usize>> = HashMap::new();
        let key = |a: usize, b: usize| (a.min(b), a.max(b));
        for m in marks {
            if m.triangle >= self.n_triangles() {
                return Err(Error::InvalidArgument(format!(
                    "mark refers to triangle {} of {}",
                    m.triangle,
                    self.n_triangles()
                )));
            }
            if m.action == MarkAction::Refine {
                let [_, a, b] = self.triangles[m.triangle];
                marked_edges.insert(key(a, b), None);
            }
        }
        if marked_edges.is_empty() {
            let parents = ParentMap {
                parent_of: (0..self.n_triangles()).collect(),
            };
            return Ok((self.clone(), parents));
        }

        // Closure: a triangle with any marked edge must bisect its refinement edge.
        let mut edge_marked = vec![false; self.n_edges()];
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            edge_marked[e] = marked_edges.contains_key(&key(a, b));
        }
        loop {
            let mut changed = false;
            for (t, te) in self.tri_edges.iter().enumerate() {
                if !edge_marked[te[0]] && (edge_marked[te[1]] || edge_marked[te[2]]) {
                    edge_marked[te[0]] = true;
                    let [_, a, b] = self.triangles[t];
                    marked_edges.insert(key(a, b), None);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        let mut vertices = self.vertices.clone();
        let mut triangles = Vec::with_capacity(self.n_triangles() + 2 * marked_edges.len());
        let mut levels = Vec::with_capacity(triangles.capacity());
        let mut parent_of = Vec::with_capacity(triangles.capacity());
        let mut stack: Vec<([usize; 3], u32, usize)> = Vec::new();
        let bound = 10 * self.n_triangles();
        let mut bisections = 0usize;
        for (t, &tri) in self.triangles.iter().enumerate() {
            stack.push((tri, self.levels[t], t));
            while let Some((tri, level, parent)) = stack.pop() {
                let [v0, v1, v2] = tri;
                match marked_edges.get_mut(&key(v1, v2)) {
                    Some(mid) => {
                        let m = *mid.get_or_insert_with(|| {
                            let (p, q) = (vertices[v1], vertices[v2]);
                            vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                            vertices.len() - 1
                        });
                        bisections += 1;
                        assert!(
                            bisections <= bound,
                            "bisection closure exceeded {bound} splits"
                        );
                        stack.push(([m, v2, v0], level + 1, parent));
                        stack.push(([m, v0, v1], level + 1, parent));
                    }
                    None => {
                        triangles.push(tri);
                        levels.push(level);
                        parent_of.push(parent);
                    }
                }
            }
        }
        let mesh = TriMesh::from_parts(self.lx, self.ly, vertices, triangles, levels);
        Ok((mesh, ParentMap { parent_of }))
    }

    /// Barycentric coordinates of `x` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, x: [f64; 2]) -> [f64; 3] {
        let [p0, p1, p2] = self.triangle_coords(t);
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let l1 = ((x[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (x[1] - p0[1])) / det;
        let l2 = ((p1[0] - p0[0]) * (x[1] - p0[1]) - (x[0] - p0[0]) * (p1[1] - p0[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Brute-force point location.
    pub fn locate(&self, x: [f64; 2]) -> Result<usize> {
        let tol = -1e-10;
        let mut best = None;
        let mut best_min = f64::NEG_INFINITY;
        for t in 0..self.n_triangles() {
            let l = self.barycentric(t, x);
            let m = l[0].min(l[1]).min(l[2]);
            if m >= 0.0 {
                return Ok(t);
            }
            if m > best_min {
                best_min = m;
                best = Some(t);
            }
        }
        match best {
            Some(t) if best_min >= tol => Ok(t),
            _ => Err(Error::Location(x[0], x[1])),
        }
    }
}

/// Mark triangles whose `|grad phi| * h_T` exceeds `refine_threshold`,
/// skipping triangles already at `max_level`. `phi` holds P1 (vertex) values.
pub fn mark_by_gradient(
    mesh: &TriMesh,
    phi: &[f64],
    refine_threshold: f64,
    max_level: u32,
) -> Result<Vec<RefinementMark>> {
    if phi.len() != mesh.n_vertices() {
        return Err(Error::dim("P1 field length", mesh.n_vertices(), phi.len()));
    }
    let marks = (0..mesh.n_triangles())
        .map(|t| {
            let g = p1_gradient(mesh, t, phi);
            let indicator = g[0].hypot(g[1]) * mesh.diameter(t);
            let action = if indicator > refine_threshold && mesh.levels[t] < max_level {
                MarkAction::Refine
            } else {
                MarkAction::Keep
            };
            RefinementMark {
                triangle: t,
                action,
            }
        })
        .collect();
    Ok(marks)
}

/// Whether any mark asks for refinement.
pub fn any_refine(marks: &[RefinementMark]) -> bool {
    marks.iter().any(|m| m.action == MarkAction::Refine)
}

/// Constant gradient of the P1 interpolant on triangle `t`.
pub(crate) fn p1_gradient(mesh: &TriMesh, t: usize, phi: &[f64]) -> [f64; 2] {
    let [p0, p1, p2] = mesh.triangle_coords(t);
    let [a, b, c] = mesh.triangles[t];
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let (d1, d2) = (phi[b] - phi[a], phi[c] - phi[a]);
    [
        (d1 * (p2[1] - p0[1]) - d2 * (p1[1] - p0[1])) / det,
        (d2 * (p1[0] - p0[0]) - d1 * (p2[0] - p0[0])) / det,
    ]
}

pub use crate::fespace::transfer;
