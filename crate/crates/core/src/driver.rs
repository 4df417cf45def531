//! Time stepping: monolithic and partitioned solves, preprocessing of sharp
//! initial data, energy bookkeeping and solid-phase diagnostics.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::assembly::{
    assemble, assemble_jacobian, assemble_residual, extract_blocks, AssemblyFlags, Blocks, Constraints, Discretization, Layout, SystemState,
};
use crate::assembly::kernel::point_values;
use crate::config::{realize_bcs, BoundaryEvaluator, Config, Geometry, Scenario};
use crate::error::{Error, Result};
use crate::fespace::{
    integrate_p1, interpolate_p1, transfer, zero_mean_in_place, ElementGeometry, Field, SpaceRef,
};
use crate::linalg::{cond1_exact, lu_solve, norm2, DirectSolver, FgmresSolver, LinearSolver, PrecondKind};
use crate::mesh::{any_refine, mark_by_gradient, BoundaryTag, TriMesh};
use crate::nonlinear::{newton_solve_to, NewtonConfig, NewtonStats};
use crate::output::{write_vtk, EnergyLog, EnergyRow};
use crate::reactive::reaction_integral;
use crate::physics::{self, drag, fluid_fraction, tanh_circle_ic, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyMode {
    Monolithic,
    PartitionedDirect,
    PartitionedIterative,
}

impl StrategyMode {
    pub const ALL: [StrategyMode; 3] = [
        StrategyMode::Monolithic,
        StrategyMode::PartitionedDirect,
        StrategyMode::PartitionedIterative,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyMode::Monolithic => "monolithic",
            StrategyMode::PartitionedDirect => "partitioned_direct",
            StrategyMode::PartitionedIterative => "partitioned_iterative",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyConfig {
    pub mode: StrategyMode,
    /// Relative reduction of the coupled residual that ends the
    /// partitioned loop.
    pub coupling_tol: f64,
    pub max_coupling: usize,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            mode: StrategyMode::Monolithic,
            coupling_tol: 1e-7,
            max_coupling: 100,
        }
    }
}

impl StrategyConfig {
    pub fn with_mode(mode: StrategyMode) -> Self {
        StrategyConfig {
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coupling_tol > 0.0) || self.max_coupling == 0 {
            return Err(Error::InvalidArgument(
                "coupling_tol and max_coupling must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Free energy and dissipation rates of one state.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyReport {
    pub kinetic: f64,
    pub dw_energy: f64,
    pub grad_energy: f64,
    pub total: f64,
    pub visc_dissipation: f64,
    pub drag_dissipation: f64,
    pub ch_dissipation: f64,
    pub time: f64,
}

impl EnergyReport {
    pub fn dissipation(&self) -> f64 {
        self.visc_dissipation + self.drag_dissipation + self.ch_dissipation
    }
}

/// Energy of `state`; the drag dissipation uses the fluid fraction of
/// `prev`.
pub fn compute_energy(
    disc: &Discretization,
    state: &SystemState,
    prev: &SystemState,
    params: &ModelParams,
) -> EnergyReport {
    let l = disc.layout;
    let x = state.pack(&l);
    let xo = prev.pack(&l);
    let tb = &disc.tables;
    let mut e = EnergyReport {
        time: state.time,
        ..Default::default()
    };
    let mut dofs = Vec::new();
    let (eps, sigma, rho) = (params.epsilon, params.sigma, params.rho);
    for t in 0..disc.mesh.n_triangles() {
        disc.element_dofs(t, &mut dofs);
        let geo = ElementGeometry::new(disc.mesh.triangle_coords(t));
        for q in 0..tb.weights.len() {
            let w = tb.weights[q] * geo.det;
            let gn = p2_grads(&tb.p2_grad[q], &geo);
            let u = point_values(&x, &dofs, l.reactive, &tb.lambda[q], &tb.p2[q], &geo.grad_lambda, &gn);
            let o = point_values(&xo, &dofs, l.reactive, &tb.lambda[q], &tb.p2[q], &geo.grad_lambda, &gn);
            let v2 = u.v[0] * u.v[0] + u.v[1] * u.v[1];
            e.kinetic += w * 0.5 * rho * (u.phi + params.delta) * v2;
            e.dw_energy += w * sigma / eps * physics::double_well(u.phi, params);
            e.grad_energy += w * 0.5 * sigma * eps * (u.grad_phi[0].powi(2) + u.grad_phi[1].powi(2));
            let mut sym = 0.0;
            for k in 0..2 {
                for m in 0..2 {
                    let s = 0.5 * (u.grad_v[k][m] + u.grad_v[m][k]);
                    sym += s * s;
                }
            }
            e.visc_dissipation += w * 2.0 * params.gamma * sym;
            e.drag_dissipation += w * rho * drag(fluid_fraction(o.phi, params), params) * v2;
            e.ch_dissipation += w * sigma * params.mobility * eps * (u.grad_mu[0].powi(2) + u.grad_mu[1].powi(2));
        }
    }
    e.total = e.kinetic + e.dw_energy + e.grad_energy;
    e
}

/// Discrete L2 norms of `a - b` per field, in the order phi, mu, v, p
/// (and c when present).
pub fn field_l2_diff(disc: &Discretization, a: &SystemState, b: &SystemState) -> Vec<f64> {
    let l = disc.layout;
    let d: Vec<f64> = a.pack(&l).iter().zip(b.pack(&l)).map(|(x, y)| x - y).collect();
    let tb = &disc.tables;
    let mut acc = vec![0.0; if l.reactive { 5 } else { 4 }];
    let mut dofs = Vec::new();
    for t in 0..disc.mesh.n_triangles() {
        disc.element_dofs(t, &mut dofs);
        let geo = ElementGeometry::new(disc.mesh.triangle_coords(t));
        for q in 0..tb.weights.len() {
            let w = tb.weights[q] * geo.det;
            let gn = p2_grads(&tb.p2_grad[q], &geo);
            let u = point_values(&d, &dofs, l.reactive, &tb.lambda[q], &tb.p2[q], &geo.grad_lambda, &gn);
            acc[0] += w * u.phi * u.phi;
            acc[1] += w * u.mu * u.mu;
            acc[2] += w * (u.v[0] * u.v[0] + u.v[1] * u.v[1]);
            acc[3] += w * u.p * u.p;
            if l.reactive {
                acc[4] += w * u.c * u.c;
            }
        }
    }
    acc.iter().map(|v| v.sqrt()).collect()
}

fn p2_grads(c: &[[f64; 3]; 6], geo: &ElementGeometry) -> [[f64; 2]; 6] {
    let g = &geo.grad_lambda;
    let mut out = [[0.0; 2]; 6];
    for j in 0..6 {
        for d in 0..2 {
            out[j][d] = c[j][0] * g[0][d] + c[j][1] * g[1][d] + c[j][2] * g[2][d];
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationVerdict {
    pub pass: bool,
    /// `(F_new - F_old) / tau`
    pub rate: f64,
    /// Sum of the dissipation integrals of the new state.
    pub dissipation: f64,
    pub slack: f64,
    /// `-dissipation + slack - rate`; negative on failure.
    pub margin: f64,
}

/// Discrete dissipation inequality between consecutive reports.
pub fn check_dissipation(old: &EnergyReport, new: &EnergyReport, tau: f64, max_tol: f64) -> DissipationVerdict {
    let rate = (new.total - old.total) / tau;
    let dissipation = new.dissipation();
    let slack = (1e-10 * old.total.abs()).max(10.0 * max_tol);
    let margin = -dissipation + slack - rate;
    DissipationVerdict {
        pass: margin >= 0.0,
        rate,
        dissipation,
        slack,
        margin,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkageReport {
    /// Area of `{phi < 1/2}`.
    pub area: f64,
    /// `int (1 - phi)`, clamped to `[0, |Omega|]`.
    pub volume: f64,
    pub radius: f64,
    /// `epsilon / radius`, absent without solid.
    pub cahn: Option<f64>,
    pub critical_radius: f64,
    /// Predicted radius loss for the current radius.
    pub predicted_shrinkage: Option<f64>,
}

/// Radius below which an inclusion dissolves in a domain of area `volume`.
pub fn critical_radius(volume: f64, epsilon: f64) -> f64 {
    (6f64.sqrt() / (8.0 * std::f64::consts::PI) * volume * epsilon).cbrt()
}

/// Radius loss of an inclusion of radius `r` on reaching equilibrium.
pub fn predicted_shrinkage(volume: f64, epsilon: f64, r: f64) -> f64 {
    2f64.sqrt() * volume / (24.0 * std::f64::consts::PI) * epsilon / (r * r)
}

/// Area of `{phi < 1/2}` for the P1 interpolant, exact per triangle.
pub fn solid_area(mesh: &TriMesh, phi: &[f64]) -> f64 {
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(t, &[a, b, c])| {
            sublevel_area(mesh.triangle_coords(t), [phi[a], phi[b], phi[c]], 0.5)
        })
        .sum()
}

/// `int (1 - phi)`, conserved by the phase-field dynamics.
pub fn solid_volume(mesh: &TriMesh, phi: &[f64]) -> f64 {
    let ones: Vec<f64> = phi.iter().map(|p| 1.0 - p).collect();
    integrate_p1(mesh, &ones)
}

/// Area of the part of a triangle where a linear function is below `level`.
pub fn sublevel_area(x: [[f64; 2]; 3], f: [f64; 3], level: f64) -> f64 {
    let mut poly: Vec<([f64; 2], f64)> = Vec::with_capacity(4);
    for i in 0..3 {
        let j = (i + 1) % 3;
        let (fi, fj) = (f[i] - level, f[j] - level);
        if fi < 0.0 {
            poly.push((x[i], fi));
        }
        if (fi < 0.0) != (fj < 0.0) {
            let s = fi / (fi - fj);
            let p = [x[i][0] + s * (x[j][0] - x[i][0]), x[i][1] + s * (x[j][1] - x[i][1])];
            poly.push((p, 0.0));
        }
    }
    let n = poly.len();
    let mut twice = 0.0;
    for i in 0..n {
        let (p, q) = (poly[i].0, poly[(i + 1) % n].0);
        twice += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * twice.abs()
}

pub fn measure_solid(mesh: &TriMesh, phi: &[f64], params: &ModelParams) -> ShrinkageReport {
    let area = solid_area(mesh, phi);
    let radius = (area / std::f64::consts::PI).sqrt();
    let v = mesh.domain_area();
    let has = radius > 0.0;
    ShrinkageReport {
        area,
        volume: solid_volume(mesh, phi).clamp(0.0, v),
        radius,
        cahn: has.then(|| params.epsilon / radius),
        critical_radius: critical_radius(v, params.epsilon),
        predicted_shrinkage: has.then(|| predicted_shrinkage(v, params.epsilon, radius)),
    }
}

/// Connected set of triangles whose mean phase field is below 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct SolidComponent {
    pub triangles: Vec<usize>,
    pub area: f64,
    /// Boundaries touched, in [`BoundaryTag::ALL`] order.
    pub touches: [bool; 4],
}

pub fn solid_components(mesh: &TriMesh, phi: &[f64]) -> Vec<SolidComponent> {
    let solid: Vec<bool> = mesh
        .triangles()
        .iter()
        .map(|&[a, b, c]| (phi[a] + phi[b] + phi[c]) / 3.0 < 0.5)
        .collect();
    let mut seen = vec![false; mesh.n_triangles()];
    let mut out = Vec::new();
    for start in 0..mesh.n_triangles() {
        if !solid[start] || seen[start] {
            continue;
        }
        let mut comp = SolidComponent {
            triangles: Vec::new(),
            area: 0.0,
            touches: [false; 4],
        };
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(t) = stack.pop() {
            comp.triangles.push(t);
            comp.area += mesh.signed_area(t);
            for e in mesh.triangle_edges(t) {
                if let Some(tag) = mesh.boundary_tag(e) {
                    let i = BoundaryTag::ALL.iter().position(|&x| x == tag).expect("tag");
                    comp.touches[i] = true;
                }
                for n in mesh.edge_triangles()[e].into_iter().flatten() {
                    if solid[n] && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        comp.triangles.sort_unstable();
        out.push(comp);
    }
    out
}

/// Whether a solid component connects the bottom and top walls.
pub fn is_clogged(mesh: &TriMesh, phi: &[f64]) -> bool {
    let (b, t) = (2, 3);
    solid_components(mesh, phi)
        .iter()
        .any(|c| c.touches[b] && c.touches[t])
}

/// Step index (into `totals`, 1-based step of the decrease) of the largest
/// energy drop that exceeds `factor` times the median decrease in the
/// surrounding `window`.
pub fn detect_energy_drop(totals: &[f64], window: usize, factor: f64) -> Option<usize> {
    let dec: Vec<f64> = totals.windows(2).map(|w| w[0] - w[1]).collect();
    let half = window / 2;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..dec.len() {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(dec.len());
        let mut around: Vec<f64> = dec[lo..hi].to_vec();
        if around.len() < 3 {
            continue;
        }
        around.sort_by(f64::total_cmp);
        let median = around[around.len() / 2].max(0.0);
        if dec[i] > factor * median && dec[i] > 0.0 && best.map_or(true, |(_, d)| dec[i] > d) {
            best = Some((i + 1, dec[i]));
        }
    }
    best.map(|(i, _)| i)
}

/// Dirichlet data of one time level as global constraints.
pub fn build_constraints(disc: &Discretization, bcs: &BoundaryEvaluator, pin_pressure: bool) -> Constraints {
    let l = disc.layout;
    let mut c = Constraints::default();
    let mesh = &disc.mesh;
    let tags = mesh.vertex_tags();
    // vertices on two tags take the first Dirichlet value in tag order
    for (v, vt) in tags.iter().enumerate() {
        if let Some(val) = vt.iter().find_map(|&t| bcs.phi(t)) {
            c.push(l.phi() + v, val);
        }
        if let Some(off) = l.c() {
            if let Some(val) = vt.iter().find_map(|&t| bcs.c(t)) {
                c.push(off + v, val);
            }
        }
    }
    let mut done = vec![false; disc.p2.n_nodes()];
    for tag in BoundaryTag::ALL {
        for n in disc.p2.boundary_nodes(tag) {
            if done[n] {
                continue;
            }
            if let Some(val) = bcs.velocity(tag, disc.p2.node(n)) {
                // no-slip wins at corners shared with a moving boundary
                let val = corner_value(disc, bcs, n, val);
                c.push(l.v() + 2 * n, val[0]);
                c.push(l.v() + 2 * n + 1, val[1]);
                done[n] = true;
            }
        }
    }
    if pin_pressure {
        c.push(l.p(), 0.0);
    }
    c
}

fn corner_value(disc: &Discretization, bcs: &BoundaryEvaluator, n: usize, val: [f64; 2]) -> [f64; 2] {
    let x = disc.p2.node(n);
    let (lx, ly) = disc.mesh.extents();
    let tol = 1e-12 * lx.max(ly);
    let on = |t: BoundaryTag| match t {
        BoundaryTag::Left => x[0].abs() < tol,
        BoundaryTag::Right => (x[0] - lx).abs() < tol,
        BoundaryTag::Bottom => x[1].abs() < tol,
        BoundaryTag::Top => (x[1] - ly).abs() < tol,
    };
    for t in BoundaryTag::ALL {
        if on(t) && bcs.velocity(t, x) == Some([0.0, 0.0]) {
            return [0.0, 0.0];
        }
    }
    val
}

/// Work counters of one time step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepStats {
    pub newton_iterations: usize,
    pub linear_iterations: usize,
    /// Coupling sweeps (partitioned only).
    pub coupling_iterations: usize,
    pub ns_newton_iterations: usize,
    pub ch_newton_iterations: usize,
    pub residual_norm: f64,
    pub max_tol: f64,
}

/// Linear solvers reused across steps so symbolic factorizations persist.
pub struct Solvers {
    pub monolithic: Box<dyn LinearSolver>,
    pub ns: Box<dyn LinearSolver>,
    pub ch: Box<dyn LinearSolver>,
}

impl Solvers {
    pub fn for_mode(mode: StrategyMode, layout: &Layout) -> Self {
        match mode {
            StrategyMode::PartitionedIterative => {
                let n = layout.n_p1;
                // phase field (and concentration) first, potential as Schur block
                let mut first: Vec<usize> = (0..n).collect();
                if layout.reactive {
                    first.extend(2 * n..3 * n);
                }
                let second = (n..2 * n).collect();
                Solvers {
                    monolithic: Box::new(DirectSolver::new()),
                    ns: Box::new(FgmresSolver::ilu0(1000)),
                    ch: Box::new(FgmresSolver {
                        precond: PrecondKind::Simple { first, second },
                        restart: 200,
                        max_iter: 10000,
                    }),
                }
            }
            _ => Solvers {
                monolithic: Box::new(DirectSolver::new()),
                ns: Box::new(DirectSolver::new()),
                ch: Box::new(DirectSolver::new()),
            },
        }
    }
}

/// Everything a single step needs besides the states.
pub struct StepProblem<'a> {
    pub disc: &'a Discretization,
    pub params: &'a ModelParams,
    pub newton: &'a NewtonConfig,
    pub flags: AssemblyFlags,
    pub constraints: &'a Constraints,
    /// Shift the pressure to zero mean after the solve.
    pub zero_mean_pressure: bool,
}

impl StepProblem<'_> {
    fn initial_guess(&self, old: &SystemState) -> Vec<f64> {
        let l = self.disc.layout;
        let mut x = old.pack(&l);
        self.constraints.apply(&mut x);
        x
    }

    fn finish(&self, x: Vec<f64>, time: f64) -> SystemState {
        let mut s = SystemState::unpack(&self.disc.layout, &x, time);
        if self.zero_mean_pressure {
            zero_mean_in_place(&self.disc.mesh, &mut s.p);
        }
        s
    }

    fn residual(&self, old: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        assemble_residual(self.disc, self.params, old, x, self.flags, self.constraints)
    }

    /// Newton on the unknowns `idx` with the others frozen at `x`.
    fn solve_subset(
        &self,
        old: &[f64],
        x: &mut [f64],
        idx: &[usize],
        linear: &mut dyn LinearSolver,
        max_tol: Option<f64>,
    ) -> Result<NewtonStats> {
        let base = x.to_vec();
        let expand = |y: &[f64]| {
            let mut z = base.clone();
            for (k, &i) in idx.iter().enumerate() {
                z[i] = y[k];
            }
            z
        };
        let res = |y: &[f64]| -> Result<Vec<f64>> {
            let r = self.residual(old, &expand(y))?;
            Ok(idx.iter().map(|&i| r[i]).collect())
        };
        let jac = |y: &[f64]| {
            let (_, j) = assemble(self.disc, self.params, old, &expand(y), self.flags, self.constraints, true)?;
            Ok(j.expect("requested").submatrix(idx, idx))
        };
        let y0: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let (y, stats) = newton_solve_to(res, jac, linear, y0, self.newton, max_tol)?;
        for (k, &i) in idx.iter().enumerate() {
            x[i] = y[k];
        }
        Ok(stats)
    }
}

/// One Newton solve of the fully coupled system.
pub fn step_monolithic(
    prob: &StepProblem,
    old: &SystemState,
    time: f64,
    linear: &mut dyn LinearSolver,
) -> Result<(SystemState, StepStats)> {
    let l = prob.disc.layout;
    let xo = old.pack(&l);
    let mut x = prob.initial_guess(old);
    let idx: Vec<usize> = (0..l.total()).collect();
    let ns = prob.solve_subset(&xo, &mut x, &idx, linear, None)?;
    if !ns.converged {
        return Err(Error::Convergence {
            what: "Newton",
            detail: format!(
                "{} iterations, residual {:.3e}, target {:.3e}",
                ns.iterations,
                ns.residual_norms.last().copied().unwrap_or(f64::NAN),
                ns.max_tol
            ),
        });
    }
    let stats = StepStats {
        newton_iterations: ns.iterations,
        linear_iterations: ns.total_linear_iterations(),
        residual_norm: *ns.residual_norms.last().expect("nonempty"),
        max_tol: ns.max_tol,
        ..Default::default()
    };
    Ok((prob.finish(x, time), stats))
}

/// Alternate flow and phase-field sub-solves until the coupled residual
/// meets the monolithic criterion.
pub fn step_partitioned(
    prob: &StepProblem,
    old: &SystemState,
    time: f64,
    strategy: &StrategyConfig,
    solvers: &mut Solvers,
) -> Result<(SystemState, StepStats)> {
    let l = prob.disc.layout;
    let xo = old.pack(&l);
    let mut x = prob.initial_guess(old);
    let mut rn = norm2(&prob.residual(&xo, &x)?);
    let tol = (rn * strategy.coupling_tol).max(prob.newton.abs_tol);
    let sub_tol = tol / 2f64.sqrt();
    let ns_idx = l.ns_indices();
    let ch_idx = l.ch_indices();
    let mut stats = StepStats {
        max_tol: tol,
        ..Default::default()
    };
    let mut trace = vec![rn];
    while rn > tol {
        if stats.coupling_iterations >= strategy.max_coupling {
            return Err(Error::Convergence {
                what: "coupling loop",
                detail: format!("{} sweeps, residual trace {:?}", strategy.max_coupling, trace),
            });
        }
        stats.coupling_iterations += 1;
        for (idx, which) in [(&ns_idx, 0), (&ch_idx, 1)] {
            let lin: &mut dyn LinearSolver = if which == 0 { solvers.ns.as_mut() } else { solvers.ch.as_mut() };
            let s = prob.solve_subset(&xo, &mut x, idx, lin, Some(sub_tol))?;
            if !s.converged {
                return Err(Error::Convergence {
                    what: if which == 0 { "flow sub-solve" } else { "phase-field sub-solve" },
                    detail: format!("sweep {}", stats.coupling_iterations),
                });
            }
            stats.newton_iterations += s.iterations;
            stats.linear_iterations += s.total_linear_iterations();
            if which == 0 {
                stats.ns_newton_iterations += s.iterations;
            } else {
                stats.ch_newton_iterations += s.iterations;
            }
        }
        rn = norm2(&prob.residual(&xo, &x)?);
        trace.push(rn);
    }
    stats.residual_norm = rn;
    Ok((prob.finish(x, time), stats))
}

/// Solve the Cahn-Hilliard subsystem alone for the initial potential
/// consistent with `phi`.
pub fn initial_potential(disc: &Discretization, params: &ModelParams, phi: &[f64]) -> Result<Vec<f64>> {
    let l = disc.layout;
    let mut st = SystemState::zeros(&l);
    st.phi = phi.to_vec();
    if let Some(c) = st.c.as_mut() {
        c.fill(1.0);
    }
    let x = st.pack(&l);
    let flags = AssemblyFlags {
        preprocessing: true,
        reactive: l.reactive,
    };
    let (r, j) = assemble(disc, params, &x, &x, flags, &Constraints::default(), true)?;
    let idx: Vec<usize> = (l.mu()..l.mu() + l.n_p1).collect();
    let mass = j.expect("requested").submatrix(&idx, &idx);
    let rhs: Vec<f64> = idx.iter().map(|&i| -r[i]).collect();
    lu_solve(&mass, &rhs)
}

/// Summary of a preprocessing run.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessReport {
    pub iterations: usize,
    pub phi_min: f64,
    pub phi_max: f64,
    pub newton_iterations: usize,
}

/// Diffuse initial phase field from a sharp indicator: interpolate, then
/// run `params.n_pre` Cahn-Hilliard steps with mobility `m_pre` and zero
/// velocity, optionally refining between steps. Returns the final
/// discretization and state.
pub fn preprocess_initial(
    disc: Discretization,
    mut state: SystemState,
    params: &ModelParams,
    newton: &NewtonConfig,
    bcs: &BoundaryEvaluator,
    refine: Option<(f64, u32)>,
) -> Result<(Discretization, SystemState, PreprocessReport)> {
    let mut disc = disc;
    let mut newton_its = 0;
    for it in 0..params.n_pre {
        let wrap = |e: Error| Error::Preprocessing {
            iteration: it,
            reason: e.to_string(),
        };
        let l = disc.layout;
        // velocity stays at rest, so only phase-field data apply
        let all = build_constraints(&disc, bcs, false);
        let mut cons = Constraints::default();
        for (&d, &v) in all.dofs.iter().zip(&all.values) {
            if d < l.n_ch() {
                cons.push(d, v);
            }
        }
        let flags = AssemblyFlags {
            preprocessing: true,
            reactive: l.reactive,
        };
        let prob = StepProblem {
            disc: &disc,
            params,
            newton,
            flags,
            constraints: &cons,
            zero_mean_pressure: false,
        };
        let xo = state.pack(&l);
        let mut x = prob.initial_guess(&state);
        let ch = l.ch_indices();
        let s = prob
            .solve_subset(&xo, &mut x, &ch, &mut DirectSolver::new(), None)
            .map_err(wrap)?;
        if !s.converged {
            return Err(wrap(Error::Convergence {
                what: "Newton",
                detail: format!("{} iterations", s.iterations),
            }));
        }
        newton_its += s.iterations;
        state = SystemState::unpack(&l, &x, state.time);
        if let Some((thr, max_level)) = refine {
            if it + 1 < params.n_pre {
                if let Some((d, s)) = adapt(&disc, &state, thr, max_level)? {
                    disc = d;
                    state = s;
                }
            }
        }
    }
    let phi_min = state.phi.iter().copied().fold(f64::INFINITY, f64::min);
    let phi_max = state.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let report = PreprocessReport {
        iterations: params.n_pre,
        phi_min,
        phi_max,
        newton_iterations: newton_its,
    };
    Ok((disc, state, report))
}

/// Refine where the phase field varies and carry all fields over.
/// `None` when nothing needs refinement.
pub fn adapt(
    disc: &Discretization,
    state: &SystemState,
    threshold: f64,
    max_level: u32,
) -> Result<Option<(Discretization, SystemState)>> {
    let marks = mark_by_gradient(&disc.mesh, &state.phi, threshold, max_level)?;
    if !any_refine(&marks) {
        return Ok(None);
    }
    let (mesh, parents) = disc.mesh.refine(&marks)?;
    let nd = Discretization::new(Arc::new(mesh), disc.p2.dirichlet_tags(), disc.layout.reactive)?;
    let p1_old = SpaceRef::P1(disc.p1.clone());
    let p1_new = SpaceRef::P1(nd.p1.clone());
    let p2_new = SpaceRef::P2Vec(nd.p2.clone());
    let mv = |v: &[f64], old: &SpaceRef, new: &SpaceRef| -> Result<Vec<f64>> {
        Ok(transfer(&parents, &Field::new(old.clone(), v.to_vec())?, new)?.into_coeffs())
    };
    let st = SystemState {
        phi: mv(&state.phi, &p1_old, &p1_new)?,
        mu: mv(&state.mu, &p1_old, &p1_new)?,
        c: match &state.c {
            Some(c) => Some(mv(c, &p1_old, &p1_new)?),
            None => None,
        },
        v: mv(&state.v, &SpaceRef::P2Vec(disc.p2.clone()), &p2_new)?,
        p: mv(&state.p, &p1_old, &p1_new)?,
        time: state.time,
    };
    Ok(Some((nd, st)))
}

/// Base mesh refined towards the initial interface until no triangle below
/// `scenario.max_level` exceeds the gradient threshold.
pub fn initial_mesh(scenario: &Scenario, phi0: &dyn Fn([f64; 2]) -> f64) -> Result<TriMesh> {
    let mut mesh = TriMesh::rectangle(scenario.lx, scenario.ly, scenario.base_nx, scenario.base_ny)?;
    loop {
        let phi: Vec<f64> = mesh.vertices().iter().map(|&x| phi0(x)).collect();
        let marks = mark_by_gradient(&mesh, &phi, scenario.refine_threshold, scenario.max_level)?;
        if !any_refine(&marks) {
            return Ok(mesh);
        }
        mesh = mesh.refine(&marks)?.0;
    }
}

/// One record per completed step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub energy: EnergyReport,
    pub stats: StepStats,
    pub solid_area: f64,
    pub solid_volume: f64,
    pub mass: f64,
    /// Present when the velocity data were homogeneous and the mesh fixed
    /// over the step.
    pub dissipation: Option<DissipationVerdict>,
    /// `int R` over the step, for reactive runs.
    pub reaction: Option<f64>,
}

/// A running simulation: discretization, current state and solvers.
pub struct Simulation {
    pub config: Config,
    pub disc: Discretization,
    pub state: SystemState,
    pub step: usize,
    pub energy: EnergyReport,
    pub preprocess: Option<PreprocessReport>,
    solvers: Solvers,
}

impl Simulation {
    /// Initial refinement, initial data and (for sharp geometries)
    /// preprocessing.
    pub fn new(config: Config) -> Result<Self> {
        config.validate()?;
        let sc = &config.scenario;
        let params = &config.params;
        let sharp = matches!(sc.geometry, Geometry::Rectangles(_));
        let circles = match &sc.geometry {
            Geometry::Circles(c) => c.clone(),
            Geometry::Rectangles(_) => Vec::new(),
        };
        let smooth = tanh_circle_ic(&circles, params.epsilon);
        let geometry = sc.geometry.clone();
        let phi0: Box<dyn Fn([f64; 2]) -> f64> = if sharp {
            Box::new(move |x| geometry.indicator(x))
        } else {
            Box::new(smooth)
        };
        let mesh = Arc::new(initial_mesh(sc, phi0.as_ref())?);
        let tags = sc.bcs.velocity_dirichlet_tags();
        let disc = Discretization::new(mesh, &tags, sc.reactive)?;
        let l = disc.layout;
        let mut state = SystemState::zeros(&l);
        state.phi = interpolate_p1(&disc.p1, |x| phi0(x)).into_coeffs();
        if let Some(c) = state.c.as_mut() {
            c.fill(sc.c_init);
        }
        let bcs0 = realize_bcs(sc, 0);
        let (disc, mut state, pre) = if params.n_pre > 0 {
            let refine = Some((sc.refine_threshold, sc.max_level));
            let (d, s, r) = preprocess_initial(disc, state, params, &config.newton, &bcs0, refine)?;
            (d, s, Some(r))
        } else {
            (disc, state, None)
        };
        // velocity starts at rest; Dirichlet values enter through the first step
        state.mu = initial_potential(&disc, params, &state.phi)?;
        let energy = compute_energy(&disc, &state, &state, params);
        let solvers = Solvers::for_mode(config.strategy.mode, &disc.layout);
        Ok(Simulation {
            config,
            disc,
            state,
            step: 0,
            energy,
            preprocess: pre,
            solvers,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.config.params
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.disc.mesh
    }

    pub fn mass(&self) -> f64 {
        integrate_p1(&self.disc.mesh, &self.state.phi)
    }

    pub fn solid(&self) -> ShrinkageReport {
        measure_solid(&self.disc.mesh, &self.state.phi, &self.config.params)
    }

    fn velocity_data_homogeneous(&self, bcs: &BoundaryEvaluator) -> bool {
        let p2 = &self.disc.p2;
        BoundaryTag::ALL.iter().all(|&t| {
            p2.boundary_nodes(t)
                .into_iter()
                .all(|n| bcs.velocity(t, p2.node(n)).map_or(false, |v| v == [0.0, 0.0]))
        })
    }

    /// Advance one time step.
    pub fn advance(&mut self) -> Result<StepRecord> {
        let n = self.step + 1;
        let fail = |e: Error| Error::StepFailure {
            step: n,
            reason: e.to_string(),
        };
        let cfg = &self.config;
        let bcs = realize_bcs(&cfg.scenario, n);
        let pin = cfg.scenario.bcs.pressure_floats();
        let cons = build_constraints(&self.disc, &bcs, pin);
        let flags = AssemblyFlags {
            preprocessing: false,
            reactive: self.disc.layout.reactive,
        };
        let prob = StepProblem {
            disc: &self.disc,
            params: &cfg.params,
            newton: &cfg.newton,
            flags,
            constraints: &cons,
            zero_mean_pressure: pin,
        };
        let mut old = self.state.clone();
        if pin {
            // start from a pressure consistent with the pin
            let p0 = old.p[0];
            old.p.iter_mut().for_each(|p| *p -= p0);
        }
        let time = self.state.time + cfg.params.tau;
        let (new, stats) = match cfg.strategy.mode {
            StrategyMode::Monolithic => step_monolithic(&prob, &old, time, self.solvers.monolithic.as_mut()),
            _ => step_partitioned(&prob, &old, time, &cfg.strategy, &mut self.solvers),
        }
        .map_err(fail)?;
        let energy = compute_energy(&self.disc, &new, &self.state, &cfg.params);
        let dissipation = self
            .velocity_data_homogeneous(&bcs)
            .then(|| check_dissipation(&self.energy, &energy, cfg.params.tau, stats.max_tol));
        let reaction = new
            .c
            .as_deref()
            .map(|c| reaction_integral(&self.disc, &self.state.phi, c, &cfg.params));
        self.state = new;
        self.energy = energy;
        self.step = n;
        if cfg.run.adapt {
            let (thr, lvl) = (cfg.scenario.refine_threshold, cfg.scenario.max_level);
            if let Some((d, s)) = adapt(&self.disc, &self.state, thr, lvl)? {
                self.solvers = Solvers::for_mode(cfg.strategy.mode, &d.layout);
                self.disc = d;
                self.state = s;
            }
        }
        let solid = self.solid();
        Ok(StepRecord {
            step: n,
            time,
            energy,
            stats,
            solid_area: solid.area,
            solid_volume: solid.volume,
            mass: self.mass(),
            dissipation,
            reaction,
        })
    }

    /// Advance `steps` steps, calling `observe` after each.
    pub fn run(
        &mut self,
        steps: usize,
        mut observe: impl FnMut(&Simulation, &StepRecord) -> Result<()>,
    ) -> Result<Vec<StepRecord>> {
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let rec = self.advance()?;
            observe(self, &rec)?;
            out.push(rec);
        }
        Ok(out)
    }

    /// Record describing the initial state.
    pub fn initial_record(&self) -> StepRecord {
        let solid = self.solid();
        StepRecord {
            step: 0,
            time: self.state.time,
            energy: self.energy,
            stats: StepStats::default(),
            solid_area: solid.area,
            solid_volume: solid.volume,
            mass: self.mass(),
            dissipation: None,
            reaction: None,
        }
    }
}

/// Jacobian blocks of the first step from the current state.
pub struct BlockReport {
    pub blocks: Blocks,
    /// Exact 1-norm condition number of the CH block when small enough.
    pub cond_ch: Option<f64>,
}

pub fn block_report(sim: &Simulation) -> Result<BlockReport> {
    let l = sim.disc.layout;
    let sc = &sim.config.scenario;
    let cons = build_constraints(&sim.disc, &realize_bcs(sc, sim.step + 1), sc.bcs.pressure_floats());
    let flags = AssemblyFlags {
        preprocessing: false,
        reactive: l.reactive,
    };
    let x = sim.state.pack(&l);
    let mut guess = x.clone();
    cons.apply(&mut guess);
    let sys = assemble_jacobian(&sim.disc, sim.params(), &x, &guess, flags, &cons)?;
    let blocks = extract_blocks(&sys);
    let cond_ch = if blocks.a_ch.nrows() <= 2000 {
        Some(cond1_exact(&blocks.a_ch)?)
    } else {
        None
    };
    Ok(BlockReport { blocks, cond_ch })
}

/// Outcome of [`run_simulation`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    /// Initial record followed by one record per step.
    pub records: Vec<StepRecord>,
    pub preprocess: Option<PreprocessReport>,
    pub triangles: usize,
    pub unknowns: usize,
    /// Steps whose dissipation check failed.
    pub dissipation_failures: Vec<usize>,
    pub clogged: bool,
    pub snapshots: Vec<PathBuf>,
}

impl RunSummary {
    pub fn to_text(&self, config: &Config) -> String {
        let last = self.records.last().expect("initial record");
        let first = &self.records[0];
        let audited = self.records.iter().filter(|r| r.dissipation.is_some()).count();
        format!(
            "scenario = {}\nstrategy = {}\nsteps = {}\ntriangles = {}\nunknowns = {}\n\
             initial_energy = {:.16e}\nfinal_energy = {:.16e}\nmass_drift = {:.3e}\n\
             solid_area = {:.16e}\naudited_steps = {}\ndissipation_failures = {}\nclogged = {}\n",
            config.scenario.kind.name(),
            config.strategy.mode.name(),
            last.step,
            self.triangles,
            self.unknowns,
            first.energy.total,
            last.energy.total,
            (last.mass - first.mass).abs(),
            last.solid_area,
            audited,
            self.dissipation_failures.len(),
            self.clogged,
        )
    }
}

/// Full run per `config.run`: initial data, time stepping and, with an
/// output directory, `energy.csv`, VTK snapshots and `summary.txt`.
pub fn run_simulation(
    config: Config,
    out: Option<&Path>,
    mut observe: impl FnMut(&Simulation, &StepRecord) -> Result<()>,
) -> Result<RunSummary> {
    let mut sim = Simulation::new(config)?;
    let stride = sim.config.run.output_stride;
    let mut snapshots = Vec::new();
    let mut log = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|source| Error::File {
                path: dir.to_path_buf(),
                source,
            })?;
            Some(EnergyLog::create(&dir.join("energy.csv"))?)
        }
        None => None,
    };
    let snap = |sim: &Simulation, snapshots: &mut Vec<PathBuf>| -> Result<()> {
        if let Some(dir) = out {
            if stride > 0 && sim.step % stride == 0 {
                let p = dir.join(format!("snapshot_{:05}.vtk", sim.step));
                write_vtk(&p, &sim.disc, &sim.state, sim.params())?;
                snapshots.push(p);
            }
        }
        Ok(())
    };
    let first = sim.initial_record();
    if let Some(l) = log.as_mut() {
        l.push(&EnergyRow::from(&first))?;
    }
    snap(&sim, &mut snapshots)?;
    let mut records = vec![first];
    for _ in 0..sim.config.run.steps {
        let rec = sim.advance()?;
        if let Some(l) = log.as_mut() {
            l.push(&EnergyRow::from(&rec))?;
        }
        snap(&sim, &mut snapshots)?;
        observe(&sim, &rec)?;
        records.push(rec);
    }
    let summary = RunSummary {
        dissipation_failures: records
            .iter()
            .filter(|r| r.dissipation.is_some_and(|d| !d.pass))
            .map(|r| r.step)
            .collect(),
        clogged: is_clogged(sim.mesh(), &sim.state.phi),
        triangles: sim.mesh().n_triangles(),
        unknowns: sim.disc.layout.total(),
        preprocess: sim.preprocess.clone(),
        records,
        snapshots,
    };
    if let Some(dir) = out {
        let p = dir.join("summary.txt");
        std::fs::write(&p, summary.to_text(&sim.config)).map_err(|source| Error::File { path: p, source })?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests;
