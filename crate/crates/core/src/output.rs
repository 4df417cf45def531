//! VTK snapshots and CSV energy logs.

use std::fmt::Write as _;
use std::path::Path;

use crate::assembly::{Discretization, SystemState};
use crate::driver::StepRecord;
use crate::error::{Error, Result};
use crate::physics::{fluid_fraction, ModelParams};

fn file_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::File {
        path: path.to_path_buf(),
        source,
    }
}

/// Velocity sampled at the mesh vertices.
pub fn vertex_velocity(disc: &Discretization, state: &SystemState) -> Vec<[f64; 2]> {
    // the first P2 nodes are the vertices
    (0..disc.mesh.n_vertices())
        .map(|i| [state.v[2 * i], state.v[2 * i + 1]])
        .collect()
}

/// Conserved momentum-like field `phi_f_tilde * v` at the vertices.
pub fn vertex_w(disc: &Discretization, state: &SystemState, params: &ModelParams) -> Vec<[f64; 2]> {
    vertex_velocity(disc, state)
        .into_iter()
        .zip(&state.phi)
        .map(|(v, &phi)| {
            let f = fluid_fraction(phi, params);
            [f * v[0], f * v[1]]
        })
        .collect()
}

/// Largest `|phi_f_tilde v|` over velocity nodes inside `[lo, hi]`.
pub fn max_w_in(disc: &Discretization, state: &SystemState, params: &ModelParams, lo: [f64; 2], hi: [f64; 2]) -> f64 {
    let mesh = &disc.mesh;
    let nv = mesh.n_vertices();
    let mut best: f64 = 0.0;
    for i in 0..disc.p2.n_nodes() {
        let x = disc.p2.node(i);
        if x[0] < lo[0] || x[0] > hi[0] || x[1] < lo[1] || x[1] > hi[1] {
            continue;
        }
        let phi = if i < nv {
            state.phi[i]
        } else {
            let [a, b] = mesh.edges()[i - nv];
            0.5 * (state.phi[a] + state.phi[b])
        };
        let v = [state.v[2 * i], state.v[2 * i + 1]];
        best = best.max(fluid_fraction(phi, params) * v[0].hypot(v[1]));
    }
    best
}

/// Legacy ASCII VTK unstructured grid with the point data of `state`.
pub fn format_vtk(disc: &Discretization, state: &SystemState, params: &ModelParams) -> String {
    let mesh = &disc.mesh;
    let (nv, nt) = (mesh.n_vertices(), mesh.n_triangles());
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "phase-field state t={:e}", state.time);
    let _ = writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {nv} double");
    for x in mesh.vertices() {
        let _ = writeln!(s, "{:e} {:e} 0", x[0], x[1]);
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(s, "5");
    }
    let _ = writeln!(s, "POINT_DATA {nv}");
    let scalar = |s: &mut String, name: &str, v: &[f64]| {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for x in v {
            let _ = writeln!(s, "{x:e}");
        }
    };
    let vector = |s: &mut String, name: &str, v: &[[f64; 2]]| {
        let _ = writeln!(s, "VECTORS {name} double");
        for x in v {
            let _ = writeln!(s, "{:e} {:e} 0", x[0], x[1]);
        }
    };
    scalar(&mut s, "phi", &state.phi);
    scalar(&mut s, "mu", &state.mu);
    scalar(&mut s, "p", &state.p);
    vector(&mut s, "velocity", &vertex_velocity(disc, state));
    vector(&mut s, "w", &vertex_w(disc, state, params));
    if let Some(c) = &state.c {
        scalar(&mut s, "c", c);
    }
    s
}

pub fn write_vtk(path: &Path, disc: &Discretization, state: &SystemState, params: &ModelParams) -> Result<()> {
    std::fs::write(path, format_vtk(disc, state, params)).map_err(file_err(path))
}

pub const ENERGY_HEADER: [&str; 10] = [
    "step",
    "time",
    "kinetic",
    "dw_energy",
    "grad_energy",
    "total",
    "visc_diss",
    "drag_diss",
    "ch_diss",
    "solid_area",
];

/// One row of the energy log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRow {
    pub step: usize,
    pub time: f64,
    pub kinetic: f64,
    pub dw_energy: f64,
    pub grad_energy: f64,
    pub total: f64,
    pub visc_diss: f64,
    pub drag_diss: f64,
    pub ch_diss: f64,
    pub solid_area: f64,
}

impl From<&StepRecord> for EnergyRow {
    fn from(r: &StepRecord) -> Self {
        let e = &r.energy;
        EnergyRow {
            step: r.step,
            time: r.time,
            kinetic: e.kinetic,
            dw_energy: e.dw_energy,
            grad_energy: e.grad_energy,
            total: e.total,
            visc_diss: e.visc_dissipation,
            drag_diss: e.drag_dissipation,
            ch_diss: e.ch_dissipation,
            solid_area: r.solid_area,
        }
    }
}

impl EnergyRow {
    fn fields(&self) -> [f64; 9] {
        [
            self.time,
            self.kinetic,
            self.dw_energy,
            self.grad_energy,
            self.total,
            self.visc_diss,
            self.drag_diss,
            self.ch_diss,
            self.solid_area,
        ]
    }
}

/// Streaming writer for the energy log.
pub struct EnergyLog<W: std::io::Write> {
    inner: csv::Writer<W>,
}

impl EnergyLog<std::fs::File> {
    pub fn create(path: &Path) -> Result<Self> {
        let f = std::fs::File::create(path).map_err(file_err(path))?;
        EnergyLog::new(f)
    }
}

impl<W: std::io::Write> EnergyLog<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(ENERGY_HEADER).map_err(csv_err)?;
        Ok(EnergyLog { inner })
    }

    pub fn push(&mut self, row: &EnergyRow) -> Result<()> {
        let mut rec = vec![row.step.to_string()];
        rec.extend(row.fields().iter().map(|v| format!("{v:.16e}")));
        self.inner.write_record(&rec).map_err(csv_err)?;
        self.inner.flush().map_err(|e| csv_err(e.into()))
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| Error::InvalidArgument(format!("csv flush: {e}")))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

pub fn write_energy_csv(path: &Path, rows: &[EnergyRow]) -> Result<()> {
    let mut log = EnergyLog::create(path)?;
    for r in rows {
        log.push(r)?;
    }
    Ok(())
}

pub fn parse_energy_csv(text: &str) -> Result<Vec<EnergyRow>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().map_err(csv_err)?;
    if header.iter().ne(ENERGY_HEADER) {
        return Err(Error::InvalidArgument(format!("unexpected energy log header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let bad = |i: usize| Error::InvalidArgument(format!("energy log field `{}` unparsable", ENERGY_HEADER[i]));
        let step = rec[0].parse().map_err(|_| bad(0))?;
        let mut v = [0.0; 9];
        for (i, x) in v.iter_mut().enumerate() {
            *x = rec[i + 1].parse().map_err(|_| bad(i + 1))?;
        }
        out.push(EnergyRow {
            step,
            time: v[0],
            kinetic: v[1],
            dw_energy: v[2],
            grad_energy: v[3],
            total: v[4],
            visc_diss: v[5],
            drag_diss: v[6],
            ch_diss: v[7],
            solid_area: v[8],
        });
    }
    Ok(out)
}

pub fn read_energy_csv(path: &Path) -> Result<Vec<EnergyRow>> {
    parse_energy_csv(&std::fs::read_to_string(path).map_err(file_err(path))?)
}
