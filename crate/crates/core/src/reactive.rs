//! Precipitation and dissolution at the fluid-solid interface: a dissolved
//! ion concentration transported by the flow and exchanged with the solid.
//!
//! The concentration rows and the reaction couplings themselves live in the
//! element kernel; this module adds the state wrapper, step entry points and
//! bookkeeping integrals.

use crate::assembly::{assemble, AssemblyFlags, Constraints, Discretization, SystemState};
use crate::config::Config;
use crate::driver::{
    is_clogged, step_monolithic, step_partitioned, Simulation, Solvers, StepProblem, StepRecord, StepStats,
    StrategyConfig, StrategyMode,
};
use crate::error::{Error, Result};
use crate::fespace::ElementGeometry;
use crate::linalg::SparseMatrix;
use crate::physics::{reaction_localization, reaction_rate, ModelParams};

/// System state with a mandatory concentration and the solid mass produced
/// by reactions so far.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactiveState {
    pub state: SystemState,
    /// `sum tau * int R`; negative under net precipitation.
    pub reacted_mass: f64,
}

impl ReactiveState {
    pub fn new(state: SystemState) -> Result<Self> {
        match &state.c {
            Some(c) if c.iter().all(|v| v.is_finite()) => Ok(ReactiveState {
                state,
                reacted_mass: 0.0,
            }),
            Some(_) => Err(Error::Numeric("concentration".into())),
            None => Err(Error::InvalidArgument("reactive state needs a concentration".into())),
        }
    }

    pub fn c(&self) -> &[f64] {
        self.state.c.as_deref().expect("checked on construction")
    }
}

fn require_reactive(disc: &Discretization) -> Result<()> {
    if disc.layout.reactive {
        Ok(())
    } else {
        Err(Error::InvalidArgument("discretization carries no concentration".into()))
    }
}

/// Residual and optional Jacobian of one reactive step.
pub fn assemble_reactive_step(
    disc: &Discretization,
    params: &ModelParams,
    old: &ReactiveState,
    guess: &ReactiveState,
    constraints: &Constraints,
    with_jacobian: bool,
) -> Result<(Vec<f64>, Option<SparseMatrix>)> {
    require_reactive(disc)?;
    let l = disc.layout;
    let flags = AssemblyFlags {
        preprocessing: false,
        reactive: true,
    };
    assemble(
        disc,
        params,
        &old.state.pack(&l),
        &guess.state.pack(&l),
        flags,
        constraints,
        with_jacobian,
    )
}

/// One coupled step. Partitioned modes solve the concentration together
/// with the phase field.
pub fn step_reactive(
    prob: &StepProblem,
    old: &ReactiveState,
    time: f64,
    strategy: &StrategyConfig,
    solvers: &mut Solvers,
) -> Result<(ReactiveState, StepStats)> {
    require_reactive(prob.disc)?;
    if !prob.flags.reactive {
        return Err(Error::InvalidArgument("step problem is not reactive".into()));
    }
    let (new, stats) = match strategy.mode {
        StrategyMode::Monolithic => step_monolithic(prob, &old.state, time, solvers.monolithic.as_mut())?,
        _ => step_partitioned(prob, &old.state, time, strategy, solvers)?,
    };
    let c = new.c.as_deref().expect("reactive layout");
    let tau = time - old.state.time;
    let reacted = old.reacted_mass + tau * reaction_integral(prob.disc, &old.state.phi, c, prob.params);
    Ok((
        ReactiveState {
            state: new,
            reacted_mass: reacted,
        },
        stats,
    ))
}

fn p1_at(v: &[f64], t: [usize; 3], lam: &[f64; 3]) -> f64 {
    v[t[0]] * lam[0] + v[t[1]] * lam[1] + v[t[2]] * lam[2]
}

/// `int R` with the localization taken from `phi_old` and the rate from `c`.
pub fn reaction_integral(disc: &Discretization, phi_old: &[f64], c: &[f64], params: &ModelParams) -> f64 {
    let tb = &disc.tables;
    let mesh = &disc.mesh;
    let mut sum = 0.0;
    for (t, &tri) in mesh.triangles().iter().enumerate() {
        let det = ElementGeometry::new(mesh.triangle_coords(t)).det;
        for q in 0..tb.weights.len() {
            let phi = p1_at(phi_old, tri, &tb.lambda[q]);
            let cq = p1_at(c, tri, &tb.lambda[q]);
            sum -= tb.weights[q] * det * reaction_localization(phi) / params.epsilon * reaction_rate(cq, params);
        }
    }
    sum
}

/// `int (phi + delta)(c - c*)`, the quantity the concentration rows
/// balance.
pub fn concentration_excess(disc: &Discretization, state: &SystemState, params: &ModelParams) -> f64 {
    let c = state.c.as_deref().unwrap_or(&[]);
    if c.is_empty() {
        return 0.0;
    }
    let tb = &disc.tables;
    let mesh = &disc.mesh;
    let mut sum = 0.0;
    for (t, &tri) in mesh.triangles().iter().enumerate() {
        let det = ElementGeometry::new(mesh.triangle_coords(t)).det;
        for q in 0..tb.weights.len() {
            let phi = p1_at(&state.phi, tri, &tb.lambda[q]);
            let cq = p1_at(c, tri, &tb.lambda[q]);
            sum += tb.weights[q] * det * (phi + params.delta) * (cq - params.c_star);
        }
    }
    sum
}

/// Per-step record of a reactive run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactiveRecord {
    pub record: StepRecord,
    /// `int R` over the step.
    pub reaction: f64,
    pub reacted_mass: f64,
    pub clogged: bool,
}

/// A simulation with a concentration field.
pub struct ReactiveSimulation {
    pub sim: Simulation,
    pub reacted_mass: f64,
}

impl ReactiveSimulation {
    pub fn new(config: Config) -> Result<Self> {
        if !config.scenario.reactive {
            return Err(Error::InvalidArgument(
                "scenario does not enable the concentration field".into(),
            ));
        }
        Ok(ReactiveSimulation {
            sim: Simulation::new(config)?,
            reacted_mass: 0.0,
        })
    }

    pub fn state(&self) -> Result<ReactiveState> {
        let mut s = ReactiveState::new(self.sim.state.clone())?;
        s.reacted_mass = self.reacted_mass;
        Ok(s)
    }

    pub fn advance(&mut self) -> Result<ReactiveRecord> {
        let record = self.sim.advance()?;
        let reaction = record.reaction.unwrap_or(0.0);
        self.reacted_mass += self.sim.params().tau * reaction;
        Ok(ReactiveRecord {
            record,
            reaction,
            reacted_mass: self.reacted_mass,
            clogged: is_clogged(self.sim.mesh(), &self.sim.state.phi),
        })
    }

    /// Advance up to `steps` steps, stopping early once the channel clogs
    /// when `stop_on_clog` is set.
    pub fn run(
        &mut self,
        steps: usize,
        stop_on_clog: bool,
        mut observe: impl FnMut(&ReactiveSimulation, &ReactiveRecord) -> Result<()>,
    ) -> Result<Vec<ReactiveRecord>> {
        let mut out = Vec::new();
        for _ in 0..steps {
            let r = self.advance()?;
            observe(self, &r)?;
            let stop = stop_on_clog && r.clogged;
            out.push(r);
            if stop {
                break;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests;
