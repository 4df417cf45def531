use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::assembly::assemble_residual;
use crate::config::{realize_bcs, ScalarBc, ScenarioKind, VelocityBc};
use crate::driver::build_constraints;
use crate::mesh::{BoundaryTag, TriMesh};
use crate::nonlinear::NewtonConfig;

fn small(kind: ScenarioKind) -> Config {
    let mut cfg = Config::preset(kind);
    cfg.scenario.base_nx = 16;
    cfg.scenario.base_ny = 8;
    cfg.scenario.max_level = 1;
    cfg.scenario.refine_threshold = 0.2;
    cfg
}

fn disc() -> Discretization {
    let mesh = TriMesh::rectangle(2.0, 1.0, 4, 2).unwrap();
    Discretization::new(Arc::new(mesh), &BoundaryTag::ALL, true).unwrap()
}

fn uniform(d: &Discretization, phi: f64, c: f64) -> SystemState {
    let mut s = SystemState::zeros(&d.layout);
    s.phi.fill(phi);
    s.c.as_mut().unwrap().fill(c);
    s
}

#[test]
fn state_needs_concentration() {
    let d = Discretization::new(Arc::new(TriMesh::rectangle(2.0, 1.0, 2, 1).unwrap()), &BoundaryTag::ALL, false)
        .unwrap();
    assert!(ReactiveState::new(SystemState::zeros(&d.layout)).is_err());
    let mut s = uniform(&disc(), 1.0, 1.0);
    s.c.as_mut().unwrap()[0] = f64::NAN;
    assert!(ReactiveState::new(s).is_err());
}

#[test]
fn equilibrium_has_no_residual() {
    let d = disc();
    let p = ModelParams::cavity();
    for phi in [0.0, 1.0] {
        let s = ReactiveState::new(uniform(&d, phi, 1.0)).unwrap();
        let (r, _) = assemble_reactive_step(&d, &p, &s, &s, &Constraints::default(), false).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-14), "phi = {phi}");
        assert_eq!(reaction_integral(&d, &s.state.phi, s.c(), &p), 0.0);
    }
    // at the interface the rate vanishes at c = 1 only
    let half = uniform(&d, 0.5, 1.0);
    assert_eq!(reaction_integral(&d, &half.phi, half.c.as_ref().unwrap(), &p), 0.0);
    let rich = uniform(&d, 0.5, 1.5);
    // R = -q(1/2)/eps k_c (1.5^2 - 1) over |Omega| = 2
    let q = 2f64.sqrt() * 0.25;
    let oracle = -q / p.epsilon * p.k_c * 1.25 * 2.0;
    let got = reaction_integral(&d, &rich.phi, rich.c.as_ref().unwrap(), &p);
    assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
}

#[test]
fn solid_concentration_cancels_transport() {
    let d = disc();
    let p = ModelParams::cavity();
    let l = d.layout;
    let mut s = uniform(&d, 0.4, p.c_star);
    // arbitrary flow and potential
    for (i, v) in s.v.iter_mut().enumerate() {
        *v = ((i * 7919) % 13) as f64 / 13.0 - 0.5;
    }
    for (i, m) in s.mu.iter_mut().enumerate() {
        *m = (i as f64 * 0.37).sin();
    }
    let rs = ReactiveState::new(s).unwrap();
    let (r, _) = assemble_reactive_step(&d, &p, &rs, &rs, &Constraints::default(), false).unwrap();
    let c0 = l.c().unwrap();
    for i in c0..c0 + l.n_p1 {
        assert!(r[i].abs() < 1e-14, "row {i}: {}", r[i]);
    }
}

#[test]
fn non_reactive_discretization_rejected() {
    let d = Discretization::new(Arc::new(TriMesh::rectangle(2.0, 1.0, 2, 1).unwrap()), &BoundaryTag::ALL, false)
        .unwrap();
    let dr = disc();
    let s = ReactiveState::new(uniform(&dr, 1.0, 1.0)).unwrap();
    assert!(assemble_reactive_step(&d, &ModelParams::cavity(), &s, &s, &Constraints::default(), false).is_err());
    assert!(ReactiveSimulation::new(Config::preset(ScenarioKind::CavityInclusions)).is_err());
}

#[test]
fn equilibrium_step_is_stationary() {
    let cfg = small(ScenarioKind::ReactiveChannel);
    let mesh = TriMesh::rectangle(2.0, 1.0, 8, 4).unwrap();
    let tags = cfg.scenario.bcs.velocity_dirichlet_tags();
    let d = Discretization::new(Arc::new(mesh), &tags, true).unwrap();
    let mut sc = cfg.scenario.clone();
    sc.bcs.velocity = [VelocityBc::NoSlip, VelocityBc::Outflow, VelocityBc::NoSlip, VelocityBc::NoSlip];
    sc.bcs.c = [ScalarBc::Dirichlet(1.0), ScalarBc::Natural, ScalarBc::Natural, ScalarBc::Natural];
    let cons = build_constraints(&d, &realize_bcs(&sc, 1), false);
    let prob = StepProblem {
        disc: &d,
        params: &cfg.params,
        newton: &cfg.newton,
        flags: AssemblyFlags {
            preprocessing: false,
            reactive: true,
        },
        constraints: &cons,
        zero_mean_pressure: false,
    };
    let old = ReactiveState::new(uniform(&d, 1.0, 1.0)).unwrap();
    for mode in StrategyMode::ALL {
        let strategy = StrategyConfig::with_mode(mode);
        let mut solvers = Solvers::for_mode(mode, &d.layout);
        let (new, _) = step_reactive(&prob, &old, 0.02, &strategy, &mut solvers).unwrap();
        let diff = new
            .state
            .pack(&d.layout)
            .iter()
            .zip(old.state.pack(&d.layout))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12, "{mode:?}: {diff}");
        assert_eq!(new.reacted_mass, 0.0);
    }
}

#[test]
fn closed_box_conserves_concentration_excess() {
    let mut cfg = small(ScenarioKind::ReactiveChannel);
    cfg.params.k_c = 0.0;
    cfg.scenario.bcs.velocity = [VelocityBc::NoSlip; 4];
    cfg.scenario.bcs.phi = [ScalarBc::Natural; 4];
    cfg.scenario.bcs.c = [ScalarBc::Natural; 4];
    let mut sim = ReactiveSimulation::new(cfg).unwrap();
    // a nonuniform concentration to transport
    let verts = sim.sim.mesh().vertices().to_vec();
    let c: Vec<f64> = verts.iter().map(|x| 1.0 + 0.5 * x[0] * x[1]).collect();
    sim.sim.state.c = Some(c);
    let p = sim.sim.params().clone();
    let e0 = concentration_excess(&sim.sim.disc, &sim.sim.state, &p);
    for _ in 0..2 {
        let r = sim.advance().unwrap();
        assert_eq!(r.reaction, 0.0);
    }
    let e1 = concentration_excess(&sim.sim.disc, &sim.sim.state, &p);
    assert!((e1 - e0).abs() < 1e-9 * e0.abs().max(1.0), "{e0} -> {e1}");
}

#[test]
fn inflow_balances_excess_change() {
    let mut cfg = small(ScenarioKind::ReactiveChannel);
    cfg.params.k_c = 0.0;
    let mut sim = ReactiveSimulation::new(cfg).unwrap();
    let p = sim.sim.params().clone();
    let l = sim.sim.disc.layout;
    let before = sim.sim.state.clone();
    sim.advance().unwrap();
    let after = sim.sim.state.clone();
    let d = &sim.sim.disc;
    let flags = AssemblyFlags {
        preprocessing: false,
        reactive: true,
    };
    // unconstrained c rows: at the inlet they are the boundary flux
    let r = assemble_residual(d, &p, &before.pack(&l), &after.pack(&l), flags, &Constraints::default()).unwrap();
    let c0 = l.c().unwrap();
    let inlet = d.p1.boundary_dofs(BoundaryTag::Left);
    let flux: f64 = inlet.iter().map(|&i| r[c0 + i]).sum();
    let rate = (concentration_excess(d, &after, &p) - concentration_excess(d, &before, &p)) / p.tau;
    assert!(rate.abs() > 1e-6);
    assert!((rate - flux).abs() <= 1e-6 * rate.abs().max(1.0), "{rate} vs {flux}");
}

#[test]
fn zero_rate_matches_plain_run() {
    let mut cfg = small(ScenarioKind::ReactiveChannel);
    cfg.params.k_c = 0.0;
    cfg.newton = NewtonConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-13,
        ..NewtonConfig::default()
    };
    let mut plain = cfg.clone();
    plain.scenario.reactive = false;
    let mut a = ReactiveSimulation::new(cfg).unwrap();
    let mut b = Simulation::new(plain).unwrap();
    for _ in 0..2 {
        a.advance().unwrap();
        b.advance().unwrap();
        let (x, y) = (&a.sim.state, &b.state);
        for (u, w) in [(&x.phi, &y.phi), (&x.mu, &y.mu), (&x.v, &y.v), (&x.p, &y.p)] {
            let d = u.iter().zip(w).map(|(s, t)| (s - t).abs()).fold(0.0, f64::max);
            assert!(d <= 1e-10, "{d}");
        }
    }
}

#[test]
fn rich_inflow_precipitates() {
    let cfg = small(ScenarioKind::ReactiveChannel);
    let mut inert = cfg.clone();
    inert.params.k_c = 0.0;
    let mut sim = ReactiveSimulation::new(cfg).unwrap();
    let mut plain = ReactiveSimulation::new(inert).unwrap();
    let recs = sim.run(3, false, |_, _| Ok(())).unwrap();
    let base = plain.run(3, false, |_, _| Ok(())).unwrap();
    for (r, b) in recs.iter().zip(&base) {
        assert!(r.reaction < 0.0);
        assert_eq!(b.reaction, 0.0);
        // more solid than without reactions
        assert!(r.record.solid_volume > b.record.solid_volume);
        assert!(!r.clogged);
    }
    let gained = recs[2].record.solid_volume - base[2].record.solid_volume;
    // the inlet and outlet partly replenish the phase field, so only a
    // share of the reacted mass stays as solid
    assert!(gained > 0.5 * -sim.reacted_mass && gained < -sim.reacted_mass, "{gained} vs {}", sim.reacted_mass);
    assert_eq!(sim.state().unwrap().reacted_mass, sim.reacted_mass);
}

proptest! {
    #[test]
    fn rate_and_localization_zeros(phi in -3.0f64..4.0, k in 0.0f64..10.0) {
        let p = ModelParams { k_c: k, ..ModelParams::cavity() };
        prop_assert_eq!(reaction_rate(1.0, &p), 0.0);
        if !(phi > 0.0 && phi < 1.0) {
            prop_assert_eq!(reaction_localization(phi), 0.0);
        } else {
            prop_assert!(reaction_localization(phi) > 0.0);
        }
    }
}

