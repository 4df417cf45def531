//! Lid-driven cavity with one inclusion: energy, dissipation audit and mass
//! per step. The lid stops after the configured step, from then on every
//! step is checked against the discrete dissipation inequality.
//!
//! usage: lid_cavity_energy [steps] [radius]

use std::time::Instant;

use chns::config::{Config, Geometry, ScenarioKind};
use chns::driver::Simulation;
use chns::physics::Circle;

fn main() -> chns::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(40);
    let radius: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let mut cfg = Config::preset(ScenarioKind::CavityInclusions);
    cfg.scenario.geometry = Geometry::Circles(vec![Circle {
        center: [0.5, 0.5],
        radius,
    }]);
    cfg.run.adapt = false;
    let t0 = Instant::now();
    let mut sim = Simulation::new(cfg)?;
    println!(
        "mesh: {} triangles, {} unknowns",
        sim.mesh().n_triangles(),
        sim.disc.layout.total()
    );
    let m0 = sim.mass();
    let mut failures = 0;
    sim.run(steps, |_, r| {
        let audit = match r.dissipation {
            Some(d) if d.pass => format!("dissipative, margin {:.3e}", d.margin),
            Some(d) => {
                failures += 1;
                format!("VIOLATED by {:.3e}", -d.margin)
            }
            None => "lid moving".to_string(),
        };
        println!(
            "step {:3}  F={:.10e}  kinetic={:.3e}  newton={}  solid={:.5}  |dm|={:.1e}  {audit}",
            r.step,
            r.energy.total,
            r.energy.kinetic,
            r.stats.newton_iterations,
            r.solid_area,
            (r.mass - m0).abs(),
        );
        Ok(())
    })?;
    println!("{failures} dissipation violations, {:.1}s", t0.elapsed().as_secs_f64());
    Ok(())
}
