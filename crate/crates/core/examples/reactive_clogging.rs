//! Ion-rich inflow into a channel with two inclusions: precipitation grows
//! the solid until it spans the channel.
//!
//! usage: reactive_clogging [steps]

use chns::config::{Config, ScenarioKind};
use chns::reactive::ReactiveSimulation;

fn main() -> chns::Result<()> {
    let steps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let cfg = Config::preset(ScenarioKind::ReactiveChannel);
    let mut sim = ReactiveSimulation::new(cfg)?;
    println!(
        "{} triangles, {} unknowns, solid area {:.5}",
        sim.sim.mesh().n_triangles(),
        sim.sim.disc.layout.total(),
        sim.sim.solid().area
    );
    let recs = sim.run(steps, true, |s, r| {
        let c = s.sim.state.c.as_deref().unwrap_or(&[]);
        let cmax = c.iter().copied().fold(f64::MIN, f64::max);
        println!(
            "step {:3}  solid area {:.5}  volume {:.5}  int R {:+.4e}  reacted {:+.4e}  max c {:.4}  newton {}{}",
            r.record.step,
            r.record.solid_area,
            r.record.solid_volume,
            r.reaction,
            r.reacted_mass,
            cmax,
            r.record.stats.newton_iterations,
            if r.clogged { "  clogged" } else { "" }
        );
        Ok(())
    })?;
    if recs.last().is_some_and(|r| r.clogged) {
        println!("channel clogged after {} steps", recs.len());
    }
    Ok(())
}
