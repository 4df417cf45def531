//! Refinement following the interface of a moving inclusion in the lid
//! driven cavity.
//!
//! usage: mesh_adaptivity [steps]

use chns::config::{Config, ScenarioKind};
use chns::driver::Simulation;

fn level_histogram(levels: &[u32]) -> Vec<usize> {
    let top = levels.iter().copied().max().unwrap_or(0) as usize;
    let mut h = vec![0; top + 1];
    for &l in levels {
        h[l as usize] += 1;
    }
    h
}

fn main() -> chns::Result<()> {
    let steps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let mut cfg = Config::preset(ScenarioKind::CavityInclusions);
    cfg.scenario.max_level = 3;
    cfg.run.adapt = true;
    let mut sim = Simulation::new(cfg)?;
    println!(
        "initial: {} triangles, per level {:?}",
        sim.mesh().n_triangles(),
        level_histogram(sim.mesh().levels())
    );
    let m0 = sim.mass();
    sim.run(steps, |s, r| {
        if r.step % 5 == 0 {
            println!(
                "step {:3}  {} triangles  h_max {:.4}  solid {:.5}  mass drift {:.1e}",
                r.step,
                s.mesh().n_triangles(),
                s.mesh().max_diameter(),
                r.solid_area,
                r.mass - m0
            );
        }
        Ok(())
    })?;
    println!("final per level {:?}", level_histogram(sim.mesh().levels()));
    Ok(())
}
