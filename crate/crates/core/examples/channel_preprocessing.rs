//! Sharp obstacle geometry smoothed by preprocessing, followed by a short
//! flow run through the constriction.
//!
//! usage: channel_preprocessing [steps] [max_level]

use chns::config::{Config, ScenarioKind};
use chns::driver::Simulation;
use chns::output::max_w_in;

fn main() -> chns::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let level: Option<u32> = args.next().and_then(|s| s.parse().ok());
    let mut cfg = Config::preset(ScenarioKind::ChannelObstacles);
    if let Some(l) = level {
        cfg.scenario.max_level = l;
    }
    let sharp = cfg.scenario.geometry.solid_area();
    let mut sim = Simulation::new(cfg)?;
    let s0 = sim.solid();
    if let Some(r) = &sim.preprocess {
        println!(
            "preprocessing: {} iterations, {} Newton steps, phi in [{:.4}, {:.4}]",
            r.iterations, r.newton_iterations, r.phi_min, r.phi_max
        );
    }
    println!(
        "{} triangles; sharp solid area {sharp:.5}, smoothed {:.5} (level set) {:.5} (volume)",
        sim.mesh().n_triangles(),
        s0.area,
        s0.volume
    );
    let (_, ly) = sim.mesh().extents();
    let recs = sim.run(steps, |s, r| {
        if r.step % 10 == 0 || r.step == steps {
            let p = s.params();
            let inlet = max_w_in(&s.disc, &s.state, p, [0.0, 0.0], [0.0, ly]);
            let gap = max_w_in(&s.disc, &s.state, p, [0.8, 0.35], [1.2, 0.65]);
            println!(
                "step {:4}  solid {:.5}  max|w| inlet {:.3e}  gap {:.3e}  ratio {:.2}",
                r.step,
                r.solid_area,
                inlet,
                gap,
                gap / inlet
            );
        }
        Ok(())
    })?;
    if let Some(last) = recs.last() {
        println!("relative solid area change {:+.3e}", last.solid_area / s0.area - 1.0);
    }
    Ok(())
}
