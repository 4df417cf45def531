//! A single inclusion relaxing at rest: inclusions above the critical radius
//! shrink by a predictable amount, smaller ones dissolve.
//!
//! usage: drop_shrinkage [radius] [steps]

use chns::config::{Config, Geometry, ScenarioKind};
use chns::driver::{critical_radius, predicted_shrinkage, Simulation};
use chns::physics::Circle;

fn main() -> chns::Result<()> {
    let mut args = std::env::args().skip(1);
    let radius: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let mut cfg = Config::preset(ScenarioKind::CavityInclusions);
    cfg.scenario.geometry = Geometry::Circles(vec![Circle {
        center: [0.5, 0.5],
        radius,
    }]);
    cfg.run.adapt = false;
    let area = cfg.scenario.lx * cfg.scenario.ly;
    let eps = cfg.params.epsilon;
    let rc = critical_radius(area, eps);
    println!("critical radius {rc:.4}, initial radius {radius:.4}");
    if radius > rc {
        let dr = predicted_shrinkage(area, eps, radius);
        println!("predicted equilibrium radius {:.4} (loss {dr:.4})", radius - dr);
    } else {
        println!("below the critical radius: expected to dissolve");
    }
    let mut sim = Simulation::new(cfg)?;
    for _ in 0..steps {
        let r = sim.advance()?;
        let s = sim.solid();
        if r.step % 20 == 0 || s.area < 1e-3 {
            println!("step {:4}  t={:.2}  radius {:.4}  area {:.5}", r.step, r.time, s.radius, s.area);
        }
        if s.area < 1e-3 {
            println!("inclusion vanished");
            break;
        }
    }
    Ok(())
}
