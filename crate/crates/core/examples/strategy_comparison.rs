//! Monolithic vs. partitioned solves of the cavity problem on a coarse mesh,
//! for a range of drag coefficients.
//!
//! usage: strategy_comparison [steps]

use std::time::Instant;

use chns::config::{Config, ScenarioKind};
use chns::driver::{field_l2_diff, Simulation, StrategyConfig, StrategyMode};

fn run(mode: StrategyMode, gamma: f64, steps: usize) -> chns::Result<(Simulation, f64, f64, f64)> {
    let mut cfg = Config::preset(ScenarioKind::CavityInclusions);
    cfg.scenario.base_nx = 16;
    cfg.scenario.base_ny = 8;
    cfg.scenario.max_level = 2;
    cfg.params.gamma = gamma;
    cfg.run.adapt = false;
    cfg.strategy = StrategyConfig {
        coupling_tol: 1e-9,
        ..StrategyConfig::with_mode(mode)
    };
    cfg.newton.rel_tol = 1e-9;
    let t0 = Instant::now();
    let mut sim = Simulation::new(cfg)?;
    let recs = sim.run(steps, |_, _| Ok(()))?;
    let n = recs.len().max(1) as f64;
    let newton = recs.iter().map(|r| r.stats.newton_iterations).sum::<usize>() as f64 / n;
    let coupling = recs.iter().map(|r| r.stats.coupling_iterations).sum::<usize>() as f64 / n;
    Ok((sim, newton, coupling, t0.elapsed().as_secs_f64()))
}

fn main() -> chns::Result<()> {
    let steps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    println!("{:>8} {:>22} {:>8} {:>9} {:>7}  max L2 diff to monolithic", "gamma", "strategy", "newton", "coupling", "time");
    for gamma in [1e-4, 1e-2, 1.0, 10.0] {
        let (mono, n, _, t) = run(StrategyMode::Monolithic, gamma, steps)?;
        println!("{gamma:>8.0e} {:>22} {n:>8.2} {:>9} {t:>6.1}s", "monolithic", "-");
        for mode in [StrategyMode::PartitionedDirect, StrategyMode::PartitionedIterative] {
            match run(mode, gamma, steps) {
                Ok((sim, n, c, t)) => {
                    let d = field_l2_diff(&mono.disc, &mono.state, &sim.state);
                    let worst = d.iter().copied().fold(0.0, f64::max);
                    println!("{gamma:>8.0e} {:>22} {n:>8.2} {c:>9.2} {t:>6.1}s  {worst:.2e}", mode.name());
                }
                Err(e) => println!("{gamma:>8.0e} {:>22}  failed: {e}", mode.name()),
            }
        }
    }
    Ok(())
}
