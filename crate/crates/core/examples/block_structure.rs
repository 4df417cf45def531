//! Jacobian block structure of the first cavity step on a small mesh, and
//! its dependence on the drag coefficient.
//!
//! usage: block_structure [nx] [ny]

use chns::config::{Config, ScenarioKind};
use chns::driver::{block_report, Simulation};

fn main() -> chns::Result<()> {
    let mut args = std::env::args().skip(1);
    let nx: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(8);
    let ny: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);
    println!("{:>8} {:>12} {:>12} {:>14} {:>14} {:>14}", "gamma", "A_CH", "A_NS", "cond1(A_CH)", "|A_NS|_1", "|C_I|_1");
    let mut base = None;
    for gamma in [1e-4, 1e-2, 1.0, 10.0] {
        let mut cfg = Config::preset(ScenarioKind::CavityInclusions);
        cfg.scenario.base_nx = nx;
        cfg.scenario.base_ny = ny;
        cfg.scenario.max_level = 0;
        cfg.params.gamma = gamma;
        let sim = Simulation::new(cfg)?;
        let rep = block_report(&sim)?;
        let b = &rep.blocks;
        let cond = rep.cond_ch.map_or("-".to_string(), |k| format!("{k:.6e}"));
        println!(
            "{gamma:>8.0e} {:>12} {:>12} {cond:>14} {:>14.6e} {:>14.6e}",
            format!("{}x{}", b.a_ch.nrows(), b.a_ch.ncols()),
            format!("{}x{}", b.a_ns.nrows(), b.a_ns.ncols()),
            b.a_ns.norm_one(),
            b.c_i.norm_one()
        );
        let ch = b.a_ch.values().to_vec();
        match &base {
            None => base = Some(ch),
            Some(v) => {
                let diff = v.iter().zip(&ch).map(|(a, c): (&f64, &f64)| (a - c).abs()).fold(0.0, f64::max);
                println!("{:>8} max |A_CH - A_CH(1e-4)| = {diff:.1e}", "");
            }
        }
    }
    Ok(())
}
