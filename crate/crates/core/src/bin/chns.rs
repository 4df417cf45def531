use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use chns::config::{parse_config, serialize_config, Config, ScenarioKind};
use chns::driver::{block_report, run_simulation, Simulation, StrategyConfig, StrategyMode};
use chns::output::write_vtk;
use chns::{Error, Result};

#[derive(Parser)]
#[command(name = "chns", about = "Cahn-Hilliard Navier-Stokes fluid-solid simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Full simulation with energy log and optional snapshots.
    Run(Common),
    /// Write the preprocessed initial phase field only.
    Preprocess(Common),
    /// Fixed-grid run printing the dissipation verdict of every step.
    EnergyAudit(Common),
    /// Jacobian blocks of the first step as Matrix Market files.
    Blocks(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args)]
struct Common {
    /// INI configuration file; overrides --scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// cavity_inclusions, channel_obstacles, reactive_channel or custom.
    #[arg(long, default_value = "cavity_inclusions")]
    scenario: String,
    /// monolithic, partitioned_direct or partitioned_iterative.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum)]
    adapt: Option<OnOff>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
}

impl Common {
    fn config(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| Error::File {
                    path: p.clone(),
                    source,
                })?;
                parse_config(&text)?
            }
            None => {
                let kind = ScenarioKind::parse(&self.scenario)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario `{}`", self.scenario)))?;
                Config::preset(kind)
            }
        };
        if let Some(s) = &self.strategy {
            let mode = StrategyMode::parse(s)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy `{s}`")))?;
            cfg.strategy = StrategyConfig {
                mode,
                ..cfg.strategy
            };
        }
        if let Some(a) = self.adapt {
            cfg.run.adapt = matches!(a, OnOff::On);
        }
        if let Some(n) = self.steps {
            cfg.run.steps = n;
        }
        if let Some(t) = self.tau {
            cfg.params.tau = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn mkdir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|source| Error::File {
        path: p.to_path_buf(),
        source,
    })
}

fn run(c: &Common) -> Result<bool> {
    let cfg = c.config()?;
    mkdir(&c.out)?;
    let p = c.out.join("config.ini");
    std::fs::write(&p, serialize_config(&cfg)).map_err(|source| Error::File { path: p, source })?;
    let sum = run_simulation(cfg.clone(), Some(&c.out), |_, r| {
        println!(
            "step {:4}  t={:.4}  F={:.10e}  solid={:.5}  newton={}",
            r.step, r.time, r.energy.total, r.solid_area, r.stats.newton_iterations
        );
        Ok(())
    })?;
    print!("{}", sum.to_text(&cfg));
    Ok(true)
}

fn preprocess(c: &Common) -> Result<bool> {
    let cfg = c.config()?;
    mkdir(&c.out)?;
    let sim = Simulation::new(cfg)?;
    let p = c.out.join("phi0.vtk");
    write_vtk(&p, &sim.disc, &sim.state, sim.params())?;
    let solid = sim.solid();
    println!("triangles = {}", sim.mesh().n_triangles());
    if let Some(r) = &sim.preprocess {
        println!("iterations = {}\nnewton_iterations = {}", r.iterations, r.newton_iterations);
        println!("phi_range = [{:.6}, {:.6}]", r.phi_min, r.phi_max);
    }
    println!("solid_area = {:.6}\nsolid_volume = {:.6}", solid.area, solid.volume);
    println!("wrote {}", p.display());
    Ok(true)
}

fn energy_audit(c: &Common) -> Result<bool> {
    let mut cfg = c.config()?;
    cfg.run.adapt = false;
    let sum = run_simulation(cfg.clone(), Some(&c.out), |_, r| {
        match r.dissipation {
            Some(d) => println!(
                "step {:4}  rate={:+.6e}  dissipation={:.6e}  margin={:+.3e}  {}",
                r.step,
                d.rate,
                d.dissipation,
                d.margin,
                if d.pass { "pass" } else { "FAIL" }
            ),
            None => println!("step {:4}  driven boundary, not audited", r.step),
        }
        Ok(())
    })?;
    print!("{}", sum.to_text(&cfg));
    Ok(sum.dissipation_failures.is_empty())
}

fn blocks(c: &Common) -> Result<bool> {
    let cfg = c.config()?;
    mkdir(&c.out)?;
    let sim = Simulation::new(cfg)?;
    let rep = block_report(&sim)?;
    let b = &rep.blocks;
    for (name, m) in [("a_ch", &b.a_ch), ("a_ns", &b.a_ns), ("c_t", &b.c_t), ("c_i", &b.c_i)] {
        let p = c.out.join(format!("{name}.mtx"));
        m.write_matrix_market(&p)?;
        println!("{name}: {} x {}, nnz {}", m.nrows(), m.ncols(), m.nnz());
    }
    match rep.cond_ch {
        Some(k) => println!("cond1(a_ch) = {k:.6e}"),
        None => println!("cond1(a_ch) skipped: block too large for a dense inverse"),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Run(c) => run(c),
        Cmd::Preprocess(c) => preprocess(c),
        Cmd::EnergyAudit(c) => energy_audit(c),
        Cmd::Blocks(c) => blocks(c),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
