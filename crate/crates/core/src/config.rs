//! Run configuration: scenario presets, an INI-style text format and the
//! boundary conditions each scenario implies.
//!
//! ```text
//! [scenario]
//! name = cavity_inclusions
//! circles = 1.0 0.5 0.2
//! [params]
//! tau = 0.02
//! [run]
//! steps = 200
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::driver::{StrategyConfig, StrategyMode};
use crate::error::{Error, Result};
use crate::mesh::BoundaryTag;
use crate::nonlinear::NewtonConfig;
use crate::physics::{Circle, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    CavityInclusions,
    ChannelObstacles,
    ReactiveChannel,
    Custom,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::CavityInclusions => "cavity_inclusions",
            ScenarioKind::ChannelObstacles => "channel_obstacles",
            ScenarioKind::ReactiveChannel => "reactive_channel",
            ScenarioKind::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            ScenarioKind::CavityInclusions,
            ScenarioKind::ChannelObstacles,
            ScenarioKind::ReactiveChannel,
            ScenarioKind::Custom,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

/// Axis-aligned solid rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn contains(&self, x: [f64; 2]) -> bool {
        (self.min[0]..=self.max[0]).contains(&x[0]) && (self.min[1]..=self.max[1]).contains(&x[1])
    }
}

/// Initial solid geometry. Circles start from the equilibrium profile,
/// rectangles from a sharp indicator that needs preprocessing.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Circles(Vec<Circle>),
    Rectangles(Vec<Rect>),
}

impl Geometry {
    /// Sharp fluid indicator: 0 inside the solid, 1 elsewhere.
    pub fn indicator(&self, x: [f64; 2]) -> f64 {
        let solid = match self {
            Geometry::Circles(cs) => cs
                .iter()
                .any(|c| (x[0] - c.center[0]).hypot(x[1] - c.center[1]) <= c.radius),
            Geometry::Rectangles(rs) => rs.iter().any(|r| r.contains(x)),
        };
        if solid {
            0.0
        } else {
            1.0
        }
    }

    /// Area of the sharp solid region (circles are assumed disjoint).
    pub fn solid_area(&self) -> f64 {
        match self {
            Geometry::Circles(cs) => cs.iter().map(|c| std::f64::consts::PI * c.radius * c.radius).sum(),
            Geometry::Rectangles(rs) => union_area(rs),
        }
    }
}

/// Exact area of a union of rectangles by coordinate compression.
fn union_area(rs: &[Rect]) -> f64 {
    let mut xs: Vec<f64> = rs.iter().flat_map(|r| [r.min[0], r.max[0]]).collect();
    let mut ys: Vec<f64> = rs.iter().flat_map(|r| [r.min[1], r.max[1]]).collect();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let mut a = 0.0;
    for xw in xs.windows(2) {
        for yw in ys.windows(2) {
            let c = [0.5 * (xw[0] + xw[1]), 0.5 * (yw[0] + yw[1])];
            if rs.iter().any(|r| r.contains(c)) {
                a += (xw[1] - xw[0]) * (yw[1] - yw[0]);
            }
        }
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocityBc {
    NoSlip,
    /// Tangential parabolic lid `f (2/3) x (lx - x) / 2`.
    Lid { f_bar: f64 },
    /// Normal parabolic inflow `f (2/3) y (ly - y) / 4`.
    Inflow { f_bar: f64 },
    /// Traction-free outlet; the pressure is zero there in the weak sense.
    Outflow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarBc {
    Natural,
    Dirichlet(f64),
}

/// One condition per field on each boundary tag, indexed in
/// [`BoundaryTag::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTable {
    pub velocity: [VelocityBc; 4],
    pub phi: [ScalarBc; 4],
    pub c: [ScalarBc; 4],
}

fn tag_index(tag: BoundaryTag) -> usize {
    BoundaryTag::ALL.iter().position(|&t| t == tag).expect("tag")
}

impl BoundaryTable {
    pub fn velocity(&self, tag: BoundaryTag) -> VelocityBc {
        self.velocity[tag_index(tag)]
    }

    /// Tags carrying a velocity Dirichlet condition.
    pub fn velocity_dirichlet_tags(&self) -> Vec<BoundaryTag> {
        BoundaryTag::ALL
            .into_iter()
            .filter(|&t| self.velocity(t) != VelocityBc::Outflow)
            .collect()
    }

    /// Whether the pressure is only determined up to a constant.
    pub fn pressure_floats(&self) -> bool {
        self.velocity_dirichlet_tags().len() == 4
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub lx: f64,
    pub ly: f64,
    pub geometry: Geometry,
    pub bcs: BoundaryTable,
    /// Last step with the lid moving.
    pub lid_stop_step: Option<usize>,
    pub base_nx: usize,
    pub base_ny: usize,
    /// Maximum number of bisection generations.
    pub max_level: u32,
    pub refine_threshold: f64,
    pub reactive: bool,
    pub c_init: f64,
}

impl Scenario {
    /// Lid-driven cavity with a single circular inclusion of radius 0.2.
    pub fn cavity() -> Self {
        let f = ModelParams::cavity().f_bar;
        Scenario {
            kind: ScenarioKind::CavityInclusions,
            lx: 2.0,
            ly: 1.0,
            geometry: Geometry::Circles(vec![Circle {
                center: [0.5, 0.5],
                radius: 0.2,
            }]),
            bcs: BoundaryTable {
                velocity: [VelocityBc::NoSlip, VelocityBc::NoSlip, VelocityBc::NoSlip, VelocityBc::Lid { f_bar: f }],
                phi: [ScalarBc::Natural; 4],
                c: [ScalarBc::Natural; 4],
            },
            lid_stop_step: Some(30),
            base_nx: 32,
            base_ny: 16,
            max_level: 4,
            refine_threshold: 0.05,
            reactive: false,
            c_init: 1.0,
        }
    }

    /// Channel with overlapping rectangular obstacles forming a constriction.
    pub fn channel() -> Self {
        let f = ModelParams::channel().f_bar;
        let r = |x0, y0, x1, y1| Rect {
            min: [x0, y0],
            max: [x1, y1],
        };
        Scenario {
            kind: ScenarioKind::ChannelObstacles,
            lx: 2.0,
            ly: 1.0,
            geometry: Geometry::Rectangles(vec![
                r(0.8, 0.0, 1.2, 0.35),
                r(0.9, 0.0, 1.1, 0.45),
                r(0.8, 0.65, 1.2, 1.0),
            ]),
            bcs: channel_bcs(f, false),
            lid_stop_step: None,
            base_nx: 64,
            base_ny: 32,
            max_level: 4,
            refine_threshold: 0.05,
            reactive: false,
            c_init: 1.0,
        }
    }

    /// Channel with two circular inclusions and ion injection at the inlet.
    pub fn reactive_channel() -> Self {
        let f = ModelParams::cavity().f_bar;
        let c = |x, y| Circle {
            center: [x, y],
            radius: 0.2,
        };
        Scenario {
            kind: ScenarioKind::ReactiveChannel,
            lx: 2.0,
            ly: 1.0,
            geometry: Geometry::Circles(vec![c(0.5, 0.5), c(1.35, 0.65)]),
            bcs: channel_bcs(f, true),
            lid_stop_step: None,
            base_nx: 32,
            base_ny: 16,
            max_level: 4,
            refine_threshold: 0.05,
            reactive: true,
            c_init: 1.0,
        }
    }

    pub fn preset(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::CavityInclusions => Self::cavity(),
            ScenarioKind::ChannelObstacles => Self::channel(),
            ScenarioKind::ReactiveChannel => Self::reactive_channel(),
            ScenarioKind::Custom => Scenario {
                kind,
                ..Self::cavity()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.lx > 0.0 && self.ly > 0.0) {
            return bad("domain extents must be positive".into());
        }
        if self.base_nx == 0 || self.base_ny == 0 {
            return bad("base mesh needs at least one cell per direction".into());
        }
        if !(self.refine_threshold > 0.0) {
            return bad("refinement threshold must be positive".into());
        }
        let inside = |x: [f64; 2]| (0.0..=self.lx).contains(&x[0]) && (0.0..=self.ly).contains(&x[1]);
        match &self.geometry {
            Geometry::Circles(cs) => {
                for c in cs {
                    if !(c.radius > 0.0) || !inside(c.center) {
                        return bad(format!("circle {:?} outside the domain", c));
                    }
                }
            }
            Geometry::Rectangles(rs) => {
                for r in rs {
                    if !(inside(r.min) && inside(r.max) && r.min[0] < r.max[0] && r.min[1] < r.max[1]) {
                        return bad(format!("rectangle {:?} invalid or outside the domain", r));
                    }
                }
            }
        }
        if self.bcs.velocity_dirichlet_tags().is_empty() {
            return bad("at least one boundary needs a velocity condition".into());
        }
        Ok(())
    }
}

fn channel_bcs(f_bar: f64, reactive: bool) -> BoundaryTable {
    BoundaryTable {
        velocity: [VelocityBc::Inflow { f_bar }, VelocityBc::Outflow, VelocityBc::NoSlip, VelocityBc::NoSlip],
        phi: [ScalarBc::Dirichlet(1.0), ScalarBc::Dirichlet(1.0), ScalarBc::Natural, ScalarBc::Natural],
        c: if reactive {
            [ScalarBc::Dirichlet(1.5), ScalarBc::Natural, ScalarBc::Natural, ScalarBc::Natural]
        } else {
            [ScalarBc::Natural; 4]
        },
    }
}

/// Boundary values at one time level.
#[derive(Debug, Clone)]
pub struct BoundaryEvaluator {
    table: BoundaryTable,
    lx: f64,
    ly: f64,
    lid_active: bool,
}

impl BoundaryEvaluator {
    /// Prescribed velocity at boundary point `x` on `tag`, `None` for
    /// natural conditions.
    pub fn velocity(&self, tag: BoundaryTag, x: [f64; 2]) -> Option<[f64; 2]> {
        match self.table.velocity(tag) {
            VelocityBc::NoSlip => Some([0.0, 0.0]),
            VelocityBc::Lid { f_bar } => {
                let s = if self.lid_active { 1.0 } else { 0.0 };
                Some([s * f_bar * (2.0 / 3.0) * x[0] * (self.lx - x[0]) / 2.0, 0.0])
            }
            VelocityBc::Inflow { f_bar } => Some([f_bar * (2.0 / 3.0) * x[1] * (self.ly - x[1]) / 4.0, 0.0]),
            VelocityBc::Outflow => None,
        }
    }

    pub fn phi(&self, tag: BoundaryTag) -> Option<f64> {
        match self.table.phi[tag_index(tag)] {
            ScalarBc::Dirichlet(v) => Some(v),
            ScalarBc::Natural => None,
        }
    }

    pub fn c(&self, tag: BoundaryTag) -> Option<f64> {
        match self.table.c[tag_index(tag)] {
            ScalarBc::Dirichlet(v) => Some(v),
            ScalarBc::Natural => None,
        }
    }

    pub fn table(&self) -> &BoundaryTable {
        &self.table
    }
}

/// Boundary data for the time level `step` (the level being computed).
/// The lid moves for steps up to and including the configured stop step.
pub fn realize_bcs(scenario: &Scenario, step: usize) -> BoundaryEvaluator {
    BoundaryEvaluator {
        table: scenario.bcs.clone(),
        lx: scenario.lx,
        ly: scenario.ly,
        lid_active: scenario.lid_stop_step.map_or(true, |s| step <= s),
    }
}

/// Output and protocol controls.
#[derive(Debug, Clone, PartialEq)]
pub struct RunControls {
    pub steps: usize,
    /// Snapshot every `output_stride` steps, 0 disables snapshots.
    pub output_stride: usize,
    /// Refine the mesh during time stepping.
    pub adapt: bool,
}

impl Default for RunControls {
    fn default() -> Self {
        RunControls {
            steps: 200,
            output_stride: 0,
            adapt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub params: ModelParams,
    pub scenario: Scenario,
    pub strategy: StrategyConfig,
    pub newton: NewtonConfig,
    pub run: RunControls,
}

impl Config {
    pub fn preset(kind: ScenarioKind) -> Self {
        let params = match kind {
            ScenarioKind::ChannelObstacles => ModelParams::channel(),
            _ => ModelParams::cavity(),
        };
        Config {
            params,
            scenario: Scenario::preset(kind),
            strategy: StrategyConfig::default(),
            newton: NewtonConfig::default(),
            run: RunControls::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.scenario.validate()?;
        self.newton.validate()?;
        self.strategy.validate()
    }
}

struct Entry {
    value: String,
    line: usize,
}

fn perr(key: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        key: key.to_string(),
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(key: &str, e: &Entry) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| perr(key, e.line, format!("cannot parse `{}`", e.value)))
}

fn floats(key: &str, e: &Entry, group: usize) -> Result<Vec<Vec<f64>>> {
    e.value
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let v: Vec<f64> = item
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| perr(key, e.line, format!("cannot parse `{}`", item.trim())))?;
            if v.len() != group {
                return Err(perr(key, e.line, format!("expected {group} numbers per item")));
            }
            Ok(v)
        })
        .collect()
}

fn scalar_bc(key: &str, e: &Entry) -> Result<ScalarBc> {
    if e.value == "natural" {
        Ok(ScalarBc::Natural)
    } else {
        Ok(ScalarBc::Dirichlet(num(key, e)?))
    }
}

fn velocity_bc(key: &str, e: &Entry, f_bar: f64) -> Result<VelocityBc> {
    Ok(match e.value.as_str() {
        "noslip" => VelocityBc::NoSlip,
        "lid" => VelocityBc::Lid { f_bar },
        "inflow" => VelocityBc::Inflow { f_bar },
        "outflow" => VelocityBc::Outflow,
        other => return Err(perr(key, e.line, format!("unknown velocity condition `{other}`"))),
    })
}

fn bool_value(key: &str, e: &Entry) -> Result<bool> {
    match e.value.as_str() {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(perr(key, e.line, "expected on/off")),
    }
}

/// Parse a configuration. `scenario.name` is mandatory and selects the
/// preset that all other keys override.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| perr(s, line, "unterminated section header"))?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| perr(s, line, "expected `key = value`"))?;
        if section.is_empty() {
            return Err(perr(k.trim(), line, "key outside of any section"));
        }
        let key = format!("{}.{}", section, k.trim());
        let entry = Entry {
            value: v.trim().to_string(),
            line,
        };
        if entries.insert(key.clone(), entry).is_some() {
            return Err(perr(&key, line, "duplicate key"));
        }
    }

    let name = entries
        .remove("scenario.name")
        .ok_or_else(|| perr("scenario.name", 0, "missing mandatory key"))?;
    let kind = ScenarioKind::parse(&name.value)
        .ok_or_else(|| perr("scenario.name", name.line, format!("unknown scenario `{}`", name.value)))?;
    let mut cfg = Config::preset(kind);

    // parameters first so that profile amplitudes see an overridden f_bar
    let mut deferred = Vec::new();
    for (key, e) in &entries {
        let p = &mut cfg.params;
        let (sec, k) = key.split_once('.').expect("dotted");
        match (sec, k) {
            ("params", "rho") => p.rho = num(key, e)?,
            ("params", "gamma") => p.gamma = num(key, e)?,
            ("params", "d0") => p.d0 = num(key, e)?,
            ("params", "d_max") => p.d_max = num(key, e)?,
            ("params", "mobility") => p.mobility = num(key, e)?,
            ("params", "sigma") => p.sigma = num(key, e)?,
            ("params", "epsilon") => p.epsilon = num(key, e)?,
            ("params", "delta") => p.delta = num(key, e)?,
            ("params", "delta_dw") => p.delta_dw = num(key, e)?,
            ("params", "gamma_dw") => p.gamma_dw = num(key, e)?,
            ("params", "m_pre") => p.m_pre = num(key, e)?,
            ("params", "n_pre") => p.n_pre = num(key, e)?,
            ("params", "diffusivity") => p.diffusivity = num(key, e)?,
            ("params", "c_star") => p.c_star = num(key, e)?,
            ("params", "k_c") => p.k_c = num(key, e)?,
            ("params", "f_bar") => p.f_bar = num(key, e)?,
            ("params", "tau") => p.tau = num(key, e)?,
            _ => deferred.push((key.as_str(), e)),
        }
    }
    let f_bar = cfg.params.f_bar;
    for v in cfg.scenario.bcs.velocity.iter_mut() {
        match v {
            VelocityBc::Lid { f_bar: f } | VelocityBc::Inflow { f_bar: f } => *f = f_bar,
            _ => {}
        }
    }

    for (key, e) in deferred {
        let (sec, k) = key.split_once('.').expect("dotted");
        let sc = &mut cfg.scenario;
        match (sec, k) {
            ("scenario", "lx") => sc.lx = num(key, e)?,
            ("scenario", "ly") => sc.ly = num(key, e)?,
            ("scenario", "circles") => {
                let cs = floats(key, e, 3)?;
                sc.geometry = Geometry::Circles(
                    cs.iter()
                        .map(|v| Circle {
                            center: [v[0], v[1]],
                            radius: v[2],
                        })
                        .collect(),
                );
            }
            ("scenario", "rectangles") => {
                let rs = floats(key, e, 4)?;
                sc.geometry = Geometry::Rectangles(
                    rs.iter()
                        .map(|v| Rect {
                            min: [v[0], v[1]],
                            max: [v[2], v[3]],
                        })
                        .collect(),
                );
            }
            ("scenario", "lid_stop_step") => {
                sc.lid_stop_step = if e.value == "none" { None } else { Some(num(key, e)?) }
            }
            ("scenario", "base_nx") => sc.base_nx = num(key, e)?,
            ("scenario", "base_ny") => sc.base_ny = num(key, e)?,
            ("scenario", "max_level") => sc.max_level = num(key, e)?,
            ("scenario", "refine_threshold") => sc.refine_threshold = num(key, e)?,
            ("scenario", "reactive") => sc.reactive = bool_value(key, e)?,
            ("scenario", "c_init") => sc.c_init = num(key, e)?,
            ("bc", bk) => {
                let (tag, field) = bk
                    .split_once('.')
                    .ok_or_else(|| perr(key, e.line, "expected bc.<tag>.<field>"))?;
                let tag = BoundaryTag::ALL
                    .into_iter()
                    .find(|t| t.name() == tag)
                    .ok_or_else(|| perr(key, e.line, format!("unknown boundary `{tag}`")))?;
                let i = tag_index(tag);
                match field {
                    "velocity" => sc.bcs.velocity[i] = velocity_bc(key, e, f_bar)?,
                    "phi" => sc.bcs.phi[i] = scalar_bc(key, e)?,
                    "c" => sc.bcs.c[i] = scalar_bc(key, e)?,
                    _ => return Err(perr(key, e.line, "unknown key")),
                }
            }
            ("strategy", "mode") => {
                cfg.strategy.mode = StrategyMode::parse(&e.value)
                    .ok_or_else(|| perr(key, e.line, format!("unknown strategy `{}`", e.value)))?
            }
            ("strategy", "coupling_tol") => cfg.strategy.coupling_tol = num(key, e)?,
            ("strategy", "max_coupling") => cfg.strategy.max_coupling = num(key, e)?,
            ("newton", "max_iter") => cfg.newton.max_iter = num(key, e)?,
            ("newton", "rel_tol") => cfg.newton.rel_tol = num(key, e)?,
            ("newton", "abs_tol") => cfg.newton.abs_tol = num(key, e)?,
            ("newton", "min_lin_red") => cfg.newton.min_lin_red = num(key, e)?,
            ("newton", "max_line_search") => cfg.newton.max_line_search = num(key, e)?,
            ("newton", "damping") => cfg.newton.damping = num(key, e)?,
            ("run", "steps") => cfg.run.steps = num(key, e)?,
            ("run", "output_stride") => cfg.run.output_stride = num(key, e)?,
            ("run", "adapt") => cfg.run.adapt = bool_value(key, e)?,
            _ => return Err(perr(key, e.line, "unknown key")),
        }
    }
    cfg.validate().map_err(|err| match err {
        Error::InvalidArgument(m) => perr(&invalid_key(&m), 0, m),
        other => other,
    })?;
    Ok(cfg)
}

/// Best-effort key name for a validation message.
fn invalid_key(message: &str) -> String {
    message
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .find(|w| w.contains('_') || ["delta", "epsilon", "tau", "rho", "gamma", "sigma"].contains(w))
        .unwrap_or("config")
        .to_string()
}

fn bc_name(v: VelocityBc) -> &'static str {
    match v {
        VelocityBc::NoSlip => "noslip",
        VelocityBc::Lid { .. } => "lid",
        VelocityBc::Inflow { .. } => "inflow",
        VelocityBc::Outflow => "outflow",
    }
}

fn scalar_name(s: ScalarBc) -> String {
    match s {
        ScalarBc::Natural => "natural".into(),
        ScalarBc::Dirichlet(v) => format!("{v:?}"),
    }
}

/// Canonical text form listing every key; `parse_config` of the output
/// reproduces `cfg`.
pub fn serialize_config(cfg: &Config) -> String {
    let mut s = String::new();
    let p = &cfg.params;
    let sc = &cfg.scenario;
    let _ = writeln!(s, "[scenario]");
    let _ = writeln!(s, "name = {}", sc.kind.name());
    let _ = writeln!(s, "lx = {:?}", sc.lx);
    let _ = writeln!(s, "ly = {:?}", sc.ly);
    match &sc.geometry {
        Geometry::Circles(cs) => {
            let items: Vec<String> = cs
                .iter()
                .map(|c| format!("{:?} {:?} {:?}", c.center[0], c.center[1], c.radius))
                .collect();
            let _ = writeln!(s, "circles = {}", items.join("; "));
        }
        Geometry::Rectangles(rs) => {
            let items: Vec<String> = rs
                .iter()
                .map(|r| format!("{:?} {:?} {:?} {:?}", r.min[0], r.min[1], r.max[0], r.max[1]))
                .collect();
            let _ = writeln!(s, "rectangles = {}", items.join("; "));
        }
    }
    match sc.lid_stop_step {
        Some(n) => writeln!(s, "lid_stop_step = {n}"),
        None => writeln!(s, "lid_stop_step = none"),
    }
    .ok();
    let _ = writeln!(s, "base_nx = {}", sc.base_nx);
    let _ = writeln!(s, "base_ny = {}", sc.base_ny);
    let _ = writeln!(s, "max_level = {}", sc.max_level);
    let _ = writeln!(s, "refine_threshold = {:?}", sc.refine_threshold);
    let _ = writeln!(s, "reactive = {}", sc.reactive);
    let _ = writeln!(s, "c_init = {:?}", sc.c_init);
    let _ = writeln!(s, "\n[bc]");
    for (i, tag) in BoundaryTag::ALL.iter().enumerate() {
        let _ = writeln!(s, "{}.velocity = {}", tag.name(), bc_name(sc.bcs.velocity[i]));
        let _ = writeln!(s, "{}.phi = {}", tag.name(), scalar_name(sc.bcs.phi[i]));
        let _ = writeln!(s, "{}.c = {}", tag.name(), scalar_name(sc.bcs.c[i]));
    }
    let _ = writeln!(s, "\n[params]");
    for (k, v) in [
        ("rho", p.rho),
        ("gamma", p.gamma),
        ("d0", p.d0),
        ("d_max", p.d_max),
        ("mobility", p.mobility),
        ("sigma", p.sigma),
        ("epsilon", p.epsilon),
        ("delta", p.delta),
        ("delta_dw", p.delta_dw),
        ("gamma_dw", p.gamma_dw),
        ("m_pre", p.m_pre),
        ("diffusivity", p.diffusivity),
        ("c_star", p.c_star),
        ("k_c", p.k_c),
        ("f_bar", p.f_bar),
        ("tau", p.tau),
    ] {
        let _ = writeln!(s, "{k} = {v:?}");
    }
    let _ = writeln!(s, "n_pre = {}", p.n_pre);
    let st = &cfg.strategy;
    let _ = writeln!(s, "\n[strategy]");
    let _ = writeln!(s, "mode = {}", st.mode.name());
    let _ = writeln!(s, "coupling_tol = {:?}", st.coupling_tol);
    let _ = writeln!(s, "max_coupling = {}", st.max_coupling);
    let n = &cfg.newton;
    let _ = writeln!(s, "\n[newton]");
    let _ = writeln!(s, "max_iter = {}", n.max_iter);
    let _ = writeln!(s, "rel_tol = {:?}", n.rel_tol);
    let _ = writeln!(s, "abs_tol = {:?}", n.abs_tol);
    let _ = writeln!(s, "min_lin_red = {:?}", n.min_lin_red);
    let _ = writeln!(s, "max_line_search = {}", n.max_line_search);
    let _ = writeln!(s, "damping = {:?}", n.damping);
    let _ = writeln!(s, "\n[run]");
    let _ = writeln!(s, "steps = {}", cfg.run.steps);
    let _ = writeln!(s, "output_stride = {}", cfg.run.output_stride);
    let _ = writeln!(s, "adapt = {}", if cfg.run.adapt { "on" } else { "off" });
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cavity_preset_values() {
        let c = parse_config("[scenario]\nname = cavity_inclusions\n").unwrap();
        let p = &c.params;
        assert_eq!(p.epsilon, 0.03);
        assert_eq!(p.delta, 0.03);
        assert_eq!(p.mobility, 1.0);
        assert_eq!(p.d0, 1000.0);
        assert_eq!(p.d_max, 0.9);
        assert_eq!(p.sigma, 1.0);
        assert_eq!(p.gamma, 0.01);
        assert_eq!(p.rho, 1.0);
        assert_eq!(p.delta_dw, 0.02);
        assert_eq!(p.gamma_dw, 0.015);
        assert_eq!(c.scenario.lid_stop_step, Some(30));
        assert_eq!(c.newton, NewtonConfig::default());
    }

    #[test]
    fn channel_preset_values() {
        let c = parse_config("[scenario]\nname = channel_obstacles\n").unwrap();
        let p = &c.params;
        assert_eq!(p.rho, 1e3);
        assert_eq!(p.gamma, 1e-3);
        assert_eq!(p.mobility, 1e-3);
        assert_eq!(p.epsilon, 6e-3);
        assert_eq!(p.delta, 6e-3);
        assert_eq!(p.delta_dw, 4e-3);
        assert_eq!(p.gamma_dw, 3e-3);
        assert_eq!(p.n_pre, 5);
        assert_eq!(p.m_pre, 1e3);
        assert_eq!(c.scenario.bcs.velocity(BoundaryTag::Right), VelocityBc::Outflow);
    }

    #[test]
    fn reactive_preset_values() {
        let c = parse_config("[scenario]\nname = reactive_channel\n").unwrap();
        assert_eq!(c.params.diffusivity, 1.0);
        assert_eq!(c.params.c_star, 2.0);
        assert_eq!(c.params.k_c, 0.1);
        assert!(c.scenario.reactive);
        let b = realize_bcs(&c.scenario, 1);
        assert_eq!(b.c(BoundaryTag::Left), Some(1.5));
        assert_eq!(b.c(BoundaryTag::Top), None);
    }

    #[test]
    fn invariant_violation_is_a_parse_error() {
        let text = "[scenario]\nname = cavity_inclusions\n[params]\ndelta_dw = 0.05\ndelta = 0.03\n";
        assert!(matches!(parse_config(text), Err(Error::Parse { .. })));
    }

    #[test]
    fn unknown_and_missing_keys() {
        assert!(parse_config("[params]\nrho = 1\n").is_err());
        let e = parse_config("[scenario]\nname = cavity_inclusions\nfoo = 1\n").unwrap_err();
        match e {
            Error::Parse { key, line, .. } => {
                assert_eq!(key, "scenario.foo");
                assert_eq!(line, 3);
            }
            other => panic!("{other}"),
        }
        assert!(parse_config("[scenario]\nname = cavity_inclusions\n[params]\nrho = abc\n").is_err());
    }

    #[test]
    fn profiles() {
        let sc = Scenario::cavity();
        let b = realize_bcs(&sc, 1);
        let v = b.velocity(BoundaryTag::Top, [1.0, 1.0]).unwrap();
        assert!((v[0] - 1.0 / 30.0).abs() < 1e-15);
        assert_eq!(b.velocity(BoundaryTag::Top, [0.0, 1.0]).unwrap()[0], 0.0);
        assert_eq!(b.velocity(BoundaryTag::Top, [2.0, 1.0]).unwrap()[0], 0.0);
        // lid stops after step 30
        assert!(realize_bcs(&sc, 30).velocity(BoundaryTag::Top, [1.0, 1.0]).unwrap()[0] > 0.0);
        assert_eq!(realize_bcs(&sc, 31).velocity(BoundaryTag::Top, [1.0, 1.0]).unwrap()[0], 0.0);

        let ch = realize_bcs(&Scenario::channel(), 1);
        let v = ch.velocity(BoundaryTag::Left, [0.0, 0.5]).unwrap();
        assert!((v[0] - 0.1 * (2.0 / 3.0) * 0.25 / 4.0).abs() < 1e-15);
        assert!((v[0] - 4.1667e-3).abs() < 1e-7);
        assert!(ch.velocity(BoundaryTag::Right, [2.0, 0.5]).is_none());
        assert_eq!(ch.phi(BoundaryTag::Left), Some(1.0));
    }

    #[test]
    fn roundtrip_is_idempotent() {
        for kind in [
            ScenarioKind::CavityInclusions,
            ScenarioKind::ChannelObstacles,
            ScenarioKind::ReactiveChannel,
        ] {
            let cfg = Config::preset(kind);
            let text = serialize_config(&cfg);
            let back = parse_config(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(serialize_config(&back), text);
        }
        let text = "[scenario]\nname = custom\ncircles = 1 0.5 0.3; 0.4 0.4 0.1\n[params]\ntau = 0.01\n";
        let once = serialize_config(&parse_config(text).unwrap());
        assert_eq!(serialize_config(&parse_config(&once).unwrap()), once);
    }

    #[test]
    fn geometry_checks() {
        let text = "[scenario]\nname = custom\ncircles = 3 0.5 0.1\n";
        assert!(parse_config(text).is_err());
        let g = Scenario::channel().geometry;
        // 0.4*0.35 + 0.2*0.1 + 0.4*0.35
        assert!((g.solid_area() - (0.14 + 0.02 + 0.14)).abs() < 1e-12);
        assert_eq!(g.indicator([1.0, 0.4]), 0.0);
        assert_eq!(g.indicator([1.0, 0.55]), 1.0);
    }
}
