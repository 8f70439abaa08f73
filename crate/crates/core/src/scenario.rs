//! Experiment scenarios stored as flat `key = value` text.
//!
//! Keys are dotted (`model.eps`, `integrator.rel_tol`, ...), one per line;
//! `#` starts a comment that runs to the end of the line. Unknown and
//! repeated keys are errors. Floats are written in Rust's shortest
//! round-trip form, so `parse(render(s)) == s` bit for bit.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::bump::{max_admissible_eps, BumpMode, BumpProfile, BumpSettings};
use crate::error::{Error, Result};
use crate::generating::GeneratingFn;
use crate::ode::IntegratorConfig;
use crate::orbits::ShootingOptions;
use crate::params::ModelParams;
use crate::potential::PotentialField;

/// Upper bound on every sample count, so a hostile config cannot demand
/// unbounded work or memory.
pub const MAX_COUNT: usize = 1_000_000;

/// Sample sizes of the verification and census sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSizes {
    /// Angular grid of the planar census.
    pub grid: usize,
    /// Coarser census grids that must reproduce the same count.
    pub stability_grids: Vec<usize>,
    /// Sphere points of the `N = 3` off-axis sweep.
    pub sphere_points: usize,
    /// Side of the `(P, s)` grid of the orthogonality check.
    pub gauss_grid: usize,
    /// Random `(P, s)` pairs of the chart round trip.
    pub round_trip: usize,
    /// Boundary points `P` for the arrival-time and equivalence checks.
    pub profiles: usize,
    /// Random points for gradient and two-route checks.
    pub samples: usize,
    /// Sphere points of the matching report.
    pub c2_points: usize,
}

impl Default for SweepSizes {
    fn default() -> Self {
        Self {
            grid: 720,
            stability_grids: vec![180, 360],
            sphere_points: 962,
            gauss_grid: 64,
            round_trip: 256,
            profiles: 32,
            samples: 256,
            c2_points: 128,
        }
    }
}

/// Sizes of exported datasets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExportSettings {
    /// Points per side of the potential grid.
    pub grid: usize,
    /// The potential grid covers `[-extent, extent]²`.
    pub extent: f64,
    /// Boundary points of the flow grid.
    pub flow_profiles: usize,
    /// `s` samples per flow line.
    pub flow_steps: usize,
}

impl Default for ExportSettings {
    fn default() -> Self {
        Self {
            grid: 441,
            extent: 2.2,
            flow_profiles: 16,
            flow_steps: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub dim: usize,
    pub energy: f64,
    pub eps: f64,
    /// `None` means the first coordinate axis.
    pub axis: Option<Vec<f64>>,
    pub f3_perturbation: f64,
    pub mode: BumpMode,
    pub bump: BumpSettings,
    pub integrator: IntegratorConfig,
    pub shooting: ShootingOptions,
    pub sweep: SweepSizes,
    pub export: ExportSettings,
    pub out_dir: PathBuf,
    /// Seed of every randomized sample set.
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            dim: 2,
            energy: 4.0,
            eps: 0.05,
            axis: None,
            f3_perturbation: 0.0,
            mode: BumpMode::Brake,
            bump: BumpSettings::default(),
            integrator: IntegratorConfig::default(),
            shooting: ShootingOptions::default(),
            sweep: SweepSizes::default(),
            export: ExportSettings::default(),
            out_dir: PathBuf::from("out"),
            seed: 20_240_601,
        }
    }
}

const KEYS: &[&str] = &[
    "model.dim",
    "model.energy",
    "model.eps",
    "model.axis",
    "model.f3_perturbation",
    "bump.mode",
    "bump.s_star",
    "bump.delta_star",
    "bump.cap",
    "bump.wall_slope",
    "bump.curvature",
    "integrator.rel_tol",
    "integrator.abs_tol",
    "integrator.max_step",
    "integrator.max_steps",
    "shooting.delta_h",
    "shooting.time_bound",
    "sweep.grid",
    "sweep.stability_grids",
    "sweep.sphere_points",
    "sweep.gauss_grid",
    "sweep.round_trip",
    "sweep.profiles",
    "sweep.samples",
    "sweep.c2_points",
    "export.grid",
    "export.extent",
    "export.flow_profiles",
    "export.flow_steps",
    "output.dir",
    "seed",
];

impl Scenario {
    /// Parse config text on top of the defaults and validate the result.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected `key = value`, got {content:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown key {key:?}"),
                });
            }
            if seen.contains(&key) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate key {key:?}"),
                });
            }
            seen.push(key);
            s.set(key, value).map_err(|msg| Error::Parse { line, msg })?;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "model.dim" => self.dim = count(v)?,
            "model.energy" => self.energy = real(v)?,
            "model.eps" => self.eps = real(v)?,
            "model.axis" => self.axis = Some(list(v, real)?),
            "model.f3_perturbation" => self.f3_perturbation = real(v)?,
            "bump.mode" => self.mode = v.parse().map_err(|e: Error| e.to_string())?,
            "bump.s_star" => self.bump.s_star = real(v)?,
            "bump.delta_star" => self.bump.delta_star = real(v)?,
            "bump.cap" => self.bump.cap = real(v)?,
            "bump.wall_slope" => self.bump.wall_slope = real(v)?,
            "bump.curvature" => self.bump.curvature = real(v)?,
            "integrator.rel_tol" => self.integrator.rel_tol = real(v)?,
            "integrator.abs_tol" => self.integrator.abs_tol = real(v)?,
            "integrator.max_step" => self.integrator.max_step = real(v)?,
            "integrator.max_steps" => self.integrator.max_steps = count(v)?,
            "shooting.delta_h" => self.shooting.delta_h = real(v)?,
            "shooting.time_bound" => self.shooting.time_bound = real(v)?,
            "sweep.grid" => self.sweep.grid = count(v)?,
            "sweep.stability_grids" => self.sweep.stability_grids = list(v, count)?,
            "sweep.sphere_points" => self.sweep.sphere_points = count(v)?,
            "sweep.gauss_grid" => self.sweep.gauss_grid = count(v)?,
            "sweep.round_trip" => self.sweep.round_trip = count(v)?,
            "sweep.profiles" => self.sweep.profiles = count(v)?,
            "sweep.samples" => self.sweep.samples = count(v)?,
            "sweep.c2_points" => self.sweep.c2_points = count(v)?,
            "export.grid" => self.export.grid = count(v)?,
            "export.extent" => self.export.extent = real(v)?,
            "export.flow_profiles" => self.export.flow_profiles = count(v)?,
            "export.flow_steps" => self.export.flow_steps = count(v)?,
            "output.dir" => {
                if v.is_empty() {
                    return Err("empty output directory".into());
                }
                self.out_dir = PathBuf::from(v)
            }
            "seed" => self.seed = v.parse().map_err(|_| format!("bad seed {v:?}"))?,
            _ => unreachable!("key list and setter disagree on {key}"),
        }
        Ok(())
    }

    /// Config text that parses back to `self`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("model.dim", self.dim.to_string());
        kv("model.energy", self.energy.to_string());
        kv("model.eps", self.eps.to_string());
        if let Some(axis) = &self.axis {
            kv("model.axis", join(axis));
        }
        kv("model.f3_perturbation", self.f3_perturbation.to_string());
        kv("bump.mode", self.mode.to_string());
        kv("bump.s_star", self.bump.s_star.to_string());
        kv("bump.delta_star", self.bump.delta_star.to_string());
        kv("bump.cap", self.bump.cap.to_string());
        kv("bump.wall_slope", self.bump.wall_slope.to_string());
        kv("bump.curvature", self.bump.curvature.to_string());
        kv("integrator.rel_tol", self.integrator.rel_tol.to_string());
        kv("integrator.abs_tol", self.integrator.abs_tol.to_string());
        kv("integrator.max_step", self.integrator.max_step.to_string());
        kv("integrator.max_steps", self.integrator.max_steps.to_string());
        kv("shooting.delta_h", self.shooting.delta_h.to_string());
        kv("shooting.time_bound", self.shooting.time_bound.to_string());
        kv("sweep.grid", self.sweep.grid.to_string());
        kv("sweep.stability_grids", join(&self.sweep.stability_grids));
        kv("sweep.sphere_points", self.sweep.sphere_points.to_string());
        kv("sweep.gauss_grid", self.sweep.gauss_grid.to_string());
        kv("sweep.round_trip", self.sweep.round_trip.to_string());
        kv("sweep.profiles", self.sweep.profiles.to_string());
        kv("sweep.samples", self.sweep.samples.to_string());
        kv("sweep.c2_points", self.sweep.c2_points.to_string());
        kv("export.grid", self.export.grid.to_string());
        kv("export.extent", self.export.extent.to_string());
        kv("export.flow_profiles", self.export.flow_profiles.to_string());
        kv("export.flow_steps", self.export.flow_steps.to_string());
        kv("output.dir", self.out_dir.display().to_string());
        kv("seed", self.seed.to_string());
        out
    }

    /// Range checks that do not need the numerical objects, followed by
    /// construction of the model parameters and bump profile.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.dim > 16 {
            return bad(format!("dimension {} exceeds 16", self.dim));
        }
        let counts = [
            ("sweep.grid", self.sweep.grid, 4),
            ("sweep.sphere_points", self.sweep.sphere_points, 1),
            ("sweep.gauss_grid", self.sweep.gauss_grid, 1),
            ("sweep.round_trip", self.sweep.round_trip, 1),
            ("sweep.profiles", self.sweep.profiles, 1),
            ("sweep.samples", self.sweep.samples, 1),
            ("sweep.c2_points", self.sweep.c2_points, 1),
            ("export.grid", self.export.grid, 2),
            ("export.flow_profiles", self.export.flow_profiles, 1),
            ("export.flow_steps", self.export.flow_steps, 1),
        ];
        for (name, value, min) in counts {
            if value < min || value > MAX_COUNT {
                return bad(format!("{name} = {value} outside [{min}, {MAX_COUNT}]"));
            }
        }
        if self.sweep.stability_grids.iter().any(|&m| !(4..=MAX_COUNT).contains(&m)) {
            return bad("sweep.stability_grids entries must lie in [4, 1000000]".into());
        }
        if !(self.export.extent > 0.0 && self.export.extent <= 3.0) {
            return bad(format!("export.extent = {} outside ]0, 3]", self.export.extent));
        }
        if !(self.shooting.delta_h > 0.0 && self.shooting.delta_h < 0.5) {
            return bad(format!("shooting.delta_h = {} outside ]0, 0.5[", self.shooting.delta_h));
        }
        if !(self.shooting.time_bound > 0.0 && self.shooting.time_bound <= 1e4) {
            return bad(format!("shooting.time_bound = {} outside ]0, 1e4]", self.shooting.time_bound));
        }
        if !self.f3_perturbation.is_finite() {
            return bad("model.f3_perturbation must be finite".into());
        }
        self.model_params()?;
        BumpProfile::build(self.mode, self.energy, self.bump)?;
        let limit = max_admissible_eps(self.bump.delta_star);
        if self.eps > limit {
            return bad(format!("model.eps = {} exceeds the admissible {limit}", self.eps));
        }
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let mut p = ModelParams::new(self.dim, self.energy, self.eps)?
            .with_integrator(self.integrator)?
            .with_f3_perturbation(self.f3_perturbation);
        if let Some(axis) = &self.axis {
            p = p.with_axis(axis.clone())?;
        }
        Ok(p)
    }

    pub fn generating(&self) -> Result<GeneratingFn> {
        GeneratingFn::new(self.model_params()?)
    }

    /// The glued potential with the configured bump.
    pub fn field(&self) -> Result<PotentialField> {
        let bump = BumpProfile::build(self.mode, self.energy, self.bump)?;
        PotentialField::new(self.generating()?, Some(bump))
    }

    /// Same scenario at another eccentricity.
    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..self.clone() }
    }
}

fn real(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("bad number {v:?}"))?;
    if x.is_nan() {
        return Err("NaN is not a valid value".into());
    }
    Ok(x)
}

fn count(v: &str) -> std::result::Result<usize, String> {
    v.parse().map_err(|_| format!("bad count {v:?}"))
}

fn list<T>(v: &str, item: fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| item(s.trim())).collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}
