//! Experiment configuration: named presets, a flat TOML file, and
//! command-line overrides, applied in that order.

use std::path::Path;

use kdmc_core::{BoundaryKind, SamplerKind, SolverKind, DEFAULT_SIGMA_THRESHOLD};
use serde::Deserialize;

use crate::CliError;

pub const PAPER_PRESET: &str = "paper-1d-reflecting-drift";
pub const DESK_PRESET: &str = "paper-desk";
pub const SMOKE_PRESET: &str = "smoke";
pub const PRESETS: [&str; 3] = [PAPER_PRESET, DESK_PRESET, SMOKE_PRESET];

/// Everything one invocation runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    pub x0: f64,
    pub nu_p: f64,
    pub sigma_p2: f64,
    pub r_cx: f64,
    pub t_final: f64,
    pub particles: u64,
    pub seed: u64,
    pub dts: Vec<f64>,
    pub solvers: Vec<SolverKind>,
    pub sampler: SamplerKind,
    pub boundary: BoundaryKind,
    pub boundary_sigma_threshold: f64,
    /// Fluid-model sub-step; `t_final / 1000` when unset.
    pub fluid_dt: Option<f64>,
}

impl Experiment {
    pub fn preset(name: &str) -> Result<Self, CliError> {
        let paper = Self {
            x_min: 0.0,
            x_max: 1.0,
            n_cells: 101,
            x0: 0.98,
            nu_p: 100.0,
            sigma_p2: 1e7,
            r_cx: 1e7,
            t_final: 0.01,
            particles: 1_000_000,
            seed: 1,
            dts: vec![1e-6, 1e-5, 1e-4, 1e-3],
            solvers: SolverKind::ALL.to_vec(),
            sampler: SamplerKind::Basic,
            boundary: BoundaryKind::Reflecting,
            boundary_sigma_threshold: DEFAULT_SIGMA_THRESHOLD,
            fluid_dt: None,
        };
        match name {
            PAPER_PRESET => Ok(paper),
            DESK_PRESET => Ok(Self { particles: 100_000, ..paper }),
            SMOKE_PRESET => Ok(Self { particles: 10_000, t_final: 1e-3, ..paper }),
            other => Err(CliError::Config(format!("unknown preset '{other}' (known: {})", PRESETS.join(", ")))),
        }
    }

    pub fn fluid_dt(&self) -> f64 {
        self.fluid_dt.unwrap_or(self.t_final / 1000.0)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.particles == 0 {
            return bad("particles must be at least 1".into());
        }
        if self.n_cells == 0 {
            return bad("n_cells must be at least 1".into());
        }
        if !(self.x_min < self.x_max) {
            return bad(format!("empty domain [{}, {}]", self.x_min, self.x_max));
        }
        if !(self.x0 >= self.x_min && self.x0 <= self.x_max) {
            return bad(format!("x0 = {} lies outside the domain", self.x0));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final must be positive, got {}", self.t_final));
        }
        if !(self.sigma_p2 > 0.0 && self.r_cx > 0.0) {
            return bad("sigma_p2 and r_cx must be positive".into());
        }
        if self.solvers.is_empty() {
            return bad("no solver selected".into());
        }
        let needs_dt = self.solvers.iter().any(|s| s.uses_time_step());
        if needs_dt && self.dts.is_empty() {
            return bad("KDMC solvers need at least one dt".into());
        }
        for &dt in &self.dts {
            if !(dt > 0.0 && dt <= self.t_final) {
                return bad(format!("dt = {dt} must lie in (0, t_final]"));
            }
        }
        if let Some(h) = self.fluid_dt {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("fluid_dt must be positive, got {h}"));
            }
        }
        if !(self.boundary_sigma_threshold >= 0.0) {
            return bad("boundary_sigma_threshold must be non-negative".into());
        }
        Ok(())
    }

    /// Applies the keys present in `file` on top of `self`.
    pub fn apply_file(&mut self, file: &ConfigFile) -> Result<(), CliError> {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = file.$field.clone() {
                    self.$field = v;
                }
            )*};
        }
        set!(x_min, x_max, n_cells, x0, nu_p, sigma_p2, r_cx, t_final, particles, seed, dts);
        if let Some(threshold) = file.boundary_sigma_threshold {
            self.boundary_sigma_threshold = threshold;
        }
        if let Some(h) = file.fluid_dt {
            self.fluid_dt = Some(h);
        }
        if let Some(s) = &file.solvers {
            self.solvers = parse_solvers(s)?;
        }
        if let Some(s) = &file.sampler {
            self.sampler = parse_sampler(s)?;
        }
        if let Some(b) = &file.boundary {
            self.boundary = parse_boundary(b)?;
        }
        Ok(())
    }
}

/// Flat key-value configuration file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<String>,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub n_cells: Option<usize>,
    pub x0: Option<f64>,
    pub nu_p: Option<f64>,
    pub sigma_p2: Option<f64>,
    pub r_cx: Option<f64>,
    pub t_final: Option<f64>,
    pub particles: Option<u64>,
    pub seed: Option<u64>,
    pub dts: Option<Vec<f64>>,
    pub solvers: Option<Vec<String>>,
    pub sampler: Option<String>,
    pub boundary: Option<String>,
    pub boundary_sigma_threshold: Option<f64>,
    pub fluid_dt: Option<f64>,
    pub threads: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

pub fn parse_solvers<S: AsRef<str>>(names: &[S]) -> Result<Vec<SolverKind>, CliError> {
    let mut out = Vec::new();
    for name in names {
        for part in name.as_ref().split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if part == "all" {
                out.extend(SolverKind::ALL);
            } else {
                out.push(part.parse().map_err(|e: kdmc_core::Error| CliError::Config(e.to_string()))?);
            }
        }
    }
    // Keep the canonical order so output columns never depend on flag order.
    let mut unique: Vec<SolverKind> = SolverKind::ALL.into_iter().filter(|s| out.contains(s)).collect();
    unique.dedup();
    Ok(unique)
}

pub fn parse_sampler(name: &str) -> Result<SamplerKind, CliError> {
    name.parse().map_err(|e: kdmc_core::Error| CliError::Config(e.to_string()))
}

pub fn parse_boundary(name: &str) -> Result<BoundaryKind, CliError> {
    match name {
        "reflecting" => Ok(BoundaryKind::Reflecting),
        "absorbing" => Ok(BoundaryKind::Absorbing),
        other => Err(CliError::Config(format!("unknown boundary '{other}' (expected reflecting or absorbing)"))),
    }
}
