//! Experiment harness: runs the kinetic reference, the fluid model and both
//! KDMC variants on one problem and reports densities, errors and timings.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;

use std::path::PathBuf;

use kdmc_core::{
    relative_error, simulate, Background, CellParams, Counters, Problem, RunMetrics, SolverKind, StepConfig, Walls,
};

pub use config::{ConfigFile, Experiment};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(#[from] kdmc_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for bad input, 3 for failures inside a solver, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Solver(kdmc_core::Error::Parameter(_)) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

/// Result of one solver run at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverRun {
    pub solver: SolverKind,
    /// `None` for solvers without a time step.
    pub dt: Option<f64>,
    pub density: Vec<f64>,
    pub std_error: Vec<f64>,
    pub total_weight: f64,
    pub counters: Counters,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dt: f64,
    pub runtime_old: Option<f64>,
    pub runtime_new: Option<f64>,
    pub error_fluid: Option<f64>,
    pub error_old: Option<f64>,
    pub error_new: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub centers: Vec<f64>,
    pub dts: Vec<f64>,
    /// Kinetic reference density, computed or loaded.
    pub reference: Option<Vec<f64>>,
    pub runs: Vec<SolverRun>,
}

impl Report {
    pub fn find(&self, solver: SolverKind, dt: Option<f64>) -> Option<&SolverRun> {
        self.runs.iter().find(|r| r.solver == solver && r.dt == dt)
    }

    /// Relative error of a run against the reference.
    pub fn error(&self, solver: SolverKind, dt: Option<f64>) -> Option<f64> {
        let reference = self.reference.as_ref()?;
        let run = self.find(solver, dt)?;
        relative_error(&run.density, reference).ok()
    }

    /// Named density columns in file order.
    pub fn density_columns(&self) -> Vec<(String, Vec<f64>)> {
        let mut cols = Vec::new();
        if let Some(r) = &self.reference {
            cols.push(("ref".to_string(), r.clone()));
        }
        if let Some(run) = self.find(SolverKind::Fluid, None) {
            cols.push(("fluid".to_string(), run.density.clone()));
        }
        for (solver, prefix) in [(SolverKind::KdmcKin, "kd_old_"), (SolverKind::KdmcFluid, "kd_new_")] {
            for &dt in &self.dts {
                if let Some(run) = self.find(solver, Some(dt)) {
                    cols.push((format!("{prefix}{}", output::dt_label(dt)), run.density.clone()));
                }
            }
        }
        cols
    }

    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        let runtime = |s, dt| self.find(s, Some(dt)).map(|r: &SolverRun| r.metrics.runtime.as_secs_f64());
        self.dts
            .iter()
            .map(|&dt| SummaryRow {
                dt,
                runtime_old: runtime(SolverKind::KdmcKin, dt),
                runtime_new: runtime(SolverKind::KdmcFluid, dt),
                error_fluid: self.error(SolverKind::Fluid, None),
                error_old: self.error(SolverKind::KdmcKin, Some(dt)),
                error_new: self.error(SolverKind::KdmcFluid, Some(dt)),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Density file whose `ref` column replaces the kinetic run.
    pub ref_from: Option<PathBuf>,
    /// Print one line per finished run to stderr.
    pub verbose: bool,
}

pub fn build_problem(exp: &Experiment) -> Result<Problem, CliError> {
    let background =
        Background::homogeneous(exp.x_min, exp.x_max, exp.n_cells, CellParams::new(exp.nu_p, exp.sigma_p2, exp.r_cx))?;
    let walls = Walls::around(&background, exp.boundary)?;
    Ok(Problem { background, walls, x0: exp.x0, fluid_dt: exp.fluid_dt() })
}

/// Runs every selected solver; KDMC solvers once per time step.
pub fn run_experiment(exp: &Experiment, opts: &RunOptions) -> Result<Report, CliError> {
    exp.validate()?;
    let problem = build_problem(exp)?;
    let centers: Vec<f64> = (0..exp.n_cells).map(|i| problem.background.cell_center(i)).collect();

    let loaded = match &opts.ref_from {
        Some(path) => Some(load_reference(path, &centers)?),
        None => None,
    };
    let mut plan: Vec<(SolverKind, Option<f64>)> = Vec::new();
    for &solver in &exp.solvers {
        if solver == SolverKind::Kinetic && loaded.is_some() {
            continue;
        }
        if solver.uses_time_step() {
            plan.extend(exp.dts.iter().map(|&dt| (solver, Some(dt))));
        } else {
            plan.push((solver, None));
        }
    }

    let mut runs = Vec::new();
    for (solver, dt) in plan {
        let cfg = StepConfig {
            dt: dt.unwrap_or(exp.t_final),
            t_final: exp.t_final,
            n_particles: exp.particles,
            seed: exp.seed,
            solver,
            sampler: exp.sampler,
            boundary_sigma_threshold: exp.boundary_sigma_threshold,
        };
        let out = simulate(&problem, &cfg)?;
        let metrics = RunMetrics::new(&out.counters, out.runtime);
        if opts.verbose {
            eprintln!(
                "{:<10} dt={:<8} runtime={:.3}s fallback(traj)={:.4} fallback(step)={:.4}",
                solver.name(),
                dt.map(output::dt_label).unwrap_or_else(|| "-".into()),
                metrics.runtime.as_secs_f64(),
                metrics.fallback_trajectory_fraction,
                metrics.fallback_step_fraction,
            );
        }
        runs.push(SolverRun {
            solver,
            dt,
            density: out.tally.density(),
            std_error: out.tally.density_std_error(),
            total_weight: out.tally.total_weight(),
            counters: out.counters,
            metrics,
        });
    }
    let reference = loaded.or_else(|| runs.iter().find(|r| r.solver == SolverKind::Kinetic).map(|r| r.density.clone()));
    Ok(Report { centers, dts: exp.dts.clone(), reference, runs })
}

fn load_reference(path: &std::path::Path, centers: &[f64]) -> Result<Vec<f64>, CliError> {
    let table = output::read_density(path)?;
    if table.x != centers {
        return Err(CliError::Config(format!("{}: grid does not match the experiment's cell centres", path.display())));
    }
    table
        .column("ref")
        .map(<[f64]>::to_vec)
        .ok_or_else(|| CliError::Config(format!("{}: no 'ref' column", path.display())))
}
