//! Particle sweeps: every particle of a run, tallied at the final time.
//!
//! Particles are cut into fixed-size chunks by index. Each chunk owns its
//! tally and counters and is reduced in chunk order, so the result does not
//! depend on how chunks are scheduled onto threads. With the `parallel`
//! feature chunks run on the current rayon pool; without it they run in
//! order on the calling thread and produce identical output.

use std::time::{Duration, Instant};

use crate::error::{ensure, Result};
use crate::kdmc::{fluid_solve, kdmc_solve, KdmcOptions, StepMode};
use crate::kinetic::kinetic_solve;
use crate::model::{Background, ParticleState, SolverKind, StepConfig, Walls};
use crate::sampling::RngStream;
use crate::tally::{Counters, DensityTally};

/// Particles per work unit.
pub const CHUNK_SIZE: u64 = 1024;

/// Physical setup shared by all solvers of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub background: Background,
    pub walls: Walls,
    /// Initial position; initial velocities come from the local
    /// post-collision distribution.
    pub x0: f64,
    /// Sub-step of the fluid model.
    pub fluid_dt: f64,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.walls.matches(&self.background), Parameter, "walls must sit on the background's domain bounds");
        ensure!(self.background.contains(self.x0), Parameter, "initial position {} outside the domain", self.x0);
        ensure!(
            self.fluid_dt.is_finite() && self.fluid_dt > 0.0,
            Parameter,
            "fluid step must be positive, got {}",
            self.fluid_dt
        );
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub tally: DensityTally,
    pub counters: Counters,
    /// Wall-clock time of the particle sweep alone.
    pub runtime: Duration,
}

/// Runs `cfg.n_particles` independent particles of `cfg.solver` to
/// `cfg.t_final`, in parallel when the `parallel` feature is on.
pub fn simulate(problem: &Problem, cfg: &StepConfig) -> Result<SimulationOutput> {
    #[cfg(feature = "parallel")]
    {
        sweep_with(problem, cfg, run_chunks_parallel)
    }
    #[cfg(not(feature = "parallel"))]
    {
        sweep_with(problem, cfg, run_chunks_sequential)
    }
}

/// [`simulate`] on the calling thread only. Produces the same output.
pub fn simulate_sequential(problem: &Problem, cfg: &StepConfig) -> Result<SimulationOutput> {
    sweep_with(problem, cfg, run_chunks_sequential)
}

type ChunkResult = Result<(DensityTally, Counters)>;

fn sweep_with(
    problem: &Problem,
    cfg: &StepConfig,
    run: impl FnOnce(u64, &(dyn Fn(u64) -> ChunkResult + Sync)) -> Result<Vec<(DensityTally, Counters)>>,
) -> Result<SimulationOutput> {
    problem.validate()?;
    cfg.validate()?;
    let n_chunks = cfg.n_particles.div_ceil(CHUNK_SIZE);
    let start = Instant::now();
    let chunks = run(n_chunks, &|c| run_chunk(problem, cfg, c))?;
    let runtime = start.elapsed();
    let mut tally = DensityTally::new(&problem.background);
    let mut counters = Counters::default();
    for (t, c) in &chunks {
        tally.merge(t)?;
        counters.merge(c);
    }
    Ok(SimulationOutput { tally, counters, runtime })
}

#[cfg(feature = "parallel")]
fn run_chunks_parallel(n: u64, f: &(dyn Fn(u64) -> ChunkResult + Sync)) -> Result<Vec<(DensityTally, Counters)>> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

fn run_chunks_sequential(n: u64, f: &(dyn Fn(u64) -> ChunkResult + Sync)) -> Result<Vec<(DensityTally, Counters)>> {
    (0..n).map(f).collect()
}

fn run_chunk(problem: &Problem, cfg: &StepConfig, chunk: u64) -> Result<(DensityTally, Counters)> {
    let bg = &problem.background;
    let mut tally = DensityTally::new(bg);
    let mut counters = Counters::default();
    let first = chunk * CHUNK_SIZE;
    let last = (first + CHUNK_SIZE).min(cfg.n_particles);
    for i in first..last {
        let p = run_particle(problem, cfg, i, &mut counters)?;
        tally.deposit(bg, &p)?;
    }
    tally.record_launch(last - first);
    Ok((tally, counters))
}

/// Stream id of particle `index` under `solver`; distinct solvers never share
/// random numbers for the same seed.
pub fn stream_id(solver: SolverKind, index: u64) -> u64 {
    let tag = match solver {
        SolverKind::Kinetic => 1,
        SolverKind::Fluid => 2,
        SolverKind::KdmcKin => 3,
        SolverKind::KdmcFluid => 4,
    };
    (tag << 48) | index
}

/// Simulates particle `index` from `problem.x0` to `cfg.t_final`.
pub fn run_particle(problem: &Problem, cfg: &StepConfig, index: u64, counters: &mut Counters) -> Result<ParticleState> {
    let bg = &problem.background;
    let walls = &problem.walls;
    let mut rng = RngStream::new(cfg.seed, stream_id(cfg.solver, index));
    let c = bg.local_params(problem.x0)?;
    let mut p = ParticleState::new(problem.x0, rng.gaussian(c.nu_p, c.sigma_p()));
    match cfg.solver {
        SolverKind::Kinetic => {
            kinetic_solve(&mut p, bg, walls, cfg.t_final, &mut rng, counters)?;
            counters.trajectories += 1;
        }
        SolverKind::Fluid => {
            fluid_solve(&mut p, bg, walls, cfg.t_final, problem.fluid_dt, cfg.sampler, &mut rng, counters)?;
        }
        SolverKind::KdmcKin | SolverKind::KdmcFluid => {
            let opts = KdmcOptions {
                dt: cfg.dt,
                mode: if cfg.solver == SolverKind::KdmcKin { StepMode::Kin } else { StepMode::Fluid },
                sampler: cfg.sampler,
                boundary_sigma_threshold: cfg.boundary_sigma_threshold,
            };
            kdmc_solve(&mut p, bg, walls, cfg.t_final, &opts, &mut rng, counters)?;
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundaryKind, CellParams, SamplerKind, DEFAULT_SIGMA_THRESHOLD};

    fn small_problem() -> Problem {
        let background = Background::homogeneous(0.0, 1.0, 101, CellParams::new(100.0, 1e7, 1e7)).unwrap();
        let walls = Walls::around(&background, BoundaryKind::Reflecting).unwrap();
        Problem { background, walls, x0: 0.98, fluid_dt: 1e-5 }
    }

    fn cfg(solver: SolverKind, n: u64) -> StepConfig {
        StepConfig {
            dt: 1e-4,
            t_final: 1e-3,
            n_particles: n,
            seed: 17,
            solver,
            sampler: SamplerKind::Efficient,
            boundary_sigma_threshold: DEFAULT_SIGMA_THRESHOLD,
        }
    }

    #[test]
    fn reflecting_runs_conserve_weight() {
        let problem = small_problem();
        for solver in [SolverKind::Fluid, SolverKind::KdmcKin, SolverKind::KdmcFluid] {
            let out = simulate(&problem, &cfg(solver, 3000)).unwrap();
            assert_eq!(out.tally.total_weight(), 3000.0, "{solver:?}");
            assert_eq!(out.tally.launched(), 3000);
            let integral: f64 = out.tally.density().iter().sum::<f64>() * out.tally.cell_width();
            assert!((integral - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_tally() {
        let problem = small_problem();
        let c = cfg(SolverKind::KdmcFluid, 2100);
        let a = simulate(&problem, &c).unwrap();
        let b = simulate(&problem, &c).unwrap();
        assert_eq!(a.tally, b.tally);
        assert_eq!(a.counters, b.counters);
        let seq = simulate_sequential(&problem, &c).unwrap();
        assert_eq!(a.tally, seq.tally);
        assert_eq!(a.counters, seq.counters);
    }

    #[test]
    fn streams_are_disjoint_across_solvers() {
        assert_ne!(stream_id(SolverKind::Kinetic, 5), stream_id(SolverKind::Fluid, 5));
        assert_eq!(stream_id(SolverKind::KdmcFluid, 7) & 0xffff_ffff_ffff, 7);
    }

    #[test]
    fn mismatched_walls_are_rejected() {
        let mut problem = small_problem();
        problem.walls.right.location = 2.0;
        assert!(simulate(&problem, &cfg(SolverKind::Kinetic, 10)).is_err());
    }
}
