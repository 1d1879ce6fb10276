//! Density tallies on the cell grid, error norms, and run counters.

use std::time::Duration;

use crate::bsampler::SamplerStats;
use crate::error::{ensure, Error, Result};
use crate::kinetic::FlightEvent;
use crate::model::{Background, ParticleState};

/// Per-cell accumulated weight at the final time.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTally {
    x_min: f64,
    x_max: f64,
    cell_width: f64,
    weights: Vec<f64>,
    weights_sq: Vec<f64>,
    launched: u64,
}

impl DensityTally {
    pub fn new(bg: &Background) -> Self {
        Self {
            x_min: bg.x_min(),
            x_max: bg.x_max(),
            cell_width: bg.cell_width(),
            weights: vec![0.0; bg.n_cells()],
            weights_sq: vec![0.0; bg.n_cells()],
            launched: 0,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.weights.len()
    }

    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }

    pub fn launched(&self) -> u64 {
        self.launched
    }

    pub fn record_launch(&mut self, n: u64) {
        self.launched += n;
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cell_centers(&self) -> Vec<f64> {
        (0..self.n_cells()).map(|i| self.x_min + (i as f64 + 0.5) * self.cell_width).collect()
    }

    /// Adds a surviving particle's weight to its cell. Dead particles carry
    /// no weight and are skipped.
    pub fn deposit(&mut self, bg: &Background, p: &ParticleState) -> Result<()> {
        if !p.alive {
            return Ok(());
        }
        let i =
            bg.cell_of(p.x).map_err(|e| Error::Invariant(format!("particle left the domain before the tally: {e}")))?;
        self.weights[i] += p.w;
        self.weights_sq[i] += p.w * p.w;
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        ensure!(
            self.n_cells() == other.n_cells() && self.x_min == other.x_min && self.x_max == other.x_max,
            Parameter,
            "cannot merge tallies on different grids"
        );
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.weights_sq.iter_mut().zip(&other.weights_sq) {
            *a += b;
        }
        self.launched += other.launched;
        Ok(())
    }

    /// `weight / (N h)`; zero everywhere before any launch.
    pub fn density(&self) -> Vec<f64> {
        if self.launched == 0 {
            return vec![0.0; self.n_cells()];
        }
        let norm = self.launched as f64 * self.cell_width;
        self.weights.iter().map(|w| w / norm).collect()
    }

    /// Monte Carlo standard error of each density value.
    pub fn density_std_error(&self) -> Vec<f64> {
        if self.launched < 2 {
            return vec![0.0; self.n_cells()];
        }
        let n = self.launched as f64;
        self.weights
            .iter()
            .zip(&self.weights_sq)
            .map(|(w, w2)| {
                let mean = w / n;
                let var = (w2 / n - mean * mean).max(0.0);
                (var / n).sqrt() / self.cell_width
            })
            .collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `||d - d_ref||_2 / ||d_ref||_2`.
pub fn relative_error(d: &[f64], d_ref: &[f64]) -> Result<f64> {
    ensure!(d.len() == d_ref.len(), Parameter, "densities have {} and {} cells", d.len(), d_ref.len());
    let norm_ref = d_ref.iter().map(|x| x * x).sum::<f64>().sqrt();
    ensure!(norm_ref > 0.0, Parameter, "reference density has zero norm");
    let diff = d.iter().zip(d_ref).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(diff / norm_ref)
}

/// Event and work counters; merged across particles in index order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Counters {
    pub collisions: u64,
    pub cell_crossings: u64,
    pub wall_hits: u64,
    pub steps: u64,
    /// Steps that reached the diffusive phase.
    pub diffusive_steps: u64,
    /// Diffusive phases that KDMC_Kin handed back to the kinetic solver.
    pub fallback_steps: u64,
    pub trajectories: u64,
    /// Trajectories with at least one kinetic fallback.
    pub fallback_trajectories: u64,
    pub sampler: SamplerStats,
    pub absorbed_weight: f64,
    /// Diffusive samples that landed beyond the far wall and were folded back.
    pub far_wall_folds: u64,
    /// Diffusive steps whose spread exceeded a quarter of the distance to the
    /// far wall.
    pub far_wall_warnings: u64,
}

impl Counters {
    pub fn merge(&mut self, other: &Self) {
        self.collisions += other.collisions;
        self.cell_crossings += other.cell_crossings;
        self.wall_hits += other.wall_hits;
        self.steps += other.steps;
        self.diffusive_steps += other.diffusive_steps;
        self.fallback_steps += other.fallback_steps;
        self.trajectories += other.trajectories;
        self.fallback_trajectories += other.fallback_trajectories;
        self.sampler.merge(&other.sampler);
        self.absorbed_weight += other.absorbed_weight;
        self.far_wall_folds += other.far_wall_folds;
        self.far_wall_warnings += other.far_wall_warnings;
    }

    pub fn record_flight(&mut self, event: &FlightEvent) {
        match *event {
            FlightEvent::Collision => self.collisions += 1,
            FlightEvent::CellEdge => self.cell_crossings += 1,
            FlightEvent::Reflected(_) => self.wall_hits += 1,
            FlightEvent::Absorbed { weight, .. } => {
                self.wall_hits += 1;
                self.absorbed_weight += weight;
            }
            FlightEvent::Horizon => {}
        }
    }
}

/// Summary of one solver run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    pub runtime: Duration,
    /// Fraction of trajectories with at least one kinetic fallback.
    pub fallback_trajectory_fraction: f64,
    /// Fraction of diffusive phases that fell back to kinetic simulation.
    pub fallback_step_fraction: f64,
    pub collisions: u64,
    pub proposals: u64,
    pub rejections: u64,
    pub absorbed_weight: f64,
}

impl RunMetrics {
    pub fn new(counters: &Counters, runtime: Duration) -> Self {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Self {
            runtime,
            fallback_trajectory_fraction: ratio(counters.fallback_trajectories, counters.trajectories),
            fallback_step_fraction: ratio(counters.fallback_steps, counters.diffusive_steps),
            collisions: counters.collisions,
            proposals: counters.sampler.proposals,
            rejections: counters.sampler.rejections,
            absorbed_weight: counters.absorbed_weight,
        }
    }
}
