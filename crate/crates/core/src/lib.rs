//! Boundary-aware kinetic-diffusion Monte Carlo for 1D neutral transport.
//!
//! Neutrals fly through a piecewise-constant plasma background and undergo
//! charge-exchange collisions. The kinetic-diffusion scheme replaces the
//! collision-dominated part of each time step by a single diffusive move;
//! near a wall that move is drawn from the exact half-line Green's function
//! ([`greens`], [`bsampler`]) instead of falling back to kinetic simulation.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bsampler;
pub mod error;
pub mod greens;
pub mod kdmc;
pub mod kinetic;
pub mod model;
pub mod sampling;
pub mod special;
pub mod sweep;
pub mod tally;

pub use bsampler::{sample_basic, sample_efficient, sample_position, SamplerStats, WeightedSample};
pub use error::{Error, Result};
pub use greens::{green_mass_q, green_mass_split, green_pdf, green_u, GreenBoundary, GreenParams, Masses, PdfTerms};
pub use kdmc::{fluid_coeffs, fluid_solve, kdkmc_diffusion, kdmc_solve, kdmc_step, FluidCoeffs, KdmcOptions, StepMode};
pub use kinetic::{kinetic_flight, kinetic_solve, FlightEvent};
pub use model::{
    Background, BoundaryKind, BoundarySpec, CellParams, ParticleState, SamplerKind, Side, SolverKind, StepConfig,
    Walls, DEFAULT_SIGMA_THRESHOLD,
};
pub use sampling::RngStream;
pub use sweep::{run_particle, simulate, simulate_sequential, stream_id, Problem, SimulationOutput};
pub use tally::{relative_error, Counters, DensityTally, RunMetrics};
