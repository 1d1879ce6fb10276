//! Kinetic-diffusion stepping and the advection-diffusion fluid model.
//!
//! A KDKMC step of length `dt` is: a kinetic flight up to the first
//! collision at elapsed time `tau`; a diffusive move over the remaining
//! `theta = dt - tau`; and a trailing collision-free flight of duration
//! `delta = min(Exp(R), theta)` with a fresh post-collision velocity. The
//! diffusive move carries the drift for `theta - delta` and the variance
//! `2 D_theta theta`, which reproduces the mean and variance of the kinetic
//! motion over `theta` exactly in a homogeneous background.

use crate::bsampler::sample_position;
use crate::error::{ensure, Result};
use crate::greens::{GreenBoundary, GreenParams};
use crate::kinetic::{free_flight, kinetic_flight, kinetic_solve, FlightEvent};
use crate::model::{Background, BoundaryKind, BoundarySpec, ParticleState, SamplerKind, Side, Walls};
use crate::sampling::RngStream;
use crate::tally::Counters;

/// Below this value of `R theta` the diffusion bracket is summed as a series.
const SERIES_THRESHOLD: f64 = 0.5;

/// Drift and diffusion of the fluid limit at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidCoeffs {
    pub nu: f64,
    pub d: f64,
}

/// `nu = nu_p + sigma_p^2 d(1/R)/dx`, `D = sigma_p^2 / R` in the cell of `x`.
pub fn fluid_coeffs(x: f64, bg: &Background) -> Result<FluidCoeffs> {
    let i = bg.cell_of(x)?;
    let c = bg.cells()[i];
    Ok(FluidCoeffs { nu: c.nu_p + c.sigma_p2 * bg.inv_rcx_gradient(i), d: c.sigma_p2 / c.r_cx })
}

/// Effective diffusion over a diffusive phase of length `theta`:
/// `sigma^2 / (R^2 theta) (2 e^{-R theta} + R theta + R theta e^{-R theta} - 2)`.
pub fn kdkmc_diffusion(theta: f64, sigma_p2: f64, r_cx: f64) -> f64 {
    let x = r_cx * theta;
    sigma_p2 / r_cx * diffusion_bracket(x) / x
}

/// `2 e^{-x} + x + x e^{-x} - 2`, which is `x^3/6 - x^4/12 + ...` for small `x`.
fn diffusion_bracket(x: f64) -> f64 {
    if x < SERIES_THRESHOLD {
        // sum_{n>=3} (-1)^{n+1} (n - 2) x^n / n!
        let mut power = x * x * x / 6.0;
        let mut sum = power;
        for n in 4..40u32 {
            power *= -x / n as f64;
            let term = (n - 2) as f64 * power;
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        let e = (-x).exp();
        2.0 * e + x + x * e - 2.0
    }
}

/// How the diffusive phase treats the walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    /// Fall back to kinetic simulation when a wall is within reach.
    Kin,
    /// Sample the half-line Green's function of the nearest wall.
    Fluid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdmcOptions {
    pub dt: f64,
    pub mode: StepMode,
    pub sampler: SamplerKind,
    pub boundary_sigma_threshold: f64,
}

/// One KDKMC step of length `opts.dt` from the particle's current time.
pub fn kdmc_step(
    p: &mut ParticleState,
    bg: &Background,
    walls: &Walls,
    opts: &KdmcOptions,
    rng: &mut RngStream,
    counters: &mut Counters,
) -> Result<()> {
    ensure!(p.alive, Parameter, "KDMC step of a dead particle");
    step_until(p, bg, walls, p.t + opts.dt, opts, rng, counters)
}

/// Runs KDKMC steps on the grid `dt, 2 dt, ...` up to `t_end`; the last step
/// is shortened to end exactly at `t_end`.
pub fn kdmc_solve(
    p: &mut ParticleState,
    bg: &Background,
    walls: &Walls,
    t_end: f64,
    opts: &KdmcOptions,
    rng: &mut RngStream,
    counters: &mut Counters,
) -> Result<()> {
    ensure!(opts.dt > 0.0, Parameter, "dt must be positive, got {}", opts.dt);
    let fallbacks_before = counters.fallback_steps;
    let t0 = p.t;
    let mut k = 1u64;
    while p.alive && p.t < t_end {
        let t_step = (t0 + k as f64 * opts.dt).min(t_end);
        step_until(p, bg, walls, t_step, opts, rng, counters)?;
        k += 1;
    }
    counters.trajectories += 1;
    if counters.fallback_steps > fallbacks_before {
        counters.fallback_trajectories += 1;
    }
    Ok(())
}

fn step_until(
    p: &mut ParticleState,
    bg: &Background,
    walls: &Walls,
    t_end: f64,
    opts: &KdmcOptions,
    rng: &mut RngStream,
    counters: &mut Counters,
) -> Result<()> {
    counters.steps += 1;
    loop {
        let event = kinetic_flight(p, bg, walls, t_end, rng)?;
        counters.record_flight(&event);
        match event {
            FlightEvent::Collision => break,
            FlightEvent::Horizon | FlightEvent::Absorbed { .. } => return Ok(()),
            FlightEvent::CellEdge | FlightEvent::Reflected(_) => {}
        }
    }
    let theta = t_end - p.t;
    if theta <= 0.0 {
        return Ok(());
    }
    counters.diffusive_steps += 1;

    let cell = bg.cells()[bg.cell_of(p.x)?];
    let coeffs = fluid_coeffs(p.x, bg)?;
    let d_theta = kdkmc_diffusion(theta, cell.sigma_p2, cell.r_cx);
    let delta = rng.exponential(cell.r_cx).min(theta);
    let drift_time = theta - delta;
    let spread = (2.0 * d_theta * theta).sqrt();

    if spread > 0.0 {
        match opts.mode {
            StepMode::Kin => {
                let mean = p.x + coeffs.nu * drift_time;
                let k = opts.boundary_sigma_threshold;
                let near =
                    (walls.left.location - mean).abs() < k * spread || (walls.right.location - mean).abs() < k * spread;
                let target = mean + spread * rng.standard_normal();
                if near || !bg.contains(target) {
                    counters.fallback_steps += 1;
                    return kinetic_solve(p, bg, walls, t_end, rng, counters);
                }
                p.x = target;
            }
            StepMode::Fluid => {
                let gp = wall_green(p.x, coeffs.nu * drift_time / theta, d_theta, theta, walls)?;
                let far = far_wall(walls, gp.side);
                if spread > 0.25 * (far.location - p.x).abs() {
                    counters.far_wall_warnings += 1;
                }
                let s = sample_position(opts.sampler, &gp, rng, &mut counters.sampler)?;
                apply_weight(p, s.weight_factor, counters);
                if !p.alive {
                    return Ok(());
                }
                p.x = s.x;
                fold_far_wall(p, far, counters);
                if !p.alive {
                    return Ok(());
                }
            }
        }
    }
    p.t = t_end - delta;
    let here = bg.cells()[bg.cell_of(p.x)?];
    p.v = rng.gaussian(here.nu_p, here.sigma_p());
    free_flight(p, walls, delta, counters)?;
    p.t = t_end;
    Ok(())
}

/// Green's-function parameters for a diffusive move from `x` towards the
/// nearest wall. A start exactly on the wall is moved one ulp inside.
fn wall_green(x: f64, nu: f64, d: f64, t: f64, walls: &Walls) -> Result<GreenParams> {
    let wall = walls.nearest(x);
    let x0 = match wall.side {
        Side::Right if x >= wall.location => wall.location.next_down(),
        Side::Left if x <= wall.location => wall.location.next_up(),
        _ => x,
    };
    GreenParams::new(nu, d, wall.location, wall.side, x0, t, GreenBoundary::from(wall.kind))
}

fn far_wall(walls: &Walls, near: Side) -> &BoundarySpec {
    match near {
        Side::Left => &walls.right,
        Side::Right => &walls.left,
    }
}

fn apply_weight(p: &mut ParticleState, factor: f64, counters: &mut Counters) {
    if factor == 1.0 {
        return;
    }
    if factor <= 0.0 {
        counters.absorbed_weight += p.absorb();
        return;
    }
    counters.absorbed_weight += p.w * (1.0 - factor).max(0.0);
    p.w *= factor;
}

/// The Green's function only knows the nearest wall; a sample beyond the far
/// wall is reflected back or absorbed there.
fn fold_far_wall(p: &mut ParticleState, far: &BoundarySpec, counters: &mut Counters) {
    let beyond = match far.side {
        Side::Left => p.x < far.location,
        Side::Right => p.x > far.location,
    };
    if !beyond {
        return;
    }
    counters.far_wall_folds += 1;
    match far.kind {
        BoundaryKind::Absorbing => counters.absorbed_weight += p.absorb(),
        _ => p.x = 2.0 * far.location - p.x,
    }
}

/// Advection-diffusion with the fluid-limit coefficients, advanced by exact
/// half-line Green's-function draws over sub-steps of `dt_fluid`.
#[allow(clippy::too_many_arguments)]
pub fn fluid_solve(
    p: &mut ParticleState,
    bg: &Background,
    walls: &Walls,
    t_end: f64,
    dt_fluid: f64,
    sampler: SamplerKind,
    rng: &mut RngStream,
    counters: &mut Counters,
) -> Result<()> {
    ensure!(dt_fluid > 0.0, Parameter, "fluid step must be positive, got {dt_fluid}");
    let t0 = p.t;
    let mut k = 1u64;
    while p.alive && p.t < t_end {
        let t_step = (t0 + k as f64 * dt_fluid).min(t_end);
        let h = t_step - p.t;
        let c = fluid_coeffs(p.x, bg)?;
        counters.steps += 1;
        let gp = wall_green(p.x, c.nu, c.d, h, walls)?;
        let s = sample_position(sampler, &gp, rng, &mut counters.sampler)?;
        apply_weight(p, s.weight_factor, counters);
        if p.alive {
            p.x = s.x;
            fold_far_wall(p, far_wall(walls, gp.side), counters);
        }
        p.t = t_step;
        k += 1;
    }
    counters.trajectories += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CellParams;
    use kdmc_oracles::{ks_critical_value, ks_statistic, Moments};

    #[test]
    fn fluid_coeffs_paper() {
        let bg = Background::homogeneous(0.0, 1.0, 101, CellParams::new(100.0, 1e7, 1e7)).unwrap();
        assert_eq!(fluid_coeffs(0.5, &bg).unwrap(), FluidCoeffs { nu: 100.0, d: 1.0 });
        assert!(fluid_coeffs(1.5, &bg).is_err());
    }

    #[test]
    fn fluid_drift_follows_rate_gradient() {
        let bg =
            Background::new(0.0, 1.0, vec![CellParams::new(0.0, 1e7, 1e7), CellParams::new(0.0, 1e7, 2e7)]).unwrap();
        // d(1/R)/dx = (1/2e7 - 1/1e7) / 0.5 = -1e-7
        let c = fluid_coeffs(0.25, &bg).unwrap();
        assert!((c.nu - -1.0).abs() < 1e-12);
    }

    #[test]
    fn diffusion_limits() {
        let (s2, r) = (1e7, 1e7);
        // Fluid limit.
        assert!((kdkmc_diffusion(1e3, s2, r) - 1.0).abs() < 1e-9);
        // R theta = 1: bracket 3/e - 1.
        let want = 3.0 * (-1.0f64).exp() - 1.0;
        assert!((kdkmc_diffusion(1e-7, s2, r) - want).abs() < 1e-15);
        // Leading order sigma^2 R theta^2 / 6.
        let theta = 1e-13;
        let lead = s2 * r * theta * theta / 6.0;
        assert!(((kdkmc_diffusion(theta, s2, r) - lead) / lead).abs() < 1e-5);
    }

    #[test]
    fn diffusion_series_agrees_with_high_precision() {
        // Values from 50-digit evaluation of the closed form.
        for (x, bracket) in [
            (1e-4, 1.666_583_335_833_278e-13),
            (0.1, 1.585_778_755_151_036_4e-4),
            (0.49, 1.543_972_151_919_601_2e-2),
            (0.51, 1.724_390_281_878_751_6e-2),
            (3.0, 1.248_935_341_839_319_6),
        ] {
            let got = diffusion_bracket(x);
            assert!(((got - bracket) / bracket).abs() < 1e-13, "x = {x}: {got} vs {bracket}");
        }
    }

    #[test]
    fn diffusion_is_below_fluid_value() {
        for e in -12..6 {
            let theta = 10f64.powi(e) * 1e-7;
            let d = kdkmc_diffusion(theta, 1e7, 1e7);
            assert!(d > 0.0 && d < 1.0, "theta {theta}: {d}");
        }
    }

    #[test]
    fn fluid_solve_without_walls_is_exact_gaussian() {
        let bg = Background::homogeneous(-1e3, 1e3, 1, CellParams::new(100.0, 1e7, 1e7)).unwrap();
        let walls = Walls::around(&bg, BoundaryKind::Reflecting).unwrap();
        let mut counters = Counters::default();
        let t_end = 1e-2;
        let mut xs: Vec<f64> = (0..20_000)
            .map(|i| {
                let mut rng = RngStream::new(3, i);
                let mut p = ParticleState::new(0.0, 0.0);
                fluid_solve(&mut p, &bg, &walls, t_end, t_end / 7.0, SamplerKind::Efficient, &mut rng, &mut counters)
                    .unwrap();
                assert_eq!(p.t, t_end);
                p.x
            })
            .collect();
        let sd = (2.0 * t_end).sqrt();
        let d = ks_statistic(&mut xs, |x| crate::special::normal_cdf((x - 1.0) / sd));
        assert!(d < ks_critical_value(20_000.0, 0.001), "D = {d}");
    }

    #[test]
    fn kdmc_fluid_reflecting_keeps_unit_weight() {
        let bg = Background::homogeneous(0.0, 1.0, 101, CellParams::new(100.0, 1e7, 1e7)).unwrap();
        let walls = Walls::around(&bg, BoundaryKind::Reflecting).unwrap();
        let mut counters = Counters::default();
        for sampler in [SamplerKind::Basic, SamplerKind::Efficient] {
            let opts = KdmcOptions { dt: 1e-4, mode: StepMode::Fluid, sampler, boundary_sigma_threshold: 2.0 };
            for i in 0..200 {
                let mut rng = RngStream::new(4, i);
                let mut p = ParticleState::new(0.98, 100.0);
                kdmc_solve(&mut p, &bg, &walls, 2e-3, &opts, &mut rng, &mut counters).unwrap();
                assert!(p.alive && p.w == 1.0 && bg.contains(p.x) && p.t == 2e-3);
            }
        }
        assert_eq!(counters.fallback_steps, 0);
    }

    #[test]
    fn low_collisionality_rarely_diffuses() {
        // R dt = 0.05: a step reaches the diffusive phase with probability 1 - e^{-0.05}.
        let bg = Background::homogeneous(-1e6, 1e6, 1, CellParams::new(0.0, 1.0, 5e4)).unwrap();
        let walls = Walls::around(&bg, BoundaryKind::Reflecting).unwrap();
        let opts =
            KdmcOptions { dt: 1e-6, mode: StepMode::Kin, sampler: SamplerKind::Basic, boundary_sigma_threshold: 2.0 };
        let mut counters = Counters::default();
        let n = 100_000;
        for i in 0..n {
            let mut rng = RngStream::new(5, i);
            let mut p = ParticleState::new(0.0, 1.0);
            kdmc_step(&mut p, &bg, &walls, &opts, &mut rng, &mut counters).unwrap();
        }
        let q = 1.0 - (-0.05f64).exp();
        let frac = counters.diffusive_steps as f64 / n as f64;
        assert!((frac - q).abs() < 5.0 * (q * (1.0 - q) / n as f64).sqrt(), "{frac} vs {q}");
    }

    #[test]
    fn one_step_mean_matches_drift() {
        let bg = Background::homogeneous(-1e3, 1e3, 1, CellParams::new(100.0, 1e7, 1e7)).unwrap();
        let walls = Walls::around(&bg, BoundaryKind::Reflecting).unwrap();
        let dt = 1e-6;
        for mode in [StepMode::Kin, StepMode::Fluid] {
            let opts = KdmcOptions { dt, mode, sampler: SamplerKind::Efficient, boundary_sigma_threshold: 2.0 };
            let mut counters = Counters::default();
            let xs: Vec<f64> = (0..100_000)
                .map(|i| {
                    let mut rng = RngStream::new(6, i);
                    let v = rng.gaussian(100.0, 1e7f64.sqrt());
                    let mut p = ParticleState::new(0.0, v);
                    kdmc_step(&mut p, &bg, &walls, &opts, &mut rng, &mut counters).unwrap();
                    p.x
                })
                .collect();
            let m = Moments::from_samples(&xs);
            assert!((m.mean - 100.0 * dt).abs() < 3.0 * m.std_error(), "{mode:?}: {}", m.mean);
        }
    }

    #[test]
    fn kin_mode_falls_back_next_to_wall() {
        let bg = Background::homogeneous(0.0, 1.0, 101, CellParams::new(100.0, 1e7, 1e7)).unwrap();
        let walls = Walls::around(&bg, BoundaryKind::Reflecting).unwrap();
        let opts =
            KdmcOptions { dt: 1e-3, mode: StepMode::Kin, sampler: SamplerKind::Basic, boundary_sigma_threshold: 2.0 };
        let mut counters = Counters::default();
        for i in 0..20 {
            let mut rng = RngStream::new(7, i);
            let mut p = ParticleState::new(0.98, 100.0);
            kdmc_solve(&mut p, &bg, &walls, 1e-3, &opts, &mut rng, &mut counters).unwrap();
            assert!(p.alive && p.w == 1.0);
        }
        assert_eq!(counters.fallback_trajectories, 20);
    }
}
