//! Analog kinetic Monte Carlo: exponential free flights between
//! charge-exchange collisions, with exact wall interaction.

use crate::error::{ensure, Error, Result};
use crate::model::{Background, BoundaryKind, ParticleState, Side, Walls};
use crate::sampling::RngStream;
use crate::tally::Counters;

/// Bound on wall hits in one collision-free flight; only reachable with
/// absurd velocities.
const MAX_WALL_HITS: u32 = 1_000_000;

/// What ended one call to [`kinetic_flight`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlightEvent {
    Collision,
    CellEdge,
    Reflected(Side),
    /// The particle left through an absorbing wall carrying `weight`.
    Absorbed {
        side: Side,
        weight: f64,
    },
    Horizon,
}

/// Advances `p` through exactly one event: collision, cell-edge crossing,
/// wall hit, or reaching `t_end`. The flight clock is redrawn on every call,
/// which is exact for a piecewise-constant collision rate.
pub fn kinetic_flight(
    p: &mut ParticleState,
    bg: &Background,
    walls: &Walls,
    t_end: f64,
    rng: &mut RngStream,
) -> Result<FlightEvent> {
    ensure!(p.alive, Parameter, "kinetic flight of a dead particle");
    if p.t >= t_end {
        return Ok(FlightEvent::Horizon);
    }
    let cell = bg.cell_along(p.x, p.v);
    let params = bg.cells()[cell];
    let (lo, hi) = bg.cell_edges(cell);
    let tau = rng.exponential(params.r_cx);
    let remaining = t_end - p.t;
    let t_edge = if p.v > 0.0 {
        (hi - p.x) / p.v
    } else if p.v < 0.0 {
        (lo - p.x) / p.v
    } else {
        f64::INFINITY
    };

    if t_edge <= tau && t_edge <= remaining {
        let at_wall = if p.v > 0.0 { hi } else { lo };
        p.x = at_wall;
        p.t = if t_edge >= remaining { t_end } else { (p.t + t_edge).min(t_end) };
        let side = if p.v > 0.0 && hi == bg.x_max() {
            Some(Side::Right)
        } else if p.v < 0.0 && lo == bg.x_min() {
            Some(Side::Left)
        } else {
            None
        };
        return match side {
            None => Ok(FlightEvent::CellEdge),
            Some(side) => hit_wall(p, walls, side),
        };
    }
    if tau < remaining {
        p.x = (p.x + p.v * tau).clamp(lo, hi);
        p.t += tau;
        p.v = rng.gaussian(params.nu_p, params.sigma_p());
        return Ok(FlightEvent::Collision);
    }
    p.x = (p.x + p.v * remaining).clamp(lo, hi);
    p.t = t_end;
    Ok(FlightEvent::Horizon)
}

fn hit_wall(p: &mut ParticleState, walls: &Walls, side: Side) -> Result<FlightEvent> {
    match walls.get(side).kind {
        BoundaryKind::Reflecting => {
            p.v = -p.v;
            Ok(FlightEvent::Reflected(side))
        }
        BoundaryKind::Absorbing => Ok(FlightEvent::Absorbed { side, weight: p.absorb() }),
        BoundaryKind::Robin { .. } => {
            Err(Error::Unsupported("kinetic particles need a reflecting or absorbing wall".into()))
        }
    }
}

/// Runs [`kinetic_flight`] until the particle reaches `t_end` or is absorbed.
pub fn kinetic_solve(
    p: &mut ParticleState,
    bg: &Background,
    walls: &Walls,
    t_end: f64,
    rng: &mut RngStream,
    counters: &mut Counters,
) -> Result<()> {
    while p.alive && p.t < t_end {
        let event = kinetic_flight(p, bg, walls, t_end, rng)?;
        counters.record_flight(&event);
    }
    Ok(())
}

/// Collision-free flight of duration `duration` with the current velocity,
/// reflecting or absorbing at the walls.
pub(crate) fn free_flight(p: &mut ParticleState, walls: &Walls, duration: f64, counters: &mut Counters) -> Result<()> {
    let mut remaining = duration;
    for _ in 0..MAX_WALL_HITS {
        let x_new = p.x + p.v * remaining;
        let side = if x_new > walls.right.location {
            Side::Right
        } else if x_new < walls.left.location {
            Side::Left
        } else {
            p.x = x_new;
            return Ok(());
        };
        let wall = walls.get(side).location;
        remaining -= ((wall - p.x) / p.v).clamp(0.0, remaining);
        p.x = wall;
        let event = hit_wall(p, walls, side)?;
        counters.record_flight(&event);
        if !p.alive {
            return Ok(());
        }
    }
    Err(Error::Numerical(format!("free flight hit the walls {MAX_WALL_HITS} times (v = {})", p.v)))
}
