//! Particles, the piecewise-constant plasma background, and wall definitions.

use crate::error::{ensure, Error, Result};

/// One simulated neutral. `t` is the particle's own clock in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleState {
    pub x: f64,
    pub v: f64,
    pub w: f64,
    pub t: f64,
    pub alive: bool,
}

impl ParticleState {
    pub fn new(x: f64, v: f64) -> Self {
        Self { x, v, w: 1.0, t: 0.0, alive: true }
    }

    /// Removes the particle; its weight is reported back so callers can
    /// account for it.
    pub fn absorb(&mut self) -> f64 {
        let w = self.w;
        self.w = 0.0;
        self.alive = false;
        w
    }
}

/// Plasma parameters of one cell: post-collision velocity mean and variance,
/// and the charge-exchange rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellParams {
    pub nu_p: f64,
    pub sigma_p2: f64,
    pub r_cx: f64,
}

impl CellParams {
    pub fn new(nu_p: f64, sigma_p2: f64, r_cx: f64) -> Self {
        Self { nu_p, sigma_p2, r_cx }
    }

    pub fn sigma_p(&self) -> f64 {
        self.sigma_p2.sqrt()
    }
}

/// Uniform grid over `[x_min, x_max]` with per-cell plasma parameters.
///
/// Cells are half-open `[x_i, x_{i+1})`, except that `x_max` belongs to the
/// last cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    x_min: f64,
    x_max: f64,
    width: f64,
    cells: Vec<CellParams>,
}

impl Background {
    pub fn new(x_min: f64, x_max: f64, cells: Vec<CellParams>) -> Result<Self> {
        ensure!(
            x_min.is_finite() && x_max.is_finite() && x_max > x_min,
            Parameter,
            "domain [{x_min}, {x_max}] is empty or not finite"
        );
        ensure!(!cells.is_empty(), Parameter, "background needs at least one cell");
        for (i, c) in cells.iter().enumerate() {
            ensure!(c.r_cx.is_finite() && c.r_cx > 0.0, Parameter, "cell {i}: R_cx must be positive, got {}", c.r_cx);
            ensure!(
                c.sigma_p2.is_finite() && c.sigma_p2 > 0.0,
                Parameter,
                "cell {i}: sigma_p^2 must be positive, got {}",
                c.sigma_p2
            );
            ensure!(c.nu_p.is_finite(), Parameter, "cell {i}: nu_p must be finite");
        }
        let width = (x_max - x_min) / cells.len() as f64;
        Ok(Self { x_min, x_max, width, cells })
    }

    pub fn homogeneous(x_min: f64, x_max: f64, n_cells: usize, params: CellParams) -> Result<Self> {
        ensure!(n_cells > 0, Parameter, "n_cells must be positive");
        Self::new(x_min, x_max, vec![params; n_cells])
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_width(&self) -> f64 {
        self.width
    }

    pub fn cells(&self) -> &[CellParams] {
        &self.cells
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.width
    }

    /// Edges of cell `i`; the outer edges are exactly the domain bounds.
    pub fn cell_edges(&self, i: usize) -> (f64, f64) {
        let n = self.cells.len();
        let lo = if i == 0 { self.x_min } else { self.x_min + i as f64 * self.width };
        let hi = if i + 1 == n { self.x_max } else { self.x_min + (i + 1) as f64 * self.width };
        (lo, hi)
    }

    pub fn cell_of(&self, x: f64) -> Result<usize> {
        if !self.contains(x) {
            return Err(Error::Domain { x, x_min: self.x_min, x_max: self.x_max });
        }
        Ok(self.cell_index(x))
    }

    fn cell_index(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.width).floor() as usize;
        i.min(self.cells.len() - 1)
    }

    pub fn local_params(&self, x: f64) -> Result<CellParams> {
        self.cell_of(x).map(|i| self.cells[i])
    }

    /// Cell a particle at `x` moving with velocity `v` is about to traverse.
    /// A particle sitting on an interior edge and moving left belongs to the
    /// cell on the left.
    pub(crate) fn cell_along(&self, x: f64, v: f64) -> usize {
        let mut i = self.cell_index(x.clamp(self.x_min, self.x_max));
        let (lo, hi) = self.cell_edges(i);
        if v < 0.0 && x <= lo && i > 0 {
            i -= 1;
        } else if v > 0.0 && x >= hi && i + 1 < self.cells.len() {
            i += 1;
        }
        i
    }

    /// d(1/R_cx)/dx at cell `i` from cell-centre values: central differences
    /// in the interior, one-sided at the ends, zero for a single cell.
    pub fn inv_rcx_gradient(&self, i: usize) -> f64 {
        let n = self.cells.len();
        if n == 1 {
            return 0.0;
        }
        let inv = |j: usize| 1.0 / self.cells[j].r_cx;
        let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
        (inv(hi) - inv(lo)) / ((hi - lo) as f64 * self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryKind {
    Reflecting,
    Absorbing,
    /// `alpha * p + beta * dp/dx = 0` at the wall, with `beta != 0`.
    Robin {
        alpha: f64,
        beta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec {
    pub side: Side,
    pub location: f64,
    pub kind: BoundaryKind,
}

impl BoundarySpec {
    pub fn new(side: Side, location: f64, kind: BoundaryKind) -> Result<Self> {
        ensure!(location.is_finite(), Parameter, "boundary location must be finite");
        if let BoundaryKind::Robin { alpha, beta } = kind {
            ensure!(alpha.is_finite() && beta.is_finite(), Parameter, "Robin coefficients must be finite");
            ensure!(
                beta != 0.0,
                Parameter,
                "Robin condition with beta = 0 is an absorbing wall; use BoundaryKind::Absorbing"
            );
        }
        Ok(Self { side, location, kind })
    }

    pub fn reflecting(side: Side, location: f64) -> Self {
        Self { side, location, kind: BoundaryKind::Reflecting }
    }

    pub fn absorbing(side: Side, location: f64) -> Self {
        Self { side, location, kind: BoundaryKind::Absorbing }
    }

    /// Robin coefficients `(alpha, beta)` for drift `nu` and diffusion `d`.
    /// A reflecting wall is the zero-flux condition `nu p - D p_x = 0`.
    /// Absorbing walls have no finite ratio and return `None`.
    pub fn robin_coefficients(&self, nu: f64, d: f64) -> Option<(f64, f64)> {
        match self.kind {
            BoundaryKind::Reflecting => Some((nu, -d)),
            BoundaryKind::Absorbing => None,
            BoundaryKind::Robin { alpha, beta } => Some((alpha, beta)),
        }
    }
}

/// The two walls of the 1D domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Walls {
    pub left: BoundarySpec,
    pub right: BoundarySpec,
}

impl Walls {
    pub fn new(left: BoundarySpec, right: BoundarySpec) -> Result<Self> {
        ensure!(
            left.side == Side::Left && right.side == Side::Right,
            Parameter,
            "walls must be given as (left, right)"
        );
        ensure!(
            left.location < right.location,
            Parameter,
            "left wall {} must lie below right wall {}",
            left.location,
            right.location
        );
        Ok(Self { left, right })
    }

    /// Walls of the same kind at both ends of the background's domain.
    pub fn around(bg: &Background, kind: BoundaryKind) -> Result<Self> {
        Self::new(BoundarySpec::new(Side::Left, bg.x_min(), kind)?, BoundarySpec::new(Side::Right, bg.x_max(), kind)?)
    }

    pub fn get(&self, side: Side) -> &BoundarySpec {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    /// Wall closest to `x`, ties going right.
    pub fn nearest(&self, x: f64) -> &BoundarySpec {
        if x - self.left.location < self.right.location - x {
            &self.left
        } else {
            &self.right
        }
    }

    pub fn matches(&self, bg: &Background) -> bool {
        self.left.location == bg.x_min() && self.right.location == bg.x_max()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Kinetic,
    Fluid,
    KdmcKin,
    KdmcFluid,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] =
        [SolverKind::Kinetic, SolverKind::Fluid, SolverKind::KdmcKin, SolverKind::KdmcFluid];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Kinetic => "kinetic",
            SolverKind::Fluid => "fluid",
            SolverKind::KdmcKin => "kdmc_kin",
            SolverKind::KdmcFluid => "kdmc_fluid",
        }
    }

    /// Solvers whose result depends on the KDMC time step.
    pub fn uses_time_step(self) -> bool {
        matches!(self, SolverKind::KdmcKin | SolverKind::KdmcFluid)
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown solver '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerKind {
    #[default]
    Basic,
    Efficient,
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(SamplerKind::Basic),
            "efficient" => Ok(SamplerKind::Efficient),
            _ => Err(Error::Parameter(format!("unknown sampler '{s}'"))),
        }
    }
}

pub const DEFAULT_SIGMA_THRESHOLD: f64 = 2.0;

/// Run-level knobs for one solver invocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub t_final: f64,
    pub n_particles: u64,
    pub seed: u64,
    pub solver: SolverKind,
    pub sampler: SamplerKind,
    pub boundary_sigma_threshold: f64,
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.dt.is_finite() && self.dt > 0.0, Parameter, "dt must be positive, got {}", self.dt);
        ensure!(
            self.t_final.is_finite() && self.t_final >= self.dt,
            Parameter,
            "t_final ({}) must be at least dt ({})",
            self.t_final,
            self.dt
        );
        ensure!(self.n_particles >= 1, Parameter, "need at least one particle");
        ensure!(
            self.boundary_sigma_threshold.is_finite() && self.boundary_sigma_threshold >= 0.0,
            Parameter,
            "boundary sigma threshold must be non-negative"
        );
        Ok(())
    }
}
