//! Transition density of constant-coefficient drift-diffusion on a half-line.
//!
//! For `dX = nu dt + sqrt(2D) dW` started at `x0` on `(-inf, L]` with
//! `alpha p + beta dp/dx = 0` at `L`, the density is
//!
//! ```text
//! p(x,t) = U(x,t,x0) + k U(x,t,x_R) + p3(x,t)
//! p3     = -2 (alpha/beta + nu/2D) k  int_{x_R}^inf exp(-(alpha/beta)(eta - x_R)) U(x,t,eta) deta
//! U(x,t,eta) = exp(-(x - eta - nu t)^2 / 4Dt) / sqrt(4 pi D t)
//! k = exp(nu (L - x0) / D),  x_R = 2L - x0
//! ```
//!
//! and an absorbing wall (`beta = 0`) gives `U(x,t,x0) - k U(x,t,x_R)`. The
//! `eta` integral is a Gaussian integral against an exponential, so it is
//! evaluated in closed form:
//!
//! ```text
//! p3 = c3 exp(g (x - L) + (a - g)(L - x0) + g t (g D - nu)) Phi((x - nu t + 2 g D t - x_R) / sqrt(2Dt))
//! c3 = 2g - a,  g = -alpha/beta,  a = nu/D
//! ```
//!
//! A reflecting (zero-flux) wall is `alpha/beta = -nu/D`, for which
//! `p3 = a exp(a (x - L)) Phi((x + nu t - x_R) / sqrt(2Dt))`: positive when the
//! drift points at the wall, negative when it points away.
//!
//! All exponentials of image terms are combined in the log domain before
//! exponentiation; `nu (L - x0) / D` routinely exceeds 700 in KDMC steps.
//! Walls on the left are handled by the mirror map `x -> -x`, `nu -> -nu`.

use std::f64::consts::PI;

use crate::error::{ensure, Error, Result};
use crate::model::{BoundaryKind, Side};
use crate::special::{erfcx, ln_gaussian_norm, ln_normal_cdf, normal_cdf, normal_sf};

/// Below this value of `|g| sqrt(2Dt)` the image-integral mass uses its
/// first-order expansion in `g` instead of the difference formula.
const SMALL_RATE_SCALE: f64 = 1e-5;

/// Wall condition seen by the Green's function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GreenBoundary {
    /// Zero flux, `alpha/beta = -nu/D`.
    Reflecting,
    Absorbing,
    /// General Robin wall given by `alpha/beta`, in the caller's coordinates.
    Robin {
        alpha_over_beta: f64,
    },
}

impl From<BoundaryKind> for GreenBoundary {
    fn from(kind: BoundaryKind) -> Self {
        match kind {
            BoundaryKind::Reflecting => GreenBoundary::Reflecting,
            BoundaryKind::Absorbing => GreenBoundary::Absorbing,
            BoundaryKind::Robin { alpha, beta } => GreenBoundary::Robin { alpha_over_beta: alpha / beta },
        }
    }
}

/// One evaluation point of the boundary Green's function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenParams {
    pub nu: f64,
    pub d: f64,
    pub boundary: f64,
    pub side: Side,
    pub x0: f64,
    pub t: f64,
    pub kind: GreenBoundary,
}

/// The three signed contributions to the density at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdfTerms {
    pub free: f64,
    pub image: f64,
    pub image_integral: f64,
}

impl PdfTerms {
    pub fn total(&self) -> f64 {
        self.free + self.image + self.image_integral
    }
}

/// Domain-restricted masses of each term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Masses {
    /// Mass of the free kernel inside the domain, `1 - Q2`.
    pub free_inside: f64,
    /// Mass of the free kernel beyond the wall, `Q2`.
    pub free_outside: f64,
    /// Signed mass of the mirror-image term inside the domain.
    pub image: f64,
    /// Signed mass of the image integral inside the domain.
    pub image_integral: f64,
    /// `Q1 = image + image_integral`, the mass the wall terms put back into
    /// the domain. Equal to `Q2` for a reflecting wall, where the sum of the
    /// two signed terms would cancel.
    pub wall_terms: f64,
}

impl Masses {
    /// Survival mass `Q`.
    pub fn total(&self) -> f64 {
        self.free_inside + self.image + self.image_integral
    }
}

impl GreenParams {
    pub fn new(nu: f64, d: f64, boundary: f64, side: Side, x0: f64, t: f64, kind: GreenBoundary) -> Result<Self> {
        let gp = Self { nu, d, boundary, side, x0, t, kind };
        gp.validate()?;
        Ok(gp)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.nu.is_finite(), Parameter, "drift must be finite, got {}", self.nu);
        ensure!(self.d.is_finite() && self.d > 0.0, Parameter, "diffusion must be positive, got {}", self.d);
        ensure!(self.t.is_finite() && self.t > 0.0, Parameter, "time must be positive, got {}", self.t);
        ensure!(self.boundary.is_finite(), Parameter, "boundary location must be finite");
        let inside = match self.side {
            Side::Right => self.x0 < self.boundary,
            Side::Left => self.x0 > self.boundary,
        };
        ensure!(
            inside,
            Parameter,
            "start point {} is not strictly inside the domain bounded by {:?} wall at {}",
            self.x0,
            self.side,
            self.boundary
        );
        if let GreenBoundary::Robin { alpha_over_beta } = self.kind {
            ensure!(alpha_over_beta.is_finite(), Parameter, "alpha/beta must be finite");
        }
        Ok(())
    }

    /// `x_R = 2L - x0`.
    pub fn mirror_point(&self) -> f64 {
        2.0 * self.boundary - self.x0
    }

    /// Whether `x` lies in the closed domain.
    pub fn in_domain(&self, x: f64) -> bool {
        match self.side {
            Side::Right => x <= self.boundary,
            Side::Left => x >= self.boundary,
        }
    }

    /// Same problem with the wall moved to the right-hand side.
    pub fn mirrored(&self) -> Self {
        let kind = match self.kind {
            GreenBoundary::Robin { alpha_over_beta } => GreenBoundary::Robin { alpha_over_beta: -alpha_over_beta },
            k => k,
        };
        Self {
            nu: -self.nu,
            d: self.d,
            boundary: -self.boundary,
            side: match self.side {
                Side::Left => Side::Right,
                Side::Right => Side::Left,
            },
            x0: -self.x0,
            t: self.t,
            kind,
        }
    }

    /// Free-space kernel `U(x, t, eta)`.
    pub fn free_kernel(&self, x: f64, eta: f64) -> f64 {
        let var = 2.0 * self.d * self.t;
        let r = x - eta - self.nu * self.t;
        (ln_gaussian_norm(var) - r * r / (2.0 * var)).exp()
    }

    /// Density terms at `x` without a domain check; outside the domain this
    /// is the analytic continuation of the formula.
    pub fn terms(&self, x: f64) -> PdfTerms {
        let hl = HalfLine::new(self);
        hl.terms(hl.local_x(x))
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !self.in_domain(x) {
            return Err(self.outside(x));
        }
        Ok(self.pdf_unchecked(x))
    }

    /// Density without a domain check.
    pub fn pdf_unchecked(&self, x: f64) -> f64 {
        let hl = HalfLine::new(self);
        hl.pdf(hl.local_x(x))
    }

    pub fn masses(&self) -> Masses {
        HalfLine::new(self).masses()
    }

    /// Survival mass `Q`.
    pub fn mass(&self) -> f64 {
        self.masses().total()
    }

    /// `(Q1, Q2)`: the in-domain mass of the wall terms and the free-kernel
    /// mass beyond the wall. Only defined for non-absorbing walls.
    pub fn mass_split(&self) -> Result<(f64, f64)> {
        if self.kind == GreenBoundary::Absorbing {
            return Err(Error::Unsupported("mass split is defined for Robin and reflecting walls only".into()));
        }
        let m = self.masses();
        Ok((m.wall_terms, m.free_outside))
    }

    fn outside(&self, x: f64) -> Error {
        let (x_min, x_max) = match self.side {
            Side::Right => (f64::NEG_INFINITY, self.boundary),
            Side::Left => (self.boundary, f64::INFINITY),
        };
        Error::Domain { x, x_min, x_max }
    }
}

/// `U(x, t, eta)` for `gp`.
pub fn green_u(x: f64, gp: &GreenParams, eta: f64) -> f64 {
    gp.free_kernel(x, eta)
}

pub fn green_pdf(x: f64, gp: &GreenParams) -> Result<f64> {
    gp.pdf(x)
}

pub fn green_mass_q(gp: &GreenParams) -> f64 {
    gp.mass()
}

pub fn green_mass_split(gp: &GreenParams) -> Result<(f64, f64)> {
    gp.mass_split()
}

/// Wall treatment after mapping to a right-hand wall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum LocalWall {
    Absorbing,
    /// `gamma = -alpha/beta` in local coordinates, `c3 = 2 gamma - nu/D`.
    Robin {
        gamma: f64,
        c3: f64,
        reflecting: bool,
    },
}

/// The problem in right-wall coordinates with derived scales.
#[derive(Debug, Clone, Copy)]
pub(crate) struct HalfLine {
    pub sign: f64,
    pub nu: f64,
    pub d: f64,
    pub t: f64,
    pub l: f64,
    pub x0: f64,
    /// `L - x0 > 0`.
    pub gap: f64,
    /// Standard deviation `sqrt(2Dt)` of the free kernel.
    pub s: f64,
    pub wall: LocalWall,
}

impl HalfLine {
    pub fn new(gp: &GreenParams) -> Self {
        let sign = match gp.side {
            Side::Right => 1.0,
            Side::Left => -1.0,
        };
        let nu = sign * gp.nu;
        let a = nu / gp.d;
        let wall = match gp.kind {
            GreenBoundary::Absorbing => LocalWall::Absorbing,
            GreenBoundary::Reflecting => LocalWall::Robin { gamma: a, c3: a, reflecting: true },
            GreenBoundary::Robin { alpha_over_beta } => {
                let gamma = -sign * alpha_over_beta;
                LocalWall::Robin { gamma, c3: 2.0 * gamma - a, reflecting: false }
            }
        };
        let l = sign * gp.boundary;
        let x0 = sign * gp.x0;
        Self { sign, nu, d: gp.d, t: gp.t, l, x0, gap: l - x0, s: (2.0 * gp.d * gp.t).sqrt(), wall }
    }

    #[inline]
    pub fn local_x(&self, x: f64) -> f64 {
        self.sign * x
    }

    #[inline]
    pub fn global_x(&self, x: f64) -> f64 {
        self.sign * x
    }

    pub fn free_mean(&self) -> f64 {
        self.x0 + self.nu * self.t
    }

    pub fn image_mean(&self) -> f64 {
        2.0 * self.l - self.x0 + self.nu * self.t
    }

    /// `p2 / p1 = exp(-(L - x0)(L - x) / (D t))`; independent of the drift.
    #[inline]
    fn image_exponent(&self, x: f64) -> f64 {
        -self.gap * (self.l - x) / (self.d * self.t)
    }

    pub fn free(&self, x: f64) -> f64 {
        let r = (x - self.free_mean()) / self.s;
        (ln_gaussian_norm(self.s * self.s) - 0.5 * r * r).exp()
    }

    pub fn image_integral(&self, x: f64) -> f64 {
        match self.wall {
            LocalWall::Absorbing => 0.0,
            LocalWall::Robin { gamma, c3, .. } => {
                if c3 == 0.0 {
                    return 0.0;
                }
                let a = self.nu / self.d;
                let exponent =
                    gamma * (x - self.l) + (a - gamma) * self.gap + gamma * self.t * (gamma * self.d - self.nu);
                let z = (x - self.nu * self.t + 2.0 * gamma * self.d * self.t - (self.l + self.gap)) / self.s;
                c3 * (exponent + ln_normal_cdf(z)).exp()
            }
        }
    }

    pub fn terms(&self, x: f64) -> PdfTerms {
        let free = self.free(x);
        let image = free * self.image_exponent(x).exp();
        match self.wall {
            LocalWall::Absorbing => PdfTerms { free, image: -image, image_integral: 0.0 },
            LocalWall::Robin { .. } => PdfTerms { free, image, image_integral: self.image_integral(x) },
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self.wall {
            // p1 (1 - exp(..)) keeps full relative precision next to the wall.
            LocalWall::Absorbing => -self.free(x) * self.image_exponent(x).exp_m1(),
            LocalWall::Robin { .. } => self.terms(x).total(),
        }
    }

    /// `ln` of the in-domain mass of `exp(nu (L - x0) / D) U(., t, x_R)`.
    fn ln_image_mass(&self) -> f64 {
        let u = (self.gap - self.nu * self.t) / self.s;
        let w = (self.gap + self.nu * self.t) / self.s;
        if w > 0.0 {
            // nu (L - x0)/D - w^2/2 = -u^2/2 exactly.
            -0.5 * u * u + (0.5 * erfcx(w * std::f64::consts::FRAC_1_SQRT_2)).ln()
        } else {
            self.nu * self.gap / self.d + ln_normal_cdf(-w)
        }
    }

    pub fn masses(&self) -> Masses {
        let u = (self.gap - self.nu * self.t) / self.s;
        let free_inside = normal_cdf(u);
        let free_outside = normal_sf(u);
        let image_abs = self.ln_image_mass().exp();
        match self.wall {
            LocalWall::Absorbing => {
                Masses { free_inside, free_outside, image: -image_abs, image_integral: 0.0, wall_terms: -image_abs }
            }
            LocalWall::Robin { gamma, c3, reflecting } => {
                let image_integral = if c3 == 0.0 {
                    0.0
                } else if reflecting {
                    // c3/gamma = 1 and the shifted term is exactly Q2.
                    free_outside - image_abs
                } else {
                    self.image_integral_mass(gamma, c3, image_abs)
                };
                Masses {
                    free_inside,
                    free_outside,
                    image: image_abs,
                    image_integral,
                    wall_terms: if reflecting { free_outside } else { image_abs + image_integral },
                }
            }
        }
    }

    /// In-domain mass of the image integral,
    /// `c3 k int_0^inf exp(g u) Phi((b - u)/s) du` with `b = -(L - x0 + nu t)`.
    fn image_integral_mass(&self, gamma: f64, c3: f64, image_mass: f64) -> f64 {
        if (gamma * self.s).abs() < SMALL_RATE_SCALE {
            self.image_integral_mass_series(gamma, c3, image_mass)
        } else {
            self.image_integral_mass_direct(gamma, c3, image_mass)
        }
    }

    /// First order in `g`: `c3 (k J0 + g k J1)` with `J0 = s G1(-w)` and
    /// `J1 = s^2 G2(-w)`.
    fn image_integral_mass_series(&self, gamma: f64, c3: f64, image_mass: f64) -> f64 {
        let w = (self.gap + self.nu * self.t) / self.s;
        let u = (self.gap - self.nu * self.t) / self.s;
        let k_phi = (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
        let k_j0 = self.s * (k_phi - w * image_mass);
        let k_j1 = 0.5 * self.s * self.s * ((w * w + 1.0) * image_mass - w * k_phi);
        c3 * (k_j0 + gamma * k_j1)
    }

    fn image_integral_mass_direct(&self, gamma: f64, c3: f64, image_mass: f64) -> f64 {
        let a = self.nu / self.d;
        let ln_shift = (a - gamma) * self.gap + gamma * self.t * (gamma * self.d - self.nu);
        let z = (2.0 * gamma * self.d * self.t - self.gap - self.nu * self.t) / self.s;
        let shifted = (ln_shift + ln_normal_cdf(z)).exp();
        c3 / gamma * (shifted - image_mass)
    }
}
