//! Exact draws from the boundary Green's function.
//!
//! Both samplers return a position together with a multiplicative weight
//! factor. Weighted samples reproduce the density `p` of [`GreenParams`],
//! whose total mass `Q` is 1 for a reflecting wall and below 1 when the wall
//! removes particles.
//!
//! * The basic sampler mixes the positive terms restricted to the domain and
//!   corrects by rejection when the image integral is negative.
//! * The efficient sampler draws the free kernel on the whole line; interior
//!   points are returned as they are and only wall crossers go through the
//!   wall-term sampler. Far from the wall nothing but one Gaussian draw
//!   happens, and no mass is evaluated.

use crate::error::{Error, Result};
use crate::greens::{GreenBoundary, GreenParams, HalfLine, LocalWall};
use crate::model::SamplerKind;
use crate::sampling::{sample_truncated_gaussian, truncated_standard_normal, RngStream, MAX_REJECTION_ITERATIONS};

/// `2 phi(0)`, the mass of `|w| phi(w)` over the real line.
const ABS_NORMAL_MASS: f64 = 0.797_884_560_802_865_4;

/// Tolerance on acceptance ratios before they count as an invariant breach.
const RATIO_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedSample {
    pub x: f64,
    pub weight_factor: f64,
}

/// Proposal and rejection counts accumulated across draws.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SamplerStats {
    pub proposals: u64,
    pub rejections: u64,
}

impl SamplerStats {
    pub fn merge(&mut self, other: &Self) {
        self.proposals += other.proposals;
        self.rejections += other.rejections;
    }

    fn accepted(&mut self) {
        self.proposals += 1;
    }

    fn rejected(&mut self) {
        self.proposals += 1;
        self.rejections += 1;
    }
}

pub fn sample_position(
    kind: SamplerKind,
    gp: &GreenParams,
    rng: &mut RngStream,
    stats: &mut SamplerStats,
) -> Result<WeightedSample> {
    match kind {
        SamplerKind::Basic => sample_basic(gp, rng, stats),
        SamplerKind::Efficient => sample_efficient(gp, rng, stats),
    }
}

/// Samples the full density restricted to the domain; the weight factor is
/// the survival mass `Q`.
pub fn sample_basic(gp: &GreenParams, rng: &mut RngStream, stats: &mut SamplerStats) -> Result<WeightedSample> {
    gp.validate()?;
    let hl = HalfLine::new(gp);
    let m = hl.masses();
    let x = match hl.wall {
        LocalWall::Absorbing => {
            let mut accept = |x: f64| -(-hl.gap * (hl.l - x) / (hl.d * hl.t)).exp_m1();
            rejection_loop(rng, stats, |rng| free_inside(&hl, rng), &mut accept)?
        }
        LocalWall::Robin { c3, gamma, .. } if c3 > 0.0 => {
            let total = m.free_inside + m.image + m.image_integral;
            let u = rng.uniform() * total;
            stats.accepted();
            if u < m.free_inside {
                free_inside(&hl, rng)?
            } else if u < m.free_inside + m.image {
                image_inside(&hl, rng)?
            } else {
                image_integral_positive(&hl, gamma, rng, stats)?
            }
        }
        LocalWall::Robin { .. } => {
            let split = m.free_inside / (m.free_inside + m.image);
            let propose = |rng: &mut RngStream| {
                if rng.uniform() < split {
                    free_inside(&hl, rng)
                } else {
                    image_inside(&hl, rng)
                }
            };
            let mut accept = |x: f64| {
                let t = hl.terms(x);
                let positive = t.free + t.image;
                if positive > 0.0 {
                    t.total() / positive
                } else {
                    1.0
                }
            };
            rejection_loop(rng, stats, propose, &mut accept)?
        }
    };
    let weight_factor = if gp.kind == GreenBoundary::Reflecting { 1.0 } else { m.total() };
    Ok(WeightedSample { x: hl.global_x(x), weight_factor })
}

/// Free-kernel draw first; only crossers see the wall terms. Interior
/// points keep weight 1 (or the bridge survival probability for an absorbing
/// wall); crossers carry `Q1 / Q2`, exactly 1 for a reflecting wall.
pub fn sample_efficient(gp: &GreenParams, rng: &mut RngStream, stats: &mut SamplerStats) -> Result<WeightedSample> {
    gp.validate()?;
    let hl = HalfLine::new(gp);
    let z = rng.gaussian(hl.free_mean(), hl.s);
    stats.accepted();
    if z <= hl.l {
        let weight_factor = match hl.wall {
            // Probability the Brownian bridge from x0 to z avoids the wall.
            LocalWall::Absorbing => -(-hl.gap * (hl.l - z) / (hl.d * hl.t)).exp_m1(),
            LocalWall::Robin { .. } => 1.0,
        };
        return Ok(WeightedSample { x: hl.global_x(z), weight_factor });
    }
    match hl.wall {
        LocalWall::Absorbing => Ok(WeightedSample { x: hl.global_x(hl.l), weight_factor: 0.0 }),
        LocalWall::Robin { gamma, c3, reflecting } => {
            let (x, weight_factor) = if c3 > 0.0 {
                let m = hl.masses();
                let x = if rng.uniform() * (m.image + m.image_integral) < m.image {
                    image_inside(&hl, rng)?
                } else {
                    image_integral_positive(&hl, gamma, rng, stats)?
                };
                (x, if reflecting { 1.0 } else { m.wall_terms / m.free_outside })
            } else {
                let mut accept = |x: f64| {
                    let t = hl.terms(x);
                    if t.image > 0.0 {
                        (t.image + t.image_integral) / t.image
                    } else {
                        1.0
                    }
                };
                let x = rejection_loop_strict(rng, stats, |rng| image_inside(&hl, rng), &mut accept)?;
                let weight_factor = if reflecting {
                    1.0
                } else {
                    let m = hl.masses();
                    m.wall_terms / m.free_outside
                };
                (x, weight_factor)
            };
            Ok(WeightedSample { x: hl.global_x(x), weight_factor })
        }
    }
}

/// Free kernel restricted to `x <= L`.
fn free_inside(hl: &HalfLine, rng: &mut RngStream) -> Result<f64> {
    sample_truncated_gaussian(rng, hl.free_mean(), hl.s, None, Some(hl.l))
}

/// Mirror-image kernel restricted to `x <= L`.
fn image_inside(hl: &HalfLine, rng: &mut RngStream) -> Result<f64> {
    sample_truncated_gaussian(rng, hl.image_mean(), hl.s, None, Some(hl.l))
}

/// Proposals with an acceptance probability; a ratio outside `[0, 1]` beyond
/// rounding is an invariant violation.
fn rejection_loop(
    rng: &mut RngStream,
    stats: &mut SamplerStats,
    mut propose: impl FnMut(&mut RngStream) -> Result<f64>,
    accept: &mut impl FnMut(f64) -> f64,
) -> Result<f64> {
    for _ in 0..MAX_REJECTION_ITERATIONS {
        let x = propose(rng)?;
        let ratio = accept(x);
        if !(-RATIO_SLACK..=1.0 + RATIO_SLACK).contains(&ratio) || ratio.is_nan() {
            return Err(Error::Invariant(format!("acceptance ratio {ratio} outside [0, 1] at x = {x}")));
        }
        if rng.uniform() < ratio {
            stats.accepted();
            return Ok(x);
        }
        stats.rejected();
    }
    Err(Error::Numerical(format!("boundary sampler: no acceptance after {MAX_REJECTION_ITERATIONS} proposals")))
}

/// As [`rejection_loop`], but a ratio outside `[0, 1]` means the image
/// integral outweighs the image term there and this proposal cannot work.
fn rejection_loop_strict(
    rng: &mut RngStream,
    stats: &mut SamplerStats,
    propose: impl FnMut(&mut RngStream) -> Result<f64>,
    accept: &mut impl FnMut(f64) -> f64,
) -> Result<f64> {
    rejection_loop(rng, stats, propose, accept).map_err(|e| match e {
        Error::Invariant(msg) => Error::Unsupported(format!(
            "Robin parameters make the wall-term density negative for the crossing sampler: {msg}"
        )),
        e => e,
    })
}

/// Draw from the positive image integral restricted to the domain. With
/// `u = L - x` its density is proportional to `exp(-g u) Phi(z0 - u/s)`.
/// Writing `Phi(z0 - u/s)` as the integral of `phi` gives a joint density in
/// `(u, y)` whose `y` marginal is `phi(z0 - y)(1 - exp(-g s y))`; given `y`,
/// `u` is an exponential truncated to `[0, s y]`.
fn image_integral_positive(hl: &HalfLine, gamma: f64, rng: &mut RngStream, stats: &mut SamplerStats) -> Result<f64> {
    if gamma <= 0.0 {
        return Err(Error::Unsupported(format!("positive image integral with non-positive decay rate {gamma}")));
    }
    let z0 = (2.0 * gamma * hl.d * hl.t - hl.nu * hl.t - hl.gap) / hl.s;
    let kappa = gamma * hl.s;
    let y = latent_excess(rng, stats, z0, kappa)?;
    let u = -(rng.uniform() * (-kappa * y).exp_m1()).ln_1p() / gamma;
    Ok(hl.l - u)
}

/// `y >= 0` with density proportional to `phi(z0 - y)(1 - exp(-kappa y))`.
fn latent_excess(rng: &mut RngStream, stats: &mut SamplerStats, z0: f64, kappa: f64) -> Result<f64> {
    let typical = if z0 > 1.0 {
        z0
    } else if z0 < -1.0 {
        -1.0 / z0
    } else {
        1.0
    };
    for _ in 0..MAX_REJECTION_ITERATIONS {
        let (y, ratio) = if kappa * typical >= 1.0 {
            // Gaussian proposal; the factor (1 - e^{-kappa y}) is close to 1.
            let y = z0 - truncated_standard_normal(rng, f64::NEG_INFINITY, z0)?;
            (y, -(-kappa * y).exp_m1())
        } else {
            // Ramp proposal y phi(z0 - y); the factor is close to kappa y.
            let y = ramp_gaussian(rng, z0)?;
            let ky = kappa * y;
            (y, if ky > 0.0 { -(-ky).exp_m1() / ky } else { 1.0 })
        };
        if rng.uniform() < ratio {
            stats.accepted();
            return Ok(y);
        }
        stats.rejected();
    }
    Err(Error::Numerical(format!(
        "image-integral sampler: no acceptance after {MAX_REJECTION_ITERATIONS} proposals (z0 = {z0}, kappa = {kappa})"
    )))
}

/// `y >= 0` with density proportional to `y phi(y - z0)`.
fn ramp_gaussian(rng: &mut RngStream, z0: f64) -> Result<f64> {
    for _ in 0..MAX_REJECTION_ITERATIONS {
        if z0 <= -1.0 {
            // Gamma(2, |z0|) envelope, ratio exp(-y^2/2).
            let y = (rng.exponential(1.0) + rng.exponential(1.0)) / -z0;
            if rng.uniform() <= (-0.5 * y * y).exp() {
                return Ok(y);
            }
        } else if z0 <= 0.0 {
            // Rayleigh envelope, ratio exp(z0 y).
            let y = (-2.0 * rng.uniform_pos().ln()).sqrt();
            if rng.uniform() <= (z0 * y).exp() {
                return Ok(y);
            }
        } else {
            // y = z0 + w with w from (|w| + z0) phi(w), ratio (z0 + w)/(|w| + z0).
            let w = if rng.uniform() * (ABS_NORMAL_MASS + z0) < ABS_NORMAL_MASS {
                let r = (-2.0 * rng.uniform_pos().ln()).sqrt();
                if rng.uniform() < 0.5 {
                    -r
                } else {
                    r
                }
            } else {
                rng.standard_normal()
            };
            let y = z0 + w;
            if y >= 0.0 && rng.uniform() * (w.abs() + z0) <= y {
                return Ok(y);
            }
        }
    }
    Err(Error::Numerical(format!(
        "ramp-Gaussian sampler: no acceptance after {MAX_REJECTION_ITERATIONS} proposals (z0 = {z0})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Side;
    use kdmc_oracles::{integrate, ks_critical_value, ks_statistic, ks_weighted, Moments};
    use proptest::prelude::*;

    fn right(nu: f64, d: f64, x0: f64, t: f64, kind: GreenBoundary) -> GreenParams {
        GreenParams::new(nu, d, 1.0, Side::Right, x0, t, kind).unwrap()
    }

    /// CDF of the normalized density of `gp` restricted to the domain, on a
    /// fine grid with linear interpolation.
    fn tabulated_cdf(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> impl Fn(f64) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut acc = vec![0.0];
        for i in 0..n {
            let a = lo + i as f64 * h;
            let v = integrate(&f, a, a + h, 0.0, 1e-12);
            acc.push(acc[i] + v);
        }
        let total = acc[n];
        move |x: f64| {
            if x <= lo {
                return 0.0;
            }
            if x >= hi {
                return 1.0;
            }
            let p = (x - lo) / h;
            let i = (p as usize).min(n - 1);
            let frac = p - i as f64;
            (acc[i] + frac * (acc[i + 1] - acc[i])) / total
        }
    }

    fn span(gp: &GreenParams) -> (f64, f64) {
        let s = (2.0 * gp.d * gp.t).sqrt();
        let lo = (gp.x0 + gp.nu * gp.t).min(gp.x0) - 12.0 * s;
        (lo, gp.boundary)
    }

    #[test]
    fn latent_excess_matches_density() {
        for (z0, kappa) in [(-3.0, 0.05), (-0.5, 0.2), (2.0, 0.01), (2.0, 5.0), (-4.0, 10.0), (0.3, 1.0)] {
            let mut rng = RngStream::new(11, 0);
            let mut stats = SamplerStats::default();
            let mut ys: Vec<f64> =
                (0..20_000).map(|_| latent_excess(&mut rng, &mut stats, z0, kappa).unwrap()).collect();
            let hi = z0.max(0.0) + 12.0;
            let cdf = tabulated_cdf(
                |y| {
                    let r = z0 - y;
                    (-0.5 * r * r).exp() * -(-kappa * y).exp_m1()
                },
                0.0,
                hi,
                4000,
            );
            let d = ks_statistic(&mut ys, cdf);
            assert!(d < ks_critical_value(20_000.0, 0.001), "z0 {z0} kappa {kappa}: D = {d}");
        }
    }

    #[test]
    fn image_integral_sampler_matches_closed_form() {
        let gp = right(100.0, 1.0, 0.98, 1e-3, GreenBoundary::Reflecting);
        let hl = HalfLine::new(&gp);
        let LocalWall::Robin { gamma, .. } = hl.wall else { unreachable!() };
        let mut rng = RngStream::new(5, 1);
        let mut stats = SamplerStats::default();
        let mut xs: Vec<f64> =
            (0..20_000).map(|_| image_integral_positive(&hl, gamma, &mut rng, &mut stats).unwrap()).collect();
        let (lo, hi) = span(&gp);
        let cdf = tabulated_cdf(|x| hl.image_integral(x), lo, hi, 4000);
        let d = ks_statistic(&mut xs, cdf);
        assert!(d < ks_critical_value(20_000.0, 0.001), "D = {d}");
    }

    fn check_basic(gp: GreenParams, n: usize, seed: u64) {
        let mut rng = RngStream::new(seed, 0);
        let mut stats = SamplerStats::default();
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            let s = sample_basic(&gp, &mut rng, &mut stats).unwrap();
            assert!(gp.in_domain(s.x));
            assert!((s.weight_factor - gp.mass()).abs() < 1e-14 || gp.kind == GreenBoundary::Reflecting);
            xs.push(s.x);
        }
        let (lo, hi) = span(&gp);
        let cdf = tabulated_cdf(|x| gp.pdf_unchecked(x), lo, hi, 4000);
        let d = ks_statistic(&mut xs, cdf);
        assert!(d < ks_critical_value(n as f64, 0.001), "{gp:?}: D = {d}");
    }

    fn check_efficient(gp: GreenParams, n: usize, seed: u64) {
        let mut rng = RngStream::new(seed, 0);
        let mut stats = SamplerStats::default();
        let mut xs: Vec<(f64, f64)> = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for _ in 0..n {
            let s = sample_efficient(&gp, &mut rng, &mut stats).unwrap();
            assert!(gp.in_domain(s.x));
            weights.push(s.weight_factor);
            if s.weight_factor > 0.0 {
                xs.push((s.x, s.weight_factor));
            }
        }
        let (lo, hi) = span(&gp);
        let cdf = tabulated_cdf(|x| gp.pdf_unchecked(x), lo, hi, 4000);
        let (d, n_eff) = ks_weighted(&mut xs, cdf);
        assert!(d < ks_critical_value(n_eff, 0.001), "{gp:?}: D = {d}");
        let q = gp.mass();
        let w = Moments::from_samples(&weights);
        assert!((w.mean - q).abs() < 5.0 * w.std_error() + 1e-12, "mean weight {} vs Q {q}", w.mean);
    }

    #[test]
    fn basic_reflecting_toward_wall() {
        check_basic(right(100.0, 1.0, 0.98, 1e-3, GreenBoundary::Reflecting), 20_000, 1);
    }

    #[test]
    fn basic_reflecting_away_from_wall() {
        check_basic(right(-100.0, 1.0, 0.995, 1e-4, GreenBoundary::Reflecting), 20_000, 2);
    }

    #[test]
    fn basic_absorbing() {
        check_basic(right(30.0, 1.0, 0.98, 1e-3, GreenBoundary::Absorbing), 20_000, 3);
    }

    #[test]
    fn basic_robin_negative_integral() {
        let gp = right(5.0, 1.0, 0.95, 1e-3, GreenBoundary::Robin { alpha_over_beta: 20.0 });
        assert!(gp.terms(0.99).image_integral < 0.0);
        check_basic(gp, 20_000, 4);
    }

    #[test]
    fn efficient_reflecting_toward_wall() {
        check_efficient(right(100.0, 1.0, 0.98, 1e-3, GreenBoundary::Reflecting), 20_000, 5);
    }

    #[test]
    fn efficient_reflecting_away_from_wall() {
        check_efficient(right(-100.0, 1.0, 0.995, 1e-4, GreenBoundary::Reflecting), 20_000, 6);
    }

    #[test]
    fn efficient_absorbing() {
        check_efficient(right(30.0, 1.0, 0.98, 1e-3, GreenBoundary::Absorbing), 40_000, 7);
    }

    #[test]
    fn efficient_robin_positive_integral() {
        let gp = right(5.0, 1.0, 0.95, 1e-3, GreenBoundary::Robin { alpha_over_beta: -30.0 });
        assert!(gp.terms(0.99).image_integral > 0.0);
        check_efficient(gp, 20_000, 8);
        check_basic(gp, 20_000, 9);
    }

    #[test]
    fn left_wall_mirrors_right_wall() {
        let gp = GreenParams::new(-100.0, 1.0, 0.0, Side::Left, 0.02, 1e-3, GreenBoundary::Reflecting).unwrap();
        let mut rng = RngStream::new(1, 0);
        let mut stats = SamplerStats::default();
        let xs: Vec<f64> = (0..5000).map(|_| sample_basic(&gp, &mut rng, &mut stats).unwrap().x).collect();
        let mut rng = RngStream::new(1, 0);
        let mirrored = gp.mirrored();
        for &x in &xs {
            assert!(x >= 0.0);
            assert_eq!(x, -sample_basic(&mirrored, &mut rng, &mut stats).unwrap().x);
        }
    }

    #[test]
    fn interior_start_never_touches_wall_terms() {
        // Two hundred standard deviations from the wall.
        let gp = right(0.0, 1.0, 0.0, 1e-6, GreenBoundary::Reflecting);
        let mut rng = RngStream::new(3, 0);
        let mut stats = SamplerStats::default();
        let xs: Vec<f64> = (0..10_000).map(|_| sample_efficient(&gp, &mut rng, &mut stats).unwrap().x).collect();
        assert_eq!(stats.rejections, 0);
        let m = Moments::from_samples(&xs);
        assert!(m.mean.abs() < 5.0 * m.std_error());
        assert!(((m.variance - 2e-6) / 2e-6).abs() < 0.05);
    }

    #[test]
    fn unsupported_robin_is_reported() {
        // Strongly negative image integral: (p2 + p3) / p2 < 0 near the wall.
        let gp = right(0.0, 1.0, 0.99, 1e-2, GreenBoundary::Robin { alpha_over_beta: 50.0 });
        let mut rng = RngStream::new(1, 0);
        let mut stats = SamplerStats::default();
        let failed =
            (0..2000).any(|_| matches!(sample_efficient(&gp, &mut rng, &mut stats), Err(Error::Unsupported(_))));
        assert!(failed);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn samples_stay_in_domain(
            nu in -300.0f64..300.0,
            d in 0.05f64..5.0,
            gap in 1e-5f64..0.3,
            t in 1e-7f64..1e-2,
            seed in 0u64..1000,
            absorbing in proptest::bool::ANY,
        ) {
            let kind = if absorbing { GreenBoundary::Absorbing } else { GreenBoundary::Reflecting };
            let gp = right(nu, d, 1.0 - gap, t, kind);
            let mut rng = RngStream::new(seed, 0);
            let mut stats = SamplerStats::default();
            for _ in 0..20 {
                let b = sample_basic(&gp, &mut rng, &mut stats).unwrap();
                let e = sample_efficient(&gp, &mut rng, &mut stats).unwrap();
                prop_assert!(b.x <= 1.0 && e.x <= 1.0);
                prop_assert!((0.0..=1.0).contains(&b.weight_factor));
                prop_assert!((0.0..=1.0).contains(&e.weight_factor));
                if !absorbing {
                    prop_assert_eq!(b.weight_factor, 1.0);
                    prop_assert_eq!(e.weight_factor, 1.0);
                }
            }
        }
    }
}
