//! Per-particle random streams and the elementary distributions.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{ensure, Error, Result};
use crate::special::{normal_cdf, normal_sf};

/// Rejection loops give up after this many proposals.
pub const MAX_REJECTION_ITERATIONS: u32 = 10_000;

/// Below this Gaussian mass a truncated draw switches from naive rejection to
/// exponential proposals.
const NAIVE_MASS_THRESHOLD: f64 = 0.1;

/// Counter-based stream: the ChaCha key comes from the run seed and the
/// stream id selects one of 2^64 independent keystreams. Particle `i` always
/// sees the same numbers, whatever thread runs it.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on `(0, 1]`, safe to take the logarithm of.
    #[inline]
    pub fn uniform_pos(&mut self) -> f64 {
        1.0 - self.inner.random::<f64>()
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Exponential variate without parameter checks; `rate > 0` is the
    /// caller's responsibility.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        self.inner.sample::<f64, _>(Exp1) / rate
    }

    #[inline]
    pub fn gaussian(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard_normal()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Inverse-CDF map of `u in (0, 1]` onto `Exp(rate)`.
#[inline]
pub fn exponential_from_uniform(u: f64, rate: f64) -> f64 {
    -u.ln() / rate
}

pub fn sample_exponential(rng: &mut RngStream, rate: f64) -> Result<f64> {
    ensure!(rate.is_finite() && rate > 0.0, Parameter, "exponential rate must be positive, got {rate}");
    Ok(rng.exponential(rate))
}

pub fn sample_gaussian(rng: &mut RngStream, mean: f64, std: f64) -> Result<f64> {
    ensure!(std.is_finite() && std > 0.0, Parameter, "standard deviation must be positive, got {std}");
    Ok(rng.gaussian(mean, std))
}

/// Draw from `N(mean, std^2)` conditioned on `[lower, upper]`; `None` means
/// unbounded on that side.
pub fn sample_truncated_gaussian(
    rng: &mut RngStream,
    mean: f64,
    std: f64,
    lower: Option<f64>,
    upper: Option<f64>,
) -> Result<f64> {
    ensure!(std.is_finite() && std > 0.0, Parameter, "standard deviation must be positive, got {std}");
    let a = lower.map_or(f64::NEG_INFINITY, |l| (l - mean) / std);
    let b = upper.map_or(f64::INFINITY, |u| (u - mean) / std);
    ensure!(!a.is_nan() && !b.is_nan(), Parameter, "truncation bounds must not be NaN");
    ensure!(a < b, Parameter, "empty truncation interval [{lower:?}, {upper:?}]");
    let z = truncated_standard_normal(rng, a, b)?;
    // Rounding in the affine map must not leak outside the interval.
    let x = mean + std * z;
    Ok(match (lower, upper) {
        (Some(l), _) if x < l => l,
        (_, Some(u)) if x > u => u,
        _ => x,
    })
}

/// Standard normal conditioned on `[a, b]`, `a < b`.
pub(crate) fn truncated_standard_normal(rng: &mut RngStream, a: f64, b: f64) -> Result<f64> {
    let mass = if b <= 0.0 { normal_cdf(b) - normal_cdf(a) } else { normal_sf(a) - normal_sf(b) };
    if mass >= NAIVE_MASS_THRESHOLD {
        return naive_truncated(rng, a, b);
    }
    if a >= 0.0 {
        tail_truncated(rng, a, b)
    } else if b <= 0.0 {
        tail_truncated(rng, -b, -a).map(|z| -z)
    } else {
        // Straddles zero with little mass: the interval is narrow.
        uniform_truncated(rng, a, b)
    }
}

fn naive_truncated(rng: &mut RngStream, a: f64, b: f64) -> Result<f64> {
    for _ in 0..MAX_REJECTION_ITERATIONS {
        let z = rng.standard_normal();
        if z >= a && z <= b {
            return Ok(z);
        }
    }
    Err(rejection_exhausted("naive truncated normal", a, b))
}

/// One-sided tail `[a, b]` with `a >= 0`: translated-exponential proposals at
/// the optimal rate `(a + sqrt(a^2 + 4)) / 2`, or uniform proposals when the
/// interval is short compared with the tail scale.
fn tail_truncated(rng: &mut RngStream, a: f64, b: f64) -> Result<f64> {
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    if b.is_finite() && (b - a) * lambda < 1.0 {
        return uniform_truncated(rng, a, b);
    }
    for _ in 0..MAX_REJECTION_ITERATIONS {
        let z = a + rng.exponential(lambda);
        if z > b {
            continue;
        }
        let d = z - lambda;
        if rng.uniform() <= (-0.5 * d * d).exp() {
            return Ok(z);
        }
    }
    Err(rejection_exhausted("exponential-proposal truncated normal", a, b))
}

fn uniform_truncated(rng: &mut RngStream, a: f64, b: f64) -> Result<f64> {
    // Peak of the density on [a, b].
    let peak = if a > 0.0 {
        a
    } else if b < 0.0 {
        b
    } else {
        0.0
    };
    for _ in 0..MAX_REJECTION_ITERATIONS {
        let z = a + (b - a) * rng.uniform();
        if rng.uniform() <= (0.5 * (peak * peak - z * z)).exp() {
            return Ok(z);
        }
    }
    Err(rejection_exhausted("uniform-proposal truncated normal", a, b))
}

fn rejection_exhausted(what: &str, a: f64, b: f64) -> Error {
    Error::Numerical(format!(
        "{what}: no acceptance after {MAX_REJECTION_ITERATIONS} proposals on standardized interval [{a}, {b}]"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use kdmc_oracles::{ks_critical_value, ks_statistic, ks_two_sample, Moments};

    fn draws(n: usize, mut f: impl FnMut() -> f64) -> Vec<f64> {
        (0..n).map(|_| f()).collect()
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..8)
            .map({
                let mut r = RngStream::new(7, 3);
                move |_| r.next_u64()
            })
            .collect();
        let b: Vec<u64> = (0..8)
            .map({
                let mut r = RngStream::new(7, 3);
                move |_| r.next_u64()
            })
            .collect();
        let c: Vec<u64> = (0..8)
            .map({
                let mut r = RngStream::new(7, 4);
                move |_| r.next_u64()
            })
            .collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn parameter_errors() {
        let mut rng = RngStream::new(0, 0);
        assert!(sample_exponential(&mut rng, 0.0).is_err());
        assert!(sample_exponential(&mut rng, -1.0).is_err());
        assert!(sample_gaussian(&mut rng, 0.0, 0.0).is_err());
        assert!(sample_truncated_gaussian(&mut rng, 0.0, 1.0, Some(1.0), Some(1.0)).is_err());
        assert!(sample_truncated_gaussian(&mut rng, 0.0, 1.0, Some(2.0), Some(1.0)).is_err());
    }

    #[test]
    fn exponential_mean_at_charge_exchange_rate() {
        let mut rng = RngStream::new(1, 0);
        let n = 1_000_000;
        let m = Moments::from_samples(draws(n, || sample_exponential(&mut rng, 1e7).unwrap()));
        assert!(m.min > 0.0);
        assert!((m.mean - 1e-7).abs() < 3.0 * m.std_error());
    }

    #[test]
    fn exponential_ks_against_cdf() {
        let mut rng = RngStream::new(2, 0);
        let n = 100_000;
        let mut xs = draws(n, || sample_exponential(&mut rng, 1.0).unwrap());
        let d = ks_statistic(&mut xs, |t| -(-t).exp_m1());
        assert!(d < ks_critical_value(n as f64, 0.01), "KS distance {d}");
    }

    #[test]
    fn exponential_inverse_cdf_is_decreasing() {
        let mut prev = f64::INFINITY;
        for k in 1..=100 {
            let t = exponential_from_uniform(k as f64 / 100.0, 3.0);
            assert!(t < prev);
            prev = t;
        }
        assert_eq!(exponential_from_uniform(1.0, 3.0), 0.0);
    }

    #[test]
    fn gaussian_moments_paper_velocity() {
        let mut rng = RngStream::new(3, 0);
        let n = 1_000_000;
        let std = 1e7f64.sqrt();
        let m = Moments::from_samples(draws(n, || sample_gaussian(&mut rng, 100.0, std).unwrap()));
        assert!((m.mean - 100.0).abs() < 3.0 * std / (n as f64).sqrt());
    }

    #[test]
    fn gaussian_skewness_and_variance() {
        let mut rng = RngStream::new(4, 0);
        let n = 1_000_000;
        let m = Moments::from_samples(draws(n, || sample_gaussian(&mut rng, 0.0, 1.0).unwrap()));
        // SE of the sample skewness is sqrt(6/N).
        assert!(m.skewness.abs() < 4.0 * (6.0 / n as f64).sqrt());
        assert!((m.variance - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
    }

    fn phi(z: f64) -> f64 {
        (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn half_normal_mean() {
        let mut rng = RngStream::new(5, 0);
        let n = 1_000_000;
        let m =
            Moments::from_samples(draws(n, || sample_truncated_gaussian(&mut rng, 0.0, 1.0, Some(0.0), None).unwrap()));
        assert!(m.min >= 0.0);
        let want = (2.0 / std::f64::consts::PI).sqrt();
        assert!((m.mean - want).abs() < 3.0 * m.std_error(), "{} vs {want}", m.mean);
    }

    #[test]
    fn far_tail_mean() {
        let mut rng = RngStream::new(6, 0);
        let n = 1_000_000;
        let m =
            Moments::from_samples(draws(n, || sample_truncated_gaussian(&mut rng, 0.0, 1.0, Some(5.0), None).unwrap()));
        assert!(m.min >= 5.0);
        let want = phi(5.0) / normal_sf(5.0);
        assert!((want - 5.186_5).abs() < 1e-4);
        assert!((m.mean - want).abs() < 3.0 * m.std_error(), "{} vs {want}", m.mean);
    }

    #[test]
    fn untruncated_matches_plain_gaussian() {
        let n = 200_000;
        let mut rng = RngStream::new(7, 0);
        let mut t = draws(n, || sample_truncated_gaussian(&mut rng, 2.0, 3.0, None, None).unwrap());
        let mut rng = RngStream::new(7, 1);
        let mut g = draws(n, || sample_gaussian(&mut rng, 2.0, 3.0).unwrap());
        let d = ks_two_sample(&mut t, &mut g);
        let crit = ks_critical_value((n / 2) as f64, 0.01);
        assert!(d < crit, "two-sample KS {d} >= {crit}");
    }

    #[test]
    fn upper_truncation_and_two_sided_stay_inside() {
        let mut rng = RngStream::new(8, 0);
        for _ in 0..10_000 {
            let x = sample_truncated_gaussian(&mut rng, 10.0, 2.0, None, Some(-3.0)).unwrap();
            assert!(x <= -3.0);
            let y = sample_truncated_gaussian(&mut rng, 0.0, 1.0, Some(4.0), Some(4.1)).unwrap();
            assert!((4.0..=4.1).contains(&y));
            let z = sample_truncated_gaussian(&mut rng, 0.0, 1.0, Some(-0.05), Some(0.05)).unwrap();
            assert!((-0.05..=0.05).contains(&z));
        }
    }

    #[test]
    fn two_sided_tail_against_cdf() {
        let mut rng = RngStream::new(9, 0);
        let n = 100_000;
        let (a, b) = (2.5, 3.5);
        let mut xs = draws(n, || sample_truncated_gaussian(&mut rng, 0.0, 1.0, Some(a), Some(b)).unwrap());
        let mass = normal_sf(a) - normal_sf(b);
        let d = ks_statistic(&mut xs, |x| (normal_sf(a) - normal_sf(x)) / mass);
        assert!(d < ks_critical_value(n as f64, 0.01), "KS distance {d}");
    }

    // Cut-off where the Gaussian mass is exactly at the branch switch.
    #[test]
    fn branches_agree_at_switch_point() {
        let a = 1.281_551_565_544_600_5; // Phi(-a) = 0.1
        let n = 200_000;
        let mut rng = RngStream::new(10, 0);
        let mut naive = draws(n, || naive_truncated(&mut rng, a, f64::INFINITY).unwrap());
        let mut rng = RngStream::new(10, 1);
        let mut tail = draws(n, || tail_truncated(&mut rng, a, f64::INFINITY).unwrap());
        let d = ks_two_sample(&mut naive, &mut tail);
        assert!(d < ks_critical_value((n / 2) as f64, 0.01), "two-sample KS {d}");
    }
}
