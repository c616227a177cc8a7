//! Closed-form laws for Brownian motion used as independent oracles.
//!
//! Grid skeletons see the continuous minimum only at the nodes. For a walk
//! with Gaussian steps of size `σ√Δ`, a barrier at 0 seen on the grid acts
//! like a continuous barrier lowered by `δ = 0.5826 σ√Δ` (Broadie, Glasserman
//! and Kou); [`grid_barrier_shift`] returns that `δ`, and the skeleton oracles
//! below take it as a parameter (`δ = 0` gives the continuum law).

use core::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::{erf, erfc};

use crate::rng::RngStream;

/// `-ζ(1/2)/√(2π)`.
pub const BARRIER_SHIFT_CONSTANT: f64 = 0.5825971579390106;

pub fn grid_barrier_shift(sigma: f64, dt: f64) -> f64 {
    BARRIER_SHIFT_CONSTANT * sigma * dt.sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Arcsine law of the argmin of a free Brownian path on `[0, 1]`.
pub fn arcsine_cdf(u: f64) -> f64 {
    2.0 / PI * u.clamp(0.0, 1.0).sqrt().asin()
}

pub fn rayleigh_cdf(x: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        1.0 - (-0.5 * (x / scale).powi(2)).exp()
    }
}

pub fn half_normal_cdf(x: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        erf(x / (scale * std::f64::consts::SQRT_2))
    }
}

/// Norm of a centred 3-d Gaussian vector with per-coordinate scale `scale`:
/// the Bessel(3) marginal from 0 and the normalized-excursion marginal.
pub fn maxwell_cdf(x: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let z = x / scale;
    erf(z / std::f64::consts::SQRT_2) - (2.0 / PI).sqrt() * z * (-0.5 * z * z).exp()
}

/// Killed Brownian density `φ_{σ²t}(y - x) - φ_{σ²t}(y + x)` (reflection principle).
pub fn brownian_killed_density(sigma: f64, x: f64, y: f64, t: f64) -> f64 {
    let s = sigma * t.sqrt();
    (normal_pdf((y - x) / s) - normal_pdf((y + x) / s)) / s
}

/// CDF of `X_u - δ` for Brownian motion from `δ > 0` conditioned to stay
/// positive up to time `u`; `δ → 0` gives the meander endpoint (Rayleigh).
pub fn meander_endpoint_cdf(z: f64, sigma: f64, u: f64, delta: f64) -> f64 {
    let s = sigma * u.sqrt();
    if delta <= 0.0 {
        return rayleigh_cdf(z, s);
    }
    let y = z + delta;
    if y <= 0.0 {
        return 0.0;
    }
    let survive = erf(delta / (s * std::f64::consts::SQRT_2));
    let inside = (normal_cdf((y - delta) / s) - normal_cdf(-delta / s)) - (normal_cdf((y + delta) / s) - normal_cdf(delta / s));
    (inside / survive).clamp(0.0, 1.0)
}

/// Bessel(3) process from `a ≥ 0` at time `t`: the norm of a 3-d Brownian motion.
pub fn bessel3_from(sigma: f64, a: f64, t: f64, rng: &mut RngStream) -> f64 {
    let s = sigma * t.sqrt();
    let z: [f64; 3] = [StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)];
    ((a + s * z[0]).powi(2) + (s * z[1]).powi(2) + (s * z[2]).powi(2)).sqrt()
}

/// Values at `times` (in `(0, t)`) of a Bessel(3) bridge from `a ≥ 0` to
/// `b ≥ 0` over `[0, t]`, volatility `sigma`: the norm of a 3-d Brownian
/// bridge whose endpoint direction is von Mises–Fisher around the start.
pub fn bessel3_bridge(sigma: f64, a: f64, b: f64, t: f64, times: &[f64], rng: &mut RngStream) -> Vec<f64> {
    let kappa = a * b / (sigma * sigma * t);
    let u = rng.open01();
    let w = if kappa < 1e-12 {
        2.0 * u - 1.0
    } else {
        (1.0 + (u + (1.0 - u) * (-2.0 * kappa).exp()).ln() / kappa).clamp(-1.0, 1.0)
    };
    let phi = 2.0 * PI * rng.open01();
    let r = (1.0 - w * w).max(0.0).sqrt();
    let end = [b * w, b * r * phi.cos(), b * r * phi.sin()];
    let mut cur = [a, 0.0, 0.0];
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &s in times {
        let (ds, rest) = (s - now, t - now);
        let sd = sigma * (ds * (rest - ds) / rest).max(0.0).sqrt();
        for d in 0..3 {
            let z: f64 = StandardNormal.sample(rng);
            cur[d] += (end[d] - cur[d]) * ds / rest + sd * z;
        }
        out.push((cur[0] * cur[0] + cur[1] * cur[1] + cur[2] * cur[2]).sqrt());
        now = s;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_constant() {
        // -ζ(1/2) = 1.4603545088095868
        assert!((BARRIER_SHIFT_CONSTANT - 1.4603545088095868 / (2.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cdf_limits() {
        for f in [
            |x: f64| rayleigh_cdf(x, 0.7),
            |x: f64| half_normal_cdf(x, 1.3),
            |x: f64| maxwell_cdf(x, 0.5),
            |x: f64| meander_endpoint_cdf(x, 1.0, 0.5, 0.03),
        ] {
            assert_eq!(f(-1.0), 0.0);
            assert!((f(60.0) - 1.0).abs() < 1e-12);
            let mut prev = 0.0;
            for i in 0..400 {
                let v = f(i as f64 * 0.02);
                assert!(v + 1e-13 >= prev);
                prev = v;
            }
        }
        assert!((arcsine_cdf(0.5) - 0.5).abs() < 1e-15);
        // small δ approaches Rayleigh
        let a = meander_endpoint_cdf(0.6, 1.0, 0.5, 1e-6);
        assert!((a - rayleigh_cdf(0.6, 0.5f64.sqrt())).abs() < 1e-5);
    }

    #[test]
    fn hunt_value() {
        let q = brownian_killed_density(1.0, 1.0, 1.0, 1.0);
        assert!((q - (1.0 - (-2.0f64).exp()) / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert!((q - 0.344951).abs() < 1e-6);
    }

    #[test]
    fn bessel_bridge_marginal_from_zero() {
        let mut rng = RngStream::new(9);
        let v: Vec<f64> = (0..20_000).map(|_| bessel3_bridge(1.0, 0.0, 0.0, 1.0, &[0.5], &mut rng)[0]).collect();
        let s = crate::stats::EmpiricalSample::new(v).unwrap();
        let r = crate::stats::ks_one_sample(&s, |x| maxwell_cdf(x, 0.5)).unwrap();
        assert!(r.p_value.unwrap() > 1e-3, "{r:?}");
    }

    #[test]
    fn bessel_bridge_endpoint_direction() {
        // from a to b the final value is b
        let mut rng = RngStream::new(10);
        let v = bessel3_bridge(1.0, 0.4, 1.3, 1.0, &[0.5, 1.0], &mut rng);
        assert!((v[1] - 1.3).abs() < 1e-12);
    }

    #[test]
    fn bessel_bridge_matches_killed_bridge_marginal() {
        // Bessel(3) bridge = Brownian bridge killed at 0: marginal ∝ q_s(a, y) q_{t-s}(y, b)
        let (a, b, s) = (0.4, 1.3, 0.5);
        let h = 1e-4;
        let dens: Vec<f64> = (0..80_000)
            .map(|i| {
                let y = i as f64 * h;
                brownian_killed_density(1.0, a, y, s) * brownian_killed_density(1.0, y, b, 1.0 - s)
            })
            .collect();
        let mut cdf = vec![0.0];
        for i in 1..dens.len() {
            cdf.push(cdf[i - 1] + 0.5 * h * (dens[i - 1] + dens[i]));
        }
        let total = *cdf.last().unwrap();
        let lookup = |x: f64| -> f64 {
            let i = ((x / h) as usize).min(cdf.len() - 1);
            cdf[i] / total
        };
        let mut rng = RngStream::new(11);
        let v: Vec<f64> = (0..20_000).map(|_| bessel3_bridge(1.0, a, b, 1.0, &[s], &mut rng)[0]).collect();
        let r = crate::stats::ks_one_sample(&crate::stats::EmpiricalSample::new(v).unwrap(), lookup).unwrap();
        assert!(r.p_value.unwrap() > 1e-3, "{r:?}");
    }
}
