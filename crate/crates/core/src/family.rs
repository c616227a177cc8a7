//! Fast evaluation of the step densities `f_{jΔ}` used by every sequential sampler.
//!
//! Gaussian and Cauchy densities are evaluated in closed form. Other strictly
//! stable laws reduce to one unit-scale table `f_t(x) = g((x - bt)/c_t)/c_t`
//! with a convergent (`α < 1`) or asymptotic (`α > 1`) far-field series past
//! the table edge. The remaining models keep one table per horizon, built on
//! first use.

use core::f64::consts::PI;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use statrs::function::gamma::ln_gamma;

use crate::charfn::{LevyModel, ModelKind};
use crate::density::{invert_density, invert_on_lattice, strict_stable_form, DensityGrid, GridSpec};
use crate::error::{Error, Result};

/// Unit-scale strictly stable density with `ψ(u) = |u|^α exp(-iπα(ρ - 1/2) sgn u)`.
#[derive(Debug)]
pub(crate) struct UnitStable {
    alpha: f64,
    half_width: f64,
    spacing: f64,
    table: Vec<f64>,
    peak: f64,
    right: Vec<f64>,
    left: Vec<f64>,
}

impl UnitStable {
    const SPACING: f64 = 1.0 / 1024.0;

    pub(crate) fn new(alpha: f64, rho: f64) -> Result<Self> {
        let coeffs = |r: f64| -> Vec<(f64, f64)> {
            (1..=80)
                .map(|k| {
                    let kf = k as f64;
                    let mag = (ln_gamma(kf * alpha + 1.0) - ln_gamma(kf + 1.0)).exp();
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    (sign * mag * (PI * kf * alpha * r).sin() / PI, mag)
                })
                .collect()
        };
        let (cr, cl) = (coeffs(rho), coeffs(1.0 - rho));
        // smallest edge where both expansions reach 1e-13 relative accuracy
        let terms_needed = |c: &[(f64, f64)], w: f64| -> Option<usize> {
            let lead = c[0].1 * w.powf(-alpha - 1.0);
            for k in 1..c.len() {
                let bound = c[k].1 * w.powf(-(k as f64 + 1.0) * alpha - 1.0);
                let prev = c[k - 1].1 * w.powf(-(k as f64) * alpha - 1.0);
                if bound > prev {
                    return None;
                }
                if bound < 1e-13 * lead {
                    return Some(k);
                }
            }
            None
        };
        let mut chosen = None;
        let mut w = 4.0;
        while w <= 4096.0 {
            if let (Some(a), Some(b)) = (terms_needed(&cr, w), terms_needed(&cl, w)) {
                chosen = Some((w, a, b));
                break;
            }
            w *= 2.0;
        }
        let (half_width, kr, kl) =
            chosen.ok_or_else(|| Error::UnsupportedModel(format!("no far-field expansion for alpha = {alpha}")))?;
        let zeta = PI * alpha * (rho - 0.5);
        let beta = zeta.tan() / (PI * alpha / 2.0).tan();
        let unit = LevyModel::stable_with_drift(alpha, beta, zeta.cos().powf(1.0 / alpha), 0.0)?;
        let count = (2.0 * half_width / Self::SPACING).round() as usize + 1;
        let first = -((half_width / Self::SPACING).round() as i64);
        let (table, _) = invert_on_lattice(&unit, 1.0, first, count, Self::SPACING)?;
        let peak = table.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            alpha,
            half_width,
            spacing: Self::SPACING,
            table,
            peak,
            right: cr[..kr].iter().map(|c| c.0).collect(),
            left: cl[..kl].iter().map(|c| c.0).collect(),
        })
    }

    fn far(&self, coeffs: &[f64], y: f64) -> f64 {
        let step = y.powf(-self.alpha);
        let mut pow = step / y;
        let mut acc = 0.0;
        for c in coeffs {
            acc += c * pow;
            pow *= step;
        }
        acc.max(0.0)
    }

    pub(crate) fn eval(&self, y: f64) -> f64 {
        if y >= self.half_width {
            return self.far(&self.right, y);
        }
        if y <= -self.half_width {
            return self.far(&self.left, -y);
        }
        let p = (y + self.half_width) / self.spacing;
        let i = (p.floor() as usize).min(self.table.len() - 2);
        let w = p - i as f64;
        self.table[i] * (1.0 - w) + self.table[i + 1] * w
    }
}

/// Unit tables are shared by every kernel family with the same `(α, ρ)`.
fn unit_stable(alpha: f64, rho: f64) -> Result<Arc<UnitStable>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), Arc<UnitStable>>>> = OnceLock::new();
    let key = (alpha.to_bits(), rho.to_bits());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(u) = cache.lock().expect("unit table cache").get(&key) {
        return Ok(u.clone());
    }
    let u = Arc::new(UnitStable::new(alpha, rho)?);
    Ok(cache.lock().expect("unit table cache").entry(key).or_insert(u).clone())
}

#[derive(Clone, Debug)]
enum Repr {
    Gaussian { sigma: f64 },
    Cauchy { sigma: f64 },
    Stable { unit: Arc<UnitStable>, scales: Arc<Vec<f64>> },
    Tables(Arc<Vec<OnceLock<DensityGrid>>>),
}

/// `f_{jΔ}` for `j = 1..=n` with `Δ = t/n`, optionally for the dual law of `-X`.
#[derive(Clone, Debug)]
pub struct StepKernels {
    model: LevyModel,
    dt: f64,
    n: usize,
    reflect: bool,
    repr: Repr,
}

impl StepKernels {
    pub fn new(model: &LevyModel, t: f64, n: usize) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) || n == 0 {
            return Err(Error::InvalidArgument(format!("need t > 0 and n ≥ 1, got t = {t}, n = {n}")));
        }
        let dt = t / n as f64;
        let repr = match model.kind() {
            ModelKind::BrownianWithDrift => Repr::Gaussian { sigma: model.sigma() },
            ModelKind::BrownianPlusCompoundPoisson if model.jump_rate() == 0.0 => Repr::Gaussian { sigma: model.sigma() },
            ModelKind::SymmetricStable if model.alpha() == 1.0 => Repr::Cauchy { sigma: model.sigma() },
            _ => match strict_stable_form(model, 1.0) {
                Some((rho, _)) => Repr::Stable {
                    unit: unit_stable(model.alpha(), rho)?,
                    scales: Arc::new(
                        (0..=n)
                            .map(|j| strict_stable_form(model, j as f64 * dt).map_or(0.0, |f| f.1))
                            .collect(),
                    ),
                },
                None => Repr::Tables(Arc::new((0..n).map(|_| OnceLock::new()).collect())),
            },
        };
        let k = Self {
            model: *model,
            dt,
            n,
            reflect: false,
            repr,
        };
        if let Repr::Tables(_) = &k.repr {
            k.table(1)?;
            k.table(n)?;
        }
        Ok(k)
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn horizon(&self) -> f64 {
        self.dt * self.n as f64
    }
    pub fn is_dual(&self) -> bool {
        self.reflect
    }

    /// Kernels of the dual process `-X`, sharing tables with `self`.
    pub fn dual(&self) -> Self {
        let mut d = self.clone();
        d.reflect = !self.reflect;
        d
    }

    /// Volatility when every `f_{jΔ}` is Gaussian (bridges then have closed forms).
    pub fn gaussian_sigma(&self) -> Option<f64> {
        match self.repr {
            Repr::Gaussian { sigma } => Some(sigma),
            _ => None,
        }
    }

    /// Natural spatial scale of `X_{jΔ}`.
    pub fn scale(&self, j: usize) -> f64 {
        self.model.scale_at(j as f64 * self.dt)
    }

    /// Drift-induced centre of `X_{jΔ}` (sign-adjusted for the dual).
    pub fn center(&self, j: usize) -> f64 {
        let c = crate::density::natural_center(&self.model, j as f64 * self.dt);
        if self.reflect {
            -c
        } else {
            c
        }
    }

    /// `sup_x f_{jΔ}(x)` as evaluated by [`StepKernels::density`].
    pub fn peak(&self, j: usize) -> f64 {
        let tau = j as f64 * self.dt;
        match &self.repr {
            Repr::Gaussian { sigma } => 1.0 / (sigma * (2.0 * PI * tau).sqrt()),
            Repr::Cauchy { sigma } => 1.0 / (PI * sigma * tau),
            Repr::Stable { unit, scales } => unit.peak / scales[j],
            Repr::Tables(_) => self.table(j).expect("density table for a validated model").sup(),
        }
    }

    fn table(&self, j: usize) -> Result<&DensityGrid> {
        let Repr::Tables(tables) = &self.repr else {
            return Err(Error::RequiresDensity);
        };
        let cell = &tables[j - 1];
        if let Some(g) = cell.get() {
            return Ok(g);
        }
        let tau = j as f64 * self.dt;
        let g = invert_density(&self.model, tau, GridSpec::auto(&self.model, tau))?;
        Ok(cell.get_or_init(|| g))
    }

    /// `f_{jΔ}(x)`, `1 ≤ j ≤ n`.
    pub fn density(&self, j: usize, x: f64) -> f64 {
        debug_assert!(j >= 1 && j <= self.n);
        let x = if self.reflect { -x } else { x };
        let tau = j as f64 * self.dt;
        let z = x - self.model.drift() * tau;
        match &self.repr {
            Repr::Gaussian { sigma } => {
                let s = sigma * tau.sqrt();
                let w = z / s;
                (-0.5 * w * w).exp() / (s * (2.0 * PI).sqrt())
            }
            Repr::Cauchy { sigma } => {
                let s = sigma * tau;
                let w = z / s;
                1.0 / (PI * s * (1.0 + w * w))
            }
            Repr::Stable { unit, scales } => {
                let c = scales[j];
                unit.eval(z / c) / c
            }
            Repr::Tables(_) => {
                let g = self.table(j).expect("density table for a validated model");
                if x >= g.x_min() && x <= g.x_max() {
                    g.eval(x)
                } else if self.model.is_stable_kind() {
                    // α = 1 with skewness: f(x) ~ (1 ± β)σt / (π x²)
                    let d = x - crate::density::natural_center(&self.model, tau);
                    let side = if d > 0.0 { 1.0 + self.model.beta_skew() } else { 1.0 - self.model.beta_skew() };
                    side * self.model.sigma() * tau / (PI * d * d)
                } else {
                    0.0
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charfn::JumpLaw;

    #[test]
    fn unit_stable_matches_inversion_and_series_edge() {
        for (alpha, beta) in [(1.5, 0.0), (0.8, 0.3), (1.8, -0.6), (1.2, 1.0)] {
            let m = LevyModel::stable_with_drift(alpha, beta, 1.0, 0.0).unwrap();
            let k = StepKernels::new(&m, 1.0, 4).unwrap();
            let f = invert_density(&m, 0.5, GridSpec::auto(&m, 0.5)).unwrap();
            for i in (0..f.len()).step_by(37) {
                let x = f.x(i);
                let a = k.density(2, x);
                let b = f.values[i];
                assert!((a - b).abs() <= 1e-4 * b + 1e-8, "{alpha} {beta} x={x}: {a} vs {b}");
            }
            if let Repr::Stable { unit, .. } = &k.repr {
                let w = unit.half_width;
                for side in [-1.0, 1.0] {
                    let inside = unit.eval(side * (w - 1e-9));
                    let outside = unit.eval(side * (w + 1e-9));
                    assert!((inside - outside).abs() <= 1e-8 * inside + 1e-12, "{alpha}: {inside} {outside}");
                }
            } else {
                panic!("expected scaled representation");
            }
        }
    }

    #[test]
    fn closed_forms_and_dual() {
        let bm = LevyModel::brownian(2.0, 0.5).unwrap();
        let k = StepKernels::new(&bm, 1.0, 10).unwrap();
        let x: f64 = 0.3;
        let var = 4.0 * 0.5;
        let exact = (-(x - 0.25).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
        assert!((k.density(5, x) - exact).abs() < 1e-15);
        assert_eq!(k.dual().density(5, -x), k.density(5, x));
        let c = LevyModel::symmetric_stable(1.0, 1.0).unwrap();
        let k = StepKernels::new(&c, 1.0, 1).unwrap();
        assert!((k.density(1, 0.0) - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn per_horizon_tables() {
        let m = LevyModel::brownian_plus_compound_poisson(1.0, 0.2, 1.0, JumpLaw { mean: 1.0, sd: 0.3 }).unwrap();
        let k = StepKernels::new(&m, 2.0, 8).unwrap();
        let f = invert_density(&m, 1.0, GridSpec::auto(&m, 1.0)).unwrap();
        for x in [-2.0, 0.0, 0.7, 3.0] {
            assert!((k.density(4, x) - f.eval(x)).abs() < 1e-12);
        }
        let skew = LevyModel::asymmetric_stable(1.0, 0.5, 1.0).unwrap();
        let k = StepKernels::new(&skew, 1.0, 2).unwrap();
        assert!(k.density(1, 1e4) > 0.0);
    }

    #[test]
    fn peak_bounds_density() {
        let models = [
            LevyModel::brownian(1.5, -0.3).unwrap(),
            LevyModel::symmetric_stable(1.0, 0.7).unwrap(),
            LevyModel::stable_with_drift(1.5, 0.4, 1.0, 0.2).unwrap(),
            LevyModel::brownian_plus_compound_poisson(1.0, 0.0, 2.0, JumpLaw { mean: -0.5, sd: 0.2 }).unwrap(),
        ];
        for m in models {
            let k = StepKernels::new(&m, 1.0, 4).unwrap();
            for j in [1, 4] {
                let peak = k.peak(j);
                let s = k.scale(j);
                let best = (-4000..=4000)
                    .map(|i| k.density(j, i as f64 * 1e-3 * s * 10.0))
                    .fold(0.0, f64::max);
                assert!(best <= peak * (1.0 + 1e-12), "{:?} j={j}: {best} > {peak}", m.kind());
                assert!(best >= 0.95 * peak, "{:?} j={j}: {best} vs {peak}", m.kind());
            }
        }
    }
}
