//! Paths and bridges on a uniform time grid.

use core::f64::consts::PI;
use std::sync::Arc;

use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::charfn::{LevyModel, ModelKind};
use crate::density::DensityGrid;
use crate::error::{Error, Result};
use crate::family::StepKernels;
use crate::mesh::{Mesh, DEN_FLOOR};
use crate::rng::RngStream;

/// Proposals allowed per rejection step before giving up.
pub(crate) const MAX_TRIES: u64 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Free,
    Bridge,
    Conditioned,
    Excursion,
    Meander,
}

/// Values of a path at the nodes `k·t/n`, `k = 0..=n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl PathGrid {
    pub fn from_values(t: f64, values: Vec<f64>) -> Self {
        let n = values.len() - 1;
        let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * t / n.max(1) as f64).collect();
        times[n] = t;
        Self { times, values }
    }

    /// Number of steps.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }
    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }
    pub fn dt(&self) -> f64 {
        self.horizon() / self.n().max(1) as f64
    }
    pub fn start(&self) -> f64 {
        self.values[0]
    }
    pub fn end(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Index of the grid time `s`.
    pub fn index_of(&self, s: f64) -> Result<usize> {
        let n = self.n();
        let p = s / self.horizon() * n as f64;
        let k = p.round();
        if !(k >= 0.0 && k <= n as f64) || (p - k).abs() > 1e-9 * n.max(1) as f64 {
            return Err(Error::GridAlignment(s));
        }
        Ok(k as usize)
    }

    pub fn value_at(&self, s: f64) -> Result<f64> {
        Ok(self.values[self.index_of(s)?])
    }
}

/// Inverse CDF of a tabulated density (piecewise-linear between nodes).
#[derive(Clone, Debug)]
pub struct InverseCdf {
    mesh: Mesh,
    total: f64,
}

impl InverseCdf {
    pub fn new(f: &DensityGrid) -> Result<Self> {
        let mesh = Mesh::new((0..f.len()).map(|i| f.x(i)).collect(), f.values.clone());
        let total = mesh.total();
        if !(total > DEN_FLOOR) {
            return Err(Error::BridgeDegeneracy { value: total });
        }
        Ok(Self { mesh, total })
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.mesh.quantile(rng.open01() * self.total)
    }
}

/// Sampler for one increment `X_Δ`.
#[derive(Clone, Debug)]
pub enum IncrementSampler {
    Gaussian { mean: f64, sd: f64 },
    /// `scale · S + shift` with `S` standard strictly stable (S1 form).
    Stable { alpha: f64, beta: f64, scale: f64, shift: f64 },
    GaussianPlusJumps { mean: f64, sd: f64, rate: f64, jump_mean: f64, jump_sd: f64 },
    Tabulated(Arc<InverseCdf>),
}

impl IncrementSampler {
    /// Exact sampler of `X_dt` for every catalog model.
    pub fn exact(model: &LevyModel, dt: f64) -> Self {
        match model.kind() {
            ModelKind::BrownianWithDrift => IncrementSampler::Gaussian {
                mean: model.drift() * dt,
                sd: model.sigma() * dt.sqrt(),
            },
            ModelKind::BrownianPlusCompoundPoisson => IncrementSampler::GaussianPlusJumps {
                mean: model.drift() * dt,
                sd: model.sigma() * dt.sqrt(),
                rate: model.jump_rate() * dt,
                jump_mean: model.jump_law().mean,
                jump_sd: model.jump_law().sd,
            },
            ModelKind::SymmetricStable | ModelKind::AsymmetricStable => {
                let a = model.alpha();
                let beta = model.beta_skew();
                if a == 1.0 {
                    let scale = model.sigma() * dt;
                    IncrementSampler::Stable {
                        alpha: a,
                        beta,
                        scale,
                        shift: 2.0 / PI * beta * scale * scale.ln() + model.drift() * dt,
                    }
                } else {
                    IncrementSampler::Stable {
                        alpha: a,
                        beta,
                        scale: model.sigma() * dt.powf(1.0 / a),
                        shift: model.drift() * dt,
                    }
                }
            }
        }
    }

    /// Inverse-CDF sampler on a density table.
    pub fn tabulated(table: Option<&DensityGrid>) -> Result<Self> {
        let f = table.ok_or(Error::RequiresDensity)?;
        Ok(IncrementSampler::Tabulated(Arc::new(InverseCdf::new(f)?)))
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match self {
            IncrementSampler::Gaussian { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            IncrementSampler::Stable { alpha, beta, scale, shift } => {
                scale * standard_stable(*alpha, *beta, rng) + shift
            }
            IncrementSampler::GaussianPlusJumps {
                mean,
                sd,
                rate,
                jump_mean,
                jump_sd,
            } => {
                let z: f64 = StandardNormal.sample(rng);
                let mut x = mean + sd * z;
                if *rate > 0.0 {
                    let k: f64 = Poisson::new(*rate).expect("positive rate").sample(rng);
                    if k > 0.0 {
                        let z: f64 = StandardNormal.sample(rng);
                        x += k * jump_mean + (k.sqrt() * jump_sd) * z;
                    }
                }
                x
            }
            IncrementSampler::Tabulated(inv) => inv.sample(rng),
        }
    }
}

/// Chambers–Mallows–Stuck draw from the S1 law with unit scale and no shift.
pub fn standard_stable(alpha: f64, beta: f64, rng: &mut RngStream) -> f64 {
    let v = PI * (rng.open01() - 0.5);
    let w: f64 = Exp1.sample(rng);
    if alpha == 1.0 {
        let h = PI / 2.0 + beta * v;
        2.0 / PI * (h * v.tan() - beta * ((PI / 2.0) * w * v.cos() / h).ln())
    } else {
        let t = beta * (PI * alpha / 2.0).tan();
        let b = t.atan() / alpha;
        let s = (1.0 + t * t).powf(1.0 / (2.0 * alpha));
        let av = alpha * (v + b);
        s * av.sin() / v.cos().powf(1.0 / alpha) * ((v - av).cos() / w).powf((1.0 - alpha) / alpha)
    }
}

pub fn sample_path(model: &LevyModel, x: f64, t: f64, n: usize, rng: &mut RngStream) -> Result<PathGrid> {
    if n == 0 || !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("need t > 0 and n ≥ 1, got t = {t}, n = {n}")));
    }
    let inc = IncrementSampler::exact(model, t / n as f64);
    Ok(sample_path_with(&inc, x, t, n, rng))
}

pub fn sample_path_with(inc: &IncrementSampler, x: f64, t: f64, n: usize, rng: &mut RngStream) -> PathGrid {
    let mut values = Vec::with_capacity(n + 1);
    let mut v = x;
    values.push(v);
    for _ in 0..n {
        v += inc.sample(rng);
        values.push(v);
    }
    PathGrid::from_values(t, values)
}

/// Sequential sampler of discrete bridges `P^t_{x,y}` on `n` steps.
///
/// Each interior step proposes `z + ξ` with `ξ` an exact increment and keeps it
/// with probability `f_{rest}(y - z - ξ) / sup f_{rest}`, which is exactly the
/// one-step conditional law. The expected number of proposals over a whole
/// path is of order `n` for the catalog models.
#[derive(Clone, Debug)]
pub struct BridgeSampler {
    kernels: StepKernels,
    inc: IncrementSampler,
}

impl BridgeSampler {
    pub fn new(kernels: StepKernels) -> Self {
        let inc = IncrementSampler::exact(kernels.model(), kernels.dt());
        Self { kernels, inc }
    }

    pub fn kernels(&self) -> &StepKernels {
        &self.kernels
    }

    /// One exact increment of the (possibly dual) walk.
    pub(crate) fn step(&self, rng: &mut RngStream) -> f64 {
        let xi = self.inc.sample(rng);
        if self.kernels.is_dual() {
            -xi
        } else {
            xi
        }
    }

    pub fn sample(&self, x: f64, y: f64, rng: &mut RngStream) -> Result<PathGrid> {
        let k = &self.kernels;
        let n = k.n();
        let den = k.density(n, y - x);
        if !(den > DEN_FLOOR) {
            return Err(Error::BridgeDegeneracy { value: den });
        }
        let dt = k.dt();
        let mut values = Vec::with_capacity(n + 1);
        values.push(x);
        let mut cur = x;
        for step in 0..n {
            let rest = n - step - 1;
            let next = if rest == 0 {
                y
            } else if let Some(sigma) = k.gaussian_sigma() {
                let r = rest as f64 * dt;
                // pinned Gaussian step (the drift cancels)
                let mean = cur + (y - cur) * dt / (dt + r);
                let sd = sigma * (dt * r / (dt + r)).sqrt();
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            } else {
                let peak = k.peak(rest);
                let mut tries = 0u64;
                loop {
                    let w = cur + self.step(rng);
                    if rng.open01() * peak < k.density(rest, y - w) {
                        break w;
                    }
                    tries += 1;
                    if tries >= MAX_TRIES {
                        return Err(Error::Budget(format!("bridge step {step} rejected {tries} proposals")));
                    }
                }
            };
            values.push(next);
            cur = next;
        }
        Ok(PathGrid::from_values(k.horizon(), values))
    }
}

pub fn sample_bridge(model: &LevyModel, x: f64, y: f64, t: f64, n: usize, rng: &mut RngStream) -> Result<PathGrid> {
    BridgeSampler::new(StepKernels::new(model, t, n)?).sample(x, y, rng)
}

/// `p_{t-s}(X_s, y) / p_t(x, y)` for a prefix ending at grid time `s < t`.
pub fn bridge_rn_weight(kernels: &StepKernels, prefix: &PathGrid, x: f64, y: f64) -> Result<f64> {
    let n = kernels.n();
    let k = prefix.n();
    if k >= n {
        return Err(Error::InvalidArgument("prefix must end before the horizon".into()));
    }
    let den = kernels.density(n, y - x);
    if !(den > DEN_FLOOR) {
        return Err(Error::BridgeDegeneracy { value: den });
    }
    Ok(kernels.density(n - k, y - prefix.end()) / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_one_sample, oracle, EmpiricalSample};

    fn ks_normal(values: Vec<f64>, sd: f64) -> f64 {
        let s = EmpiricalSample::new(values).unwrap();
        ks_one_sample(&s, |x| oracle::normal_cdf(x / sd)).unwrap().p_value.unwrap()
    }

    #[test]
    fn stable_increments_match_characteristic_function() {
        let models = [
            LevyModel::symmetric_stable(1.5, 1.0).unwrap(),
            LevyModel::stable_with_drift(0.8, 0.5, 0.7, 0.2).unwrap(),
            LevyModel::asymmetric_stable(1.0, -0.4, 1.3).unwrap(),
            LevyModel::stable_with_drift(1.8, -0.9, 1.0, 0.0).unwrap(),
        ];
        let n = 200_000;
        for m in models {
            let dt = 0.37;
            let inc = IncrementSampler::exact(&m, dt);
            let mut rng = RngStream::new(5);
            let xs: Vec<f64> = (0..n).map(|_| inc.sample(&mut rng)).collect();
            for u in [0.3, 1.0, 2.5] {
                let (re, im) = xs.iter().fold((0.0, 0.0), |(a, b), x| (a + (u * x).cos(), b + (u * x).sin()));
                let (re, im) = (re / n as f64, im / n as f64);
                let phi = crate::charfn::char_function(&m, dt, u);
                // each component has variance ≤ 1/n
                let tol = 4.0 / (n as f64).sqrt();
                assert!((re - phi.re).abs() < tol && (im - phi.im).abs() < tol, "{:?} u={u}: ({re},{im}) vs {phi}", m.kind());
            }
        }
    }

    #[test]
    fn increment_variance_matches_model() {
        let m = LevyModel::brownian_plus_compound_poisson(0.8, 0.1, 3.0, crate::charfn::JumpLaw { mean: 0.5, sd: 0.4 }).unwrap();
        let inc = IncrementSampler::exact(&m, 1.0);
        let mut rng = RngStream::new(6);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| inc.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let v = m.variance_at(1.0).unwrap();
        assert!((var - v).abs() < 0.03 * v, "{var} vs {v}");
        assert!((mean - m.mean_at(1.0).unwrap()).abs() < 4.0 * (v / n as f64).sqrt());
    }

    #[test]
    fn brownian_endpoint_is_gaussian() {
        let m = LevyModel::brownian(1.0, 0.0).unwrap();
        let mut rng = RngStream::new(7);
        let ends: Vec<f64> = (0..5000).map(|_| sample_path(&m, 0.0, 2.0, 16, &mut rng).unwrap().end()).collect();
        assert!(ks_normal(ends, 2f64.sqrt()) > 0.01);
    }

    #[test]
    fn shift_and_seed_determinism() {
        let m = LevyModel::stable_with_drift(1.5, 0.3, 1.0, 0.1).unwrap();
        let a = sample_path(&m, 5.0, 1.0, 64, &mut RngStream::new(8)).unwrap();
        let b = sample_path(&m, 0.0, 1.0, 64, &mut RngStream::new(8)).unwrap();
        let c = sample_path(&m, 0.0, 1.0, 64, &mut RngStream::new(8)).unwrap();
        assert_eq!(b, c);
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u - 5.0 - v).abs() < 1e-12);
        }
        assert_eq!(a.times.len(), 65);
        assert_eq!(a.horizon(), 1.0);
    }

    #[test]
    fn tabulated_sampler_requires_a_table() {
        assert!(matches!(IncrementSampler::tabulated(None), Err(Error::RequiresDensity)));
        let m = LevyModel::brownian(1.0, 0.0).unwrap();
        let g = crate::density::invert_density(&m, 1.0, crate::density::GridSpec::symmetric(8.0, 0.01).unwrap()).unwrap();
        let inc = IncrementSampler::tabulated(Some(&g)).unwrap();
        let mut rng = RngStream::new(9);
        assert!(ks_normal((0..5000).map(|_| inc.sample(&mut rng)).collect(), 1.0) > 0.01);
    }

    #[test]
    fn brownian_bridge_midpoint() {
        let m = LevyModel::brownian(1.0, 0.3).unwrap();
        let mut rng = RngStream::new(10);
        let mid: Vec<f64> = (0..5000)
            .map(|_| {
                let p = sample_bridge(&m, 0.0, 0.0, 1.0, 8, &mut rng).unwrap();
                assert_eq!(p.end(), 0.0);
                p.value_at(0.5).unwrap()
            })
            .collect();
        assert!(ks_normal(mid, 0.5) > 0.01);
    }

    #[test]
    fn stable_bridge_midpoint_matches_kernel_product() {
        // the midpoint of a 2-step bridge from 0 to 0 has density ∝ f_{1/2}(z) f_{1/2}(-z)
        let m = LevyModel::stable_with_drift(1.5, 0.5, 1.0, 0.0).unwrap();
        let k = StepKernels::new(&m, 1.0, 2).unwrap();
        let h = 1e-3;
        let zs: Vec<f64> = (-40_000..=40_000).map(|i| i as f64 * h).collect();
        let w: Vec<f64> = zs.iter().map(|&z| k.density(1, z) * k.density(1, -z)).collect();
        let mesh = Mesh::new(zs, w);
        let total = mesh.total();
        let sampler = BridgeSampler::new(k);
        let mut rng = RngStream::new(11);
        let mid: Vec<f64> = (0..5000).map(|_| sampler.sample(0.0, 0.0, &mut rng).unwrap().values[1]).collect();
        let cdf = |x: f64| -> f64 {
            // invert the quantile by bisection on the mesh
            let (mut lo, mut hi) = (0.0, total);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if mesh.quantile(mid) < x {
                    lo = mid
                } else {
                    hi = mid
                }
            }
            lo / total
        };
        let r = ks_one_sample(&EmpiricalSample::new(mid).unwrap(), cdf).unwrap();
        assert!(r.p_value.unwrap() > 0.01, "{r:?}");
    }

    #[test]
    fn one_step_bridge_is_its_endpoints() {
        let m = LevyModel::symmetric_stable(1.2, 1.0).unwrap();
        let p = sample_bridge(&m, 0.3, -1.1, 2.0, 1, &mut RngStream::new(1)).unwrap();
        assert_eq!(p.values, vec![0.3, -1.1]);
        assert_eq!(p.times, vec![0.0, 2.0]);
    }

    #[test]
    fn cauchy_bridge_midpoint_is_centered() {
        let m = LevyModel::symmetric_stable(1.0, 1.0).unwrap();
        let sampler = BridgeSampler::new(StepKernels::new(&m, 1.0, 16).unwrap());
        let mut rng = RngStream::new(12);
        let mid: Vec<f64> = (0..4000).map(|_| sampler.sample(0.0, 0.0, &mut rng).unwrap().values[8]).collect();
        let n = mid.len() as f64;
        let mean = mid.iter().sum::<f64>() / n;
        let sd = (mid.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 4.0 * sd / n.sqrt(), "{mean} ± {sd}");
    }

    #[test]
    fn rn_weight_closed_form_and_importance_identity() {
        let m = LevyModel::brownian(1.0, 0.0).unwrap();
        let k = StepKernels::new(&m, 1.0, 2).unwrap();
        let prefix = PathGrid::from_values(0.5, vec![0.0, 0.0]);
        assert!((bridge_rn_weight(&k, &prefix, 0.0, 0.0).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        let empty = PathGrid::from_values(0.5, vec![0.4]);
        assert!((bridge_rn_weight(&k, &empty, 0.4, -0.2).unwrap() - 1.0).abs() < 1e-14);

        let stable = LevyModel::symmetric_stable(1.5, 1.0).unwrap();
        let k = StepKernels::new(&stable, 1.0, 2).unwrap();
        let mut rng = RngStream::new(13);
        let n = 40_000;
        let (mut acc, mut acc2) = (0.0, 0.0);
        for _ in 0..n {
            let p = sample_path(&stable, 0.0, 0.5, 1, &mut rng).unwrap();
            let w = bridge_rn_weight(&k, &p, 0.0, 0.0).unwrap() * if (0.0..=1.0).contains(&p.end()) { 1.0 } else { 0.0 };
            acc += w;
            acc2 += w * w;
        }
        let free = acc / n as f64;
        let se_free = ((acc2 / n as f64 - free * free) / n as f64).sqrt();
        let sampler = BridgeSampler::new(k);
        let hits = (0..n)
            .filter(|_| (0.0..=1.0).contains(&sampler.sample(0.0, 0.0, &mut rng).unwrap().values[1]))
            .count() as f64;
        let bridge = hits / n as f64;
        let se_bridge = (bridge * (1.0 - bridge) / n as f64).sqrt();
        assert!((free - bridge).abs() < 3.0 * (se_free.powi(2) + se_bridge.powi(2)).sqrt(), "{free} vs {bridge}");
    }

    #[test]
    fn grid_alignment() {
        let p = PathGrid::from_values(1.0, vec![0.0; 11]);
        assert_eq!(p.index_of(0.3).unwrap(), 3);
        assert!(matches!(p.index_of(0.35), Err(Error::GridAlignment(_))));
    }
}
