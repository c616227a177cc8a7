//! Path samplers for the conditioned process, its bridges and meanders.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::killed::{default_reach, KilledWalk, Terminal};
use crate::charfn::LevyModel;
use crate::error::{Error, Result};
use crate::family::StepKernels;
use crate::fluctuation::split_at_min;
use crate::ladder::RenewalFunction;
use crate::pathsim::{sample_path, PathGrid};
use crate::rng::RngStream;
use crate::stats::{bin_of, chi_square_independence, ks_two_sample, quantile_edges, EmpiricalSample, TestBundle, TestReport};

/// `P↑_x` on `[0, t]`: the killed walk from `x` weighted by `h(X_t)`.
#[derive(Clone, Debug)]
pub struct ConditionedSampler {
    walk: KilledWalk,
    start: f64,
}

impl ConditionedSampler {
    pub fn new(model: &LevyModel, h: &RenewalFunction, x: f64, t: f64, n: usize) -> Result<Self> {
        Self::with_kernels(StepKernels::new(model, t, n)?, h, x)
    }

    /// On given (possibly dual) kernels.
    pub fn with_kernels(kernels: StepKernels, h: &RenewalFunction, x: f64) -> Result<Self> {
        if !(x >= 0.0) {
            return Err(Error::InvalidArgument(format!("start must be ≥ 0, got {x}")));
        }
        let reach = default_reach(&kernels, x, x);
        let walk = KilledWalk::new(kernels, Terminal::Harmonic(h.clone()), reach)?;
        Ok(Self { walk, start: x })
    }

    pub fn reach(&self) -> f64 {
        self.walk.reach()
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<PathGrid> {
        self.walk.sample(self.start, self.walk.steps(), rng)
    }

    /// The path up to step `k` only.
    pub fn sample_until(&self, k: usize, rng: &mut RngStream) -> Result<PathGrid> {
        self.walk.sample_until(self.start, self.walk.steps(), k, rng)
    }

    /// `E_x[h(X_{jΔ}); X_Δ, …, X_{jΔ} > 0]` of the skeleton, in units of `h`'s shape.
    pub fn harmonic(&self, j: usize, x: f64) -> f64 {
        self.walk.value(j, x)
    }

    /// Total-variation distance between the first step and a free step from the start.
    pub fn first_step_tv(&self) -> f64 {
        let k = self.walk.kernels();
        let n = self.walk.steps();
        let x = self.start;
        let norm = self.walk.value(n, x);
        let span = 60.0 * k.scale(1);
        let m = 24_000;
        let dw = 2.0 * span / m as f64;
        let mut tv = 0.0;
        let mut free_mass = 0.0;
        for i in 0..=m {
            let w = x - span + i as f64 * dw;
            let f = k.density(1, w - x);
            let ratio = if w > 0.0 { self.walk.value(n - 1, w) / norm } else { 0.0 };
            let c = if i == 0 || i == m { 0.5 } else { 1.0 };
            tv += c * dw * f * (ratio - 1.0).abs();
            free_mass += c * dw * f;
        }
        // steps beyond the window count fully
        0.5 * tv + 0.5 * (1.0 - free_mass).max(0.0)
    }
}

pub fn sample_conditioned(model: &LevyModel, h: &RenewalFunction, x: f64, t: f64, n: usize, rng: &mut RngStream) -> Result<PathGrid> {
    ConditionedSampler::new(model, h, x, t, n)?.sample(rng)
}

/// Bridges `P^{↑,t}_{x,y}` of the conditioned process. The factors `h(x)`,
/// `ĥ(y)` and `h(w)ĥ(w)` of the conditioned kernels cancel in every bridge
/// step, leaving the killed bridge; `x = y = 0` gives the normalized excursion.
#[derive(Clone, Debug)]
pub struct ConditionedBridge {
    walk: KilledWalk,
    start: f64,
    end: f64,
}

impl ConditionedBridge {
    pub fn new(model: &LevyModel, x: f64, y: f64, t: f64, n: usize) -> Result<Self> {
        Self::with_kernels(StepKernels::new(model, t, n)?, x, y)
    }

    /// Excursion of the primal process.
    pub fn excursion(model: &LevyModel, t: f64, n: usize) -> Result<Self> {
        Self::new(model, 0.0, 0.0, t, n)
    }

    pub fn with_kernels(kernels: StepKernels, x: f64, y: f64) -> Result<Self> {
        if !(x >= 0.0 && y >= 0.0) {
            return Err(Error::InvalidArgument(format!("bridge ends must be ≥ 0, got {x}, {y}")));
        }
        let reach = default_reach(&kernels, x, y);
        let walk = KilledWalk::new(kernels, Terminal::Pinned(y), reach)?;
        Ok(Self { walk, start: x, end: y })
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<PathGrid> {
        self.walk.sample(self.start, self.walk.steps(), rng)
    }

    /// Bridge of `m ≤ n` steps between the same ends.
    pub fn sample_steps(&self, m: usize, rng: &mut RngStream) -> Result<PathGrid> {
        self.walk.sample(self.start, m, rng)
    }

    /// The first `k` steps of a full bridge.
    pub fn sample_until(&self, k: usize, rng: &mut RngStream) -> Result<PathGrid> {
        self.walk.sample_until(self.start, self.walk.steps(), k, rng)
    }

    /// `q_{mΔ}(x, y)` of the skeleton.
    pub fn killed_density(&self, m: usize) -> f64 {
        self.walk.value(m, self.start)
    }
}

pub fn sample_conditioned_bridge(model: &LevyModel, x: f64, y: f64, t: f64, n: usize, rng: &mut RngStream) -> Result<PathGrid> {
    ConditionedBridge::new(model, x, y, t, n)?.sample(rng)
}

/// Paths with self-normalized importance weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedPaths {
    pub paths: Vec<PathGrid>,
    pub weights: Vec<f64>,
    /// `β_t = E↑_0[1/h(X_t)]` and its standard error.
    pub beta: f64,
    pub beta_stderr: f64,
    /// Kish effective sample size.
    pub ess: f64,
    pub warnings: Vec<String>,
}

impl WeightedPaths {
    /// Endpoints with their weights.
    pub fn endpoints(&self) -> Result<EmpiricalSample> {
        EmpiricalSample::weighted(self.paths.iter().map(|p| p.end()).collect(), self.weights.clone())
    }
}

/// Meanders of length `t`: `P↑_0` reweighted by `1/(β_t h(X_t))`, plus the
/// skeleton meander sampled directly (killed walk from 0 without weight).
#[derive(Debug)]
pub struct MeanderSampler {
    chain: ConditionedSampler,
    h: RenewalFunction,
    direct: OnceLock<Result<KilledWalk>>,
}

impl MeanderSampler {
    pub fn new(model: &LevyModel, h: &RenewalFunction, t: f64, n: usize) -> Result<Self> {
        Self::with_kernels(StepKernels::new(model, t, n)?, h)
    }

    pub fn with_kernels(kernels: StepKernels, h: &RenewalFunction) -> Result<Self> {
        Ok(Self {
            chain: ConditionedSampler::with_kernels(kernels, h, 0.0)?,
            h: h.clone(),
            direct: OnceLock::new(),
        })
    }

    /// `batch` paths of `P↑_0` with weights `∝ 1/h(X_t)`.
    pub fn weighted(&self, batch: usize, rng: &mut RngStream) -> Result<WeightedPaths> {
        if batch < 2 {
            return Err(Error::InvalidArgument("need at least two paths".into()));
        }
        let paths = (0..batch).map(|_| self.chain.sample(rng)).collect::<Result<Vec<_>>>()?;
        // weights from the shape alone, so scaling h cannot move a single bit
        let raw: Vec<f64> = paths.iter().map(|p| 1.0 / self.h.shape(p.end())).collect();
        let n = batch as f64;
        let mean = raw.iter().sum::<f64>() / n;
        let var = raw.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let beta = mean / self.h.scale;
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let mut warnings = Vec::new();
        if ess < 0.1 * n {
            warnings.push(format!("weight degeneracy: effective sample size {ess:.1} of {batch}"));
        }
        Ok(WeightedPaths {
            paths,
            weights,
            beta,
            beta_stderr: (var / n).sqrt() / self.h.scale,
            ess,
            warnings,
        })
    }

    /// Unweighted meanders by multinomial resampling of a weighted batch.
    pub fn resampled(&self, batch: usize, rng: &mut RngStream) -> Result<Vec<PathGrid>> {
        let w = self.weighted(batch, rng)?;
        let mut cum = Vec::with_capacity(batch);
        let mut acc = 0.0;
        for x in &w.weights {
            acc += x;
            cum.push(acc);
        }
        Ok((0..batch)
            .map(|_| {
                let u = rng.open01() * acc;
                let i = cum.partition_point(|&c| c < u).min(batch - 1);
                w.paths[i].clone()
            })
            .collect())
    }

    fn direct_walk(&self) -> Result<&KilledWalk> {
        let walk = self.direct.get_or_init(|| {
            let k = self.chain.walk.kernels().clone();
            let reach = default_reach(&k, 0.0, 0.0);
            KilledWalk::new(k, Terminal::Free, reach)
        });
        walk.as_ref().map_err(Clone::clone)
    }

    /// Skeleton meander of `m ≤ n` steps, sampled without weights.
    pub fn direct(&self, m: usize, rng: &mut RngStream) -> Result<PathGrid> {
        self.direct_walk()?.sample(0.0, m, rng)
    }

    /// `P_0(X_1, …, X_m > 0)` for the skeleton.
    pub fn survival(&self, m: usize) -> Result<f64> {
        Ok(self.direct_walk()?.value(m, 0.0))
    }
}

pub fn sample_meander(model: &LevyModel, h: &RenewalFunction, t: f64, n: usize, batch: usize, rng: &mut RngStream) -> Result<WeightedPaths> {
    MeanderSampler::new(model, h, t, n)?.weighted(batch, rng)
}

/// Free paths whose argmin falls in a window, split at the minimum.
#[derive(Clone, Debug)]
pub(crate) struct MinSplitBin {
    pub lo: usize,
    pub hi: usize,
    pub pre: Vec<PathGrid>,
    pub post: Vec<PathGrid>,
    pub warnings: Vec<String>,
}

/// Splits `n_paths` free paths at their minimum and keeps those with argmin
/// index in `[center - width/2, center + width/2]` (times), widening the
/// window until at least `min_count` paths fall in it.
pub(crate) fn min_split_bin(
    model: &LevyModel,
    t: f64,
    n: usize,
    n_paths: usize,
    center: f64,
    width: f64,
    min_count: usize,
    rng: &mut RngStream,
) -> Result<MinSplitBin> {
    let splits: Vec<_> = (0..n_paths)
        .map(|_| sample_path(model, 0.0, t, n, rng).map(|p| split_at_min(&p)))
        .collect::<Result<_>>()?;
    let mut width = width;
    let mut warnings = Vec::new();
    loop {
        let dt = t / n as f64;
        let lo = (((center - width / 2.0) / dt).ceil().max(0.0)) as usize;
        let hi = ((((center + width / 2.0) / dt).floor()) as usize).min(n);
        let (pre, post): (Vec<_>, Vec<_>) = splits
            .iter()
            .filter(|d| (lo..=hi).contains(&d.rho_index))
            .map(|d| (d.pre.clone(), d.post.clone()))
            .unzip();
        if pre.len() >= min_count || width >= t {
            return Ok(MinSplitBin { lo, hi, pre, post, warnings });
        }
        warnings.push(format!("only {} paths with argmin in [{lo}, {hi}]; widening the bin", pre.len()));
        width *= 2.0;
    }
}

/// Meanders of both signs with the exact skeleton law of the argmin.
pub(crate) struct MeanderPair {
    primal: MeanderSampler,
    dual: MeanderSampler,
    n: usize,
}

impl MeanderPair {
    pub(crate) fn new(model: &LevyModel, t: f64, n: usize) -> Result<Self> {
        let k = StepKernels::new(model, t, n)?;
        // the weighted chain is not used here; its h only fixes the terminal shape
        let h = RenewalFunction::linear();
        Ok(Self {
            primal: MeanderSampler::with_kernels(k.clone(), &h)?,
            dual: MeanderSampler::with_kernels(k.dual(), &h)?,
            n,
        })
    }

    fn survival(s: &MeanderSampler, m: usize) -> Result<f64> {
        if m == 0 {
            Ok(1.0)
        } else {
            s.survival(m)
        }
    }

    /// `P(argmin = k)` for `k ∈ [lo, hi]`, up to a common factor.
    pub(crate) fn argmin_weights(&self, lo: usize, hi: usize) -> Result<Vec<f64>> {
        (lo..=hi)
            .map(|k| Ok(Self::survival(&self.dual, k)? * Self::survival(&self.primal, self.n - k)?))
            .collect()
    }

    /// `count` pairs (dual meander of `k` steps, meander of `n - k` steps) with
    /// `k` drawn from the argmin law restricted to `[lo, hi]`.
    pub(crate) fn sample(&self, lo: usize, hi: usize, count: usize, rng: &mut RngStream) -> Result<(Vec<PathGrid>, Vec<PathGrid>)> {
        let w = self.argmin_weights(lo, hi)?;
        let total: f64 = w.iter().sum();
        let mut pre = Vec::with_capacity(count);
        let mut post = Vec::with_capacity(count);
        for _ in 0..count {
            let mut u = rng.open01() * total;
            let mut k = hi;
            for (i, wi) in w.iter().enumerate() {
                if u < *wi {
                    k = lo + i;
                    break;
                }
                u -= wi;
            }
            let point = |s: f64| PathGrid::from_values(s, vec![0.0]);
            pre.push(if k == 0 { point(0.0) } else { self.dual.direct(k, rng)? });
            post.push(if k == self.n { point(0.0) } else { self.primal.direct(self.n - k, rng)? });
        }
        Ok((pre, post))
    }
}

fn scaled_end(p: &PathGrid, alpha: f64) -> f64 {
    let len = p.horizon();
    if len > 0.0 {
        p.end() / len.powf(1.0 / alpha)
    } else {
        0.0
    }
}

/// Given the argmin near `t/2`, `(-X̲_t, X_t - X̲_t)` against independent dual and
/// primal meander endpoints with matching lengths, plus a 4×4 independence test
/// of the two (each divided by its length to the power `1/α`).
pub fn joint_law_check(model: &LevyModel, t: f64, n: usize, n_paths: usize, rng: &mut RngStream) -> Result<TestBundle> {
    let bin = min_split_bin(model, t, n, n_paths, t / 2.0, 0.1 * t, 200, rng)?;
    let pair = MeanderPair::new(model, t, n)?;
    let (cpre, cpost) = pair.sample(bin.lo, bin.hi, bin.pre.len(), rng)?;
    let ends = |v: &[PathGrid]| EmpiricalSample::new(v.iter().map(|p| p.end()).collect());
    let pre = ks_two_sample(&ends(&bin.pre)?, &ends(&cpre)?)?.named("pre_min_depth_vs_dual_meander");
    let post = ks_two_sample(&ends(&bin.post)?, &ends(&cpost)?)?.named("post_min_rise_vs_meander");
    let a = model.alpha();
    let xs: Vec<f64> = bin.pre.iter().map(|p| scaled_end(p, a)).collect();
    let ys: Vec<f64> = bin.post.iter().map(|p| scaled_end(p, a)).collect();
    let indep = independence_4x4(&xs, &ys)?.named("depth_rise_independence");
    let mut bundle = TestBundle::bonferroni("joint_law_check", 0.01, vec![pre, post, indep]);
    bundle.warnings = bin.warnings;
    for r in &mut bundle.reports {
        r.metadata.insert("argmin_bin".into(), format!("[{}, {}]", bin.lo, bin.hi));
    }
    Ok(bundle)
}

/// Chi-square independence on quartile bins of each coordinate.
pub(crate) fn independence_4x4(xs: &[f64], ys: &[f64]) -> Result<TestReport> {
    let ex = quantile_edges(xs, 4);
    let ey = quantile_edges(ys, 4);
    let mut table = vec![vec![0u64; 4]; 4];
    for (x, y) in xs.iter().zip(ys) {
        table[bin_of(&ex, *x)][bin_of(&ey, *y)] += 1;
    }
    chi_square_independence(&table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ladder::renewal_analytic;
    use crate::stats::{ks_one_sample, oracle};

    fn brownian() -> LevyModel {
        LevyModel::brownian(1.0, 0.0).unwrap()
    }

    #[test]
    fn conditioned_from_zero_ends_like_bessel3() {
        let m = brownian();
        let n = 256;
        let s = ConditionedSampler::new(&m, &RenewalFunction::linear(), 0.0, 1.0, n).unwrap();
        let mut rng = RngStream::new(41);
        let ends: Vec<f64> = (0..6000).map(|_| s.sample(&mut rng).unwrap().end()).collect();
        let delta = oracle::grid_barrier_shift(1.0, 1.0 / n as f64);
        // Bessel(3) from δ at time 1, minus δ
        let oracle_ends: Vec<f64> = (0..6000)
            .map(|_| oracle::bessel3_from(1.0, delta, 1.0, &mut rng) - delta)
            .collect();
        let r = ks_two_sample(&EmpiricalSample::new(ends).unwrap(), &EmpiricalSample::new(oracle_ends).unwrap()).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn paths_stay_positive() {
        let m = LevyModel::asymmetric_stable(1.5, 0.5, 1.0).unwrap();
        let h = renewal_analytic(&m).unwrap();
        let mut rng = RngStream::new(42);
        let p = sample_conditioned(&m, &h, 0.0, 1.0, 32, &mut rng).unwrap();
        assert!(p.values[1..].iter().all(|v| *v > 0.0));
        let b = sample_conditioned_bridge(&m, 0.5, 0.0, 1.0, 32, &mut rng).unwrap();
        assert_eq!((b.start(), b.end()), (0.5, 0.0));
        assert!(b.values[1..32].iter().all(|v| *v > 0.0));
        let one = sample_conditioned_bridge(&m, 0.3, 0.7, 1.0, 1, &mut rng).unwrap();
        assert_eq!(one.values, vec![0.3, 0.7]);
    }

    #[test]
    fn far_start_first_step_is_nearly_free() {
        for m in [brownian(), LevyModel::symmetric_stable(1.5, 1.0).unwrap()] {
            let h = renewal_analytic(&m).unwrap();
            let s = ConditionedSampler::new(&m, &h, 3.0, 1.0, 64).unwrap();
            let tv = s.first_step_tv();
            assert!(tv < 0.05, "{tv}");
            let near = ConditionedSampler::new(&m, &h, 0.0, 1.0, 64).unwrap();
            assert!(near.first_step_tv() > tv);
        }
    }

    #[test]
    fn killed_bridge_equals_rejection_bridge() {
        // bridges from x to y kept when their grid minimum is positive
        let m = LevyModel::symmetric_stable(1.5, 1.0).unwrap();
        let n = 16;
        let (x, y) = (0.4, 0.8);
        let cb = ConditionedBridge::new(&m, x, y, 1.0, n).unwrap();
        let bs = crate::pathsim::BridgeSampler::new(StepKernels::new(&m, 1.0, n).unwrap());
        let mut rng = RngStream::new(43);
        let mut kept = Vec::new();
        while kept.len() < 3000 {
            let p = bs.sample(x, y, &mut rng).unwrap();
            if p.values.iter().all(|v| *v > 0.0) {
                kept.push(p.values[n / 2]);
            }
        }
        let direct: Vec<f64> = (0..3000).map(|_| cb.sample(&mut rng).unwrap().values[n / 2]).collect();
        let r = ks_two_sample(&EmpiricalSample::new(kept).unwrap(), &EmpiricalSample::new(direct).unwrap()).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn brownian_excursion_midpoint_with_shifted_oracle() {
        let m = brownian();
        let n = 256;
        let e = ConditionedBridge::excursion(&m, 1.0, n).unwrap();
        let mut rng = RngStream::new(44);
        let mid: Vec<f64> = (0..5000).map(|_| e.sample(&mut rng).unwrap().values[n / 2]).collect();
        let delta = oracle::grid_barrier_shift(1.0, 1.0 / n as f64);
        let orc: Vec<f64> = (0..5000)
            .map(|_| oracle::bessel3_bridge(1.0, delta, delta, 1.0, &[0.5], &mut rng)[0] - delta)
            .collect();
        let r = ks_two_sample(&EmpiricalSample::new(mid).unwrap(), &EmpiricalSample::new(orc).unwrap()).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn meander_weights_and_direct_sampler_agree() {
        let m = brownian();
        let n = 128;
        let ms = MeanderSampler::new(&m, &RenewalFunction::linear(), 1.0, n).unwrap();
        let mut rng = RngStream::new(45);
        let w = ms.weighted(6000, &mut rng).unwrap();
        assert!(w.weights.iter().all(|x| x.is_finite() && *x > 0.0));
        assert!(w.warnings.is_empty(), "{:?}", w.warnings);
        let direct: Vec<f64> = (0..6000).map(|_| ms.direct(n, &mut rng).unwrap().end()).collect();
        let r = ks_two_sample(&w.endpoints().unwrap(), &EmpiricalSample::new(direct.clone()).unwrap()).unwrap();
        assert!(r.pass, "{r:?}");
        let delta = oracle::grid_barrier_shift(1.0, 1.0 / n as f64);
        let r = ks_one_sample(&EmpiricalSample::new(direct).unwrap(), |z| oracle::meander_endpoint_cdf(z, 1.0, 1.0, delta)).unwrap();
        assert!(r.pass, "{r:?}");
        // β_t is E↑[1/X_t] for h(x) = x; the Bessel(3) value is √(2/π)
        assert!((w.beta - (2.0 / core::f64::consts::PI).sqrt()).abs() < 0.05, "{}", w.beta);
        let scaled = ms_scaled_beta(&m, n);
        assert!(scaled.is_finite());
        let res = ms.resampled(200, &mut rng).unwrap();
        assert_eq!(res.len(), 200);
    }

    fn ms_scaled_beta(m: &LevyModel, n: usize) -> f64 {
        let ms = MeanderSampler::new(m, &RenewalFunction::linear().scaled(7.3), 1.0, n).unwrap();
        ms.weighted(10, &mut RngStream::new(1)).unwrap().beta
    }

    #[test]
    fn h_scale_leaves_samples_unchanged() {
        let m = LevyModel::symmetric_stable(1.5, 1.0).unwrap();
        let h = renewal_analytic(&m).unwrap();
        let a = MeanderSampler::new(&m, &h, 1.0, 16).unwrap();
        let b = MeanderSampler::new(&m, &h.scaled(7.3), 1.0, 16).unwrap();
        let wa = a.weighted(50, &mut RngStream::new(7)).unwrap();
        let wb = b.weighted(50, &mut RngStream::new(7)).unwrap();
        assert_eq!(wa.paths, wb.paths);
        for (x, y) in wa.weights.iter().zip(&wb.weights) {
            assert!((x - y).abs() <= 1e-15 * x);
        }
        assert!((wa.beta / wb.beta - 7.3).abs() < 1e-12);
    }

    #[test]
    fn brownian_joint_law() {
        let m = brownian();
        let mut rng = RngStream::new(46);
        let b = joint_law_check(&m, 1.0, 64, 20_000, &mut rng).unwrap();
        assert!(b.pass, "{b:?}");
    }
}
