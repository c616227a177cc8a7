//! Statistical verification of the path identities.
//!
//! Only finite-dimensional projections are tested: marginals at a few times,
//! one pair of times, endpoints and midpoints. Equality of path laws is
//! never claimed beyond these projections.

use serde::{Deserialize, Serialize};

use super::{
    chi_square_gof, energy_test, ks_distance, ks_one_sample, ks_two_sample, oracle, EmpiricalSample, TestBundle, TestReport,
};
use crate::charfn::LevyModel;
use crate::conditioned::samplers::{independence_4x4, min_split_bin, MeanderPair};
use crate::conditioned::ConditionedBridge;
use crate::error::{Error, Result};
use crate::family::StepKernels;
use crate::fluctuation::{argmin, split_at_min, vervaat};
use crate::pathsim::{sample_path, BridgeSampler, PathGrid};
use crate::rng::RngStream;

const LEVEL: f64 = 0.01;
/// Points per side entering the energy test (its cost is quadratic).
const ENERGY_POINTS: usize = 1000;
const ENERGY_PERMUTATIONS: usize = 199;

fn sample_of(values: Vec<f64>) -> Result<EmpiricalSample> {
    EmpiricalSample::new(values)
}

fn quarter_indices(n: usize) -> Result<[usize; 3]> {
    if n < 4 || n % 4 != 0 {
        return Err(Error::InvalidArgument(format!("n_steps must be a multiple of 4, got {n}")));
    }
    Ok([n / 4, n / 2, 3 * n / 4])
}

fn meta(r: TestReport, model: &LevyModel, t: f64, n: usize, n_paths: usize) -> TestReport {
    r.meta("model", model.kind().name())
        .meta("t", t)
        .meta("n_steps", n)
        .meta("n_paths", n_paths)
}

/// How the bridge is turned into a candidate excursion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VervaatVariant {
    Standard,
    /// Negative control: the shift by `-X̲_t` is left out.
    WithoutMinShift,
}

fn rotated(path: &PathGrid, variant: VervaatVariant) -> Result<PathGrid> {
    let v = vervaat(path)?;
    Ok(match variant {
        VervaatVariant::Standard => v,
        VervaatVariant::WithoutMinShift => {
            let m = path.values[argmin(path)];
            PathGrid {
                times: v.times,
                values: v.values.iter().map(|x| x + m).collect(),
            }
        }
    })
}

/// Vervaat transforms of `n_paths` bridges `P^t_{0,0}` against as many
/// excursions: KS at `t/4, t/2, 3t/4` and an energy test on `(V_{t/4}, V_{3t/4})`.
pub fn verify_vervaat(model: &LevyModel, t: f64, n_steps: usize, n_paths: usize, rng: &mut RngStream) -> Result<TestBundle> {
    verify_vervaat_variant(model, t, n_steps, n_paths, VervaatVariant::Standard, rng)
}

pub fn verify_vervaat_variant(
    model: &LevyModel,
    t: f64,
    n_steps: usize,
    n_paths: usize,
    variant: VervaatVariant,
    rng: &mut RngStream,
) -> Result<TestBundle> {
    let idx = quarter_indices(n_steps)?;
    let bridges = BridgeSampler::new(StepKernels::new(model, t, n_steps)?);
    let excursion = ConditionedBridge::excursion(model, t, n_steps)?;
    let mut v = vec![Vec::with_capacity(n_paths); 3];
    let mut e = vec![Vec::with_capacity(n_paths); 3];
    for _ in 0..n_paths {
        let p = rotated(&bridges.sample(0.0, 0.0, rng)?, variant)?;
        for (c, &i) in idx.iter().enumerate() {
            v[c].push(p.values[i]);
        }
    }
    for _ in 0..n_paths {
        let p = excursion.sample(rng)?;
        for (c, &i) in idx.iter().enumerate() {
            e[c].push(p.values[i]);
        }
    }
    let mut reports = Vec::new();
    for (c, label) in ["quarter", "half", "three_quarters"].iter().enumerate() {
        let r = ks_two_sample(&sample_of(v[c].clone())?, &sample_of(e[c].clone())?)?;
        reports.push(meta(r.named(format!("vervaat_ks_{label}")), model, t, n_steps, n_paths));
    }
    let pairs = |a: &[Vec<f64>]| -> Vec<Vec<f64>> { (0..a[0].len()).map(|i| vec![a[0][i], a[2][i]]).collect() };
    let energy = energy_test(&pairs(&v), &pairs(&e), ENERGY_PERMUTATIONS, ENERGY_POINTS, rng)?;
    reports.push(meta(energy.named("vervaat_energy_pair"), model, t, n_steps, n_paths));
    let name = match variant {
        VervaatVariant::Standard => "vervaat",
        VervaatVariant::WithoutMinShift => "vervaat_without_min_shift",
    };
    Ok(TestBundle::bonferroni(name, LEVEL, reports))
}

/// Brownian cross-check: Vervaat transforms of bridges against the Bessel(3)
/// bridge from `δ` to `δ`, shifted down by the grid barrier shift `δ`.
pub fn verify_vervaat_bessel(sigma: f64, t: f64, n_steps: usize, n_paths: usize, rng: &mut RngStream) -> Result<TestBundle> {
    let idx = quarter_indices(n_steps)?;
    let model = LevyModel::brownian(sigma, 0.0)?;
    let bridges = BridgeSampler::new(StepKernels::new(&model, t, n_steps)?);
    let delta = oracle::grid_barrier_shift(sigma, t / n_steps as f64);
    let times: Vec<f64> = idx.iter().map(|&i| i as f64 * t / n_steps as f64).collect();
    let mut v = vec![Vec::with_capacity(n_paths); 3];
    let mut o = vec![Vec::with_capacity(n_paths); 3];
    for _ in 0..n_paths {
        let p = vervaat(&bridges.sample(0.0, 0.0, rng)?)?;
        for (c, &i) in idx.iter().enumerate() {
            v[c].push(p.values[i]);
        }
        let b = oracle::bessel3_bridge(sigma, delta, delta, t, &times, rng);
        for c in 0..3 {
            o[c].push(b[c] - delta);
        }
    }
    let mut reports = Vec::new();
    for (c, label) in ["quarter", "half", "three_quarters"].iter().enumerate() {
        let r = ks_two_sample(&sample_of(v[c].clone())?, &sample_of(o[c].clone())?)?;
        reports.push(meta(r.named(format!("vervaat_bessel3_{label}")), &model, t, n_steps, n_paths).meta("barrier_shift", delta));
    }
    Ok(TestBundle::bonferroni("vervaat_bessel3_oracle", LEVEL, reports))
}

/// Which paths feed the argmin-uniformity test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoSource {
    Bridge,
    /// Negative control: free paths, whose argmin follows the arcsine law.
    FreePath,
}

/// Chi-square of the argmin index of `P^t_{0,0}` bridges over the `n` grid
/// bins `{0, …, n-1}` (the earliest minimum of a bridge is never at `n`).
pub fn verify_uniform_rho(model: &LevyModel, t: f64, n_steps: usize, n_paths: usize, rng: &mut RngStream) -> Result<TestReport> {
    uniform_rho_from(model, t, n_steps, n_paths, RhoSource::Bridge, rng)
}

pub fn uniform_rho_from(
    model: &LevyModel,
    t: f64,
    n_steps: usize,
    n_paths: usize,
    source: RhoSource,
    rng: &mut RngStream,
) -> Result<TestReport> {
    let bridges = BridgeSampler::new(StepKernels::new(model, t, n_steps)?);
    let mut counts = vec![0u64; n_steps];
    for _ in 0..n_paths {
        let p = match source {
            RhoSource::Bridge => bridges.sample(0.0, 0.0, rng)?,
            RhoSource::FreePath => sample_path(model, 0.0, t, n_steps, rng)?,
        };
        counts[argmin(&p).min(n_steps - 1)] += 1;
    }
    let expected = vec![n_paths as f64 / n_steps as f64; n_steps];
    let r = chi_square_gof(&counts, &expected)?;
    let name = match source {
        RhoSource::Bridge => "uniform_rho",
        RhoSource::FreePath => "uniform_rho_free_path_control",
    };
    Ok(meta(r.named(name), model, t, n_steps, n_paths))
}

/// KS distance between two sorted samples carrying integer multiplicities.
fn ks_counts(a: &[f64], ca: &[u32], b: &[f64], cb: &[u32]) -> f64 {
    let na: f64 = ca.iter().map(|&c| c as f64).sum();
    let nb: f64 = cb.iter().map(|&c| c as f64).sum();
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb, mut d) = (0.0f64, 0.0f64, 0.0f64);
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] == x {
            fa += ca[i] as f64;
            i += 1;
        }
        while j < b.len() && b[j] == x {
            fb += cb[j] as f64;
            j += 1;
        }
        d = d.max((fa / na - fb / nb).abs());
    }
    d
}

fn multinomial_counts(n: usize, rng: &mut RngStream) -> Vec<u32> {
    use rand::Rng;
    let mut c = vec![0u32; n];
    for _ in 0..n {
        c[rng.random_range(0..n)] += 1;
    }
    c
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Outcome of the `ε → 0` study of bridges from `ε` to `ε` conditioned to
/// stay positive against the excursion, at the `t/2` marginal.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DimLimitReport {
    pub eps: Vec<f64>,
    pub distances: Vec<f64>,
    pub reports: Vec<TestReport>,
    /// Bootstrap fraction of `D(ε_i) > D(ε_{i+1})`, one per consecutive pair.
    pub decrease_confidence: Vec<f64>,
    pub monotone_point_estimates: bool,
    pub strict_decrease_confident: bool,
    pub final_ks_pass: bool,
    pub pass: bool,
}

/// `eps` must be decreasing. Each bridge is sampled exactly on the skeleton
/// (no rejection) and compared by its raw value, i.e. the path lifted by `ε`,
/// against excursions; both sides use `n_paths` paths.
pub fn verify_dim(
    model: &LevyModel,
    t: f64,
    eps: &[f64],
    n_steps: usize,
    n_paths: usize,
    resamples: usize,
    rng: &mut RngStream,
) -> Result<DimLimitReport> {
    if eps.is_empty() || eps.windows(2).any(|w| w[1] >= w[0]) || eps.iter().any(|&e| e <= 0.0) {
        return Err(Error::InvalidArgument("eps must be positive and strictly decreasing".into()));
    }
    if n_steps % 2 != 0 {
        return Err(Error::InvalidArgument("n_steps must be even".into()));
    }
    let half = n_steps / 2;
    let midpoints = |b: &ConditionedBridge, rng: &mut RngStream| -> Result<Vec<f64>> {
        (0..n_paths).map(|_| b.sample_until(half, rng).map(|p| p.values[half])).collect()
    };
    let exc = sorted(midpoints(&ConditionedBridge::excursion(model, t, n_steps)?, rng)?);
    let exc_sample = EmpiricalSample::new(exc.clone())?;
    let mut conditioned = Vec::with_capacity(eps.len());
    let mut reports = Vec::with_capacity(eps.len());
    let mut distances = Vec::with_capacity(eps.len());
    for &e in eps {
        let v = sorted(midpoints(&ConditionedBridge::new(model, e, e, t, n_steps)?, rng)?);
        let s = EmpiricalSample::new(v.clone())?;
        distances.push(ks_distance(&s, &exc_sample));
        reports.push(meta(ks_two_sample(&s, &exc_sample)?.named(format!("dim_ks_eps_{e}")), model, t, n_steps, n_paths).meta("eps", e));
        conditioned.push(v);
    }
    let mut wins = vec![0usize; eps.len().saturating_sub(1)];
    for _ in 0..resamples {
        let ce = multinomial_counts(n_paths, rng);
        let d: Vec<f64> = conditioned
            .iter()
            .map(|v| ks_counts(v, &multinomial_counts(n_paths, rng), &exc, &ce))
            .collect();
        for (w, pair) in wins.iter_mut().zip(d.windows(2)) {
            if pair[0] > pair[1] {
                *w += 1;
            }
        }
    }
    let decrease_confidence: Vec<f64> = wins.iter().map(|&w| w as f64 / resamples.max(1) as f64).collect();
    let monotone_point_estimates = distances.windows(2).all(|w| w[1] < w[0]);
    let strict_decrease_confident = decrease_confidence.iter().all(|&c| c >= 0.95);
    let final_ks_pass = reports.last().is_some_and(|r| r.pass);
    Ok(DimLimitReport {
        eps: eps.to_vec(),
        distances,
        reports,
        decrease_confidence,
        monotone_point_estimates,
        strict_decrease_confident,
        final_ks_pass,
        pass: strict_decrease_confident && final_ks_pass,
    })
}

/// How the pieces of the path split at its minimum are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenisovVariant {
    Standard,
    /// Negative control: pre-minimum against primal meanders and post-minimum
    /// against dual ones. Only detectable for asymmetric models.
    SwappedSides,
    /// Negative control: the post-minimum piece is replaced by a free path.
    FreePost,
}

fn midpoint(p: &PathGrid) -> f64 {
    p.values[p.n() / 2]
}

/// Free paths whose minimum falls within `t/2 ± 0.05 t`, split there, against
/// independent dual and primal meanders of matching lengths (lengths drawn from
/// the exact argmin law restricted to the bin). KS on endpoints and midpoints
/// of both pieces, independence of the two endpoints, and for Brownian models
/// the closed-form meander endpoint law of the post-minimum piece.
pub fn verify_denisov(
    model: &LevyModel,
    t: f64,
    n_steps: usize,
    n_paths: usize,
    variant: DenisovVariant,
    rng: &mut RngStream,
) -> Result<TestBundle> {
    let mut bin = min_split_bin(model, t, n_steps, n_paths, t / 2.0, 0.1 * t, 200, rng)?;
    if variant == DenisovVariant::FreePost {
        for p in bin.post.iter_mut() {
            *p = sample_path(model, 0.0, p.horizon(), p.n(), rng)?;
        }
    }
    let pair = match variant {
        DenisovVariant::SwappedSides => MeanderPair::new(&model.dual(), t, n_steps)?,
        _ => MeanderPair::new(model, t, n_steps)?,
    };
    let count = bin.pre.len();
    let (cpre, cpost) = pair.sample(bin.lo, bin.hi, count, rng)?;
    let stat = |v: &[PathGrid], f: fn(&PathGrid) -> f64| EmpiricalSample::new(v.iter().map(f).collect());
    let end: fn(&PathGrid) -> f64 = |p| p.end();
    let mut reports = vec![
        ks_two_sample(&stat(&bin.pre, end)?, &stat(&cpre, end)?)?.named("denisov_pre_end"),
        ks_two_sample(&stat(&bin.post, end)?, &stat(&cpost, end)?)?.named("denisov_post_end"),
        ks_two_sample(&stat(&bin.pre, midpoint)?, &stat(&cpre, midpoint)?)?.named("denisov_pre_midpoint"),
        ks_two_sample(&stat(&bin.post, midpoint)?, &stat(&cpost, midpoint)?)?.named("denisov_post_midpoint"),
    ];
    let a = model.alpha();
    let scaled = |p: &PathGrid| if p.horizon() > 0.0 { p.end() / p.horizon().powf(1.0 / a) } else { 0.0 };
    let xs: Vec<f64> = bin.pre.iter().map(scaled).collect();
    let ys: Vec<f64> = bin.post.iter().map(scaled).collect();
    reports.push(independence_4x4(&xs, &ys)?.named("denisov_independence"));
    if model.kind() == crate::charfn::ModelKind::BrownianWithDrift && model.drift() == 0.0 {
        // probability integral transform through the length-specific law
        let sigma = model.sigma();
        let delta = oracle::grid_barrier_shift(sigma, t / n_steps as f64);
        let u: Vec<f64> = bin
            .post
            .iter()
            .filter(|p| p.n() > 0)
            .map(|p| oracle::meander_endpoint_cdf(p.end(), sigma, p.horizon(), delta))
            .collect();
        reports.push(ks_one_sample(&EmpiricalSample::new(u)?, |x| x.clamp(0.0, 1.0))?.named("denisov_post_end_rayleigh"));
    }
    let name = match variant {
        DenisovVariant::Standard => "denisov",
        DenisovVariant::SwappedSides => "denisov_swapped_sides",
        DenisovVariant::FreePost => "denisov_free_post",
    };
    let reports = reports
        .into_iter()
        .map(|r| meta(r, model, t, n_steps, n_paths).meta("argmin_bin", format!("[{}, {}]", bin.lo, bin.hi)))
        .collect();
    let mut bundle = TestBundle::bonferroni(name, LEVEL, reports);
    bundle.warnings = bin.warnings;
    Ok(bundle)
}

/// Square bin in `(ρ_t, -X̲_t)` for [`verify_denisov_bridge`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinBin {
    pub time: f64,
    pub depth: f64,
    pub width: f64,
}

impl MinBin {
    fn contains(&self, time: f64, depth: f64) -> bool {
        (time - self.time).abs() <= self.width / 2.0 && (depth - self.depth).abs() <= self.width / 2.0
    }
}

/// Midpoint minus the chord, so that bridges ending at nearby heights are comparable.
fn centered_midpoint(p: &PathGrid) -> f64 {
    let m = p.n();
    let k = m / 2;
    p.values[k] - p.start() - (p.end() - p.start()) * k as f64 / m.max(1) as f64
}

/// Bridges `P^t_{0,0}` whose argmin and depth fall in `bin`, split at the
/// minimum, against conditioned bridges from 0 to the bin depth: dual ones
/// for the pre-minimum piece, primal ones for the post-minimum piece, with
/// the split index drawn from its exact skeleton law given the depth.
/// Compares centered midpoints. For Brownian models each piece is also
/// compared with Bessel(3) bridges at its own length and depth.
pub fn verify_denisov_bridge(
    model: &LevyModel,
    t: f64,
    n_steps: usize,
    n_paths: usize,
    bin: MinBin,
    swapped: bool,
    rng: &mut RngStream,
) -> Result<TestBundle> {
    const MIN_COUNT: usize = 200;
    let kernels = StepKernels::new(model, t, n_steps)?;
    let bridges = BridgeSampler::new(kernels.clone());
    let splits: Vec<_> = (0..n_paths)
        .map(|_| bridges.sample(0.0, 0.0, rng).map(|p| split_at_min(&p)))
        .collect::<Result<_>>()?;
    let mut bin = bin;
    let mut warnings = Vec::new();
    let inside = loop {
        let inside: Vec<_> = splits.iter().filter(|d| bin.contains(d.rho, -d.min_val)).collect();
        if inside.len() >= MIN_COUNT || bin.width >= t {
            break inside;
        }
        warnings.push(format!("only {} bridges in the bin of width {}; coarsening", inside.len(), bin.width));
        bin.width *= 2.0;
    };
    if inside.len() < 20 {
        return Err(Error::InsufficientSample(format!("{} bridges in the bin", inside.len())));
    }
    let (pre_kernels, post_kernels) = if swapped { (kernels.clone(), kernels.dual()) } else { (kernels.dual(), kernels.clone()) };
    let pre_bridge = ConditionedBridge::with_kernels(pre_kernels, 0.0, bin.depth)?;
    let post_bridge = ConditionedBridge::with_kernels(post_kernels, 0.0, bin.depth)?;
    let dt = t / n_steps as f64;
    let lo = (((bin.time - bin.width / 2.0) / dt).ceil().max(1.0)) as usize;
    let hi = ((((bin.time + bin.width / 2.0) / dt).floor()) as usize).min(n_steps - 1);
    let weights: Vec<f64> = (lo..=hi)
        .map(|k| pre_bridge.killed_density(k) * post_bridge.killed_density(n_steps - k))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut cpre = Vec::with_capacity(inside.len());
    let mut cpost = Vec::with_capacity(inside.len());
    for _ in 0..inside.len() {
        let mut u = rng.open01() * total;
        let mut k = hi;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                k = lo + i;
                break;
            }
            u -= w;
        }
        cpre.push(centered_midpoint(&pre_bridge.sample_steps(k, rng)?));
        cpost.push(centered_midpoint(&post_bridge.sample_steps(n_steps - k, rng)?));
    }
    let opre: Vec<f64> = inside.iter().map(|d| centered_midpoint(&d.pre)).collect();
    let opost: Vec<f64> = inside.iter().map(|d| centered_midpoint(&d.post)).collect();
    let mut reports = vec![
        ks_two_sample(&sample_of(opre.clone())?, &sample_of(cpre)?)?.named("denisov_bridge_pre_midpoint"),
        ks_two_sample(&sample_of(opost.clone())?, &sample_of(cpost)?)?.named("denisov_bridge_post_midpoint"),
    ];
    if model.kind() == crate::charfn::ModelKind::BrownianWithDrift && model.drift() == 0.0 {
        let sigma = model.sigma();
        let delta = oracle::grid_barrier_shift(sigma, dt);
        let bessel = |p: &PathGrid, rng: &mut RngStream| {
            let (m, depth) = (p.n(), p.end());
            let s = p.horizon();
            let at = (m / 2) as f64 * dt;
            oracle::bessel3_bridge(sigma, delta, depth + delta, s, &[at], rng)[0] - delta - depth * (m / 2) as f64 / m as f64
        };
        let bpre: Vec<f64> = inside.iter().map(|d| bessel(&d.pre, rng)).collect();
        let bpost: Vec<f64> = inside.iter().map(|d| bessel(&d.post, rng)).collect();
        reports.push(ks_two_sample(&sample_of(opre)?, &sample_of(bpre)?)?.named("denisov_bridge_pre_bessel3"));
        reports.push(ks_two_sample(&sample_of(opost)?, &sample_of(bpost)?)?.named("denisov_bridge_post_bessel3"));
    }
    let reports = reports
        .into_iter()
        .map(|r| {
            meta(r, model, t, n_steps, n_paths)
                .meta("bin_time", bin.time)
                .meta("bin_depth", bin.depth)
                .meta("bin_width", bin.width)
                .meta("in_bin", inside.len())
        })
        .collect();
    let name = if swapped { "denisov_bridge_swapped_sides" } else { "denisov_bridge" };
    let mut bundle = TestBundle::bonferroni(name, LEVEL, reports);
    bundle.warnings = warnings;
    Ok(bundle)
}

/// Rejection count of one test over the calibration seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub test: String,
    pub rejections: usize,
    pub rate: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub seeds: usize,
    pub level: f64,
    pub max_rejections: usize,
    pub entries: Vec<CalibrationEntry>,
    pub pass: bool,
}

fn normals(n: usize, scale: f64, rng: &mut RngStream) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

/// One draw of every test on synthetic data satisfying its null.
fn null_draws(rng: &mut RngStream) -> Result<Vec<TestReport>> {
    const N: usize = 500;
    let ks2 = ks_two_sample(&sample_of(normals(N, 1.0, rng))?, &sample_of(normals(N, 1.0, rng))?)?;
    let ks1 = ks_one_sample(&sample_of(normals(N, 1.0, rng))?, oracle::normal_cdf)?;
    // importance-weighted N(0, 1.5²) draws target N(0, 1)
    let wide = normals(2 * N, 1.5, rng);
    let w: Vec<f64> = wide.iter().map(|x| (-x * x / 2.0 + x * x / 4.5).exp()).collect();
    let ksw = ks_two_sample(&EmpiricalSample::weighted(wide, w)?, &sample_of(normals(N, 1.0, rng))?)?.named("ks_weighted");
    let bins = 20;
    let u: Vec<f64> = (0..N).map(|_| rng.open01()).collect();
    let gof = chi_square_gof(&super::histogram(&u, 0.0, 1.0, bins), &vec![1.0; bins])?;
    let (xs, ys) = (normals(N, 1.0, rng), normals(N, 1.0, rng));
    let indep = independence_4x4(&xs, &ys)?;
    let pts = |rng: &mut RngStream| -> Vec<Vec<f64>> { (0..100).map(|_| normals(2, 1.0, rng)).collect() };
    let (pa, pb) = (pts(rng), pts(rng));
    let energy = energy_test(&pa, &pb, ENERGY_PERMUTATIONS, 100, rng)?;
    Ok(vec![ks2, ks1, ksw, gof, indep.named("chi_square_independence_4x4"), energy])
}

/// Rejection rates at level 0.01 of every test on true-null synthetic data
/// over `seeds` seeds; a test passes with at most `2% · seeds` rejections.
pub fn calibration(seeds: usize, master: u64) -> Result<CalibrationReport> {
    let root = RngStream::new(master);
    let mut names: Vec<String> = Vec::new();
    let mut rejections: Vec<usize> = Vec::new();
    for s in 0..seeds {
        let mut rng = root.substream(s as u64);
        let draws = null_draws(&mut rng)?;
        let bundle = TestBundle::bonferroni("bonferroni_bundle", LEVEL, draws[..3].to_vec());
        if names.is_empty() {
            names = draws.iter().map(|r| r.name.clone()).collect();
            names.push(bundle.name.clone());
            rejections = vec![0; names.len()];
        }
        for (i, r) in draws.iter().enumerate() {
            if !r.pass {
                rejections[i] += 1;
            }
        }
        if !bundle.pass {
            *rejections.last_mut().expect("nonempty") += 1;
        }
    }
    let max_rejections = (2.0 * LEVEL * seeds as f64).floor() as usize;
    let entries: Vec<CalibrationEntry> = names
        .into_iter()
        .zip(rejections)
        .map(|(test, r)| CalibrationEntry {
            test,
            rejections: r,
            rate: r as f64 / seeds.max(1) as f64,
            pass: r <= max_rejections,
        })
        .collect();
    let pass = entries.iter().all(|e| e.pass);
    Ok(CalibrationReport {
        seeds,
        level: LEVEL,
        max_rejections,
        entries,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brownian() -> LevyModel {
        LevyModel::brownian(1.0, 0.0).unwrap()
    }

    #[test]
    fn count_weighted_ks_matches_plain_distance() {
        let mut rng = RngStream::new(3);
        let a = sorted(normals(300, 1.0, &mut rng));
        let b = sorted(normals(200, 1.2, &mut rng));
        let d = ks_counts(&a, &vec![1; 300], &b, &vec![1; 200]);
        let e = ks_distance(&sample_of(a).unwrap(), &sample_of(b).unwrap());
        assert!((d - e).abs() < 1e-12);
    }

    #[test]
    fn vervaat_passes_and_control_fails() {
        let mut rng = RngStream::new(11);
        let b = verify_vervaat(&brownian(), 1.0, 64, 3000, &mut rng).unwrap();
        assert!(b.pass, "{b:?}");
        let c = verify_vervaat_variant(&brownian(), 1.0, 64, 3000, VervaatVariant::WithoutMinShift, &mut rng).unwrap();
        assert!(!c.pass);
    }

    #[test]
    fn vervaat_matches_bessel_bridge() {
        let b = verify_vervaat_bessel(1.0, 1.0, 128, 4000, &mut RngStream::new(12)).unwrap();
        assert!(b.pass, "{b:?}");
    }

    #[test]
    fn argmin_uniform_for_bridges_not_free_paths() {
        let mut rng = RngStream::new(13);
        assert!(verify_uniform_rho(&brownian(), 1.0, 32, 20000, &mut rng).unwrap().pass);
        let c = uniform_rho_from(&brownian(), 1.0, 32, 20000, RhoSource::FreePath, &mut rng).unwrap();
        assert!(c.p_value.unwrap() < 1e-10);
    }

    #[test]
    fn denisov_small() {
        let mut rng = RngStream::new(14);
        let b = verify_denisov(&brownian(), 1.0, 64, 20000, DenisovVariant::Standard, &mut rng).unwrap();
        assert!(b.pass, "{b:?}");
        let c = verify_denisov(&brownian(), 1.0, 64, 20000, DenisovVariant::FreePost, &mut rng).unwrap();
        assert!(!c.pass);
    }

    #[test]
    fn denisov_bridge_small() {
        let bin = MinBin { time: 0.5, depth: 0.5, width: 0.2 };
        let b = verify_denisov_bridge(&brownian(), 1.0, 64, 20000, bin, false, &mut RngStream::new(15)).unwrap();
        assert!(b.pass, "{b:?}");
    }

    #[test]
    fn dim_rejects_bad_eps() {
        let mut rng = RngStream::new(16);
        assert!(verify_dim(&brownian(), 1.0, &[0.1, 0.2], 64, 100, 10, &mut rng).is_err());
        let r = verify_dim(&brownian(), 1.0, &[0.5, 0.05], 64, 2000, 50, &mut rng).unwrap();
        assert!(r.distances[0] > r.distances[1], "{:?}", r.distances);
    }

    #[test]
    fn calibration_runs() {
        let c = calibration(20, 5).unwrap();
        assert_eq!(c.entries.len(), 7);
        assert!(c.entries.iter().all(|e| e.rejections <= 3), "{c:?}");
    }
}
