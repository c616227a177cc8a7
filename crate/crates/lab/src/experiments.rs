//! The experiment catalog. Each experiment turns a manifest into test bundles
//! and plot-ready CSV files; randomness comes from the manifest seed only, one
//! substream per stage.

use std::f64::consts::PI;
use std::time::Instant;

use levy_core::charfn::ModelKind;
use levy_core::conditioned::{conditioned_density, hunt_q, DualityMeasure, HuntEstimator, KilledDensity};
use levy_core::density::{check_chapman_kolmogorov, check_strict_positivity, invert_density, mass_tolerance, DensityGrid, GridSpec};
use levy_core::ladder::{estimate_renewal_mc, renewal_analytic, RenewalKind};
use levy_core::stats::verify::{self, DenisovVariant, MinBin, RhoSource, VervaatVariant};
use levy_core::stats::{oracle, TestBundle, TestReport, Verdict};
use levy_core::{LevyModel, RngStream};

use crate::io::csv;
use crate::manifest::{Experiment, ExperimentManifest};
use crate::LabError;

const LEVEL: f64 = 0.01;

/// Bundles and data files of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub experiment: Experiment,
    pub bundles: Vec<TestBundle>,
    /// `(file name, CSV body)`.
    pub data: Vec<(String, String)>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.bundles.iter().all(|b| b.pass)
    }
}

/// Stage messages with elapsed time and a naive ETA, on standard error.
struct Progress {
    label: &'static str,
    stages: usize,
    done: usize,
    start: Instant,
    quiet: bool,
}

impl Progress {
    fn new(label: &'static str, stages: usize, quiet: bool) -> Self {
        Self {
            label,
            stages,
            done: 0,
            start: Instant::now(),
            quiet,
        }
    }

    fn stage(&mut self, what: &str) {
        if !self.quiet {
            let el = self.start.elapsed().as_secs_f64();
            let eta = if self.done > 0 { el / self.done as f64 * (self.stages - self.done) as f64 } else { f64::NAN };
            eprintln!("[{}] {}/{} {what} (elapsed {el:.1}s, eta {eta:.0}s)", self.label, self.done + 1, self.stages);
        }
        self.done += 1;
    }
}

/// A report that passes when the wrapped bundle was rejected, i.e. a negative
/// control doing its job. The statistic is the smallest p-value of the bundle
/// and the threshold its Bonferroni level.
fn control(bundle: &TestBundle) -> TestReport {
    let tests: Vec<&TestReport> = bundle.reports.iter().filter(|r| r.verdict == Verdict::PValueAbove).collect();
    let min_p = tests.iter().filter_map(|r| r.p_value).fold(1.0, f64::min);
    let threshold = bundle.level / tests.len().max(1) as f64;
    TestReport::bound(format!("control_{}_rejected", bundle.name), min_p, threshold, bundle.reports.first().map_or(0, |r| r.n1), 0)
        .meta("control_bundle_pass", bundle.pass)
}

fn bundle_of(name: &str, reports: Vec<TestReport>) -> TestBundle {
    TestBundle::bonferroni(name, LEVEL, reports)
}

fn is_brownian(model: &LevyModel) -> bool {
    model.kind() == ModelKind::BrownianWithDrift
}

pub fn run_experiment(manifest: &ExperimentManifest, quiet: bool) -> Result<Outcome, LabError> {
    manifest.validate()?;
    let model = manifest.model()?;
    let root = RngStream::new(manifest.seed);
    let (bundles, data) = match manifest.experiment {
        Experiment::DensityCheck => density_check(manifest, &model)?,
        Experiment::CkCheck => ck_check(manifest, &model)?,
        Experiment::HuntQ => hunt(manifest, &model, &root)?,
        Experiment::Vervaat => vervaat(manifest, &model, &root, quiet)?,
        Experiment::Denisov => denisov(manifest, &model, &root, quiet)?,
        Experiment::DenisovBridge => denisov_bridge(manifest, &model, &root, quiet)?,
        Experiment::DimLimit => dim_limit(manifest, &model, &root, quiet)?,
        Experiment::UniformRho => uniform_rho(manifest, &model, &root)?,
        Experiment::Duality => duality(manifest, &model, &root, quiet)?,
        Experiment::Renewal => renewal(manifest, &model, &root, quiet)?,
    };
    let bundles = bundles.into_iter().map(|b| b.with_seed(manifest.seed)).collect();
    Ok(Outcome {
        experiment: manifest.experiment,
        bundles,
        data,
    })
}

type Parts = (Vec<TestBundle>, Vec<(String, String)>);

/// Closed-form density and the range where it is compared, if one is known.
fn closed_form(model: &LevyModel, t: f64) -> Option<(Box<dyn Fn(f64) -> f64>, f64, f64)> {
    let center = model.drift() * t;
    match model.kind() {
        ModelKind::BrownianWithDrift => {
            let s = model.sigma() * t.sqrt();
            let f = move |x: f64| oracle::normal_pdf((x - center) / s) / s;
            Some((Box::new(f), center - 6.0 * s, center + 6.0 * s))
        }
        ModelKind::SymmetricStable if model.alpha() == 1.0 => {
            let c = model.sigma() * t;
            let f = move |x: f64| c / (PI * (c * c + (x - center).powi(2)));
            Some((Box::new(f), center - 20.0 * c, center + 20.0 * c))
        }
        _ => None,
    }
}

fn grid_of(m: &ExperimentManifest, model: &LevyModel, t: f64) -> Result<GridSpec, LabError> {
    let auto = GridSpec::auto(model, t);
    let spacing = m.spacing.unwrap_or(auto.spacing);
    Ok(match (m.x_min, m.x_max) {
        (Some(lo), Some(hi)) => GridSpec::new(lo, hi, spacing)?,
        _ => GridSpec::new(auto.x_min, auto.x_max, spacing)?,
    })
}

/// Smallest value within eight scales of the center; farther out light
/// tails fall below the rounding level of the inversion.
fn core_minimum(f: &DensityGrid, model: &LevyModel, t: f64) -> f64 {
    let (c, s) = (levy_core::density::natural_center(model, t), model.scale_at(t));
    let lo = (0..f.len()).find(|&i| f.x(i) >= c - 8.0 * s).unwrap_or(0);
    let hi = (0..f.len()).rev().find(|&i| f.x(i) <= c + 8.0 * s).unwrap_or(f.len() - 1);
    let core = DensityGrid {
        values: f.values[lo..=hi].to_vec(),
        first_index: f.first_index + lo as i64,
        ..f.clone()
    };
    check_strict_positivity(&core)
}

fn density_check(m: &ExperimentManifest, model: &LevyModel) -> Result<Parts, LabError> {
    let f = invert_density(model, m.t, grid_of(m, model, m.t)?)?;
    let mut reports = vec![
        TestReport::bound("mass_error", (f.total_mass - 1.0).abs(), mass_tolerance(model), f.len(), 0),
        TestReport::bound("negated_core_minimum", -core_minimum(&f, model, m.t), 0.0, f.len(), 0),
    ];
    let exact = closed_form(model, m.t);
    if let Some((g, lo, hi)) = &exact {
        let worst = (0..f.len())
            .filter(|&i| (*lo..=*hi).contains(&f.x(i)))
            .map(|i| (f.values[i] - g(f.x(i))).abs())
            .fold(0.0, f64::max);
        reports.push(TestReport::bound("closed_form_sup_error", worst, 1e-6, f.len(), 0).meta("range", format!("[{lo}, {hi}]")));
    }
    let rows = (0..f.len()).map(|i| {
        let x = f.x(i);
        vec![x, f.values[i], exact.as_ref().map_or(f64::NAN, |(g, _, _)| g(x))]
    });
    let data = vec![("density.csv".to_string(), csv(&["x", "density", "closed_form"], rows))];
    Ok((vec![bundle_of("density_check", reports)], data))
}

/// Residual of `f_{s} ⋆ f_{t-s} = f_t` at `s = t/2` on a lattice; the split
/// grids are ten times wider than the target so truncation stays negligible.
fn ck_residual(model: &LevyModel, t: f64, spacing: f64) -> Result<f64, LabError> {
    let target = GridSpec::auto(model, t);
    let center = levy_core::density::natural_center(model, t);
    let half = (target.x_max - center).max(center - target.x_min);
    let s = t / 2.0;
    let c = levy_core::density::natural_center(model, s);
    let fs = invert_density(model, s, GridSpec::new(c - 10.0 * half, c + 10.0 * half, spacing)?)?;
    let ft = invert_density(model, t, GridSpec::new(center - half, center + half, spacing)?)?;
    Ok(check_chapman_kolmogorov(&fs, &fs, &ft)?)
}

/// Below this the residual is rounding noise and halving cannot be observed.
const CK_FLOOR: f64 = 1e-12;

fn ck_check(m: &ExperimentManifest, model: &LevyModel) -> Result<Parts, LabError> {
    let tol = if is_brownian(model) { 1e-6 } else { 1e-4 };
    let coarse_dx = m.spacing.unwrap_or(model.scale_at(m.t / 2.0) / 2.0);
    let coarse = ck_residual(model, m.t, coarse_dx)?;
    let fine = ck_residual(model, m.t, coarse_dx / 2.0)?;
    let ratio = if coarse <= CK_FLOOR { 0.0 } else { fine / coarse };
    let reports = vec![
        TestReport::bound("ck_residual", coarse, tol, 0, 0).meta("spacing", coarse_dx),
        TestReport::bound("ck_residual_refined", fine, tol, 0, 0).meta("spacing", coarse_dx / 2.0),
        TestReport::bound("ck_refinement_ratio", ratio, 0.5 + 1e-12, 0, 0).meta("at_rounding_floor", coarse <= CK_FLOOR),
    ];
    let data = vec![(
        "ck.csv".to_string(),
        csv(&["spacing", "residual"], [vec![coarse_dx, coarse], vec![coarse_dx / 2.0, fine]]),
    )];
    Ok((vec![bundle_of("ck_check", reports)], data))
}

fn hunt(m: &ExperimentManifest, model: &LevyModel, root: &RngStream) -> Result<Parts, LabError> {
    let pts = m.points.clone().unwrap_or_else(|| vec![1.0, 1.0]);
    let (x, y) = match pts.as_slice() {
        [x, y] => (*x, *y),
        [x] => (*x, *x),
        _ => return Err(LabError::Usage("hunt-q takes points = [x, y]".into())),
    };
    let e = hunt_q(model, x, y, m.t, m.n_paths, m.n_steps, &mut root.substream(0))?;
    let mut reports = vec![
        TestReport::bound("hunt_stderr", e.stderr, 1e-3, m.n_paths, 0),
        TestReport::bound("hunt_excess_over_free_in_stderr", (e.q - e.p) / e.stderr, 3.0, m.n_paths, 0),
        TestReport::bound("hunt_negated_estimate", -e.q, 0.0, m.n_paths, 0),
    ];
    let mut exact = f64::NAN;
    if is_brownian(model) && model.drift() == 0.0 {
        exact = oracle::brownian_killed_density(model.sigma(), x, y, m.t);
        reports.push(
            TestReport::bound("hunt_vs_reflection_z", (e.q - exact).abs() / e.stderr, 3.0, m.n_paths, 0)
                .meta("q", e.q)
                .meta("reflection", exact),
        );
    }
    let reports = reports.into_iter().map(|r| r.meta("x", x).meta("y", y).meta("n_steps", m.n_steps)).collect();
    let data = vec![(
        "hunt.csv".to_string(),
        csv(
            &["x", "y", "q", "stderr", "q_coarse", "stderr_coarse", "q_fine", "stderr_fine", "p", "reflection"],
            [vec![x, y, e.q, e.stderr, e.q_coarse, e.stderr_coarse, e.q_fine, e.stderr_fine, e.p, exact]],
        ),
    )];
    Ok((vec![bundle_of("hunt_q", reports)], data))
}

/// Budget of a negative control: it only has to detect a gross difference.
fn control_paths(n: usize) -> usize {
    n.clamp(1000, 10_000)
}

fn vervaat(m: &ExperimentManifest, model: &LevyModel, root: &RngStream, quiet: bool) -> Result<Parts, LabError> {
    let brownian = is_brownian(model) && model.drift() == 0.0;
    let mut progress = Progress::new("vervaat", if brownian { 3 } else { 2 }, quiet);
    progress.stage("bridges against excursions");
    let main = verify::verify_vervaat(model, m.t, m.n_steps, m.n_paths, &mut root.substream(0))?;
    progress.stage("negative control without the minimum shift");
    let ctl = verify::verify_vervaat_variant(
        model,
        m.t,
        m.n_steps,
        control_paths(m.n_paths),
        VervaatVariant::WithoutMinShift,
        &mut root.substream(1),
    )?;
    let mut bundles = vec![main, bundle_of("vervaat_controls", vec![control(&ctl)])];
    if brownian {
        progress.stage("Bessel(3) bridge oracle");
        bundles.push(verify::verify_vervaat_bessel(model.sigma(), m.t, m.n_steps, m.n_paths, &mut root.substream(2))?);
    }
    Ok((bundles, Vec::new()))
}

fn denisov(m: &ExperimentManifest, model: &LevyModel, root: &RngStream, quiet: bool) -> Result<Parts, LabError> {
    let asymmetric = model.kind() == ModelKind::AsymmetricStable;
    let mut progress = Progress::new("denisov", if asymmetric { 3 } else { 2 }, quiet);
    progress.stage("split at the minimum against meanders");
    let main = verify::verify_denisov(model, m.t, m.n_steps, m.n_paths, DenisovVariant::Standard, &mut root.substream(0))?;
    progress.stage("negative control with a free post-minimum piece");
    let free = verify::verify_denisov(model, m.t, m.n_steps, m.n_paths, DenisovVariant::FreePost, &mut root.substream(1))?;
    let mut controls = vec![control(&free)];
    if asymmetric {
        progress.stage("negative control with primal and dual swapped");
        let swapped = verify::verify_denisov(model, m.t, m.n_steps, m.n_paths, DenisovVariant::SwappedSides, &mut root.substream(2))?;
        controls.push(control(&swapped));
    }
    Ok((vec![main, bundle_of("denisov_controls", controls)], Vec::new()))
}

fn denisov_bridge(m: &ExperimentManifest, model: &LevyModel, root: &RngStream, quiet: bool) -> Result<Parts, LabError> {
    let width = m.bin_width.unwrap_or(0.1 * m.t);
    let bin = MinBin {
        time: m.t / 2.0,
        depth: 0.5 * model.scale_at(m.t),
        width,
    };
    let asymmetric = model.kind() == ModelKind::AsymmetricStable;
    let mut progress = Progress::new("denisov-bridge", if asymmetric { 3 } else { 2 }, quiet);
    progress.stage("binned bridges against conditioned bridges");
    let main = verify::verify_denisov_bridge(model, m.t, m.n_steps, m.n_paths, bin, false, &mut root.substream(0))?;
    progress.stage("halved bins with four times the budget");
    let half = MinBin { width: width / 2.0, ..bin };
    let mut halved = verify::verify_denisov_bridge(model, m.t, m.n_steps, 4 * m.n_paths, half, false, &mut root.substream(1))?;
    halved.name = "denisov_bridge_halved_bins".into();
    let stable = TestReport::bound("bin_halving_changes_verdict", (main.pass != halved.pass) as u8 as f64, 0.5, m.n_paths, 4 * m.n_paths);
    let mut bundles = vec![main, halved, bundle_of("denisov_bridge_stability", vec![stable])];
    if asymmetric {
        progress.stage("negative control with primal and dual swapped");
        let swapped = verify::verify_denisov_bridge(model, m.t, m.n_steps, m.n_paths, bin, true, &mut root.substream(2))?;
        bundles.push(bundle_of("denisov_bridge_controls", vec![control(&swapped)]));
    }
    Ok((bundles, Vec::new()))
}

fn dim_limit(m: &ExperimentManifest, model: &LevyModel, root: &RngStream, quiet: bool) -> Result<Parts, LabError> {
    let eps = m.eps.clone().unwrap_or_else(|| vec![0.5, 0.2, 0.1, 0.05]);
    let mut progress = Progress::new("dim-limit", 1, quiet);
    progress.stage("conditioned bridges for every eps, excursions and bootstrap");
    let r = verify::verify_dim(model, m.t, &eps, m.n_steps, m.n_paths, m.resamples.unwrap_or(200), &mut root.substream(0))?;
    let mut reports = Vec::new();
    for (i, c) in r.decrease_confidence.iter().enumerate() {
        // passes when the bootstrap confidence of the decrease reaches 95%
        reports.push(
            TestReport::bound(format!("dim_decrease_{}_to_{}", eps[i], eps[i + 1]), 1.0 - c, 0.05 + 1e-12, m.n_paths, m.n_paths)
                .meta("distance_before", r.distances[i])
                .meta("distance_after", r.distances[i + 1])
                .meta("confidence", c),
        );
    }
    let last = r.reports.last().expect("eps is nonempty").clone();
    reports.push(last.named("dim_final_eps_ks"));
    let rows = eps
        .iter()
        .zip(&r.distances)
        .zip(&r.reports)
        .map(|((e, d), rep)| vec![*e, *d, rep.p_value.unwrap_or(f64::NAN)]);
    let data = vec![("dim_limit.csv".to_string(), csv(&["eps", "ks_distance", "p_value"], rows))];
    let mut bundle = bundle_of("dim_limit", reports);
    // a single p-value test: its threshold stays at the level
    for r in &mut bundle.reports {
        if r.verdict == Verdict::PValueAbove {
            *r = r.clone().with_threshold(LEVEL);
        }
    }
    bundle.pass = bundle.reports.iter().all(|r| r.pass);
    Ok((vec![bundle], data))
}

fn uniform_rho(m: &ExperimentManifest, model: &LevyModel, root: &RngStream) -> Result<Parts, LabError> {
    let main = verify::verify_uniform_rho(model, m.t, m.n_steps, m.n_paths, &mut root.substream(0))?;
    let free = verify::uniform_rho_from(model, m.t, m.n_steps, m.n_paths, RhoSource::FreePath, &mut root.substream(1))?;
    let ctl = TestReport::bound("control_free_path_argmin_rejected", free.p_value.unwrap_or(1.0), 1e-10, m.n_paths, 0)
        .meta("chi_square", free.statistic);
    Ok((vec![bundle_of("uniform_rho", vec![main]), bundle_of("uniform_rho_controls", vec![ctl])], Vec::new()))
}

fn duality(m: &ExperimentManifest, model: &LevyModel, root: &RngStream, quiet: bool) -> Result<Parts, LabError> {
    let pts = m.points.clone().unwrap_or_else(|| vec![0.25, 0.5, 1.0, 1.5, 2.0]);
    let dual = model.dual();
    let self_dual = dual == *model;
    let mut progress = Progress::new("duality", if self_dual { 1 } else { 2 }, quiet);
    progress.stage("killed density table");
    let q = KilledDensity::monte_carlo(model, m.t, &pts, &pts, m.n_paths, m.n_steps, HuntEstimator::Coarse, &root.substream(0))?;
    let qd = if self_dual {
        q.clone()
    } else {
        progress.stage("dual killed density table");
        KilledDensity::monte_carlo(&dual, m.t, &pts, &pts, m.n_paths, m.n_steps, HuntEstimator::Coarse, &root.substream(1))?
    };
    // q(x, y) against q̂(y, x), in joint standard errors
    let mut worst = 0.0f64;
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            if self_dual && j <= i {
                continue;
            }
            let joint = (q.stderr[i][j].powi(2) + qd.stderr[j][i].powi(2)).sqrt();
            worst = worst.max((q.values[i][j] - qd.values[j][i]).abs() / joint);
        }
    }
    let mut reports = vec![TestReport::bound("duality_max_gap_in_joint_stderr", worst, 3.0, m.n_paths, m.n_paths).meta("cells", pts.len() * pts.len())];
    reports.push(TestReport::bound("killed_not_sandwiched", (!q.sandwiched(3.0)) as u8 as f64, 0.5, m.n_paths, 0));
    let mut data = vec![("killed_density.csv".to_string(), q.to_csv())];
    if let Ok(measure) = DualityMeasure::analytic(model) {
        // rescaling h and ĥ divides p↑ by c·ĉ and multiplies λ↑ by c·ĉ
        let up = conditioned_density(&q, &measure.scaled(m.h_scale, m.h_scale));
        let rows = (0..pts.len()).flat_map(|i| {
            let up = &up;
            (0..pts.len()).map(move |j| vec![up.xs[i], up.ys[j], up.values[i][j], up.stderr[i][j]])
        });
        data.push(("conditioned_density.csv".to_string(), csv(&["x", "y", "p_up", "stderr"], rows)));
    }
    Ok((vec![bundle_of("duality", reports)], data))
}

fn renewal(m: &ExperimentManifest, model: &LevyModel, root: &RngStream, quiet: bool) -> Result<Parts, LabError> {
    let grid = m.points.clone().unwrap_or_else(|| (0..=8).map(|i| 0.25 * 2f64.powf(i as f64 / 2.0)).collect());
    // walk steps whose scale is a hundredth of the grid start
    let step = m.walk_step.unwrap_or_else(|| {
        let a = if is_brownian(model) { 2.0 } else { model.alpha() };
        (0.04 * grid[0] / model.sigma().max(1e-12)).powf(a)
    });
    let cap = m.segment_cap.unwrap_or(10_000);
    let mut progress = Progress::new("renewal", 2, quiet);
    progress.stage("ladder renewal table");
    let coarse = estimate_renewal_mc(model, &grid, step, m.n_paths, cap, &mut root.substream(0))?;
    progress.stage("ladder renewal table at half the step");
    let fine = estimate_renewal_mc(model, &grid, step / 2.0, m.n_paths, cap, &mut root.substream(1))?;
    let (s1, s2) = (coarse.loglog_slope(), fine.loglog_slope());
    let mut reports = vec![TestReport::bound("slope_change_under_refinement", (s1 - s2).abs(), 0.02, m.n_paths, m.n_paths)
        .meta("slope", s1)
        .meta("slope_refined", s2)];
    if let Ok(h) = renewal_analytic(model) {
        reports.push(TestReport::bound("slope_vs_closed_form", (s1 - h.exponent).abs(), 0.05, m.n_paths, 0).meta("exponent", h.exponent));
        if h.kind == RenewalKind::AnalyticLinear {
            let table = coarse.table.as_ref().expect("Monte Carlo table");
            let worst = table.iter().filter(|p| p.x > 0.0).map(|p| (p.h / p.x - 1.0).abs()).fold(0.0, f64::max);
            reports.push(TestReport::bound("max_relative_gap_to_linear", worst, 0.05, m.n_paths, 0));
        }
    }
    let t1 = coarse.table.as_ref().expect("Monte Carlo table");
    let t2 = fine.table.as_ref().expect("Monte Carlo table");
    let rows = t1.iter().zip(t2).map(|(a, b)| vec![a.x, a.h, a.stderr, b.h, b.stderr]);
    let data = vec![("renewal.csv".to_string(), csv(&["x", "h", "stderr", "h_half_step", "stderr_half_step"], rows))];
    Ok((vec![bundle_of("renewal", reports)], data))
}
