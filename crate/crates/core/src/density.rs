//! Transition densities by Fourier inversion.
//!
//! `f_t(x) = (1/2π) ∫ exp(-tψ(u) - iux) du` is evaluated with the trapezoid
//! rule on a symmetric `u`-lattice truncated where `exp(-t Re ψ) < 1e-12`.
//! All nodes of a [`DensityGrid`] sit on the lattice `k·spacing`, which keeps
//! grids of equal spacing aligned for convolutions.

use core::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::charfn::{char_exponent, char_function, exponent_cutoff, LevyModel, ModelKind};
use crate::error::{Error, Result};

/// `-ln(1e-12)`: the inversion integral is cut where `|φ| < 1e-12`.
const CUTOFF_LEVEL: f64 = 27.631021115928547;
const MAX_FFT: usize = 1 << 23;
/// Negative values above `-NEG_TOL·sup f` are clamped to zero.
pub const NEG_TOL: f64 = 1e-8;
/// Minimum fraction of mass a grid must hold.
pub const COVERAGE: f64 = 0.999;

/// Requested tabulation range. The bounds are snapped outward to multiples of `spacing`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub spacing: f64,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite() && x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::InvalidArgument(format!(
                "bad grid [{x_min}, {x_max}] with spacing {spacing}"
            )));
        }
        Ok(Self { x_min, x_max, spacing })
    }

    pub fn symmetric(half_width: f64, spacing: f64) -> Result<Self> {
        Self::new(-half_width, half_width, spacing)
    }

    /// Range covering all but roughly `1e-3` of the mass of `X_t`, at
    /// `1/100` (light tails) or `1/50` (stable) of the natural scale.
    pub fn auto(model: &LevyModel, t: f64) -> Self {
        let s = model.scale_at(t);
        let center = natural_center(model, t);
        let (half, spacing) = match model.stable_tail_constant() {
            Some(c) => (s * (c / 8e-4).powf(1.0 / model.alpha()), s / 50.0),
            None => (12.0 * s, s / 100.0),
        };
        Self {
            x_min: center - half,
            x_max: center + half,
            spacing,
        }
    }

    fn lattice(&self) -> (i64, usize) {
        let first = (self.x_min / self.spacing).floor() as i64;
        let last = (self.x_max / self.spacing).ceil() as i64;
        (first, (last - first + 1) as usize)
    }
}

/// Location around which the law of `X_t` is concentrated.
pub fn natural_center(model: &LevyModel, t: f64) -> f64 {
    let mut c = model.drift() * t;
    match model.kind() {
        ModelKind::BrownianPlusCompoundPoisson => c += model.jump_rate() * model.jump_law().mean * t,
        ModelKind::AsymmetricStable if model.alpha() == 1.0 => {
            let st = model.sigma() * t;
            c += 2.0 / PI * model.beta_skew() * st * st.ln();
        }
        _ => {}
    }
    c
}

/// Tabulated continuous density `f_t` on a uniform lattice grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub model: LevyModel,
    pub t: f64,
    /// Index of the first node: `x_min = first_index · spacing`.
    pub first_index: i64,
    pub spacing: f64,
    pub values: Vec<f64>,
    /// Trapezoid mass on the grid plus the mass outside it.
    pub total_mass: f64,
    pub grid_mass: f64,
    pub tail_mass: f64,
    pub clamped: usize,
}

impl DensityGrid {
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn x_min(&self) -> f64 {
        self.first_index as f64 * self.spacing
    }
    pub fn x_max(&self) -> f64 {
        (self.first_index + self.values.len() as i64 - 1) as f64 * self.spacing
    }
    pub fn x(&self, i: usize) -> f64 {
        (self.first_index + i as i64) as f64 * self.spacing
    }
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Linear interpolation; zero outside the grid.
    pub fn eval(&self, x: f64) -> f64 {
        let p = x / self.spacing - self.first_index as f64;
        if !(p >= 0.0) {
            return 0.0;
        }
        let last = (self.values.len() - 1) as f64;
        if p >= last {
            return if p == last { self.values[self.values.len() - 1] } else { 0.0 };
        }
        let i = p.floor() as usize;
        let w = p - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

/// `p_t(x, y) = f_t(y - x)`.
pub fn transition_kernel(f: &DensityGrid, x: f64, y: f64) -> f64 {
    f.eval(y - x)
}

/// `f_t` at the lattice nodes `(first + j)·spacing`, `j < count`, before any
/// mass or coverage checks. Negative round-off lobes are clamped to zero;
/// returns the values and the number of clamped nodes.
pub fn invert_on_lattice(model: &LevyModel, t: f64, first: i64, count: usize, spacing: f64) -> Result<(Vec<f64>, usize)> {
    let width = (count.max(2) - 1) as f64 * spacing;
    let x0 = first as f64 * spacing;
    let center = natural_center(model, t);
    let cut = exponent_cutoff(model, t, CUTOFF_LEVEL)
        .ok_or_else(|| Error::Quadrature("characteristic function does not decay".into()))?;
    // internal refinement so that the u-lattice reaches the cutoff
    let refine = ((spacing * cut / PI).ceil() as usize).max(1);
    let dx = spacing / refine as f64;
    // the period of the trapezoid sum must keep aliased mass negligible
    let reach = (x0 - center).abs().max((x0 + width - center).abs());
    let period = 2.0 * reach + alias_margin(model, t);
    let need = ((period / dx).ceil() as usize).max((count - 1) * refine + 1);
    let n = need.next_power_of_two();
    if n > MAX_FFT {
        return Err(Error::GridCoverage(format!(
            "inversion needs an FFT of {n} points; reduce the range or coarsen the spacing"
        )));
    }
    let du = 2.0 * PI / (n as f64 * dx);
    let half = n / 2;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[0] = Complex64::new(1.0, 0.0);
    for k in 1..half {
        let u = k as f64 * du;
        let a = char_function(model, t, u) * Complex64::from_polar(1.0, -u * x0);
        buf[k] = a;
        buf[n - k] = a.conj();
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let norm = du / (2.0 * PI);
    let mut values: Vec<f64> = (0..count).map(|j| buf[j * refine].re * norm).collect();
    if let Some(images) = alias_images(model, t, n as f64 * dx) {
        // the periodic images are smooth on the scale of the period; a coarse
        // linearly interpolated evaluation is enough
        let anchors = 256.min(count.max(2) - 1);
        let step = (count - 1) as f64 / anchors as f64;
        let marks: Vec<f64> = (0..=anchors).map(|i| images(x0 + i as f64 * step * spacing)).collect();
        for (j, v) in values.iter_mut().enumerate() {
            let p = j as f64 / step;
            let i = (p.floor() as usize).min(anchors.saturating_sub(1));
            let w = p - i as f64;
            let next = marks[(i + 1).min(anchors)];
            *v -= marks[i] * (1.0 - w) + next * w;
        }
    }
    let sup = values.iter().copied().fold(0.0, f64::max);
    let mut clamped = 0;
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -NEG_TOL * sup {
                return Err(Error::InversionAccuracy { lobe: *v, tol: NEG_TOL * sup });
            }
            *v = 0.0;
            clamped += 1;
        }
    }
    Ok((values, clamped))
}

/// Extra period length beyond the grid that keeps aliased tail mass small:
/// about `1e-7` of the peak before the image correction for strictly stable
/// laws, `1e-9` of the peak for the rest.
fn alias_margin(model: &LevyModel, t: f64) -> f64 {
    let s = model.scale_at(t);
    match model.stable_tail_constant() {
        None => 80.0 * s,
        Some(c) => {
            let a = model.alpha();
            // aliasing ≈ 2ζ(1+α)·(α c/2)·s^α·L^{-1-α}; ζ(1+α) ≤ 1 + 1/α
            let amp = 2.0 * (1.0 + 1.0 / a) * a * c / 2.0 * s.powf(a);
            let rel = if strict_stable_form(model, t).is_some() { 1e-7 } else { 1e-9 };
            (amp * s / rel).powf(1.0 / (1.0 + a)).max(80.0 * s)
        }
    }
}

/// `x ↦ Σ_{m≠0} f_t(x + m·period)` from the far-field expansion, for strictly stable laws.
fn alias_images(model: &LevyModel, t: f64, period: f64) -> Option<impl Fn(f64) -> f64> {
    let (rho, scale) = strict_stable_form(model, t)?;
    let a = model.alpha();
    let shift = model.drift() * t;
    const TERMS: usize = 400;
    Some(move |x: f64| {
        let z = x - shift;
        let mut acc = 0.0;
        for m in 1..=TERMS {
            let d = m as f64 * period;
            acc += stable_far_density(a, rho, 1.0 - rho, scale, z + d);
            acc += stable_far_density(a, rho, 1.0 - rho, scale, z - d);
        }
        // remaining images by the integral of the leading term
        let lead = |r: f64| gamma(a + 1.0) * (PI * a * r).sin() / (PI * a * period) * scale.powf(a);
        let edge = (TERMS as f64 + 0.5) * period;
        acc + (lead(rho) * (edge + z).powf(-a) + lead(1.0 - rho) * (edge - z).powf(-a))
    })
}

pub fn mass_tolerance(model: &LevyModel) -> f64 {
    match model.kind() {
        ModelKind::BrownianWithDrift | ModelKind::BrownianPlusCompoundPoisson => 1e-6,
        ModelKind::SymmetricStable if model.alpha() == 1.0 => 1e-6,
        _ => 1e-4,
    }
}

/// Tabulate `f_t` on `grid`, widening it at most twice until it holds at
/// least 99.9% of the mass and the edge values fall below `1e-3·sup f`.
pub fn invert_density(model: &LevyModel, t: f64, grid: GridSpec) -> Result<DensityGrid> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {t}")));
    }
    let mut spec = grid;
    for attempt in 0..3 {
        let (first, count) = spec.lattice();
        let (values, clamped) = invert_on_lattice(model, t, first, count, spec.spacing)?;
        let mut f = DensityGrid {
            model: *model,
            t,
            first_index: first,
            spacing: spec.spacing,
            values,
            total_mass: 0.0,
            grid_mass: 0.0,
            tail_mass: 0.0,
            clamped,
        };
        f.grid_mass = trapezoid(&f.values, f.spacing);
        let (lo, hi) = tail_probabilities(model, t, f.x_min(), f.x_max());
        f.tail_mass = lo + hi;
        f.total_mass = f.grid_mass + f.tail_mass;
        let sup = f.sup();
        let edge_lo = f.values[0] > 1e-3 * sup;
        let edge_hi = f.values[f.len() - 1] > 1e-3 * sup;
        if f.tail_mass <= 1.0 - COVERAGE && !edge_lo && !edge_hi {
            let tol = mass_tolerance(model);
            if (f.total_mass - 1.0).abs() > tol {
                return Err(Error::InversionAccuracy {
                    lobe: f.total_mass - 1.0,
                    tol,
                });
            }
            return Ok(f);
        }
        if attempt == 2 {
            break;
        }
        let center = natural_center(model, t);
        let grow = |tail: f64, edge: bool| -> f64 {
            let mut g = 1.0f64;
            if tail > 0.5 * (1.0 - COVERAGE) {
                g = match model.stable_tail_constant() {
                    Some(_) => 1.2 * (tail / (0.4 * (1.0 - COVERAGE))).powf(1.0 / model.alpha()),
                    None => 2.0,
                };
            }
            if edge {
                g = g.max(2.0);
            }
            g
        };
        let left = (center - spec.x_min).max(model.scale_at(t)) * grow(lo, edge_lo);
        let right = (spec.x_max - center).max(model.scale_at(t)) * grow(hi, edge_hi);
        spec.x_min = spec.x_min.min(center - left);
        spec.x_max = spec.x_max.max(center + right);
    }
    Err(Error::GridCoverage(format!(
        "grid [{}, {}] still misses more than 0.1% of the mass after two widenings",
        spec.x_min, spec.x_max
    )))
}

pub(crate) fn trapezoid(values: &[f64], dx: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values.iter().sum();
    dx * (inner - 0.5 * (values[0] + values[values.len() - 1]))
}

/// `(P(X_t < lo), P(X_t > hi))`.
///
/// Strictly stable laws use the tail expansion
/// `P(Y > y) = (1/π) Σ (-1)^{k+1} Γ(kα)/k! sin(πkαρ) y^{-kα}` (convergent for
/// `α ≤ 1`, asymptotic for `α > 1`); everything else the Gil-Pelaez formula.
pub fn tail_probabilities(model: &LevyModel, t: f64, lo: f64, hi: f64) -> (f64, f64) {
    let left = stable_tail(model, t, lo, false).unwrap_or_else(|| 1.0 - gil_pelaez_upper(model, t, lo));
    let right = stable_tail(model, t, hi, true).unwrap_or_else(|| gil_pelaez_upper(model, t, hi));
    (left.max(0.0), right.max(0.0))
}

/// Positivity parameter and scale of `X_t - bt` written as `scale · Y` with
/// `ψ_Y(u) = |u|^α exp(-iπα(ρ - 1/2) sgn u)`; `None` unless strictly stable up to drift.
pub(crate) fn strict_stable_form(model: &LevyModel, t: f64) -> Option<(f64, f64)> {
    if !model.is_stable_kind() {
        return None;
    }
    let a = model.alpha();
    if a == 1.0 && model.beta_skew() != 0.0 {
        return None;
    }
    let zeta = (model.beta_skew() * (PI * a / 2.0).tan()).atan();
    let rho = 0.5 + zeta / (PI * a);
    let scale = (model.sigma().powf(a) / zeta.cos() * t).powf(1.0 / a);
    Some((rho, scale))
}

/// Two leading terms of the large-`|x|` expansion of the stable density
/// `f_Y(y) ≈ (1/π) Σ (-1)^{k+1} Γ(kα+1)/k! sin(πkαρ) y^{-kα-1}`.
fn stable_far_density(a: f64, rho: f64, rho_hat: f64, scale: f64, x: f64) -> f64 {
    let (y, r) = if x > 0.0 { (x / scale, rho) } else { (-x / scale, rho_hat) };
    let t1 = gamma(a + 1.0) * (PI * a * r).sin() * y.powf(-a - 1.0);
    let t2 = gamma(2.0 * a + 1.0) / 2.0 * (2.0 * PI * a * r).sin() * y.powf(-2.0 * a - 1.0);
    (t1 - t2) / (PI * scale)
}

fn stable_tail(model: &LevyModel, t: f64, x: f64, upper: bool) -> Option<f64> {
    let (rho, scale) = strict_stable_form(model, t)?;
    let a = model.alpha();
    let shifted = x - model.drift() * t;
    let (y, rho) = if upper { (shifted / scale, rho) } else { (-shifted / scale, 1.0 - rho) };
    if y < 2.0 {
        return None;
    }
    let mut sum = 0.0f64;
    let mut prev = f64::INFINITY;
    let mut log_fact = 0.0;
    for k in 1..400 {
        let kf = k as f64;
        log_fact += kf.ln();
        let mag = (statrs::function::gamma::ln_gamma(kf * a) - log_fact - kf * a * y.ln()).exp();
        if a > 1.0 && mag > prev {
            // asymptotic series: stop at the smallest term
            return (prev < 1e-9 * sum.abs()).then_some(sum / PI);
        }
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * mag * (PI * kf * a * rho).sin();
        if mag < 1e-16 * sum.abs() {
            return Some(sum / PI);
        }
        prev = mag;
    }
    None
}

/// `P(X_t > x) = 1/2 + (1/π) ∫_0^∞ Im(e^{-iux} φ(u))/u du` by the midpoint rule.
fn gil_pelaez_upper(model: &LevyModel, t: f64, x: f64) -> f64 {
    let s = model.scale_at(t);
    let dist = (x - natural_center(model, t)).abs();
    let period = match model.stable_tail_constant() {
        Some(_) => 200.0 * (dist + s),
        None => 2.0 * (dist + 40.0 * s),
    };
    let cut = exponent_cutoff(model, t, 37.0).unwrap_or(1e6 / s);
    let du = 2.0 * PI / period;
    let steps = (cut / du).ceil() as usize;
    let mut acc = 0.0;
    for k in 0..steps {
        let u = (k as f64 + 0.5) * du;
        let v = char_function(model, t, u) * Complex64::from_polar(1.0, -u * x);
        acc += v.im / u;
    }
    0.5 + acc * du / PI
}

/// Tabulated kernel `p_t(x_i, y_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    pub t: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major: `values[i * ys.len() + j] = p(xs[i], ys[j])`.
    pub values: Vec<f64>,
}

impl KernelTable {
    pub fn from_density(f: &DensityGrid, xs: &[f64], ys: &[f64]) -> Self {
        let values = xs.iter().flat_map(|&x| ys.iter().map(move |&y| transition_kernel(f, x, y))).collect();
        Self {
            t: f.t,
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            values,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ys.len() + j]
    }

    /// Largest spread of tabulated values among cells sharing the same `y - x`
    /// (cells are matched when their differences agree to `1e-9`).
    pub fn translation_defect(&self) -> f64 {
        let mut cells: Vec<(f64, f64)> = Vec::with_capacity(self.values.len());
        for (i, &x) in self.xs.iter().enumerate() {
            for (j, &y) in self.ys.iter().enumerate() {
                cells.push((y - x, self.get(i, j)));
            }
        }
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut worst = 0.0f64;
        let mut start = 0;
        for k in 1..=cells.len() {
            if k == cells.len() || (cells[k].0 - cells[start].0).abs() > 1e-9 {
                let group = &cells[start..k];
                let (lo, hi) = group
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), c| (l.min(c.1), h.max(c.1)));
                worst = worst.max(hi - lo);
                start = k;
            }
        }
        worst
    }
}

/// Full linear convolution `c[k] = Σ_i a[i] b[k-i]` via FFT.
pub(crate) fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len() + b.len() - 1;
    let n = len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fa.resize(n, Complex64::new(0.0, 0.0));
    let mut fb: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fb.resize(n, Complex64::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    inv.process(&mut fa);
    fa.truncate(len);
    fa.into_iter().map(|c| c.re / n as f64).collect()
}

/// Planner shared by repeated convolutions of one size.
pub(crate) struct Convolver {
    n: usize,
    fwd: Arc<dyn rustfft::Fft<f64>>,
    inv: Arc<dyn rustfft::Fft<f64>>,
}

impl Convolver {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    /// Spectrum of a zero-padded real sequence.
    pub(crate) fn spectrum(&self, a: &[f64]) -> Vec<Complex64> {
        let mut fa: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fa.resize(self.n, Complex64::new(0.0, 0.0));
        self.fwd.process(&mut fa);
        fa
    }

    /// Cyclic convolution of `a` with the sequence whose spectrum is `kernel`.
    pub(crate) fn apply(&self, a: &[f64], kernel: &[Complex64]) -> Vec<f64> {
        let mut fa = self.spectrum(a);
        for (x, y) in fa.iter_mut().zip(kernel) {
            *x *= *y;
        }
        self.inv.process(&mut fa);
        let n = self.n as f64;
        fa.into_iter().map(|c| c.re / n).collect()
    }
}

/// `sup_x |f_{s+u}(x) - (f_s ⋆ f_u)(x)|` over the nodes of `f_su`, with the
/// convolution computed by the trapezoid rule on the common lattice.
pub fn check_chapman_kolmogorov(f_s: &DensityGrid, f_u: &DensityGrid, f_su: &DensityGrid) -> Result<f64> {
    if f_s.model != f_u.model || f_s.model != f_su.model {
        return Err(Error::GridMismatch("grids belong to different models".into()));
    }
    let dx = f_s.spacing;
    if f_u.spacing != dx || f_su.spacing != dx {
        return Err(Error::GridMismatch(format!(
            "spacings differ: {}, {}, {}",
            f_s.spacing, f_u.spacing, f_su.spacing
        )));
    }
    let sum = f_s.t + f_u.t;
    if (sum - f_su.t).abs() > 1e-12 * f_su.t {
        return Err(Error::GridMismatch(format!(
            "horizons {} + {} do not add up to {}",
            f_s.t, f_u.t, f_su.t
        )));
    }
    let conv = convolve(&f_s.values, &f_u.values);
    let first = f_s.first_index + f_u.first_index;
    let mut worst = 0.0f64;
    for (j, &v) in f_su.values.iter().enumerate() {
        let k = f_su.first_index + j as i64 - first;
        let c = if k >= 0 && (k as usize) < conv.len() { dx * conv[k as usize] } else { 0.0 };
        worst = worst.max((v - c).abs());
    }
    Ok(worst)
}

/// Minimum over the grid nodes (strictly positive for every catalog model).
pub fn check_strict_positivity(f: &DensityGrid) -> f64 {
    f.values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `f_1(0)` of a symmetric stable law with unit scale: `Γ(1 + 1/α)/π`.
pub fn symmetric_stable_peak(alpha: f64) -> f64 {
    gamma(1.0 + 1.0 / alpha) / PI
}

/// `|E exp(iuX_t)|`, used to size grids.
pub fn char_modulus(model: &LevyModel, t: f64, u: f64) -> f64 {
    (-t * char_exponent(model, u).re).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charfn::JumpLaw;

    fn gauss(x: f64, var: f64) -> f64 {
        (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }

    #[test]
    fn gaussian_matches_closed_form() {
        let bm = LevyModel::brownian(1.0, 0.0).unwrap();
        let f = invert_density(&bm, 1.0, GridSpec::symmetric(8.0, 0.01).unwrap()).unwrap();
        let mut worst = 0.0f64;
        for i in 0..f.len() {
            let x = f.x(i);
            if x.abs() <= 6.0 {
                worst = worst.max((f.values[i] - gauss(x, 1.0)).abs());
            }
            let mirror = f.len() - 1 - i;
            assert!((f.values[i] - f.values[mirror]).abs() < 1e-15);
        }
        assert!(worst < 1e-6, "{worst}");
        assert!((transition_kernel(&f, 0.0, 0.0) - 0.3989423).abs() < 1e-7);
        assert!((transition_kernel(&f, 0.0, 1.0) - 0.2419707).abs() < 1e-7);
        assert_eq!(f.clamped, 0);
        let min = check_strict_positivity(&f);
        assert!(min > 0.0 && (min - gauss(8.0, 1.0)).abs() < 1e-16, "{min}");
    }

    #[test]
    fn cauchy_matches_closed_form() {
        let c = LevyModel::symmetric_stable(1.0, 1.0).unwrap();
        let f = invert_density(&c, 1.0, GridSpec::symmetric(50.0, 0.01).unwrap()).unwrap();
        let mut worst = 0.0f64;
        for i in 0..f.len() {
            let x = f.x(i);
            if x.abs() <= 20.0 {
                worst = worst.max((f.values[i] - 1.0 / (PI * (1.0 + x * x))).abs());
            }
        }
        assert!(worst < 1e-6, "{worst}");
        assert!((f.eval(0.0) - 0.3183099).abs() < 1e-7);
        // [-50, 50] holds only 98.7% of the mass, so the grid was widened
        assert!(f.x_max() > 50.0);
        assert!((f.total_mass - 1.0).abs() < 1e-6, "{}", f.total_mass);
        let (raw, clamped) = invert_on_lattice(&c, 1.0, -5000, 10001, 0.01).unwrap();
        let raw = DensityGrid { values: raw, first_index: -5000, clamped, ..f };
        let min = check_strict_positivity(&raw);
        assert!((min - 1.0 / (PI * 2501.0)).abs() < 1e-9, "{min}");
    }

    #[test]
    fn kernel_is_translation_invariant() {
        let m = LevyModel::asymmetric_stable(1.5, 0.5, 1.0).unwrap();
        let f = invert_density(&m, 1.0, GridSpec::auto(&m, 1.0)).unwrap();
        let xs = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let table = KernelTable::from_density(&f, &xs, &xs);
        assert!(table.translation_defect() < 1e-15);
        for c in [0.5, -2.0] {
            assert_eq!(transition_kernel(&f, 0.25 + c, 0.75 + c), transition_kernel(&f, 0.25, 0.75));
        }
    }

    fn catalog() -> Vec<LevyModel> {
        vec![
            LevyModel::brownian(1.0, 0.0).unwrap(),
            LevyModel::brownian(0.5, 0.4).unwrap(),
            LevyModel::symmetric_stable(1.0, 1.0).unwrap(),
            LevyModel::symmetric_stable(1.5, 1.0).unwrap(),
            LevyModel::symmetric_stable(1.8, 1.0).unwrap(),
            LevyModel::symmetric_stable(0.8, 1.0).unwrap(),
            LevyModel::asymmetric_stable(1.5, 0.7, 1.0).unwrap(),
            LevyModel::asymmetric_stable(0.8, -0.4, 1.0).unwrap(),
            LevyModel::asymmetric_stable(1.0, 0.5, 1.0).unwrap(),
            LevyModel::brownian_plus_compound_poisson(1.0, 0.0, 1.5, JumpLaw { mean: 0.5, sd: 0.5 }).unwrap(),
        ]
    }

    #[test]
    fn mass_within_tolerance_across_catalog() {
        for m in catalog() {
            for t in [0.25, 1.0, 4.0] {
                let f = invert_density(&m, t, GridSpec::auto(&m, t)).unwrap_or_else(|e| panic!("{m:?} t={t}: {e}"));
                assert!((f.total_mass - 1.0).abs() <= mass_tolerance(&m), "{m:?} t={t} {}", f.total_mass);
                assert!(f.tail_mass <= 1e-3);
                let sup = f.sup();
                assert!(f.values[0] < 1e-3 * sup && f.values[f.len() - 1] < 1e-3 * sup);
            }
        }
    }

    #[test]
    fn stable_tail_series_matches_reference() {
        // reference tails from an independent stable-law library (S1 parameterization)
        let cases = [
            ((1.5, 0.0, 1.0), 12.0, 0.004988779527798415, 0.004988779527798415),
            ((1.5, 0.0, 1.0), 30.0, 0.001225830277318929, 0.001225830277318929),
            ((0.8, 0.6, 1.3), 12.0, 0.11494837490942234, 0.01869107679571891),
            ((0.8, 0.6, 1.3), 30.0, 0.05011570141090038, 0.010125505788369238),
            ((1.7, -0.5, 0.7), 12.0, 0.0005383304331825212, 0.0016045563808367858),
            ((1.7, -0.5, 0.7), 30.0, 0.00011097932172443592, 0.0003325075464462035),
        ];
        for ((a, b, sc), x, upper, lower) in cases {
            let m = LevyModel::stable_with_drift(a, b, sc, 0.0).unwrap();
            let (lo, hi) = tail_probabilities(&m, 1.0, -x, x);
            assert!((hi - upper).abs() < 1e-9 * upper, "{m:?} {x}: {hi} vs {upper}");
            assert!((lo - lower).abs() < 1e-9 * lower, "{m:?} {x}: {lo} vs {lower}");
        }
        let c = LevyModel::symmetric_stable(1.0, 1.0).unwrap();
        let exact = 0.5 - 30f64.atan() / PI;
        assert!((stable_tail(&c, 1.0, 30.0, true).unwrap() - exact).abs() < 1e-15);
    }

    #[test]
    fn gil_pelaez_light_tails() {
        let bm = LevyModel::brownian(1.0, 0.3).unwrap();
        // P(N(0.3, 1) > 2) = 0.0445654627585431...
        let p = gil_pelaez_upper(&bm, 1.0, 2.0);
        assert!((p - 0.044565462758543).abs() < 1e-12, "{p}");
    }

    #[test]
    fn stable_scaling_relation() {
        // f_t(x) = t^{-1/α} f_1(t^{-1/α} x), compared on matching lattices
        for (m, t) in [
            (LevyModel::symmetric_stable(1.5, 1.0).unwrap(), 2.0f64),
            (LevyModel::asymmetric_stable(1.2, 0.6, 1.0).unwrap(), 0.3),
        ] {
            let c = t.powf(1.0 / m.alpha());
            let (f1, _) = invert_on_lattice(&m, 1.0, -4000, 8001, 0.01).unwrap();
            let (ft, _) = invert_on_lattice(&m, t, -4000, 8001, 0.01 * c).unwrap();
            for (a, b) in f1.iter().zip(&ft) {
                if *a > 1e-8 {
                    assert!((b * c - a).abs() <= 1e-6 * a, "{a} {}", b * c);
                }
            }
        }
    }

    #[test]
    fn chapman_kolmogorov_brownian_and_refinement() {
        let bm = LevyModel::brownian(1.0, 0.0).unwrap();
        let run = |dx: f64| {
            let half = GridSpec::symmetric(16.0, dx).unwrap();
            let fs = invert_density(&bm, 0.5, half).unwrap();
            let f1 = invert_density(&bm, 1.0, GridSpec::symmetric(8.0, dx).unwrap()).unwrap();
            check_chapman_kolmogorov(&fs, &fs, &f1).unwrap()
        };
        let coarse = run(0.5);
        let fine = run(0.25);
        assert!(coarse < 1e-6, "{coarse}");
        assert!(fine <= coarse / 2.0, "{coarse} {fine}");
    }

    #[test]
    fn chapman_kolmogorov_stable() {
        let m = LevyModel::symmetric_stable(1.5, 1.0).unwrap();
        let wide = GridSpec::symmetric(400.0, 0.02).unwrap();
        let fs = invert_density(&m, 0.3, wide).unwrap();
        let fu = invert_density(&m, 0.7, wide).unwrap();
        let f1 = invert_density(&m, 1.0, GridSpec::symmetric(100.0, 0.02).unwrap()).unwrap();
        let r = check_chapman_kolmogorov(&fs, &fu, &f1).unwrap();
        assert!(r < 1e-4, "{r}");
    }

    #[test]
    fn chapman_kolmogorov_rejects_mismatch() {
        let bm = LevyModel::brownian(1.0, 0.0).unwrap();
        let f = invert_density(&bm, 1.0, GridSpec::symmetric(10.0, 0.05).unwrap()).unwrap();
        assert!(matches!(check_chapman_kolmogorov(&f, &f, &f), Err(Error::GridMismatch(_))));
        let g = invert_density(&bm, 1.0, GridSpec::symmetric(10.0, 0.1).unwrap()).unwrap();
        let h = invert_density(&bm, 2.0, GridSpec::symmetric(10.0, 0.05).unwrap()).unwrap();
        assert!(matches!(check_chapman_kolmogorov(&f, &g, &h), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn undersized_grid_is_widened() {
        let m = LevyModel::symmetric_stable(1.5, 1.0).unwrap();
        let f = invert_density(&m, 1.0, GridSpec::symmetric(5.0, 0.02).unwrap()).unwrap();
        assert!(f.x_max() > 5.0 && f.tail_mass <= 1e-3);
    }
}
