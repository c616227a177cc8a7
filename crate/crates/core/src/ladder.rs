//! Renewal function `h` of the downward ladder height process, and its dual.
//!
//! `h` enters every law built here only through ratios and normalized
//! densities, so its constant factor is arbitrary. Samplers read
//! [`RenewalFunction::shape`], which ignores the stored scale: multiplying
//! `h` by any constant leaves every sampled path bit-for-bit unchanged.

use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::charfn::{LevyModel, ModelKind};
use crate::error::{Error, Result};
use crate::pathsim::IncrementSampler;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RenewalKind {
    AnalyticLinear,
    AnalyticPower,
    MonteCarloTable,
}

/// One point of a Monte Carlo renewal table (`h` normalized to 1 at the reference point).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenewalPoint {
    pub x: f64,
    pub h: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenewalFunction {
    pub kind: RenewalKind,
    /// Power-law exponent (1 for the linear case; fitted for tables).
    pub exponent: f64,
    pub scale: f64,
    pub table: Option<Vec<RenewalPoint>>,
    pub x_ref: f64,
    /// Walk step, paths and discarded epochs of a Monte Carlo estimate.
    pub walk_step: Option<f64>,
    pub n_paths: Option<usize>,
    pub capped_epochs: Option<u64>,
}

impl RenewalFunction {
    pub fn linear() -> Self {
        Self {
            kind: RenewalKind::AnalyticLinear,
            exponent: 1.0,
            scale: 1.0,
            table: None,
            x_ref: 1.0,
            walk_step: None,
            n_paths: None,
            capped_epochs: None,
        }
    }

    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent <= 1.0) {
            return Err(Error::InvalidArgument(format!("renewal exponent must lie in (0, 1], got {exponent}")));
        }
        Ok(Self {
            kind: RenewalKind::AnalyticPower,
            exponent,
            ..Self::linear()
        })
    }

    /// Same shape, multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut h = self.clone();
        h.scale *= c;
        h
    }

    /// `h(x) / h(x_ref)`: the scale-free shape used by every sampler.
    /// Tables start at `h(0) > 0` (the walk's zeroth ladder epoch).
    pub fn shape(&self, x: f64) -> f64 {
        if x < 0.0 || (x == 0.0 && self.kind != RenewalKind::MonteCarloTable) {
            return 0.0;
        }
        match self.kind {
            RenewalKind::AnalyticLinear => x,
            RenewalKind::AnalyticPower => x.powf(self.exponent),
            RenewalKind::MonteCarloTable => {
                let t = self.table.as_deref().unwrap_or(&[]);
                let Some(last) = t.last() else { return 0.0 };
                if x >= last.x {
                    return last.h * (x / last.x).powf(self.exponent);
                }
                let i = t.partition_point(|p| p.x <= x).max(1);
                let (x0, h0) = (t[i - 1].x, t[i - 1].h);
                let (x1, h1) = (t[i].x, t[i].h);
                h0 + (h1 - h0) * (x - x0) / (x1 - x0)
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.scale * self.shape(x)
    }

    /// Least-squares slope of `log h` against `log x` over the table (or the exponent).
    pub fn loglog_slope(&self) -> f64 {
        match &self.table {
            Some(t) => {
                let pts: Vec<(f64, f64)> = t.iter().filter(|p| p.x > 0.0 && p.h > 0.0).map(|p| (p.x.ln(), p.h.ln())).collect();
                fit_slope(&pts)
            }
            None => self.exponent,
        }
    }

    pub fn is_monotone_on(&self, grid: &[f64]) -> bool {
        grid.windows(2).all(|w| w[0] > w[1] || self.eval(w[0]) <= self.eval(w[1]))
    }

    /// `h(x + y) ≤ h(x) + h(y)` for all pairs of grid points (with slack `tol`).
    pub fn is_subadditive_on(&self, grid: &[f64], tol: f64) -> bool {
        grid.iter()
            .all(|&x| grid.iter().all(|&y| self.eval(x + y) <= self.eval(x) + self.eval(y) + tol * self.eval(x + y)))
    }
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Closed forms for driftless Brownian motion (`h(x) = x`) and strictly
/// stable laws (`h(x) = x^{αρ̂}`, `ρ̂ = P(X_1 < 0)`), with scale 1.
pub fn renewal_analytic(model: &LevyModel) -> Result<RenewalFunction> {
    let Some(rho_hat) = model.negative_positivity() else {
        return Err(Error::RequiresMonteCarlo(format!(
            "{} with drift {} has no closed-form renewal function",
            model.kind().name(),
            model.drift()
        )));
    };
    let exponent = match model.kind() {
        ModelKind::BrownianWithDrift | ModelKind::BrownianPlusCompoundPoisson => 1.0,
        ModelKind::SymmetricStable | ModelKind::AsymmetricStable => model.alpha() * rho_hat,
    };
    if exponent == 1.0 {
        Ok(RenewalFunction::linear())
    } else {
        RenewalFunction::power(exponent)
    }
}

/// Renewal function of the dual process `-X`.
pub fn dual_renewal_analytic(model: &LevyModel) -> Result<RenewalFunction> {
    renewal_analytic(&model.dual())
}

/// Monte Carlo renewal function from random-walk skeletons with step `walk_step`.
///
/// Each path is a sequence of strict descending ladder heights of the walk
/// (depths of successive new minima), run until the depth passes the largest
/// grid point; `h(x)` is the mean number of ladder epochs with depth `≤ x`,
/// normalized to 1 at the grid point nearest to 1. One ladder epoch has a
/// heavy-tailed duration, so an epoch still running after `segment_cap` steps
/// at height `p` above the minimum is finished in one draw for strictly stable
/// laws: the undershoot below a level at distance `p` is `p·Z` with
/// `Z ~ Beta'(1 - αρ̂, αρ̂)`. For other models such epochs are discarded;
/// either way they are counted in `capped_epochs`.
pub fn estimate_renewal_mc(
    model: &LevyModel,
    x_grid: &[f64],
    walk_step: f64,
    n_paths: usize,
    segment_cap: u64,
    rng: &mut RngStream,
) -> Result<RenewalFunction> {
    if x_grid.is_empty() || x_grid.iter().any(|x| !(*x > 0.0)) || x_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("renewal grid must be positive and increasing".into()));
    }
    let inc = IncrementSampler::exact(model, walk_step);
    let undershoot = match (model.kind(), model.negative_positivity()) {
        (ModelKind::SymmetricStable | ModelKind::AsymmetricStable, Some(rho_hat)) if model.alpha() < 2.0 => {
            let a = model.alpha() * rho_hat;
            Some((Gamma::new(1.0 - a, 1.0).expect("shape in (0, 1)"), Gamma::new(a, 1.0).expect("shape in (0, 1)")))
        }
        _ => None,
    };
    let top = x_grid[x_grid.len() - 1];
    let mut sums = vec![0.0f64; x_grid.len()];
    let mut sq = vec![0.0f64; x_grid.len()];
    let mut counts = vec![0u64; x_grid.len()];
    let mut capped = 0u64;
    for p in 0..n_paths {
        let mut r = rng.substream(p as u64);
        let mut depth = 0.0f64;
        // epoch 0 (depth 0) counts, as in the classical renewal function
        let mut per = vec![1u64; x_grid.len()];
        while depth <= top {
            // one ladder epoch: walk from the current minimum until it is undercut
            let mut pos = 0.0f64;
            let mut steps = 0u64;
            while pos >= 0.0 && steps < segment_cap {
                pos += inc.sample(&mut r);
                steps += 1;
            }
            if pos >= 0.0 {
                capped += 1;
                match &undershoot {
                    Some((g1, g2)) => {
                        let z = g1.sample(&mut r) / g2.sample(&mut r);
                        pos = -pos * z;
                    }
                    None => continue,
                }
            }
            depth -= pos;
            let first = x_grid.partition_point(|x| *x < depth);
            for c in &mut per[first..] {
                *c += 1;
            }
        }
        for (i, c) in per.iter().enumerate() {
            let c = *c as f64;
            sums[i] += c;
            sq[i] += c * c;
            counts[i] += c as u64;
        }
    }
    let last = counts[counts.len() - 1];
    if last < 100 {
        return Err(Error::InsufficientSample(format!("only {last} ladder epochs below {top}")));
    }
    let ref_i = x_grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let n = n_paths as f64;
    let norm = sums[ref_i] / n;
    if !(norm > 0.0) {
        return Err(Error::InsufficientSample("no ladder epochs below the reference point".into()));
    }
    let zero = RenewalPoint {
        x: 0.0,
        h: 1.0 / norm,
        stderr: 0.0,
    };
    let table: Vec<RenewalPoint> = std::iter::once(zero)
        .chain(x_grid
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let mean = sums[i] / n;
            let var = (sq[i] / n - mean * mean).max(0.0);
            RenewalPoint {
                x,
                h: mean / norm,
                stderr: (var / n).sqrt() / norm,
            }
        }))
        .collect();
    let mut h = RenewalFunction {
        kind: RenewalKind::MonteCarloTable,
        exponent: 1.0,
        scale: 1.0,
        table: Some(table),
        x_ref: x_grid[ref_i],
        walk_step: Some(walk_step),
        n_paths: Some(n_paths),
        capped_epochs: Some(capped),
    };
    // extrapolation exponent from the upper half of the table
    let t = h.table.as_ref().expect("table just built");
    let upper: Vec<(f64, f64)> = t[t.len() / 2..].iter().filter(|p| p.h > 0.0).map(|p| (p.x.ln(), p.h.ln())).collect();
    if upper.len() >= 2 {
        h.exponent = fit_slope(&upper).clamp(1e-3, 1.0);
    }
    Ok(h)
}
