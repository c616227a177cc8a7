//! Processes conditioned to stay positive: killed densities, h-transforms,
//! conditioned bridges, excursions and meanders.
//!
//! Everything is built on the walk skeleton with `n` steps of length
//! `Δ = t/n`: "positive" means positive at the grid nodes, and the killed
//! walk tables of [`killed`] give its exact one-step conditional laws.

pub mod hunt;
pub mod killed;
pub mod samplers;

use serde::{Deserialize, Serialize};

use crate::charfn::LevyModel;
use crate::error::{Error, Result};
use crate::family::StepKernels;
use crate::ladder::{dual_renewal_analytic, renewal_analytic, RenewalFunction};
use crate::rng::RngStream;
use killed::{default_reach, KilledWalk, Terminal};

pub use hunt::{hunt_q, HuntEstimate, HuntEstimator, KilledDensity};
pub use samplers::{
    joint_law_check, sample_conditioned, sample_conditioned_bridge, sample_meander, ConditionedBridge, ConditionedSampler,
    MeanderSampler, WeightedPaths,
};

/// `λ↑(dy) = h(y) ĥ(y) dy`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityMeasure {
    pub h: RenewalFunction,
    pub h_dual: RenewalFunction,
}

impl DualityMeasure {
    pub fn new(h: RenewalFunction, h_dual: RenewalFunction) -> Self {
        Self { h, h_dual }
    }

    /// Closed-form renewal functions of `X` and `-X`.
    pub fn analytic(model: &LevyModel) -> Result<Self> {
        Ok(Self::new(renewal_analytic(model)?, dual_renewal_analytic(model)?))
    }

    /// `h ↦ c·h`, `ĥ ↦ ĉ·ĥ`.
    pub fn scaled(&self, c: f64, c_dual: f64) -> Self {
        Self::new(self.h.scaled(c), self.h_dual.scaled(c_dual))
    }

    /// Density of `λ↑` at `y`.
    pub fn weight(&self, y: f64) -> f64 {
        self.h.eval(y) * self.h_dual.eval(y)
    }

    /// Roles of `h` and `ĥ` exchanged, for the dual process.
    pub fn dual(&self) -> Self {
        Self::new(self.h_dual.clone(), self.h.clone())
    }
}

/// `p↑_t(x_i, y_j) = q_t(x_i, y_j) / (h(x_i) ĥ(y_j))`, a density against `λ↑`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionedDensity {
    pub t: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// `β_t` with its standard error, when estimated.
    pub beta: Option<(f64, f64)>,
}

pub fn conditioned_density(q: &KilledDensity, measure: &DualityMeasure) -> ConditionedDensity {
    let mut values = q.values.clone();
    let mut stderr = q.stderr.clone();
    for (i, &x) in q.xs.iter().enumerate() {
        for (j, &y) in q.ys.iter().enumerate() {
            let norm = measure.h.eval(x) * measure.h_dual.eval(y);
            values[i][j] /= norm;
            stderr[i][j] /= norm;
        }
    }
    ConditionedDensity {
        t: q.t,
        xs: q.xs.clone(),
        ys: q.ys.clone(),
        values,
        stderr,
        beta: None,
    }
}

/// Trapezoid weights of a sorted grid.
fn trapezoid_weights(z: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; z.len()];
    for k in 1..z.len() {
        let d = 0.5 * (z[k] - z[k - 1]);
        w[k - 1] += d;
        w[k] += d;
    }
    w
}

impl ConditionedDensity {
    /// `∫ p↑_t(x_i, y) λ↑(dy)` over the y-grid (1 when `h` is invariant and the grid covers the mass).
    pub fn mass(&self, i: usize, measure: &DualityMeasure) -> f64 {
        let w = trapezoid_weights(&self.ys);
        self.ys
            .iter()
            .zip(&w)
            .enumerate()
            .map(|(j, (&y, wj))| wj * self.values[i][j] * measure.weight(y))
            .sum()
    }

    /// `max_i p↑_t(x_i, y_j)` for each `j`.
    pub fn sup_over_x(&self) -> Vec<f64> {
        (0..self.ys.len())
            .map(|j| self.values.iter().map(|row| row[j]).fold(0.0, f64::max))
            .collect()
    }

    /// `p↑_t(x_i, y_j) - ∫ p↑_s(x_i, z) p↑_u(z, y_j) λ↑(dz)`, with `first` on
    /// `(xs, zs)`, `second` on `(zs, ys)` and `self` on `(xs, ys)`, `s + u = t`.
    pub fn chapman_kolmogorov_gap(&self, first: &Self, second: &Self, measure: &DualityMeasure) -> Result<Vec<Vec<f64>>> {
        if first.xs != self.xs || second.ys != self.ys || first.ys != second.xs {
            return Err(Error::GridMismatch("grids do not chain".into()));
        }
        if (first.t + second.t - self.t).abs() > 1e-12 * self.t {
            return Err(Error::GridMismatch(format!("{} + {} ≠ {}", first.t, second.t, self.t)));
        }
        let zs = &first.ys;
        let w = trapezoid_weights(zs);
        Ok((0..self.xs.len())
            .map(|i| {
                (0..self.ys.len())
                    .map(|j| {
                        let conv: f64 = (0..zs.len())
                            .map(|k| w[k] * first.values[i][k] * second.values[k][j] * measure.weight(zs[k]))
                            .sum();
                        self.values[i][j] - conv
                    })
                    .collect()
            })
            .collect())
    }
}

/// `p↑_t(0, y_j)` from one split `s`, with standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroBoundary {
    pub t: f64,
    pub s_split: f64,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_mc: usize,
}

/// Grid index of `s` on the `n`-step grid of `[0, t]`.
fn split_index(t: f64, n: usize, s: f64) -> Result<usize> {
    let u = s / t * n as f64;
    let k = u.round();
    if (u - k).abs() > 1e-9 || k < 1.0 || k >= n as f64 {
        return Err(Error::GridAlignment(s));
    }
    Ok(k as usize)
}

/// `p↑_t(0, y) = E↑_0[p↑_{t-s}(X_s, y)]` by Monte Carlo over the conditioned
/// chain started at 0, with `q_{t-s}` from the killed-walk tables.
///
/// On the skeleton `h` is harmonic only in the limit, so both `P↑_0` on
/// `[0, s]` and `p↑_{t-s}(x, ·)` use the finite-horizon harmonic function
/// `H_{t-s}(x) = E_x[h(X_{t-s}); survival]` of the walk in place of `h(x)`; the
/// estimate is then independent of `s` up to Monte Carlo error, and `H → h`
/// as `Δ → 0`.
#[allow(clippy::too_many_arguments)]
pub fn conditioned_density_zero(
    model: &LevyModel,
    measure: &DualityMeasure,
    t: f64,
    s_split: f64,
    ys: &[f64],
    n_mc: usize,
    n_steps: usize,
    rng: &mut RngStream,
) -> Result<ZeroBoundary> {
    if ys.iter().any(|y| !(*y > 0.0)) {
        return Err(Error::InvalidArgument("the y-grid must be positive".into()));
    }
    if n_mc < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let k = split_index(t, n_steps, s_split)?;
    let rest = n_steps - k;
    let far = ys.iter().copied().fold(0.0, f64::max);
    let chain = ConditionedSampler::new(model, &measure.h, 0.0, t, n_steps)?;
    let tail = StepKernels::new(model, t - s_split, rest)?;
    let reach = default_reach(&tail, chain.reach(), far);
    let walks = ys
        .iter()
        .map(|&y| KilledWalk::new(tail.clone(), Terminal::Pinned(y), reach))
        .collect::<Result<Vec<_>>>()?;
    let mut sums = vec![0.0; ys.len()];
    let mut squares = vec![0.0; ys.len()];
    for _ in 0..n_mc {
        let x = chain.sample_until(k, rng)?.end();
        let hx = measure.h.scale * chain.harmonic(rest, x);
        for (j, (w, &y)) in walks.iter().zip(ys).enumerate() {
            let v = w.value(rest, x) / (hx * measure.h_dual.eval(y));
            sums[j] += v;
            squares[j] += v * v;
        }
    }
    let n = n_mc as f64;
    let values: Vec<f64> = sums.iter().map(|s| s / n).collect();
    let stderr = squares
        .iter()
        .zip(&values)
        .map(|(q, m)| ((q / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt())
        .collect();
    Ok(ZeroBoundary {
        t,
        s_split,
        ys: ys.to_vec(),
        values,
        stderr,
        n_mc,
    })
}

/// Largest `|a - b| / joint stderr` over the grid; above `limit` the two splits
/// contradict each other and an inconsistency error is returned.
pub fn check_split_consistency(a: &ZeroBoundary, b: &ZeroBoundary, limit: f64) -> Result<f64> {
    if a.ys != b.ys {
        return Err(Error::GridMismatch("different y-grids".into()));
    }
    let mut worst = 0.0f64;
    for j in 0..a.ys.len() {
        let joint = (a.stderr[j].powi(2) + b.stderr[j].powi(2)).sqrt();
        worst = worst.max((a.values[j] - b.values[j]).abs() / joint);
    }
    if worst > limit {
        return Err(Error::Inconsistent(format!(
            "splits s = {} and s = {} differ by {worst:.2} joint standard errors",
            a.s_split, b.s_split
        )));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::oracle;

    fn brownian() -> LevyModel {
        LevyModel::brownian(1.0, 0.0).unwrap()
    }

    #[test]
    fn brownian_conditioned_density_at_one() {
        let m = brownian();
        let measure = DualityMeasure::analytic(&m).unwrap();
        let q = KilledDensity::from_tables(&m, 1.0, 1024, &[1.0], &[1.0]).unwrap();
        let p = conditioned_density(&q, &measure);
        let want = oracle::brownian_killed_density(1.0, 1.0, 1.0, 1.0);
        // the skeleton kills a little less than the continuous barrier
        assert!(p.values[0][0] > want && p.values[0][0] - want < 0.02, "{}", p.values[0][0]);
        let scaled = conditioned_density(&q, &measure.scaled(2.0, 3.0));
        assert!((scaled.values[0][0] * 6.0 - p.values[0][0]).abs() < 1e-15);
    }

    #[test]
    fn mass_chapman_kolmogorov_and_bounds() {
        let m = brownian();
        let measure = DualityMeasure::analytic(&m).unwrap();
        let zs: Vec<f64> = (1..=300).map(|i| i as f64 * 0.02).collect();
        let xs = [0.25, 0.5, 1.0];
        let ys = [0.5, 1.0, 2.0];
        let n = 256;
        let full = conditioned_density(&KilledDensity::from_tables(&m, 1.0, n, &xs, &zs).unwrap(), &measure);
        // the skeleton overshoots the barrier, so mass exceeds 1 by about δ/x
        let delta = oracle::grid_barrier_shift(1.0, 1.0 / n as f64);
        for (i, x) in xs.iter().enumerate() {
            let mass = full.mass(i, &measure);
            assert!(mass > 0.999 && mass < 1.0 + 2.0 * delta / x, "{x} {mass}");
        }
        let a = conditioned_density(&KilledDensity::from_tables(&m, 0.5, n / 2, &xs, &zs).unwrap(), &measure);
        let b = conditioned_density(&KilledDensity::from_tables(&m, 0.5, n / 2, &zs, &ys).unwrap(), &measure);
        let c = conditioned_density(&KilledDensity::from_tables(&m, 1.0, n, &xs, &ys).unwrap(), &measure);
        let gap = c.chapman_kolmogorov_gap(&a, &b, &measure).unwrap();
        for (i, row) in gap.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                assert!(g.abs() < 2e-3 * c.values[i][j], "{i} {j} {g}");
            }
        }
        assert!(c.sup_over_x().iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn zero_boundary_splits_agree_and_match_the_limit() {
        let m = brownian();
        let measure = DualityMeasure::analytic(&m).unwrap();
        let ys = [0.5, 1.0, 2.0, 4.0];
        let mut rng = RngStream::new(31);
        let a = conditioned_density_zero(&m, &measure, 1.0, 0.25, &ys, 4000, 128, &mut rng).unwrap();
        let b = conditioned_density_zero(&m, &measure, 1.0, 0.5, &ys, 4000, 128, &mut rng).unwrap();
        assert!(check_split_consistency(&a, &b, 4.0).unwrap() < 4.0);
        // continuum: p↑_1(0, y) = √(2/π) e^{-y²/2}, decaying in y
        for (j, y) in ys.iter().enumerate() {
            let want = (2.0 / core::f64::consts::PI).sqrt() * (-0.5 * y * y).exp();
            assert!((a.values[j] - want).abs() < 0.1 * want + 4.0 * a.stderr[j], "{y} {} {want}", a.values[j]);
        }
        assert!(a.values[3] < a.values[0]);
        assert!(matches!(
            conditioned_density_zero(&m, &measure, 1.0, 0.3333, &ys, 10, 128, &mut rng),
            Err(Error::GridAlignment(_))
        ));
        let mut c = b.clone();
        c.values[0] += 10.0 * c.stderr[0] + 10.0 * a.stderr[0];
        assert!(matches!(check_split_consistency(&a, &c, 4.0), Err(Error::Inconsistent(_))));
    }
}
