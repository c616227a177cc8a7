//! Killed densities `q_t(x, y) = P^t_{x,y}(X̲_t > 0) p_t(x, y)` by bridge survival.

use serde::{Deserialize, Serialize};

use super::killed::{default_reach, KilledWalk, Terminal};
use crate::charfn::LevyModel;
use crate::error::{Error, Result};
use crate::family::StepKernels;
use crate::pathsim::BridgeSampler;
use crate::rng::RngStream;

/// One Hunt-formula estimate with its ingredients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HuntEstimate {
    /// Step-doubling extrapolation of the survival frequency, times `p_t(x, y)`.
    pub q: f64,
    pub stderr: f64,
    /// Survival frequency times `p` on `n` steps (the even nodes of each bridge).
    pub q_coarse: f64,
    pub stderr_coarse: f64,
    /// The same on all `2n` steps.
    pub q_fine: f64,
    pub stderr_fine: f64,
    pub p: f64,
    /// Order of the grid bias in `Δ` removed by the extrapolation.
    pub bias_order: f64,
    pub n_bridges: usize,
    pub n_steps: usize,
}

/// Bias order of the grid minimum: `Δ^{1/α}` (`Δ^{1/2}` with a Gaussian part).
pub fn grid_bias_order(model: &LevyModel) -> f64 {
    1.0 / model.alpha()
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Hunt's formula by Monte Carlo over `n_bridges` bridges from `x` to `y`.
///
/// Each bridge has `2n` steps; its even nodes form an `n`-step bridge, so the
/// coarse and fine survival indicators come from the same path and the
/// extrapolation `(I_{2n} - 2^{-γ} I_n) / (1 - 2^{-γ})` is estimated per path.
pub fn hunt_q(model: &LevyModel, x: f64, y: f64, t: f64, n_bridges: usize, n_steps: usize, rng: &mut RngStream) -> Result<HuntEstimate> {
    if !(x > 0.0 && y > 0.0 && t > 0.0) {
        return Err(Error::InvalidArgument(format!("need x, y, t > 0, got {x}, {y}, {t}")));
    }
    if n_bridges < 2 || n_steps == 0 {
        return Err(Error::InvalidArgument("need at least two bridges and one step".into()));
    }
    let fine = 2 * n_steps;
    let kernels = StepKernels::new(model, t, fine)?;
    let p = kernels.density(fine, y - x);
    let sampler = BridgeSampler::new(kernels);
    let gamma = grid_bias_order(model);
    let r = 2f64.powf(-gamma);
    let (mut coarse, mut finer, mut extra) = (Vec::with_capacity(n_bridges), Vec::with_capacity(n_bridges), Vec::with_capacity(n_bridges));
    for _ in 0..n_bridges {
        let path = sampler.sample(x, y, rng)?;
        let v = &path.values;
        let ic = v.iter().step_by(2).all(|z| *z > 0.0);
        let ifn = ic && v.iter().skip(1).step_by(2).all(|z| *z > 0.0);
        let (ic, ifn) = (ic as u8 as f64, ifn as u8 as f64);
        coarse.push(ic);
        finer.push(ifn);
        extra.push((ifn - r * ic) / (1.0 - r));
    }
    let survivors = finer.iter().sum::<f64>();
    if survivors == 0.0 && x.min(y) > model.scale_at(t) {
        return Err(Error::SuspiciousZero(format!(
            "no bridge from {x} to {y} stayed positive although both ends exceed the scale {}",
            model.scale_at(t)
        )));
    }
    let (mc, sc) = mean_and_stderr(&coarse);
    let (mf, sf) = mean_and_stderr(&finer);
    let (me, se) = mean_and_stderr(&extra);
    // with no survivors the spread is zero; report the resolution of one event instead
    let floor = 1.0 / n_bridges as f64;
    Ok(HuntEstimate {
        q: (me * p).clamp(0.0, p),
        stderr: se.max(floor) * p,
        q_coarse: mc * p,
        stderr_coarse: sc.max(floor) * p,
        q_fine: mf * p,
        stderr_fine: sf.max(floor) * p,
        p,
        bias_order: gamma,
        n_bridges,
        n_steps,
    })
}

/// Table of `q_t(x_i, y_j)` with per-cell standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KilledDensity {
    pub t: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[i][j] = q_t(xs[i], ys[j])`.
    pub values: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// `p_t(xs[i], ys[j])`, for the sandwich check.
    pub free: Vec<Vec<f64>>,
}

/// Which survival estimate fills a [`KilledDensity`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HuntEstimator {
    /// Grid survival on `n` steps.
    Coarse,
    /// Step-doubling extrapolation.
    Extrapolated,
}

impl KilledDensity {
    /// Hunt estimates on every cell, cell `(i, j)` on substream `i · |ys| + j`.
    #[allow(clippy::too_many_arguments)]
    pub fn monte_carlo(
        model: &LevyModel,
        t: f64,
        xs: &[f64],
        ys: &[f64],
        n_bridges: usize,
        n_steps: usize,
        estimator: HuntEstimator,
        rng: &RngStream,
    ) -> Result<Self> {
        let mut values = vec![vec![0.0; ys.len()]; xs.len()];
        let mut stderr = values.clone();
        let mut free = values.clone();
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                let mut cell = rng.substream((i * ys.len() + j) as u64);
                let e = hunt_q(model, x, y, t, n_bridges, n_steps, &mut cell)?;
                let (q, s) = match estimator {
                    HuntEstimator::Coarse => (e.q_coarse, e.stderr_coarse),
                    HuntEstimator::Extrapolated => (e.q, e.stderr),
                };
                values[i][j] = q;
                stderr[i][j] = s;
                free[i][j] = e.p;
            }
        }
        Ok(Self {
            t,
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            values,
            stderr,
            free,
        })
    }

    /// Exact killed density of the `n`-step walk skeleton from backward tables.
    pub fn from_tables(model: &LevyModel, t: f64, n_steps: usize, xs: &[f64], ys: &[f64]) -> Result<Self> {
        let kernels = StepKernels::new(model, t, n_steps)?;
        let far = xs.iter().chain(ys).copied().fold(0.0, f64::max);
        let reach = default_reach(&kernels, far, far);
        let mut values = vec![vec![0.0; ys.len()]; xs.len()];
        let mut free = values.clone();
        for (j, &y) in ys.iter().enumerate() {
            let walk = KilledWalk::new(kernels.clone(), Terminal::Pinned(y), reach)?;
            for (i, &x) in xs.iter().enumerate() {
                values[i][j] = walk.value(n_steps, x);
                free[i][j] = kernels.density(n_steps, y - x);
            }
        }
        Ok(Self {
            t,
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            stderr: vec![vec![0.0; ys.len()]; xs.len()],
            values,
            free,
        })
    }

    /// Every cell satisfies `0 ≤ q ≤ p` up to `z` standard errors.
    pub fn sandwiched(&self, z: f64) -> bool {
        self.cells().all(|(i, j)| {
            let (q, s, p) = (self.values[i][j], self.stderr[i][j], self.free[i][j]);
            q >= 0.0 && q <= p + z * s
        })
    }

    /// Every cell has a positive estimate (an upper bound of zero would contradict positivity).
    pub fn positive(&self) -> bool {
        self.cells().all(|(i, j)| self.values[i][j] > 0.0)
    }

    fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.xs.len()).flat_map(move |i| (0..self.ys.len()).map(move |j| (i, j)))
    }

    /// `max |q(x_i, x_j) - q(x_j, x_i)| / joint stderr` on a square grid.
    pub fn symmetry_score(&self) -> Result<f64> {
        if self.xs != self.ys {
            return Err(Error::GridMismatch("symmetry needs equal x and y grids".into()));
        }
        let mut worst = 0.0f64;
        for i in 0..self.xs.len() {
            for j in (i + 1)..self.xs.len() {
                let joint = (self.stderr[i][j].powi(2) + self.stderr[j][i].powi(2)).sqrt();
                let gap = (self.values[i][j] - self.values[j][i]).abs();
                worst = worst.max(if joint > 0.0 { gap / joint } else if gap > 0.0 { f64::INFINITY } else { 0.0 });
            }
        }
        Ok(worst)
    }

    /// CSV rows `x,y,q,stderr,p` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,q,stderr,p\n");
        for (i, j) in self.cells() {
            s += &format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                self.xs[i], self.ys[j], self.values[i][j], self.stderr[i][j], self.free[i][j]
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::oracle;

    #[test]
    fn brownian_hunt_matches_reflection() {
        let m = LevyModel::brownian(1.0, 0.0).unwrap();
        let mut rng = RngStream::new(21);
        let e = hunt_q(&m, 1.0, 1.0, 1.0, 20_000, 64, &mut rng).unwrap();
        let want = oracle::brownian_killed_density(1.0, 1.0, 1.0, 1.0);
        assert!((e.q - want).abs() < 3.5 * e.stderr, "{e:?} {want}");
        // the grid minimum overestimates survival
        assert!(e.q_coarse > e.q_fine - 3.0 * e.stderr_fine);
        assert!(e.q_fine <= e.p && e.q <= e.p);
    }

    #[test]
    fn far_from_the_barrier_nothing_is_killed() {
        let m = LevyModel::symmetric_stable(1.5, 1.0).unwrap();
        let mut rng = RngStream::new(22);
        let e = hunt_q(&m, 30.0, 30.0, 0.01, 200, 8, &mut rng).unwrap();
        assert_eq!(e.q_fine, e.p);
    }

    #[test]
    fn invalid_points_are_rejected() {
        let m = LevyModel::brownian(1.0, 0.0).unwrap();
        let mut rng = RngStream::new(23);
        assert!(hunt_q(&m, 0.0, 1.0, 1.0, 10, 4, &mut rng).is_err());
        assert!(hunt_q(&m, 1.0, 1.0, 1.0, 1, 4, &mut rng).is_err());
    }

    #[test]
    fn table_estimates_agree_with_skeleton_tables() {
        let m = LevyModel::symmetric_stable(1.5, 1.0).unwrap();
        let grid = [0.5, 1.5];
        let exact = KilledDensity::from_tables(&m, 1.0, 16, &grid, &grid).unwrap();
        let mc = KilledDensity::monte_carlo(&m, 1.0, &grid, &grid, 4000, 8, HuntEstimator::Coarse, &RngStream::new(24)).unwrap();
        // the coarse estimator on n = 8 steps uses the even nodes of a 16-step bridge
        let exact8 = KilledDensity::from_tables(&m, 1.0, 8, &grid, &grid).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let z = (mc.values[i][j] - exact8.values[i][j]).abs() / mc.stderr[i][j];
                assert!(z < 4.0, "{i} {j} {z}");
                assert!(exact.values[i][j] <= exact8.values[i][j] + 1e-9);
            }
        }
        assert!(mc.sandwiched(3.0) && mc.positive());
        let sym = exact.values[0][1] - exact.values[1][0];
        assert!(sym.abs() < 1e-6 * exact.values[0][1], "{sym}");
    }
}
