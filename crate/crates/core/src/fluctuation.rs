//! Functionals and transforms of grid paths: running minimum, argmin,
//! pre-/post-minimum split, cyclic shift and the Vervaat transform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathsim::PathGrid;

/// Index of the minimum over the nodes (earliest on ties).
pub fn argmin(path: &PathGrid) -> usize {
    let mut best = 0;
    for (i, v) in path.values.iter().enumerate() {
        if *v < path.values[best] {
            best = i;
        }
    }
    best
}

/// `(min over nodes, grid time of the earliest minimizer)`.
pub fn running_min(path: &PathGrid) -> (f64, f64) {
    let k = argmin(path);
    (path.values[k], path.times[k])
}

/// Rotation of the increments by `s`: `r ↦ X_0 + X_{r+s} - X_s` for
/// `r ≤ t - s`, then `X_t - X_s + X_{r+s-t}`, so the endpoint stays `X_t`.
pub fn cyclic_shift(path: &PathGrid, s: f64) -> Result<PathGrid> {
    let k = path.index_of(s)?;
    Ok(rotate(path, k))
}

pub(crate) fn rotate(path: &PathGrid, k: usize) -> PathGrid {
    let n = path.n();
    if k == 0 || k == n {
        return path.clone();
    }
    let x = &path.values;
    let mut values = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let v = if i + k <= n {
            x[0] + (x[i + k] - x[k])
        } else {
            x[0] + (x[n] - x[k]) + (x[i + k - n] - x[0])
        };
        values.push(v);
    }
    values[n] = x[n];
    PathGrid {
        times: path.times.clone(),
        values,
    }
}

/// `V_s = X_{(ρ + s) mod t} - X̲_t` for a path with `X_t = X_0`.
pub fn vervaat(path: &PathGrid) -> Result<PathGrid> {
    let n = path.n();
    let gap = path.end() - path.start();
    if gap != 0.0 {
        return Err(Error::NotABridge(gap));
    }
    let k = argmin(path);
    let m = path.values[k];
    let values = (0..=n).map(|i| path.values[(k + i) % n.max(1)] - m).collect();
    Ok(PathGrid {
        times: path.times.clone(),
        values,
    })
}

/// Path split at its (earliest) grid minimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinDecomposition {
    pub rho: f64,
    pub rho_index: usize,
    pub min_val: f64,
    /// `s ↦ X_{ρ-s} - X̲_t` on `[0, ρ]`.
    pub pre: PathGrid,
    /// `s ↦ X_{ρ+s} - X̲_t` on `[0, t-ρ]`.
    pub post: PathGrid,
}

impl MinDecomposition {
    /// Reverses `pre`, appends `post` and adds back the minimum.
    pub fn reassemble(&self) -> PathGrid {
        let mut values: Vec<f64> = self.pre.values.iter().rev().map(|v| v + self.min_val).collect();
        values.extend(self.post.values[1..].iter().map(|v| v + self.min_val));
        let t = self.pre.horizon() + self.post.horizon();
        PathGrid::from_values(t, values)
    }
}

pub fn split_at_min(path: &PathGrid) -> MinDecomposition {
    let k = argmin(path);
    let m = path.values[k];
    let dt = path.dt();
    let pre_values: Vec<f64> = path.values[..=k].iter().rev().map(|v| v - m).collect();
    let post_values: Vec<f64> = path.values[k..].iter().map(|v| v - m).collect();
    let grid = |values: Vec<f64>| {
        let len = values.len() - 1;
        let times = (0..=len).map(|i| i as f64 * dt).collect();
        PathGrid { times, values }
    };
    MinDecomposition {
        rho: path.times[k],
        rho_index: k,
        min_val: m,
        pre: grid(pre_values),
        post: grid(post_values),
    }
}
