//! Walk skeletons killed on leaving `(0, Z]`, tabulated backward on a
//! uniform lattice of the half-line.
//!
//! With step density `f = f_Δ` and a terminal weight `g`, the tables are
//! `T_0 = g` and `T_j(z) = ∫_0^Z f(w - z) T_{j-1}(w) dw`. A path with `j`
//! steps left moves from `z` to `w = z + ξ` (an exact increment) and keeps
//! the proposal with probability `T_{j-1}(w) / sup T_{j-1}`; that is the
//! one-step conditional law of the killed walk weighted by `g` at the end.
//! A pinned terminal replaces `T_1` by `f(y - ·)` and forces the last value.

use std::sync::Arc;

use num_complex::Complex64;

use crate::density::Convolver;
use crate::error::{Error, Result};
use crate::family::StepKernels;
use crate::ladder::RenewalFunction;
use crate::pathsim::{IncrementSampler, PathGrid, MAX_TRIES};
use crate::rng::RngStream;

/// Largest lattice, in nodes.
pub const MAX_NODES: usize = 1 << 15;
/// Lattice nodes per step scale `scale(Δ)`.
const NODES_PER_SCALE: f64 = 16.0;

/// Weight of the walk at its last step.
#[derive(Clone, Debug)]
pub enum Terminal {
    /// End exactly at `y ≥ 0` (the end point itself is not killed).
    Pinned(f64),
    /// No weight: the walk is only required to survive.
    Free,
    /// `h(X_n)` through its shape, so constant factors of `h` never enter.
    Harmonic(RenewalFunction),
}

impl Terminal {
    fn weight(&self, w: f64) -> f64 {
        match self {
            Terminal::Pinned(_) => unreachable!("pinned terminals have no weight function"),
            Terminal::Free => 1.0,
            Terminal::Harmonic(h) => h.shape(w),
        }
    }
}

/// Upper edge `Z` covering paths between `from` and `to` over the whole horizon.
pub fn default_reach(kernels: &StepKernels, from: f64, to: f64) -> f64 {
    let n = kernels.n();
    let span = if kernels.gaussian_sigma().is_some() { 10.0 } else { 30.0 };
    from.max(to) + span * kernels.scale(n) + kernels.center(n).abs()
}

/// Backward tables `T_0..=T_n` of one killed walk.
#[derive(Clone, Debug)]
pub struct KilledWalk {
    kernels: StepKernels,
    inc: IncrementSampler,
    terminal: Terminal,
    spacing: f64,
    reach: f64,
    tables: Arc<Vec<Vec<f64>>>,
    sups: Vec<f64>,
}

/// Gregory end weights (third order) for the trapezoid sum.
const END_WEIGHTS: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];

fn quadrature_weights(len: usize, spacing: f64) -> Vec<f64> {
    let mut c = vec![spacing; len];
    if len >= 8 {
        for (i, e) in END_WEIGHTS.iter().enumerate() {
            c[i] = spacing * e;
            c[len - 1 - i] = spacing * e;
        }
    } else {
        c[0] *= 0.5;
        c[len - 1] *= 0.5;
    }
    c
}

impl KilledWalk {
    pub fn new(kernels: StepKernels, terminal: Terminal, reach: f64) -> Result<Self> {
        if !(reach > 0.0 && reach.is_finite()) {
            return Err(Error::InvalidArgument(format!("reach must be positive, got {reach}")));
        }
        if let Terminal::Pinned(y) = terminal {
            if !(0.0..=reach).contains(&y) {
                return Err(Error::GridCoverage(format!("pinned end {y} outside [0, {reach}]")));
            }
        }
        let n = kernels.n();
        let spacing = (kernels.scale(1) / NODES_PER_SCALE).max(reach / (MAX_NODES - 1) as f64);
        let len = (reach / spacing).ceil() as usize + 1;
        let spacing = reach / (len - 1) as f64;
        let nodes: Vec<f64> = (0..len).map(|i| i as f64 * spacing).collect();

        // out_i = Σ_k c_k T(z_k) f(z_k - z_i), a linear convolution with the reversed kernel
        let conv = Convolver::new((3 * len - 2).next_power_of_two());
        let reversed: Vec<f64> = (0..2 * len - 1)
            .map(|p| kernels.density(1, (len as f64 - 1.0 - p as f64) * spacing))
            .collect();
        let spectrum: Vec<Complex64> = conv.spectrum(&reversed);
        let c = quadrature_weights(len, spacing);
        let step_back = |prev: &[f64]| -> Vec<f64> {
            let a: Vec<f64> = prev.iter().zip(&c).map(|(t, w)| t * w).collect();
            let full = conv.apply(&a, &spectrum);
            full[len - 1..2 * len - 1].iter().map(|v| v.max(0.0)).collect()
        };

        let mut tables = Vec::with_capacity(n + 1);
        match &terminal {
            Terminal::Pinned(y) => {
                tables.push(Vec::new());
                tables.push(nodes.iter().map(|z| kernels.density(1, y - z)).collect());
            }
            other => tables.push(nodes.iter().map(|&z| other.weight(z)).collect()),
        }
        while tables.len() <= n {
            let next = step_back(tables.last().unwrap());
            tables.push(next);
        }
        let sups = tables
            .iter()
            .map(|t| t.iter().copied().fold(0.0, f64::max))
            .collect();
        let inc = IncrementSampler::exact(kernels.model(), kernels.dt());
        Ok(Self {
            kernels,
            inc,
            terminal,
            spacing,
            reach,
            tables: Arc::new(tables),
            sups,
        })
    }

    pub fn kernels(&self) -> &StepKernels {
        &self.kernels
    }
    pub fn terminal(&self) -> &Terminal {
        &self.terminal
    }
    pub fn reach(&self) -> f64 {
        self.reach
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    /// Longest path the tables support.
    pub fn steps(&self) -> usize {
        self.kernels.n()
    }

    fn pinned(&self) -> Option<f64> {
        match self.terminal {
            Terminal::Pinned(y) => Some(y),
            _ => None,
        }
    }

    /// `T_j(z)`: Catmull–Rom between nodes, exact where a closed form exists.
    pub fn value(&self, j: usize, z: f64) -> f64 {
        if !(z >= 0.0 && z <= self.reach) {
            return 0.0;
        }
        match (j, &self.terminal) {
            (1, Terminal::Pinned(y)) => return self.kernels.density(1, y - z),
            (0, Terminal::Pinned(_)) => return 0.0,
            (0, t) => return t.weight(z),
            _ => {}
        }
        interpolate(&self.tables[j], z / self.spacing)
    }

    /// Upper bound of [`KilledWalk::value`] over `(0, Z]`.
    fn bound(&self, j: usize) -> f64 {
        match (j, &self.terminal) {
            (1, Terminal::Pinned(_)) => self.kernels.peak(1),
            (0, t @ Terminal::Harmonic(_)) => t.weight(self.reach),
            // cubic interpolation may overshoot smooth data by a hair
            _ => self.sups[j] * 1.01,
        }
    }

    fn step(&self, rng: &mut RngStream) -> f64 {
        let xi = self.inc.sample(rng);
        if self.kernels.is_dual() {
            -xi
        } else {
            xi
        }
    }

    /// Killed walk from `x` over `m ≤ n` steps weighted by the terminal.
    pub fn sample(&self, x: f64, m: usize, rng: &mut RngStream) -> Result<PathGrid> {
        self.sample_until(x, m, m, rng)
    }

    /// The first `stop ≤ m` steps of [`KilledWalk::sample`].
    pub fn sample_until(&self, x: f64, m: usize, stop: usize, rng: &mut RngStream) -> Result<PathGrid> {
        if m == 0 || m > self.steps() || stop > m {
            return Err(Error::InvalidArgument(format!("path length {m} outside 1..={}", self.steps())));
        }
        if !(0.0..=self.reach).contains(&x) {
            return Err(Error::GridCoverage(format!("start {x} outside [0, {}]", self.reach)));
        }
        if !(self.value(m, x) > 0.0) {
            return Err(Error::BridgeDegeneracy { value: self.value(m, x) });
        }
        let mut values = Vec::with_capacity(stop + 1);
        values.push(x);
        let mut cur = x;
        for i in 0..stop {
            let left = m - i;
            let next = match self.pinned() {
                Some(y) if left == 1 => y,
                _ => {
                    let bound = self.bound(left - 1);
                    let mut tries = 0u64;
                    loop {
                        let w = cur + self.step(rng);
                        if w > 0.0 && w <= self.reach && rng.open01() * bound < self.value(left - 1, w) {
                            break w;
                        }
                        tries += 1;
                        if tries >= MAX_TRIES {
                            return Err(Error::Budget(format!("killed step {i} rejected {tries} proposals")));
                        }
                    }
                }
            };
            values.push(next);
            cur = next;
        }
        Ok(PathGrid::from_values(stop as f64 * self.kernels.dt(), values))
    }
}

/// Catmull–Rom interpolation of equally spaced samples at fractional index `u`.
fn interpolate(v: &[f64], u: f64) -> f64 {
    let last = v.len() - 1;
    let i = (u.floor() as usize).min(last.saturating_sub(1));
    let s = u - i as f64;
    if i == 0 || i + 2 > last {
        let j = (i + 1).min(last);
        return (v[i] + s * (v[j] - v[i])).max(0.0);
    }
    let (p0, p1, p2, p3) = (v[i - 1], v[i], v[i + 1], v[i + 2]);
    let r = p1 + 0.5 * s * (p2 - p0 + s * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + s * (3.0 * (p1 - p2) + p3 - p0)));
    r.max(0.0)
}
