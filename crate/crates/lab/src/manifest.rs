//! Flat experiment manifests: one TOML key per field.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use levy_core::{LevyModel, ModelDescriptor};
use serde::{Deserialize, Serialize};

use crate::LabError;

/// The fixed experiment catalog, in its stable listing order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    DensityCheck,
    CkCheck,
    HuntQ,
    Vervaat,
    Denisov,
    DenisovBridge,
    DimLimit,
    UniformRho,
    Duality,
    Renewal,
}

pub const CATALOG: [Experiment; 10] = [
    Experiment::DensityCheck,
    Experiment::CkCheck,
    Experiment::HuntQ,
    Experiment::Vervaat,
    Experiment::Denisov,
    Experiment::DenisovBridge,
    Experiment::DimLimit,
    Experiment::UniformRho,
    Experiment::Duality,
    Experiment::Renewal,
];

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::DensityCheck => "density-check",
            Experiment::CkCheck => "ck-check",
            Experiment::HuntQ => "hunt-q",
            Experiment::Vervaat => "vervaat",
            Experiment::Denisov => "denisov",
            Experiment::DenisovBridge => "denisov-bridge",
            Experiment::DimLimit => "dim-limit",
            Experiment::UniformRho => "uniform-rho",
            Experiment::Duality => "duality",
            Experiment::Renewal => "renewal",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::DensityCheck => "Fourier-inverted transition density against closed forms, mass and positivity",
            Experiment::CkCheck => "Chapman-Kolmogorov residual of tabulated densities and its decay under refinement",
            Experiment::HuntQ => "killed density from bridge survival (Hunt's formula), step-doubling corrected",
            Experiment::Vervaat => "Vervaat transform of the bridge against the normalized excursion",
            Experiment::Denisov => "pre- and post-minimum pieces of a free path against dual and primal meanders",
            Experiment::DenisovBridge => "bridge split at its minimum against conditioned bridges, binned in time and depth",
            Experiment::DimLimit => "bridges from eps to eps kept positive approach the excursion as eps -> 0",
            Experiment::UniformRho => "argmin of the bridge is uniform on the grid; free paths follow the arcsine law",
            Experiment::Duality => "killed density against the dual killed density with arguments swapped",
            Experiment::Renewal => "Monte Carlo ladder renewal function against its closed form, with step refinement",
        }
    }

    /// Where the identity comes from, in words.
    pub fn reference(self) -> &'static str {
        match self {
            Experiment::DensityCheck => "continuous densities under integrability of the characteristic function",
            Experiment::CkCheck => "semigroup property of the transition densities",
            Experiment::HuntQ => "Hunt's formula: q_t is a transition density",
            Experiment::Vervaat => "Vervaat transformation of the bridge",
            Experiment::Denisov => "conditional law of the path split at its minimum",
            Experiment::DenisovBridge => "regular conditional distribution of the bridge split at its minimum",
            Experiment::DimLimit => "weak convergence of bridges started at eps, as eps -> 0",
            Experiment::UniformRho => "the argmin of the bridge has a uniform law",
            Experiment::Duality => "duality formula for the killed semigroups",
            Experiment::Renewal => "renewal function of the downward ladder height process",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, LabError> {
        CATALOG
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| LabError::Usage(format!("unknown experiment `{s}`")))
    }
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

/// Everything a run depends on. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub experiment: Experiment,
    pub seed: u64,
    pub kind: String,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub drift: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_skew: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_sd: Option<f64>,
    #[serde(default = "one")]
    pub t: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    /// Multiplies the renewal functions `h` and `ĥ`; no report may depend on it.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub h_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Density grid; the automatic range is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    /// Start and end points of killed-density cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    /// Walk step of the renewal estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walk_step: Option<f64>,
    /// Bootstrap resamples, permutations and similar secondary budgets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resamples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_width: Option<f64>,
    /// Longest ladder epoch simulated step by step in the renewal estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_cap: Option<u64>,
}

impl ExperimentManifest {
    /// A manifest with the given model and budgets and every optional key unset.
    pub fn new(experiment: Experiment, model: &LevyModel, t: f64, n_steps: usize, n_paths: usize, seed: u64) -> Self {
        let d = model.descriptor();
        Self {
            experiment,
            seed,
            kind: d.kind,
            sigma: d.sigma,
            drift: d.drift,
            alpha: d.alpha,
            beta_skew: d.beta_skew,
            jump_rate: d.jump_rate,
            jump_mean: d.jump_mean,
            jump_sd: d.jump_sd,
            t,
            n_steps,
            n_paths,
            h_scale: 1.0,
            out_dir: None,
            x_min: None,
            x_max: None,
            spacing: None,
            points: None,
            eps: None,
            walk_step: None,
            resamples: None,
            bin_width: None,
            segment_cap: None,
        }
    }

    pub fn descriptor(&self) -> ModelDescriptor {
        ModelDescriptor {
            kind: self.kind.clone(),
            sigma: self.sigma,
            drift: self.drift,
            alpha: self.alpha,
            beta_skew: self.beta_skew,
            jump_rate: self.jump_rate,
            jump_mean: self.jump_mean,
            jump_sd: self.jump_sd,
        }
    }

    pub fn model(&self) -> Result<LevyModel, LabError> {
        LevyModel::try_from(self.descriptor()).map_err(|e| LabError::Usage(format!("model: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        let m: Self = toml::from_str(text).map_err(|e| LabError::Usage(format!("manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest fields are TOML-representable")
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |msg: String| Err(LabError::Usage(msg));
        self.model()?;
        if !(self.t > 0.0 && self.t.is_finite()) {
            return bad(format!("t must be positive, got {}", self.t));
        }
        if self.n_steps == 0 || self.n_paths == 0 {
            return bad("n_steps and n_paths must be positive".into());
        }
        if !(self.h_scale > 0.0 && self.h_scale.is_finite()) {
            return bad(format!("h_scale must be positive, got {}", self.h_scale));
        }
        if let (Some(lo), Some(hi)) = (self.x_min, self.x_max) {
            if lo >= hi {
                return bad(format!("x_min {lo} must be below x_max {hi}"));
            }
        }
        if self.x_min.is_some() != self.x_max.is_some() {
            return bad("x_min and x_max go together".into());
        }
        if self.spacing.is_some_and(|s| !(s > 0.0)) {
            return bad("spacing must be positive".into());
        }
        if let Some(e) = &self.eps {
            if e.is_empty() || e.iter().any(|v| !(*v > 0.0)) || e.windows(2).any(|w| w[1] >= w[0]) {
                return bad("eps must be positive and strictly decreasing".into());
            }
        }
        if let Some(p) = &self.points {
            if p.is_empty() || p.iter().any(|v| !(*v > 0.0)) {
                return bad("points must be positive".into());
            }
        }
        Ok(())
    }
}
