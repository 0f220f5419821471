use serde::{Deserialize, Serialize};

use crate::bvdecomp::PiecewiseMonotoneFn;
use crate::error::{Error, Result};
use crate::fields::FieldModel;
use crate::windows::Window;

pub const MIN_REPLICATIONS: usize = 100;

/// Pointwise map applied to the field before integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Scale { factor: f64 },
    MinCap { cap: f64 },
    Piecewise { function: PiecewiseMonotoneFn },
}

impl Transform {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Scale { factor } => factor * x,
            Transform::MinCap { cap } => x.min(*cap),
            Transform::Piecewise { function } => function.eval(x),
        }
    }

    /// `Some(a)` when the transform is `x -> a x`.
    pub fn linear_factor(&self) -> Option<f64> {
        match self {
            Transform::Identity => Some(1.0),
            Transform::Scale { factor } => Some(*factor),
            _ => None,
        }
    }

    /// Lipschitz constant, `None` for general piecewise monotone maps.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            Transform::Identity | Transform::MinCap { .. } => Some(1.0),
            Transform::Scale { factor } => Some(factor.abs()),
            Transform::Piecewise { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Transform::Scale { factor } if !factor.is_finite() => {
                Err(Error::Config(format!("scale factor must be finite, got {factor}")))
            }
            Transform::MinCap { cap } if !cap.is_finite() => {
                Err(Error::Config(format!("cap must be finite, got {cap}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// every transform is `x -> a x`; null moments are analytic
    Linear,
    /// Lipschitz transforms; null moments are tabulated
    Lipschitz,
    /// at least one piecewise monotone transform
    BoundedVariation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default = "default_ks_alpha")]
    pub ks_alpha: f64,
    #[serde(default = "default_variance_tol")]
    pub variance_tol: f64,
    #[serde(default = "default_mean_se")]
    pub mean_se: f64,
}

fn default_ks_alpha() -> f64 {
    0.01
}

fn default_variance_tol() -> f64 {
    0.10
}

fn default_mean_se() -> f64 {
    3.0
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            ks_alpha: default_ks_alpha(),
            variance_tol: default_variance_tol(),
            mean_se: default_mean_se(),
        }
    }
}

/// Settings for the null moments of nonlinear transforms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullSettings {
    #[serde(default = "default_tab_replications")]
    pub replications: usize,
    #[serde(default = "default_lag_spacing")]
    pub lag_spacing: f64,
    /// Defaults to the model's own truncation radius.
    #[serde(default)]
    pub trunc_radius: Option<f64>,
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
}

fn default_tab_replications() -> usize {
    100_000
}

fn default_lag_spacing() -> f64 {
    0.25
}

fn default_quad_tol() -> f64 {
    crate::estimation::DEFAULT_QUAD_TOL
}

impl Default for NullSettings {
    fn default() -> Self {
        Self {
            replications: default_tab_replications(),
            lag_spacing: default_lag_spacing(),
            trunc_radius: None,
            quad_tol: default_quad_tol(),
        }
    }
}

fn default_grid_spacing() -> f64 {
    1.0 / 16.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: FieldModel,
    pub window: Window,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub transforms: Vec<Transform>,
    /// Cramer-Wold directions; defaults to the canonical basis plus pairwise sums.
    #[serde(default)]
    pub directions: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Raster spacing for nonlinear transforms of shot-noise fields.
    #[serde(default = "default_grid_spacing")]
    pub grid_spacing: f64,
    #[serde(default)]
    pub null: NullSettings,
}

impl ExperimentConfig {
    pub fn new(model: FieldModel, window: Window, replications: usize, seed: u64) -> Self {
        Self {
            model,
            window,
            replications,
            seed,
            transforms: Vec::new(),
            directions: None,
            thresholds: Thresholds::default(),
            grid_spacing: default_grid_spacing(),
            null: NullSettings::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Transforms in effect: an empty list means the identity.
    pub fn effective_transforms(&self) -> Vec<Transform> {
        if self.transforms.is_empty() {
            vec![Transform::Identity]
        } else {
            self.transforms.clone()
        }
    }

    pub fn components(&self) -> usize {
        self.transforms.len().max(1)
    }

    pub fn branch(&self) -> Branch {
        let t = self.effective_transforms();
        if t.iter().all(|f| f.linear_factor().is_some()) {
            Branch::Linear
        } else if t.iter().all(|f| f.lipschitz().is_some()) {
            Branch::Lipschitz
        } else {
            Branch::BoundedVariation
        }
    }

    /// Configured directions, or `e_i` followed by `e_i + e_j` for `i < j`.
    pub fn effective_directions(&self) -> Vec<Vec<f64>> {
        if let Some(d) = &self.directions {
            return d.clone();
        }
        let s = self.components();
        let mut out: Vec<Vec<f64>> = (0..s)
            .map(|i| (0..s).map(|k| if k == i { 1.0 } else { 0.0 }).collect())
            .collect();
        for i in 0..s {
            for j in i + 1..s {
                out.push((0..s).map(|k| if k == i || k == j { 1.0 } else { 0.0 }).collect());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.window.dim() != self.model.dim() {
            return Err(Error::Config(format!(
                "window has dimension {} but the model has dimension {}",
                self.window.dim(),
                self.model.dim()
            )));
        }
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::Config(format!(
                "at least {MIN_REPLICATIONS} replications are required, got {}",
                self.replications
            )));
        }
        for t in &self.transforms {
            t.validate()?;
        }
        let s = self.components();
        if let Some(dirs) = &self.directions {
            if dirs.is_empty() {
                return Err(Error::Config("direction list is empty".into()));
            }
            for u in dirs {
                if u.len() != s {
                    return Err(Error::Config(format!("direction {u:?} needs {s} entries")));
                }
                if u.iter().any(|x| !x.is_finite()) || u.iter().all(|&x| x == 0.0) {
                    return Err(Error::Config(format!("direction {u:?} must be finite and nonzero")));
                }
            }
        }
        let th = &self.thresholds;
        if !(th.ks_alpha > 0.0 && th.ks_alpha < 1.0) {
            return Err(Error::Config("ks_alpha must lie in (0, 1)".into()));
        }
        if !(th.variance_tol > 0.0 && th.mean_se > 0.0) {
            return Err(Error::Config("variance_tol and mean_se must be positive".into()));
        }
        if !(self.grid_spacing > 0.0 && self.grid_spacing.is_finite()) {
            return Err(Error::Config("grid_spacing must be positive".into()));
        }
        let null = &self.null;
        if null.replications < MIN_REPLICATIONS {
            return Err(Error::Config(format!(
                "null tabulation needs at least {MIN_REPLICATIONS} replications"
            )));
        }
        if !(null.lag_spacing > 0.0 && null.lag_spacing.is_finite()) {
            return Err(Error::Config("lag_spacing must be positive".into()));
        }
        if let Some(r) = null.trunc_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config("trunc_radius must be positive".into()));
            }
        }
        if !(null.quad_tol > 0.0) {
            return Err(Error::Config("quad_tol must be positive".into()));
        }
        Ok(())
    }
}
