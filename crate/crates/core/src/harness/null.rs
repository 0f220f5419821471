//! Null moments of the statistic vector: means `E f_i(X(0))` and the
//! asymptotic covariance matrix, analytic for linear transforms and
//! tabulated by Monte Carlo otherwise.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{Branch, ExperimentConfig, Transform};
use crate::bvdecomp::{jordan_decompose, Decomposition};
use crate::error::{Error, Result};
use crate::estimation::{sigma_matrix, CovarianceTable, ScaledComponents};
use crate::fields::{sample, FieldModel};
use crate::rng::auxiliary_seed;
use crate::windows::Window;

const TABULATION_PURPOSE: u64 = 0x6e75_6c6c; // "null"
const CHUNK: usize = 1000;

/// Share of the largest single term in the `E h_f(X(0))^2` estimate above
/// which the second moment is treated as infinite.
pub const HEAVY_TAIL_SHARE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullSource {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullMoments {
    pub source: NullSource,
    pub means: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub trunc_radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tabulation_replications: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lag_spacing: Option<f64>,
    /// Estimated `E h_{f_i}(X(0))^2` for piecewise transforms.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h_second_moments: Vec<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_key: Option<String>,
}

impl NullMoments {
    /// `u' Sigma u`.
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, ui) in u.iter().enumerate() {
            for (j, uj) in u.iter().enumerate() {
                acc += ui * self.sigma[i][j] * uj;
            }
        }
        acc
    }
}

/// In-memory store of tabulated null moments keyed by a config hash, with an
/// optional directory of JSON files that persists across runs.
#[derive(Debug, Default)]
pub struct NullCache {
    memory: Mutex<HashMap<String, NullMoments>>,
    dir: Option<PathBuf>,
}

impl NullCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            memory: Mutex::default(),
            dir: Some(dir.into()),
        }
    }

    pub fn len(&self) -> usize {
        self.memory.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, key: &str) -> Option<NullMoments> {
        if let Some(hit) = self.memory.lock().expect("cache lock").get(key) {
            return Some(hit.clone());
        }
        let path = self.dir.as_ref()?.join(format!("{key}.json"));
        let text = std::fs::read_to_string(path).ok()?;
        let moments: NullMoments = serde_json::from_str(&text).ok()?;
        self.memory
            .lock()
            .expect("cache lock")
            .insert(key.to_string(), moments.clone());
        Some(moments)
    }

    fn put(&self, key: &str, moments: &NullMoments) -> Result<()> {
        self.memory
            .lock()
            .expect("cache lock")
            .insert(key.to_string(), moments.clone());
        if let Some(dir) = &self.dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cache directory {dir:?}: {e}")))?;
            let json = serde_json::to_string(moments).expect("serializable");
            std::fs::write(dir.join(format!("{key}.json")), json)
                .map_err(|e| Error::Config(format!("writing cache entry: {e}")))?;
        }
        Ok(())
    }
}

/// Hash of everything the tabulated moments depend on.
pub fn cache_key(cfg: &ExperimentConfig) -> String {
    #[derive(Serialize)]
    struct Keyed<'a> {
        version: &'a str,
        model: &'a FieldModel,
        transforms: &'a [Transform],
        seed: u64,
        null: &'a super::config::NullSettings,
    }
    let json = serde_json::to_string(&Keyed {
        version: env!("CARGO_PKG_VERSION"),
        model: &cfg.model,
        transforms: &cfg.effective_transforms(),
        seed: cfg.seed,
        null: &cfg.null,
    })
    .expect("serializable");
    Sha256::digest(json.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn trunc_radius(cfg: &ExperimentConfig) -> f64 {
    cfg.null
        .trunc_radius
        .unwrap_or_else(|| cfg.model.suggested_truncation_radius())
}

pub fn null_moments(cfg: &ExperimentConfig, cache: &NullCache) -> Result<NullMoments> {
    let transforms = cfg.effective_transforms();
    let radius = trunc_radius(cfg);
    if cfg.branch() == Branch::Linear {
        let scales: Vec<f64> = transforms.iter().map(|t| t.linear_factor().expect("linear")).collect();
        let mean = cfg.model.mean();
        let cross = ScaledComponents {
            model: cfg.model.clone(),
            scales: scales.clone(),
        };
        let sigma = sigma_matrix(&cross, radius, cfg.null.quad_tol)?;
        let s = scales.len();
        let base = sigma[(0, 0)] / (scales[0] * scales[0]);
        if scales.iter().all(|&a| a != 0.0) && !(base > 0.0) && !cfg.model.is_degenerate() {
            return Err(Error::Config(format!(
                "asymptotic variance {base} is not positive for a nondegenerate model"
            )));
        }
        return Ok(NullMoments {
            source: NullSource::Analytic,
            means: scales.iter().map(|a| a * mean).collect(),
            sigma: (0..s).map(|i| (0..s).map(|j| sigma[(i, j)]).collect()).collect(),
            trunc_radius: radius,
            tabulation_replications: None,
            lag_spacing: None,
            h_second_moments: Vec::new(),
            cache_key: None,
        });
    }

    if !matches!(cfg.model, FieldModel::ShotNoise(_)) {
        return Err(Error::Config(format!(
            "nonlinear transforms are supported for shot-noise models only, got {}",
            cfg.model.family_name()
        )));
    }
    let key = cache_key(cfg);
    if let Some(hit) = cache.get(&key) {
        return Ok(hit);
    }
    let moments = tabulate(cfg, &transforms, radius, &key)?;
    cache.put(&key, &moments)?;
    Ok(moments)
}

#[derive(Clone)]
struct Sums {
    /// `sum f_i(X(t_l))`, `[i][l]`
    at_lag: Vec<Vec<f64>>,
    /// `sum f_i(X(0)) f_j(X(t_l))`, `[i][j][l]`
    cross: Vec<Vec<Vec<f64>>>,
    origin: Vec<f64>,
    h_sq: Vec<f64>,
    h_sq_max: Vec<f64>,
}

impl Sums {
    fn zero(s: usize, lags: usize) -> Self {
        Self {
            at_lag: vec![vec![0.0; lags]; s],
            cross: vec![vec![vec![0.0; lags]; s]; s],
            origin: vec![0.0; s],
            h_sq: vec![0.0; s],
            h_sq_max: vec![0.0; s],
        }
    }

    fn add(mut self, other: &Sums) -> Self {
        let s = self.origin.len();
        for i in 0..s {
            self.origin[i] += other.origin[i];
            self.h_sq[i] += other.h_sq[i];
            self.h_sq_max[i] = self.h_sq_max[i].max(other.h_sq_max[i]);
            for (a, b) in self.at_lag[i].iter_mut().zip(&other.at_lag[i]) {
                *a += b;
            }
            for j in 0..s {
                for (a, b) in self.cross[i][j].iter_mut().zip(&other.cross[i][j]) {
                    *a += b;
                }
            }
        }
        self
    }
}

fn tabulate(cfg: &ExperimentConfig, transforms: &[Transform], radius: f64, key: &str) -> Result<NullMoments> {
    let d = cfg.model.dim();
    let s = transforms.len();
    let delta = cfg.null.lag_spacing;
    let half = (radius / delta - 1e-9).ceil().max(1.0) as usize;
    let reach = half as f64 * delta;
    let n_axis = 2 * half + 1;
    let table_shape = CovarianceTable {
        dim: d,
        spacing: delta,
        radius: reach,
        values: Vec::new(),
    };
    let lags: Vec<Vec<f64>> = (0..n_axis.pow(d as u32)).map(|l| table_shape.lag(l)).collect();
    let window = Window::cube_between(d, -reach, reach)?;
    let decomps: Vec<Option<Decomposition>> = transforms
        .iter()
        .map(|t| match t {
            Transform::Piecewise { function } => {
                let (a, b) = (function.lower(), function.upper());
                jordan_decompose(function, (a, b)).map(Some).map_err(|e| {
                    Error::Config(format!(
                        "piecewise transform must have 0 inside its breakpoint range: {e}"
                    ))
                })
            }
            _ => Ok(None),
        })
        .collect::<Result<_>>()?;

    let seed = auxiliary_seed(cfg.seed, TABULATION_PURPOSE);
    let total = cfg.null.replications;
    let chunks = total.div_ceil(CHUNK);
    let partials: Vec<Sums> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<Sums> {
            let mut acc = Sums::zero(s, lags.len());
            let mut fx = vec![vec![0.0; lags.len()]; s];
            for rep in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let r = sample(&cfg.model, &window, seed, rep as u64)?;
                let p = r.points().expect("shot noise");
                let x0 = p.value_at(&vec![0.0; d]);
                for (l, t) in lags.iter().enumerate() {
                    let x = p.value_at(t);
                    for i in 0..s {
                        fx[i][l] = transforms[i].apply(x);
                    }
                }
                for i in 0..s {
                    let f0 = transforms[i].apply(x0);
                    acc.origin[i] += f0;
                    if let Some(dec) = &decomps[i] {
                        let h2 = dec.h(x0).powi(2);
                        acc.h_sq[i] += h2;
                        acc.h_sq_max[i] = acc.h_sq_max[i].max(h2);
                    }
                    for l in 0..lags.len() {
                        acc.at_lag[i][l] += fx[i][l];
                    }
                    for j in 0..s {
                        for l in 0..lags.len() {
                            acc.cross[i][j][l] += f0 * fx[j][l];
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let sums = partials
        .iter()
        .fold(Sums::zero(s, lags.len()), |acc, part| acc.add(part));

    let n = total as f64;
    let mut h_second_moments = Vec::with_capacity(s);
    for i in 0..s {
        if decomps[i].is_none() {
            h_second_moments.push(None);
            continue;
        }
        if sums.h_sq[i] > 0.0 && sums.h_sq_max[i] > HEAVY_TAIL_SHARE * sums.h_sq[i] {
            return Err(Error::Config(format!(
                "transform {i}: E[h_f(X(0))^2] does not appear finite (one draw carries {:.0}% of the estimate), \
                 so the bounded-variation CLT does not apply",
                100.0 * sums.h_sq_max[i] / sums.h_sq[i]
            )));
        }
        h_second_moments.push(Some(sums.h_sq[i] / n));
    }

    let values: Vec<Vec<Vec<f64>>> = (0..s)
        .map(|i| {
            (0..s)
                .map(|j| {
                    (0..lags.len())
                        .map(|l| sums.cross[i][j][l] / n - (sums.origin[i] / n) * (sums.at_lag[j][l] / n))
                        .collect()
                })
                .collect()
        })
        .collect();
    let table = CovarianceTable { values, ..table_shape };
    let sigma = sigma_matrix(&table, reach, cfg.null.quad_tol)?;

    let mean = cfg.model.mean();
    let means = transforms
        .iter()
        .enumerate()
        .map(|(i, t)| match t.linear_factor() {
            Some(a) => a * mean,
            // pooled over all lag nodes, by stationarity
            None => sums.at_lag[i].iter().sum::<f64>() / (n * lags.len() as f64),
        })
        .collect();

    Ok(NullMoments {
        source: NullSource::MonteCarlo,
        means,
        sigma: (0..s).map(|i| (0..s).map(|j| sigma[(i, j)]).collect()).collect(),
        trunc_radius: reach,
        tabulation_replications: Some(total),
        lag_spacing: Some(delta),
        h_second_moments,
        cache_key: Some(key.to_string()),
    })
}
