//! Stationary random-field generators with analytically known moments.
//!
//! Three families:
//!
//! * [`ShotNoise`]: `X(t) = sum_i phi(t - x_i)` over a homogeneous Poisson
//!   process, with a separable compactly supported kernel. Window integrals
//!   are evaluated exactly from the point pattern.
//! * [`LatticeMa`]: a moving average of iid centered Gaussian innovations on
//!   `Z^d`. Realizations are stored as unit cells `[j, j+1)` carrying `X(j)`.
//! * [`GaussianGrid`]: a centered stationary Gaussian field sampled at the
//!   cell centers of a grid of spacing `h` by circulant embedding.

mod circulant;
mod kernel;

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

pub use circulant::{CirculantEmbedding, NEGATIVE_EIGENVALUE_TOLERANCE};
pub use kernel::Kernel;

use crate::error::{Error, Result};
use crate::rng::replication_rng;
use crate::windows::Window;

/// Default cap on the number of cells a single grid realization may allocate.
pub const DEFAULT_MAX_CELLS: usize = 1 << 24;

pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotNoise {
    pub dim: usize,
    pub intensity: f64,
    pub kernel: Kernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeMa {
    pub dim: usize,
    /// Weights live on `{0..=range}^d`.
    pub range: usize,
    /// Row-major weights, `(range + 1)^d` entries.
    pub weights: Vec<f64>,
    pub innovation_variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceSpec {
    /// `variance * exp(-|t|^2 / length^2)`.
    Gaussian { variance: f64, length: f64 },
    /// `variance * exp(-|t| / length)`.
    Exponential { variance: f64, length: f64 },
}

impl CovarianceSpec {
    pub fn eval(&self, t: &[f64]) -> f64 {
        let r2: f64 = t.iter().map(|x| x * x).sum();
        match *self {
            CovarianceSpec::Gaussian { variance, length } => variance * (-r2 / (length * length)).exp(),
            CovarianceSpec::Exponential { variance, length } => variance * (-r2.sqrt() / length).exp(),
        }
    }

    fn params(&self) -> (f64, f64) {
        match *self {
            CovarianceSpec::Gaussian { variance, length } | CovarianceSpec::Exponential { variance, length } => {
                (variance, length)
            }
        }
    }
}

fn default_max_cells() -> usize {
    DEFAULT_MAX_CELLS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianGrid {
    pub dim: usize,
    pub covariance: CovarianceSpec,
    /// Grid spacing `1/n`.
    pub spacing: f64,
    #[serde(default = "default_max_cells")]
    pub max_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", try_from = "RawFieldModel")]
pub enum FieldModel {
    ShotNoise(ShotNoise),
    LatticeMA(LatticeMa),
    GaussianGrid(GaussianGrid),
}

#[derive(Deserialize)]
#[serde(tag = "family")]
enum RawFieldModel {
    ShotNoise(ShotNoise),
    LatticeMA(LatticeMa),
    GaussianGrid(GaussianGrid),
}

impl TryFrom<RawFieldModel> for FieldModel {
    type Error = Error;

    fn try_from(raw: RawFieldModel) -> Result<Self> {
        let model = match raw {
            RawFieldModel::ShotNoise(m) => FieldModel::ShotNoise(m),
            RawFieldModel::LatticeMA(m) => FieldModel::LatticeMA(m),
            RawFieldModel::GaussianGrid(m) => FieldModel::GaussianGrid(m),
        };
        model.validate()?;
        Ok(model)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::InvalidModel(format!(
            "dimension must be in 1..={MAX_DIM}, got {dim}"
        )));
    }
    Ok(())
}

impl FieldModel {
    pub fn shot_noise(dim: usize, intensity: f64, kernel: Kernel) -> Result<Self> {
        let m = FieldModel::ShotNoise(ShotNoise { dim, intensity, kernel });
        m.validate()?;
        Ok(m)
    }

    pub fn lattice_ma(dim: usize, range: usize, weights: Vec<f64>, innovation_variance: f64) -> Result<Self> {
        let m = FieldModel::LatticeMA(LatticeMa {
            dim,
            range,
            weights,
            innovation_variance,
        });
        m.validate()?;
        Ok(m)
    }

    pub fn gaussian_grid(dim: usize, covariance: CovarianceSpec, spacing: f64) -> Result<Self> {
        let m = FieldModel::GaussianGrid(GaussianGrid {
            dim,
            covariance,
            spacing,
            max_cells: DEFAULT_MAX_CELLS,
        });
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim())?;
        match self {
            FieldModel::ShotNoise(m) => {
                if !(m.intensity.is_finite() && m.intensity > 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "intensity must be positive, got {}",
                        m.intensity
                    )));
                }
                m.kernel.validate()
            }
            FieldModel::LatticeMA(m) => {
                let expected = (m.range + 1).pow(m.dim as u32);
                if m.weights.len() != expected {
                    return Err(Error::InvalidModel(format!(
                        "expected {expected} weights for range {} in dimension {}, got {}",
                        m.range,
                        m.dim,
                        m.weights.len()
                    )));
                }
                if m.weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::InvalidModel("non-finite weight".into()));
                }
                if !(m.innovation_variance.is_finite() && m.innovation_variance >= 0.0) {
                    return Err(Error::InvalidModel("innovation variance must be nonnegative".into()));
                }
                Ok(())
            }
            FieldModel::GaussianGrid(m) => {
                let (variance, length) = m.covariance.params();
                if !(variance.is_finite() && variance >= 0.0 && length.is_finite() && length > 0.0) {
                    return Err(Error::InvalidModel(
                        "covariance needs variance >= 0 and length > 0".into(),
                    ));
                }
                if !(m.spacing.is_finite() && m.spacing > 0.0) {
                    return Err(Error::InvalidModel("grid spacing must be positive".into()));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FieldModel::ShotNoise(m) => m.dim,
            FieldModel::LatticeMA(m) => m.dim,
            FieldModel::GaussianGrid(m) => m.dim,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            FieldModel::ShotNoise(_) => "ShotNoise",
            FieldModel::LatticeMA(_) => "LatticeMA",
            FieldModel::GaussianGrid(_) => "GaussianGrid",
        }
    }

    /// Stationary mean `E X(0)`.
    pub fn mean(&self) -> f64 {
        match self {
            // Campbell: lambda * int phi
            FieldModel::ShotNoise(m) => m.intensity * m.kernel.integral(m.dim),
            FieldModel::LatticeMA(_) | FieldModel::GaussianGrid(_) => 0.0,
        }
    }

    /// `Cov(X(0), X(t))`.
    ///
    /// The lattice family is a `Z^d` field: its covariance is only defined at
    /// integer lags and is reported as 0 anywhere else.
    pub fn covariance(&self, t: &[f64]) -> f64 {
        debug_assert_eq!(t.len(), self.dim());
        match self {
            FieldModel::ShotNoise(m) => m.intensity * m.kernel.autocorrelation(t),
            FieldModel::LatticeMA(m) => {
                if t.iter().any(|x| x.fract() != 0.0) {
                    return 0.0;
                }
                let lag: Vec<i64> = t.iter().map(|&x| x as i64).collect();
                m.autocovariance(&lag)
            }
            FieldModel::GaussianGrid(m) => m.covariance.eval(t),
        }
    }

    pub fn variance(&self) -> f64 {
        self.covariance(&vec![0.0; self.dim()])
    }

    /// Per-axis lags where the covariance is not smooth.
    pub fn covariance_kinks(&self) -> Vec<Vec<f64>> {
        let per_axis = match self {
            FieldModel::ShotNoise(m) => m.kernel.autocorrelation_kinks(),
            FieldModel::GaussianGrid(m) => match m.covariance {
                CovarianceSpec::Gaussian { .. } => vec![],
                CovarianceSpec::Exponential { .. } => vec![0.0],
            },
            FieldModel::LatticeMA(m) => (-(m.range as i64)..=m.range as i64).map(|k| k as f64).collect(),
        };
        vec![per_axis; self.dim()]
    }

    /// A radius beyond which the covariance is zero or negligible.
    pub fn suggested_truncation_radius(&self) -> f64 {
        match self {
            FieldModel::ShotNoise(m) => {
                let (lo, hi) = m.kernel.support();
                hi - lo
            }
            FieldModel::LatticeMA(m) => m.range as f64 + 1.0,
            FieldModel::GaussianGrid(m) => match m.covariance {
                // exp(-42) ~ 6e-19
                CovarianceSpec::Gaussian { length, .. } => 6.5 * length,
                CovarianceSpec::Exponential { length, .. } => 30.0 * length,
            },
        }
    }

    /// True for models whose sample paths are constant (zero variance).
    pub fn is_degenerate(&self) -> bool {
        self.variance() == 0.0
    }
}

impl LatticeMa {
    fn weight(&self, idx: &[i64]) -> f64 {
        let side = self.range as i64 + 1;
        if idx.iter().any(|&k| k < 0 || k >= side) {
            return 0.0;
        }
        let flat = idx.iter().fold(0i64, |acc, &k| acc * side + k);
        self.weights[flat as usize]
    }

    /// `sigma_eps^2 * sum_a w_a w_{a + lag}`.
    pub fn autocovariance(&self, lag: &[i64]) -> f64 {
        let side = self.range + 1;
        let mut acc = 0.0;
        for flat in 0..self.weights.len() {
            let mut rem = flat;
            let mut shifted = vec![0i64; self.dim];
            for axis in (0..self.dim).rev() {
                let a = (rem % side) as i64;
                rem /= side;
                shifted[axis] = a + lag[axis];
            }
            acc += self.weights[flat] * self.weight(&shifted);
        }
        self.innovation_variance * acc
    }
}

/// Values on a regular grid of cells `origin + h * (k + [0,1)^d)`, row-major
/// with the last axis fastest. Each value is attached to its cell (and, for
/// sampled fields, equals the field at the cell center).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    /// Box spanned by all cells.
    pub fn extent(&self) -> Window {
        Window::new(
            self.origin.clone(),
            self.origin
                .iter()
                .zip(&self.shape)
                .map(|(o, &n)| o + n as f64 * self.spacing)
                .collect(),
        )
        .expect("grid has positive extent")
    }

    pub fn covers(&self, w: &Window) -> bool {
        let tol = 1e-9 * self.spacing;
        let ext = self.extent();
        w.dim() == self.dim()
            && (0..self.dim()).all(|i| ext.lower()[i] <= w.lower()[i] + tol && w.upper()[i] <= ext.upper()[i] + tol)
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            idx[axis] = flat % self.shape[axis];
            flat /= self.shape[axis];
        }
        idx
    }

    pub fn cell_center(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .zip(&self.origin)
            .map(|(&k, o)| o + (k as f64 + 0.5) * self.spacing)
            .collect()
    }

    /// Pointwise transform of every value.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> GridField {
        GridField {
            origin: self.origin.clone(),
            spacing: self.spacing,
            shape: self.shape.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `x1,...,xd,value` rows at the cell centers.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.dim()).map(|i| format!("x{i}")).collect();
        let _ = writeln!(out, "{},value", header.join(","));
        for (flat, v) in self.values.iter().enumerate() {
            let c = self.cell_center(&self.unravel(flat));
            for x in c {
                let _ = write!(out, "{x:?},");
            }
            let _ = writeln!(out, "{v:?}");
        }
        out
    }
}

/// Poisson points for a shot-noise realization. Points fill
/// `window ⊕ (-support)`, so every kernel translate meeting `window` is present.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    pub kernel: Kernel,
    pub window: Window,
    pub sample_window: Window,
    /// Flattened coordinates, `dim` per point.
    pub coords: Vec<f64>,
}

impl PointPattern {
    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim())
    }

    /// `X(t) = sum_i phi(t - x_i)` for `t` in the target window.
    pub fn value_at(&self, t: &[f64]) -> f64 {
        let mut diff = vec![0.0; t.len()];
        self.points()
            .map(|x| {
                for i in 0..t.len() {
                    diff[i] = t[i] - x[i];
                }
                self.kernel.value(&diff)
            })
            .sum()
    }

    /// `sum_i int_w phi(t - x_i) dt`.
    pub fn window_integral(&self, w: &Window) -> f64 {
        self.points()
            .map(|x| self.kernel.box_integral(x, w.lower(), w.upper()))
            .sum()
    }

    /// Field values at the cell centers of a grid of `spacing` covering `w`
    /// (cells anchored at `w.lower()`).
    pub fn rasterize(&self, w: &Window, spacing: f64) -> Result<GridField> {
        if !self.window.contains_window(w) {
            return Err(Error::Coverage("raster window outside the sampled window".into()));
        }
        let dim = self.dim();
        let shape: Vec<usize> = w.sides().iter().map(|&s| cells_needed(s, spacing)).collect();
        let total: usize = shape.iter().product();
        let mut values = vec![0.0; total];
        let (s_lo, s_hi) = self.kernel.support();
        let mut lo_idx = vec![0usize; dim];
        let mut hi_idx = vec![0usize; dim];
        let mut diff = vec![0.0; dim];
        'points: for x in self.points() {
            // cells whose center c satisfies x + s_lo <= c < x + s_hi
            for i in 0..dim {
                let o = w.lower()[i];
                let first = ((x[i] + s_lo - o) / spacing - 0.5).ceil().max(0.0);
                let last = ((x[i] + s_hi - o) / spacing - 0.5).floor().min(shape[i] as f64 - 1.0);
                if last < first {
                    continue 'points;
                }
                lo_idx[i] = first as usize;
                hi_idx[i] = last as usize;
            }
            let mut idx = lo_idx.clone();
            loop {
                let mut flat = 0;
                for i in 0..dim {
                    diff[i] = w.lower()[i] + (idx[i] as f64 + 0.5) * spacing - x[i];
                    flat = flat * shape[i] + idx[i];
                }
                values[flat] += self.kernel.value(&diff);
                let mut axis = dim;
                loop {
                    if axis == 0 {
                        continue 'points;
                    }
                    axis -= 1;
                    if idx[axis] < hi_idx[axis] {
                        idx[axis] += 1;
                        break;
                    }
                    idx[axis] = lo_idx[axis];
                }
            }
        }
        Ok(GridField {
            origin: w.lower().to_vec(),
            spacing,
            shape,
            values,
        })
    }
}

fn cells_needed(side: f64, spacing: f64) -> usize {
    ((side / spacing) - 1e-9).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub enum RealizationData {
    Points(PointPattern),
    Grid(GridField),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub family: &'static str,
    pub seed: u64,
    pub rep: u64,
    pub data: RealizationData,
}

impl Realization {
    pub fn points(&self) -> Option<&PointPattern> {
        match &self.data {
            RealizationData::Points(p) => Some(p),
            RealizationData::Grid(_) => None,
        }
    }

    pub fn grid(&self) -> Option<&GridField> {
        match &self.data {
            RealizationData::Grid(g) => Some(g),
            RealizationData::Points(_) => None,
        }
    }
}

/// Draws replication `rep` of `model` over `w`. Deterministic in `(seed, rep)`.
pub fn sample(model: &FieldModel, w: &Window, seed: u64, rep: u64) -> Result<Realization> {
    let mut rng = replication_rng(seed, rep);
    sample_with(model, w, &mut rng).map(|data| Realization {
        family: model.family_name(),
        seed,
        rep,
        data,
    })
}

/// Same as [`sample`] but drawing from a caller-supplied generator.
pub fn sample_with<R: Rng + ?Sized>(model: &FieldModel, w: &Window, rng: &mut R) -> Result<RealizationData> {
    if w.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: w.dim(),
        });
    }
    match model {
        FieldModel::ShotNoise(m) => sample_shot_noise(m, w, rng).map(RealizationData::Points),
        FieldModel::LatticeMA(m) => sample_lattice_ma(m, w, rng).map(RealizationData::Grid),
        FieldModel::GaussianGrid(m) => sample_gaussian_grid(m, w, rng).map(RealizationData::Grid),
    }
}

/// `int_w X(t) dt` for a shot-noise realization, from the closed-form
/// kernel-box overlaps. No discretization error.
pub fn exact_window_integral(r: &Realization, w: &Window) -> Result<f64> {
    let pattern = r.points().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "exact window integrals need a shot-noise realization, got {}",
            r.family
        ))
    })?;
    if w.dim() != pattern.dim() {
        return Err(Error::DimensionMismatch {
            expected: pattern.dim(),
            got: w.dim(),
        });
    }
    if !pattern.window.contains_window(w) {
        return Err(Error::Coverage(format!(
            "window {w:?} is not inside the sampled window"
        )));
    }
    Ok(pattern.window_integral(w))
}

fn sample_shot_noise<R: Rng + ?Sized>(m: &ShotNoise, w: &Window, rng: &mut R) -> Result<PointPattern> {
    let (s_lo, s_hi) = m.kernel.support();
    let d = m.dim;
    let sample_window = w.dilate(&vec![-s_hi; d], &vec![-s_lo; d])?;
    let expected = m.intensity * sample_window.volume();
    let count = Poisson::new(expected)
        .map_err(|e| Error::InvalidModel(format!("Poisson mean {expected}: {e}")))?
        .sample(rng) as usize;
    let mut coords = Vec::with_capacity(count * d);
    for _ in 0..count {
        for i in 0..d {
            let lo = sample_window.lower()[i];
            let hi = sample_window.upper()[i];
            coords.push(lo + (hi - lo) * rng.random::<f64>());
        }
    }
    Ok(PointPattern {
        kernel: m.kernel,
        window: w.clone(),
        sample_window,
        coords,
    })
}

fn sample_lattice_ma<R: Rng + ?Sized>(m: &LatticeMa, w: &Window, rng: &mut R) -> Result<GridField> {
    let d = m.dim;
    let first: Vec<i64> = w.lower().iter().map(|x| x.floor() as i64).collect();
    let shape: Vec<usize> = (0..d)
        .map(|i| (w.upper()[i].ceil() as i64 - first[i]).max(1) as usize)
        .collect();
    let margin = m.range;
    let innov_shape: Vec<usize> = shape.iter().map(|n| n + margin).collect();
    let cells = innov_shape.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
    match cells {
        Some(c) if c <= DEFAULT_MAX_CELLS => {}
        other => {
            return Err(Error::GridTooLarge {
                requested: other.unwrap_or(usize::MAX),
                cap: DEFAULT_MAX_CELLS,
            })
        }
    }
    let normal = Normal::new(0.0, m.innovation_variance.sqrt())
        .map_err(|e| Error::InvalidModel(format!("innovation distribution: {e}")))?;
    // innovation index p corresponds to lattice site first + p - margin
    let innovations: Vec<f64> = (0..innov_shape.iter().product::<usize>())
        .map(|_| normal.sample(rng))
        .collect();

    let total: usize = shape.iter().product();
    let side = m.range + 1;
    let mut values = vec![0.0; total];
    let mut idx = vec![0usize; d];
    let mut k = vec![0usize; d];
    for (flat, value) in values.iter_mut().enumerate() {
        let mut rem = flat;
        for axis in (0..d).rev() {
            idx[axis] = rem % shape[axis];
            rem /= shape[axis];
        }
        // X(j) = sum_k w_k eps(j - k)
        let mut acc = 0.0;
        for (wflat, &weight) in m.weights.iter().enumerate() {
            let mut r = wflat;
            for axis in (0..d).rev() {
                k[axis] = r % side;
                r /= side;
            }
            let mut pos = 0;
            for axis in 0..d {
                pos = pos * innov_shape[axis] + (idx[axis] + margin - k[axis]);
            }
            acc += weight * innovations[pos];
        }
        *value = acc;
    }
    Ok(GridField {
        origin: first.iter().map(|&j| j as f64).collect(),
        spacing: 1.0,
        shape,
        values,
    })
}

fn sample_gaussian_grid<R: Rng + ?Sized>(m: &GaussianGrid, w: &Window, rng: &mut R) -> Result<GridField> {
    let shape: Vec<usize> = w.sides().iter().map(|&s| cells_needed(s, m.spacing)).collect();
    let cov = m.covariance;
    let embedding = CirculantEmbedding::new(|t: &[f64]| cov.eval(t), &shape, m.spacing, m.max_cells)?;
    Ok(GridField {
        origin: w.lower().to_vec(),
        spacing: m.spacing,
        values: embedding.sample(&shape, rng),
        shape,
    })
}
