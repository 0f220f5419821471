//! Window integrals, unit-cube block statistics and asymptotic variances.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{exact_window_integral, FieldModel, GridField, Realization, RealizationData};
use crate::quadrature::{integrate_box, trapezoid};
use crate::windows::{LatticeCubeSet, Window};

/// Default absolute tolerance for covariance quadrature.
pub const DEFAULT_QUAD_TOL: f64 = 1e-8;

/// Covariance at the truncation boundary must be below this fraction of the variance.
pub const TRUNCATION_RATIO: f64 = 1e-3;

/// Grid points per face axis used to certify the truncation radius.
const FACE_PROBES: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatisticSample {
    pub volume: f64,
    pub integral: f64,
    pub normalized: f64,
}

impl StatisticSample {
    pub fn new(integral: f64, mean: f64, volume: f64) -> Result<Self> {
        Ok(Self {
            volume,
            integral,
            normalized: normalized_statistic(integral, mean, volume)?,
        })
    }
}

/// Centered block integrals `Z(j) = int_{j + [0,1)^d} X - E X(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockField {
    pub anchors: Vec<Vec<i64>>,
    pub values: Vec<f64>,
}

impl BlockField {
    pub fn get(&self, anchor: &[i64]) -> Option<f64> {
        self.anchors.iter().position(|a| a == anchor).map(|i| self.values[i])
    }
}

/// `(I - mean * V) / sqrt(V)`.
pub fn normalized_statistic(integral: f64, mean: f64, volume: f64) -> Result<f64> {
    if !(volume > 0.0 && volume.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "window volume must be positive, got {volume}"
        )));
    }
    Ok((integral - mean * volume) / volume.sqrt())
}

/// Cell-value sum over `w`, each cell weighted by its overlap volume with `w`.
pub fn riemann_integral(grid: &GridField, w: &Window) -> Result<f64> {
    if w.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: w.dim(),
        });
    }
    if !grid.covers(w) {
        return Err(Error::Coverage(format!("grid does not cover window {w:?}")));
    }
    let d = grid.dim();
    let h = grid.spacing;
    // per axis: first cell index and overlap lengths of consecutive cells
    let mut first = Vec::with_capacity(d);
    let mut lengths: Vec<Vec<f64>> = Vec::with_capacity(d);
    for i in 0..d {
        let o = grid.origin[i];
        let (lo, hi) = (w.lower()[i], w.upper()[i]);
        let a = (((lo - o) / h).floor().max(0.0) as usize).min(grid.shape[i] - 1);
        let b = ((((hi - o) / h).ceil().max(1.0)) as usize).min(grid.shape[i]);
        first.push(a);
        lengths.push(
            (a..b)
                .map(|k| {
                    let c0 = o + k as f64 * h;
                    ((c0 + h).min(hi) - c0.max(lo)).max(0.0)
                })
                .collect(),
        );
    }
    let mut strides = vec![1usize; d];
    for i in (0..d.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * grid.shape[i + 1];
    }
    Ok(accumulate(grid, &first, &lengths, &strides, 0, 0))
}

fn accumulate(
    grid: &GridField,
    first: &[usize],
    lengths: &[Vec<f64>],
    strides: &[usize],
    axis: usize,
    base: usize,
) -> f64 {
    lengths[axis]
        .iter()
        .enumerate()
        .map(|(k, &len)| {
            if len == 0.0 {
                return 0.0;
            }
            let offset = base + (first[axis] + k) * strides[axis];
            if axis + 1 == lengths.len() {
                len * grid.values[offset]
            } else {
                len * accumulate(grid, first, lengths, strides, axis + 1, offset)
            }
        })
        .sum()
}

/// Window integral of a realization: exact for shot noise, cell sums otherwise.
pub fn window_integral(r: &Realization, w: &Window) -> Result<f64> {
    match &r.data {
        RealizationData::Points(_) => exact_window_integral(r, w),
        RealizationData::Grid(g) => riemann_integral(g, w),
    }
}

pub fn block_statistics(model: &FieldModel, r: &Realization, anchors: &LatticeCubeSet) -> Result<BlockField> {
    if anchors.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: anchors.dim(),
        });
    }
    let mean = model.mean();
    let mut out = BlockField {
        anchors: Vec::with_capacity(anchors.len()),
        values: Vec::with_capacity(anchors.len()),
    };
    for a in anchors.iter() {
        let cube = LatticeCubeSet::cube(a);
        out.values.push(window_integral(r, &cube)? - mean);
        out.anchors.push(a.clone());
    }
    Ok(out)
}

/// Checks that `|C(t)| < TRUNCATION_RATIO * C(0)` on the faces of `[-R, R]^d`.
fn certify_truncation(model: &FieldModel, radius: f64) -> Result<()> {
    let d = model.dim();
    let origin = model.variance();
    let probes: Vec<f64> = (0..FACE_PROBES)
        .map(|k| -radius + 2.0 * radius * k as f64 / (FACE_PROBES - 1) as f64)
        .collect();
    let mut worst = 0.0f64;
    let mut t = vec![0.0; d];
    let total = FACE_PROBES.pow(d as u32 - 1);
    for face_axis in 0..d {
        for side in [-radius, radius] {
            for flat in 0..total {
                let mut rem = flat;
                for axis in 0..d {
                    if axis == face_axis {
                        t[axis] = side;
                    } else {
                        t[axis] = probes[rem % FACE_PROBES];
                        rem /= FACE_PROBES;
                    }
                }
                worst = worst.max(model.covariance(&t).abs());
            }
        }
    }
    if worst >= TRUNCATION_RATIO * origin.abs() && worst > 0.0 {
        return Err(Error::Truncation {
            radius,
            boundary: worst,
            origin,
        });
    }
    Ok(())
}

/// `sigma^2 = int Cov(X(0), X(t)) dt` over `[-R, R]^d` by adaptive quadrature.
///
/// For the lattice family the integral is the lattice sum over `|j|_inf < R`.
pub fn sigma_squared(model: &FieldModel, trunc_radius: f64, quad_tol: f64) -> Result<f64> {
    if !(trunc_radius > 0.0 && trunc_radius.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "truncation radius must be positive, got {trunc_radius}"
        )));
    }
    if !(quad_tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "quadrature tolerance must be positive, got {quad_tol}"
        )));
    }
    if let FieldModel::LatticeMA(m) = model {
        let reach = m.range as i64;
        if (trunc_radius as i64) <= reach {
            return Err(Error::Truncation {
                radius: trunc_radius,
                boundary: model.covariance(&vec![reach as f64; model.dim()]).abs(),
                origin: model.variance(),
            });
        }
        return Ok(lattice_sum(model.dim(), reach, |j| m.autocovariance(j)));
    }
    certify_truncation(model, trunc_radius)?;
    let d = model.dim();
    let est = integrate_box(
        &|t: &[f64]| model.covariance(t),
        &vec![(-trunc_radius, trunc_radius); d],
        &model.covariance_kinks(),
        quad_tol,
    )?;
    if est.value < -quad_tol {
        return Err(Error::QuadratureTolerance {
            achieved: est.value,
            requested: quad_tol,
        });
    }
    Ok(est.value)
}

fn lattice_sum<F: Fn(&[i64]) -> f64>(d: usize, reach: i64, f: F) -> f64 {
    let side = (2 * reach + 1) as usize;
    let mut j = vec![0i64; d];
    (0..side.pow(d as u32))
        .map(|flat| {
            let mut rem = flat;
            for axis in (0..d).rev() {
                j[axis] = (rem % side) as i64 - reach;
                rem /= side;
            }
            f(&j)
        })
        .sum()
}

/// Cross-covariances of an `R^s`-valued stationary field.
pub trait CrossCovariance {
    fn components(&self) -> usize;

    /// `int_{[-R, R]^d} Cov(X_i(0), X_j(t)) dt`.
    fn integrated(&self, i: usize, j: usize, trunc_radius: f64, quad_tol: f64) -> Result<f64>;
}

/// Components `X_i = a_i X` of one scalar model.
#[derive(Debug, Clone)]
pub struct ScaledComponents {
    pub model: FieldModel,
    pub scales: Vec<f64>,
}

impl CrossCovariance for ScaledComponents {
    fn components(&self) -> usize {
        self.scales.len()
    }

    fn integrated(&self, i: usize, j: usize, trunc_radius: f64, quad_tol: f64) -> Result<f64> {
        let (a, b) = (self.scales[i], self.scales[j]);
        let tol = quad_tol / (a * b).abs().max(1.0);
        Ok(a * b * sigma_squared(&self.model, trunc_radius, tol)?)
    }
}

/// Cross-covariances tabulated on the lag grid `-R + k * spacing` per axis,
/// row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct CovarianceTable {
    pub dim: usize,
    pub spacing: f64,
    pub radius: f64,
    /// `values[i][j][lag]` estimates `Cov(X_i(0), X_j(lag))`.
    pub values: Vec<Vec<Vec<f64>>>,
}

impl CovarianceTable {
    pub fn nodes_per_axis(&self) -> usize {
        (2.0 * self.radius / self.spacing).round() as usize + 1
    }

    /// Lag vector of a flat table index.
    pub fn lag(&self, flat: usize) -> Vec<f64> {
        let n = self.nodes_per_axis();
        let mut rem = flat;
        let mut t = vec![0.0; self.dim];
        for axis in (0..self.dim).rev() {
            t[axis] = -self.radius + (rem % n) as f64 * self.spacing;
            rem /= n;
        }
        t
    }

    /// Product trapezoid rule of `values[i][j]` over the table.
    pub fn trapezoid(&self, i: usize, j: usize) -> f64 {
        let n = self.nodes_per_axis();
        let mut layer = self.values[i][j].clone();
        for _ in 0..self.dim {
            layer = layer.chunks(n).map(|line| trapezoid(line, self.spacing)).collect();
        }
        layer[0]
    }
}

impl CrossCovariance for CovarianceTable {
    fn components(&self) -> usize {
        self.values.len()
    }

    fn integrated(&self, i: usize, j: usize, trunc_radius: f64, _quad_tol: f64) -> Result<f64> {
        if trunc_radius > self.radius + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "table reaches lag {} but radius {trunc_radius} was requested",
                self.radius
            )));
        }
        Ok(self.trapezoid(i, j))
    }
}

/// Asymptotic covariance matrix `Sigma_ij = int Cov(X_i(0), X_j(t)) dt`,
/// symmetrized, and projected onto the PSD cone when its smallest eigenvalue
/// lies in `(-quad_tol, 0)`.
pub fn sigma_matrix(cross: &dyn CrossCovariance, trunc_radius: f64, quad_tol: f64) -> Result<DMatrix<f64>> {
    let s = cross.components();
    if s == 0 {
        return Err(Error::InvalidArgument("no components".into()));
    }
    let mut raw = DMatrix::zeros(s, s);
    for i in 0..s {
        for j in 0..s {
            raw[(i, j)] = cross.integrated(i, j, trunc_radius, quad_tol)?;
        }
    }
    let sym = (&raw + raw.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    let min = eig.eigenvalues.min();
    if min < -quad_tol {
        return Err(Error::IndefiniteMatrix {
            min_eigenvalue: min,
            tolerance: quad_tol,
        });
    }
    if min >= 0.0 {
        return Ok(sym);
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let projected = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    Ok((&projected + projected.transpose()) * 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovSumCheck {
    pub block_sum: f64,
    pub sigma2: f64,
    pub gap: f64,
    /// `(j, Cov(Z(0), Z(j)))` for every lag with `|j|_inf <= max_lag`.
    #[serde(skip)]
    pub terms: Vec<(Vec<i64>, f64)>,
}

/// `Cov(Z(0), Z(j)) = int C(u) prod_i (1 - |u_i - j_i|)_+ du` over `j + [-1, 1]^d`.
pub fn block_covariance(model: &FieldModel, j: &[i64], quad_tol: f64) -> Result<f64> {
    if let FieldModel::LatticeMA(m) = model {
        return Ok(m.autocovariance(j));
    }
    let kinks = model.covariance_kinks();
    let bounds: Vec<(f64, f64)> = j.iter().map(|&k| (k as f64 - 1.0, k as f64 + 1.0)).collect();
    let breakpoints: Vec<Vec<f64>> = kinks
        .iter()
        .zip(j)
        .map(|(axis_kinks, &k)| {
            let mut b = axis_kinks.clone();
            b.push(k as f64);
            b
        })
        .collect();
    let est = integrate_box(
        &|u: &[f64]| {
            let w: f64 = u
                .iter()
                .zip(j)
                .map(|(&x, &k)| (1.0 - (x - k as f64).abs()).max(0.0))
                .product();
            if w == 0.0 {
                0.0
            } else {
                w * model.covariance(u)
            }
        },
        &bounds,
        &breakpoints,
        quad_tol,
    )?;
    Ok(est.value)
}

/// Compares `sum_{|j|_inf <= max_lag} Cov(Z(0), Z(j))` with `sigma^2`.
pub fn covariance_sum_check(model: &FieldModel, max_lag: u32) -> Result<CovSumCheck> {
    let tol = 1e-11;
    let d = model.dim();
    let reach = max_lag as i64;
    let radius = model.suggested_truncation_radius().max(max_lag as f64 + 1.0);
    let sigma2 = sigma_squared(model, radius, tol)?;
    let side = (2 * reach + 1) as usize;
    let mut terms = Vec::with_capacity(side.pow(d as u32));
    for flat in 0..side.pow(d as u32) {
        let mut rem = flat;
        let mut j = vec![0i64; d];
        for axis in (0..d).rev() {
            j[axis] = (rem % side) as i64 - reach;
            rem /= side;
        }
        let c = block_covariance(model, &j, tol)?;
        terms.push((j, c));
    }
    let block_sum: f64 = terms.iter().map(|(_, c)| c).sum();
    Ok(CovSumCheck {
        block_sum,
        sigma2,
        gap: (block_sum - sigma2).abs(),
        terms,
    })
}
