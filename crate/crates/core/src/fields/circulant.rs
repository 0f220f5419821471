//! Exact sampling of stationary Gaussian grid fields by circulant embedding.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Eigenvalues above this (negative) level are clipped to zero; anything
/// lower means the embedding is not positive semidefinite.
pub const NEGATIVE_EIGENVALUE_TOLERANCE: f64 = 1e-9;

/// A covariance embedded on the torus of shape `embed`, diagonalized by the FFT.
pub struct CirculantEmbedding {
    embed: Vec<usize>,
    /// `sqrt(eigenvalue / M)`, row-major over `embed`.
    scale: Vec<f64>,
}

impl CirculantEmbedding {
    /// Embeds `cov` sampled at lags `k * spacing` for a grid of `shape` nodes.
    ///
    /// The torus starts at the next power of two above `2 n` per axis and is
    /// doubled until the embedding is nonnegative definite or exceeds `max_cells`.
    pub fn new<C: Fn(&[f64]) -> f64>(cov: C, shape: &[usize], spacing: f64, max_cells: usize) -> Result<Self> {
        let mut embed: Vec<usize> = shape.iter().map(|&n| (2 * n.max(1)).next_power_of_two()).collect();
        loop {
            let total = embed
                .iter()
                .try_fold(1usize, |acc, &m| acc.checked_mul(m))
                .unwrap_or(usize::MAX);
            if total > max_cells {
                return Err(Error::GridTooLarge {
                    requested: total,
                    cap: max_cells,
                });
            }
            let eigenvalues = embedded_spectrum(&cov, &embed, spacing);
            let min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            if min >= -NEGATIVE_EIGENVALUE_TOLERANCE {
                let m = total as f64;
                let scale = eigenvalues.iter().map(|v| (v.max(0.0) / m).sqrt()).collect();
                return Ok(Self { embed, scale });
            }
            let doubled: Option<usize> = embed.iter().try_fold(1usize, |acc, &m| acc.checked_mul(2 * m));
            if doubled.is_none_or(|c| c > max_cells) {
                return Err(Error::EmbeddingFailure {
                    min_eigenvalue: min,
                    tolerance: NEGATIVE_EIGENVALUE_TOLERANCE,
                });
            }
            embed.iter_mut().for_each(|m| *m *= 2);
        }
    }

    /// One field on the first `shape[i]` nodes of every axis, row-major.
    pub fn sample<R: Rng + ?Sized>(&self, shape: &[usize], rng: &mut R) -> Vec<f64> {
        let mut data: Vec<Complex<f64>> = self
            .scale
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(s * re, s * im)
            })
            .collect();
        fft_nd(&mut data, &self.embed);

        let count: usize = shape.iter().product();
        let mut out = Vec::with_capacity(count);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..count {
            let flat = idx.iter().zip(&self.embed).fold(0, |acc, (&i, &m)| acc * m + i);
            out.push(data[flat].re);
            for axis in (0..shape.len()).rev() {
                idx[axis] += 1;
                if idx[axis] < shape[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
        out
    }
}

/// Real parts of the FFT of the covariance wrapped onto the torus `embed`.
fn embedded_spectrum<C: Fn(&[f64]) -> f64>(cov: &C, embed: &[usize], spacing: f64) -> Vec<f64> {
    let total: usize = embed.iter().product();
    let mut data = vec![Complex::new(0.0, 0.0); total];
    let mut lag = vec![0.0; embed.len()];
    for (flat, slot) in data.iter_mut().enumerate() {
        let mut rem = flat;
        for axis in (0..embed.len()).rev() {
            let k = rem % embed[axis];
            rem /= embed[axis];
            lag[axis] = k.min(embed[axis] - k) as f64 * spacing;
        }
        *slot = Complex::new(cov(&lag), 0.0);
    }
    fft_nd(&mut data, embed);
    data.iter().map(|z| z.re).collect()
}

/// In-place forward FFT along every axis of a row-major array.
fn fft_nd(data: &mut [Complex<f64>], shape: &[usize]) {
    let mut planner = FftPlanner::new();
    let mut stride = 1;
    for axis in (0..shape.len()).rev() {
        let n = shape[axis];
        let fft = planner.plan_fft_forward(n);
        let mut line = vec![Complex::new(0.0, 0.0); n];
        let block = stride * n;
        for start in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[start + offset + k * stride];
                }
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[start + offset + k * stride] = *v;
                }
            }
        }
        stride = block;
    }
}
