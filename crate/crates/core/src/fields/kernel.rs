//! Separable, compactly supported shot-noise kernels
//! `phi(x) = height * prod_i k(x_i)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Kernel {
    /// `height * 1_{[0, side)^d}`.
    Box { height: f64, side: f64 },
    /// `height * prod_i max(0, 1 - |x_i| / half_width)`.
    Triangular { height: f64, half_width: f64 },
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        let (h, w) = match *self {
            Kernel::Box { height, side } => (height, side),
            Kernel::Triangular { height, half_width } => (height, half_width),
        };
        if !(h.is_finite() && h >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "kernel height must be finite and nonnegative, got {h}"
            )));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidModel(format!("kernel width must be positive, got {w}")));
        }
        Ok(())
    }

    pub fn height(&self) -> f64 {
        match *self {
            Kernel::Box { height, .. } | Kernel::Triangular { height, .. } => height,
        }
    }

    /// Support of the one-dimensional profile.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Kernel::Box { side, .. } => (0.0, side),
            Kernel::Triangular { half_width, .. } => (-half_width, half_width),
        }
    }

    pub fn profile(&self, x: f64) -> f64 {
        match *self {
            Kernel::Box { side, .. } => {
                if (0.0..side).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Triangular { half_width, .. } => (1.0 - x.abs() / half_width).max(0.0),
        }
    }

    /// `int_{-inf}^{x} k(s) ds`.
    pub fn profile_cdf(&self, x: f64) -> f64 {
        match *self {
            Kernel::Box { side, .. } => x.clamp(0.0, side),
            Kernel::Triangular { half_width, .. } => {
                let u = x / half_width;
                let unit = if u <= -1.0 {
                    0.0
                } else if u <= 0.0 {
                    0.5 * (1.0 + u) * (1.0 + u)
                } else if u <= 1.0 {
                    1.0 - 0.5 * (1.0 - u) * (1.0 - u)
                } else {
                    1.0
                };
                half_width * unit
            }
        }
    }

    /// `int k(s) ds`.
    pub fn profile_mass(&self) -> f64 {
        match *self {
            Kernel::Box { side, .. } => side,
            Kernel::Triangular { half_width, .. } => half_width,
        }
    }

    /// `int k(s) k(s + t) ds`.
    pub fn profile_autocorrelation(&self, t: f64) -> f64 {
        match *self {
            Kernel::Box { side, .. } => (side - t.abs()).max(0.0),
            Kernel::Triangular { half_width, .. } => {
                let v = t.abs() / half_width;
                let unit = if v <= 1.0 {
                    2.0 / 3.0 - v * v + 0.5 * v * v * v
                } else if v <= 2.0 {
                    (2.0 - v).powi(3) / 6.0
                } else {
                    0.0
                };
                half_width * unit
            }
        }
    }

    /// Lags at which the profile autocorrelation is not smooth.
    pub fn autocorrelation_kinks(&self) -> Vec<f64> {
        match *self {
            Kernel::Box { side, .. } => vec![-side, 0.0, side],
            Kernel::Triangular { half_width: a, .. } => vec![-2.0 * a, -a, 0.0, a, 2.0 * a],
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.height();
        for &xi in x {
            if v == 0.0 {
                break;
            }
            v *= self.profile(xi);
        }
        v
    }

    pub fn integral(&self, dim: usize) -> f64 {
        self.height() * self.profile_mass().powi(dim as i32)
    }

    /// `int phi(s) phi(s + t) ds`.
    pub fn autocorrelation(&self, t: &[f64]) -> f64 {
        let h = self.height();
        t.iter().fold(h * h, |acc, &ti| acc * self.profile_autocorrelation(ti))
    }

    /// `int_{[lower, upper]} phi(t - x) dt`.
    pub fn box_integral(&self, x: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
        let mut v = self.height();
        for i in 0..x.len() {
            v *= self.profile_cdf(upper[i] - x[i]) - self.profile_cdf(lower[i] - x[i]);
            if v == 0.0 {
                break;
            }
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use approx::assert_abs_diff_eq;

    fn kernels() -> [Kernel; 3] {
        [
            Kernel::Box { height: 1.0, side: 1.0 },
            Kernel::Box { height: 0.5, side: 2.5 },
            Kernel::Triangular {
                height: 2.0,
                half_width: 0.75,
            },
        ]
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for k in kernels() {
            let (lo, hi) = k.support();
            let mass = integrate(&|s| k.profile(s), lo, hi, &[0.0], 1e-12).unwrap().value;
            assert_abs_diff_eq!(mass, k.profile_mass(), epsilon = 1e-10);
            for t in [-1.7, -0.3, 0.0, 0.2, 0.5, 1.1, 2.0] {
                let mut cuts = vec![0.0, -t, lo, hi, lo - t, hi - t];
                cuts.sort_by(f64::total_cmp);
                let q = integrate(&|s| k.profile(s) * k.profile(s + t), lo - 3.0, hi + 3.0, &cuts, 1e-12)
                    .unwrap()
                    .value;
                assert_abs_diff_eq!(q, k.profile_autocorrelation(t), epsilon = 1e-10);
                let cdf = integrate(&|s| k.profile(s), lo - 1.0, t, &cuts, 1e-12).unwrap().value;
                assert_abs_diff_eq!(cdf, k.profile_cdf(t), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn unit_box_overlap() {
        let k = Kernel::Box { height: 1.0, side: 1.0 };
        assert_abs_diff_eq!(k.profile_autocorrelation(0.5), 0.5);
        assert_eq!(k.profile_autocorrelation(2.0), 0.0);
        assert_eq!(k.box_integral(&[0.5], &[0.0], &[10.0]), 1.0);
        assert_eq!(k.box_integral(&[-0.5], &[0.0], &[10.0]), 0.5);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Kernel::Box {
            height: -1.0,
            side: 1.0
        }
        .validate()
        .is_err());
        assert!(Kernel::Triangular {
            height: 1.0,
            half_width: 0.0
        }
        .validate()
        .is_err());
        assert!(Kernel::Box { height: 0.0, side: 1.0 }.validate().is_ok());
    }
}
