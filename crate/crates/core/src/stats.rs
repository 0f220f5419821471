//! One-sample Kolmogorov-Smirnov tests against centered normal laws.

use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `sup_x |F_n(x) - F(x)|` for the empirical distribution of `samples`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// `P(K > x)` for the limiting Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // P(K <= x) = sqrt(2 pi)/x sum_k exp(-(2k-1)^2 pi^2 / (8 x^2))
        let c = std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let cdf: f64 = (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum::<f64>()
            * (2.0 * std::f64::consts::PI).sqrt()
            / x;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let p: f64 = (1..=100)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * (k * k) as f64 * x * x).exp()
        })
        .sum::<f64>()
        * 2.0;
    p.clamp(0.0, 1.0)
}

/// KS test of `samples` against `N(0, variance)`, with the asymptotic p-value
/// at `sqrt(n) D`.
pub fn ks_test_normal(samples: &[f64], variance: f64) -> KsResult {
    let sd = variance.sqrt();
    let statistic = if sd > 0.0 {
        let normal = Normal::new(0.0, sd).expect("positive standard deviation");
        ks_statistic(samples, |x| normal.cdf(x))
    } else {
        ks_statistic(samples, |x| if x >= 0.0 { 1.0 } else { 0.0 })
    };
    let p_value = kolmogorov_survival((samples.len() as f64).sqrt() * statistic);
    KsResult { statistic, p_value }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// `(theoretical, empirical)` quantile pairs for a normal QQ plot, at
/// plotting positions `(i + 0.5) / n`.
pub fn normal_qq(samples: &[f64], variance: f64) -> Vec<(f64, f64)> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let sd = variance.sqrt().max(f64::MIN_POSITIVE);
    let normal = Normal::new(0.0, sd).expect("positive standard deviation");
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (normal.inverse_cdf((i as f64 + 0.5) / n), x))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replication_rng;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn survival_function_reference_values() {
        // classical critical values of the Kolmogorov distribution
        assert_abs_diff_eq!(kolmogorov_survival(1.3580986), 0.05, epsilon = 1e-6);
        assert_abs_diff_eq!(kolmogorov_survival(1.6276236), 0.01, epsilon = 1e-6);
        assert_abs_diff_eq!(kolmogorov_survival(1.2238479), 0.10, epsilon = 1e-6);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        assert!(kolmogorov_survival(0.2) > 0.999);
    }

    #[test]
    fn survival_branches_agree_at_switch() {
        let left = {
            let x: f64 = 1.0 - 1e-12;
            let c = std::f64::consts::PI.powi(2) / (8.0 * x * x);
            1.0 - (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum::<f64>()
                * (2.0 * std::f64::consts::PI).sqrt()
                / x
        };
        assert_abs_diff_eq!(left, kolmogorov_survival(1.0), epsilon = 1e-10);
    }

    #[test]
    fn statistic_of_known_sample() {
        // uniform cdf, samples at 0.1 and 0.9: D = max(0.1, 0.5-0.1, 0.9-0.5, 1-0.9) = 0.4
        let d = ks_statistic(&[0.9, 0.1], |x| x.clamp(0.0, 1.0));
        assert_abs_diff_eq!(d, 0.4, epsilon = 1e-15);
    }

    #[test]
    fn constant_sample_is_far_from_normal() {
        let r = ks_test_normal(&[0.0; 500], 1.0);
        assert_abs_diff_eq!(r.statistic, 0.5, epsilon = 1e-15);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn null_calibration() {
        let reps = 200;
        let mut rejections = 0;
        for rep in 0..reps {
            let mut rng = replication_rng(2024, rep);
            let xs: Vec<f64> = (0..500)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    2.0 * z
                })
                .collect();
            if ks_test_normal(&xs, 4.0).p_value < 0.05 {
                rejections += 1;
            }
        }
        let frac = rejections as f64 / reps as f64;
        assert!((0.01..=0.10).contains(&frac), "{frac}");
    }

    #[test]
    fn qq_pairs_are_sorted() {
        let qq = normal_qq(&[3.0, -1.0, 0.5], 1.0);
        assert_eq!(qq.iter().map(|p| p.1).collect::<Vec<_>>(), vec![-1.0, 0.5, 3.0]);
        assert_abs_diff_eq!(qq[1].0, 0.0, epsilon = 1e-12);
        assert!(qq[0].0 < 0.0 && qq[2].0 > 0.0);
    }

    #[test]
    fn moments() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(variance(&[1.0, 2.0, 3.0]), 1.0);
    }
}
