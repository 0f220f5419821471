use fieldclt::fields::{sample, CovarianceSpec, FieldModel, Kernel};
use fieldclt::windows::Window;

fn unit_box(dim: usize, intensity: f64) -> FieldModel {
    FieldModel::shot_noise(dim, intensity, Kernel::Box { height: 1.0, side: 1.0 }).unwrap()
}

#[test]
fn shot_noise_point_count_matches_dilated_volume() {
    let m = unit_box(2, 1.5);
    let w = Window::cube(2, 10.0).unwrap();
    let reps = 400;
    let counts: Vec<f64> = (0..reps)
        .map(|rep| sample(&m, &w, 11, rep).unwrap().points().unwrap().len() as f64)
        .collect();
    let expected = 1.5 * 11.0 * 11.0;
    let mean = counts.iter().sum::<f64>() / reps as f64;
    let se = (expected / reps as f64).sqrt();
    assert!((mean - expected).abs() < 4.0 * se, "mean count {mean} vs {expected}");
}

#[test]
fn shot_noise_is_stationary_in_mean_and_variance() {
    let m = unit_box(1, 2.0);
    let w = Window::cube(1, 50.0).unwrap();
    let reps = 4000;
    let probes = [0.25, 17.5, 49.75];
    let mut sums = [0.0; 3];
    let mut squares = [0.0; 3];
    for rep in 0..reps {
        let r = sample(&m, &w, 3, rep).unwrap();
        let p = r.points().unwrap();
        for (k, &t) in probes.iter().enumerate() {
            let x = p.value_at(&[t]);
            sums[k] += x;
            squares[k] += x * x;
        }
    }
    for k in 0..3 {
        let mean = sums[k] / reps as f64;
        let var = squares[k] / reps as f64 - mean * mean;
        // X(t) ~ Poisson(2)
        assert!(
            (mean - 2.0).abs() < 4.0 * (2.0 / reps as f64).sqrt(),
            "mean at {}: {mean}",
            probes[k]
        );
        assert!((var - 2.0).abs() < 0.2, "variance at {}: {var}", probes[k]);
    }
}

#[test]
fn shot_noise_covariance_at_lags() {
    let m = unit_box(1, 1.0);
    let w = Window::cube(1, 40.0).unwrap();
    let reps = 2000;
    let lags = [0.0, 0.25, 0.5, 0.75, 1.5];
    let mut acc = vec![0.0; lags.len()];
    let mut n = 0.0;
    for rep in 0..reps {
        let p = sample(&m, &w, 5, rep).unwrap().points().unwrap().clone();
        for base in [2.0, 12.0, 22.0, 32.0] {
            let x0 = p.value_at(&[base]) - 1.0;
            for (k, lag) in lags.iter().enumerate() {
                acc[k] += x0 * (p.value_at(&[base + lag]) - 1.0);
            }
            n += 1.0;
        }
    }
    for (k, &lag) in lags.iter().enumerate() {
        let emp = acc[k] / n;
        let exact = m.covariance(&[lag]);
        assert!((emp - exact).abs() < 0.05, "lag {lag}: {emp} vs {exact}");
    }
    assert!((m.covariance(&[0.25]) - 0.75).abs() < 1e-15);
}

#[test]
fn gaussian_grid_empirical_covariance() {
    let m = FieldModel::gaussian_grid(
        1,
        CovarianceSpec::Gaussian {
            variance: 1.0,
            length: 1.0,
        },
        0.125,
    )
    .unwrap();
    let w = Window::cube(1, 32.0).unwrap();
    let reps = 200;
    let steps = [0usize, 4, 8, 16];
    let mut acc = [0.0; 4];
    let mut mean = 0.0;
    let mut n = 0.0;
    let mut pairs = [0.0; 4];
    for rep in 0..reps {
        let r = sample(&m, &w, 8, rep).unwrap();
        let g = r.grid().unwrap();
        let v = &g.values;
        mean += v.iter().sum::<f64>();
        n += v.len() as f64;
        for (k, &s) in steps.iter().enumerate() {
            for i in 0..v.len() - s {
                acc[k] += v[i] * v[i + s];
                pairs[k] += 1.0;
            }
        }
    }
    assert!((mean / n).abs() < 0.05);
    for (k, &s) in steps.iter().enumerate() {
        let lag = s as f64 * 0.125;
        let emp = acc[k] / pairs[k];
        let exact = (-lag * lag).exp();
        assert!((emp - exact).abs() < 0.06, "lag {lag}: {emp} vs {exact}");
    }
}

#[test]
fn gaussian_grid_2d_variance_and_cross_axis_covariance() {
    let m = FieldModel::gaussian_grid(
        2,
        CovarianceSpec::Exponential {
            variance: 2.0,
            length: 1.0,
        },
        0.25,
    )
    .unwrap();
    let w = Window::cube(2, 16.0).unwrap();
    let reps = 60;
    let mut var = 0.0;
    let mut cov = 0.0;
    let mut n = 0.0;
    for rep in 0..reps {
        let r = sample(&m, &w, 21, rep).unwrap();
        let g = r.grid().unwrap();
        let cols = g.shape[1];
        for i in 0..g.shape[0] - 2 {
            for j in 0..cols {
                let a = g.values[i * cols + j];
                var += a * a;
                cov += a * g.values[(i + 2) * cols + j];
                n += 1.0;
            }
        }
    }
    let var = var / n;
    let cov = cov / n;
    assert!((var - 2.0).abs() < 0.15, "variance {var}");
    let exact = m.covariance(&[0.5, 0.0]);
    assert!((cov - exact).abs() < 0.15, "covariance {cov} vs {exact}");
}

#[test]
fn lattice_ma_empirical_autocovariance() {
    let m = FieldModel::lattice_ma(1, 2, vec![1.0, -0.5, 0.25], 1.0).unwrap();
    let FieldModel::LatticeMA(ma) = &m else { unreachable!() };
    let w = Window::cube(1, 200.0).unwrap();
    let reps = 200;
    let mut acc = [0.0; 4];
    let mut pairs = [0.0; 4];
    for rep in 0..reps {
        let r = sample(&m, &w, 2, rep).unwrap();
        let v = &r.grid().unwrap().values;
        for s in 0..4 {
            for i in 0..v.len() - s {
                acc[s] += v[i] * v[i + s];
                pairs[s] += 1.0;
            }
        }
    }
    for s in 0..4 {
        let emp = acc[s] / pairs[s];
        let exact = ma.autocovariance(&[s as i64]);
        assert!((emp - exact).abs() < 0.03, "lag {s}: {emp} vs {exact}");
    }
    assert_eq!(ma.autocovariance(&[3]), 0.0);
}

#[test]
fn replications_are_reproducible_and_distinct() {
    let m = unit_box(2, 1.0);
    let w = Window::cube(2, 8.0).unwrap();
    let a = sample(&m, &w, 99, 4).unwrap();
    let b = sample(&m, &w, 99, 4).unwrap();
    let c = sample(&m, &w, 99, 5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.points().unwrap(), c.points().unwrap());
}
