use fieldclt::estimation::{
    block_covariance, covariance_sum_check, normalized_statistic, riemann_integral, sigma_squared, window_integral,
    DEFAULT_QUAD_TOL,
};
use fieldclt::fields::{exact_window_integral, sample, CovarianceSpec, FieldModel, GridField, Kernel};
use fieldclt::stats::{mean, variance};
use fieldclt::windows::Window;

fn unit_box(dim: usize) -> FieldModel {
    FieldModel::shot_noise(dim, 1.0, Kernel::Box { height: 1.0, side: 1.0 }).unwrap()
}

/// Keeps the middle cell of every block of three along each axis.
fn coarsen(g: &GridField) -> GridField {
    let shape: Vec<usize> = g.shape.iter().map(|n| n / 3).collect();
    let mut values = Vec::new();
    match shape.len() {
        1 => {
            for i in 0..shape[0] {
                values.push(g.values[3 * i + 1]);
            }
        }
        2 => {
            for i in 0..shape[0] {
                for j in 0..shape[1] {
                    values.push(g.values[(3 * i + 1) * g.shape[1] + 3 * j + 1]);
                }
            }
        }
        _ => unimplemented!(),
    }
    GridField {
        origin: g.origin.clone(),
        spacing: 3.0 * g.spacing,
        shape,
        values,
    }
}

fn refinement_gaps(dim: usize, reps: u64) -> Vec<f64> {
    let model = FieldModel::gaussian_grid(
        dim,
        CovarianceSpec::Gaussian {
            variance: 1.0,
            length: 1.0,
        },
        1.0 / 81.0,
    )
    .unwrap();
    let w = Window::cube(dim, 3.0).unwrap();
    let mut gaps = vec![0.0; 3];
    for rep in 0..reps {
        let r = sample(&model, &w, 17, rep).unwrap();
        let mut grids = vec![r.grid().unwrap().clone()];
        for _ in 0..3 {
            let next = coarsen(grids.last().unwrap());
            grids.push(next);
        }
        let integrals: Vec<f64> = grids.iter().map(|g| riemann_integral(g, &w).unwrap()).collect();
        // integrals[0] is spacing 1/81, integrals[3] is spacing 1/3
        for k in 0..3 {
            gaps[k] += (integrals[k + 1] - integrals[k]).abs() / reps as f64;
        }
    }
    gaps
}

#[test]
fn riemann_sums_converge_under_refinement_1d() {
    let gaps = refinement_gaps(1, 40);
    // gaps[k] compares spacing 3^(k-3) and 3^(k-4); finer first
    assert!(gaps[0] < gaps[1] && gaps[1] < gaps[2], "{gaps:?}");
    assert!(gaps[1] / gaps[0] > 4.0, "{gaps:?}");
}

#[test]
fn riemann_sums_converge_under_refinement_2d() {
    let gaps = refinement_gaps(2, 6);
    assert!(gaps[0] < gaps[1] && gaps[1] < gaps[2], "{gaps:?}");
}

#[test]
fn boundary_strip_contribution_vanishes() {
    // W = [1/2, L + 1/2]^2 has inner lattice box [1, L]^2 and strip area 2L - 1.
    let model = unit_box(2);
    let reps = 10_000;
    let mut per_volume = Vec::new();
    for l in [8.0, 16.0] {
        let w = Window::new(vec![0.5, 0.5], vec![l + 0.5, l + 0.5]).unwrap();
        let inner = w.inner_lattice_box().unwrap();
        let strip_area = w.volume() - inner.volume();
        assert!((strip_area - (2.0 * l - 1.0)).abs() < 1e-12);
        let strips: Vec<f64> = (0..reps)
            .map(|rep| {
                let r = sample(&model, &w, 31, rep).unwrap();
                exact_window_integral(&r, &w).unwrap() - exact_window_integral(&r, &inner).unwrap()
            })
            .collect();
        let v = variance(&strips);
        let se = (2.0 / (reps as f64 - 1.0)).sqrt();
        // Var(int_A X) <= |A| * int |C|, and int |C| = 1 here
        let bound = strip_area * 1.0;
        assert!(v <= bound * (1.0 + 3.0 * se), "L = {l}: {v} > {bound}");
        per_volume.push(v / w.volume());
    }
    assert!(per_volume[1] < per_volume[0], "{per_volume:?}");
}

#[test]
fn normalized_statistics_are_centered() {
    let models = [
        unit_box(1),
        FieldModel::lattice_ma(1, 1, vec![1.0, 0.5], 1.0).unwrap(),
        FieldModel::gaussian_grid(
            1,
            CovarianceSpec::Exponential {
                variance: 1.0,
                length: 0.5,
            },
            0.25,
        )
        .unwrap(),
    ];
    let w = Window::cube(1, 32.0).unwrap();
    for model in &models {
        let reps = 2000;
        let z: Vec<f64> = (0..reps)
            .map(|rep| {
                let r = sample(model, &w, 77, rep).unwrap();
                normalized_statistic(window_integral(&r, &w).unwrap(), model.mean(), w.volume()).unwrap()
            })
            .collect();
        let sd = variance(&z).sqrt();
        let m = mean(&z);
        assert!(
            m.abs() < 3.5 * sd / (reps as f64).sqrt(),
            "{}: mean {m}",
            model.family_name()
        );
    }
}

#[test]
fn block_sum_approaches_sigma_squared() {
    let model = FieldModel::gaussian_grid(
        1,
        CovarianceSpec::Gaussian {
            variance: 1.0,
            length: 2.0,
        },
        0.125,
    )
    .unwrap();
    let gaps: Vec<f64> = [1, 3, 8]
        .iter()
        .map(|&k| covariance_sum_check(&model, k).unwrap().gap.abs())
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    assert!(gaps[2] < 1e-6);
}

#[test]
fn triangular_kernel_in_two_dimensions() {
    let model = FieldModel::shot_noise(
        2,
        2.0,
        Kernel::Triangular {
            height: 1.5,
            half_width: 0.75,
        },
    )
    .unwrap();
    // lambda (int phi)^2 with int phi = 1.5 * 0.75^2
    let expected = 2.0 * (1.5f64 * 0.75 * 0.75).powi(2);
    let s2 = sigma_squared(&model, model.suggested_truncation_radius(), DEFAULT_QUAD_TOL).unwrap();
    assert!((s2 - expected).abs() < 1e-7, "{s2} vs {expected}");
    let check = covariance_sum_check(&model, 2).unwrap();
    assert!(check.gap.abs() < 1e-6, "{check:?}");
    let c0 = block_covariance(&model, &[0, 0], DEFAULT_QUAD_TOL).unwrap();
    assert!(c0 > 0.0 && c0 < expected);
}

#[test]
fn exact_integral_matches_fine_raster() {
    let model = FieldModel::shot_noise(
        1,
        1.0,
        Kernel::Triangular {
            height: 1.0,
            half_width: 0.5,
        },
    )
    .unwrap();
    let w = Window::new(vec![0.3], vec![9.7]).unwrap();
    for rep in 0..5 {
        let r = sample(&model, &w, 4, rep).unwrap();
        let exact = exact_window_integral(&r, &w).unwrap();
        let grid = r.points().unwrap().rasterize(&w, 1.0 / 512.0).unwrap();
        let approx = riemann_integral(&grid, &w).unwrap();
        assert!((exact - approx).abs() < 1e-3, "{exact} vs {approx}");
    }
}
