//! Adaptive Gauss-Kronrod quadrature in one dimension and its iterated
//! (axis-by-axis) extension to boxes.
//!
//! Subdivision always bisects the interval with the largest error estimate
//! and sums contributions in interval order, so results do not depend on
//! anything but the inputs.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// One 15-point Kronrod rule with the embedded 7-point Gauss error estimate.
pub fn gauss_kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Estimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Estimate {
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Adaptive integration of `f` over `[a, b]` to absolute tolerance `tol`.
/// `breakpoints` inside `(a, b)` start the subdivision, which matters for
/// integrands with kinks at known locations.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breakpoints: &[f64], tol: f64) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&x| x > lo && x < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut nodes = Vec::with_capacity(cuts.len() + 2);
    nodes.push(lo);
    nodes.extend(cuts);
    nodes.push(hi);

    // (left, right, estimate)
    let mut intervals: Vec<(f64, f64, Estimate)> = nodes
        .windows(2)
        .map(|w| (w[0], w[1], gauss_kronrod15(f, w[0], w[1])))
        .collect();

    loop {
        let (value, error) = totals(&intervals);
        let floor = 50.0 * f64::EPSILON * value.abs();
        if error <= tol.max(floor) {
            return Ok(Estimate {
                value: sign * value,
                error,
            });
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureTolerance {
                achieved: error,
                requested: tol,
            });
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.error.total_cmp(&y.1 .2.error))
            .map(|(i, _)| i)
            .expect("at least one interval");
        let (l, r, _) = intervals[worst];
        let mid = 0.5 * (l + r);
        if mid <= l || mid >= r {
            // interval below floating-point resolution
            return Err(Error::QuadratureTolerance {
                achieved: error,
                requested: tol,
            });
        }
        intervals[worst] = (l, mid, gauss_kronrod15(f, l, mid));
        intervals.insert(worst + 1, (mid, r, gauss_kronrod15(f, mid, r)));
    }
}

fn totals(intervals: &[(f64, f64, Estimate)]) -> (f64, f64) {
    intervals
        .iter()
        .fold((0.0, 0.0), |(v, e), (_, _, est)| (v + est.value, e + est.error))
}

/// Iterated adaptive integration over the box `bounds` (one `(lo, hi)` pair
/// per axis). `breakpoints[k]` are the kink locations along axis `k`.
pub fn integrate_box<F: Fn(&[f64]) -> f64>(
    f: &F,
    bounds: &[(f64, f64)],
    breakpoints: &[Vec<f64>],
    tol: f64,
) -> Result<Estimate> {
    if bounds.is_empty() {
        return Err(Error::InvalidArgument("empty integration box".into()));
    }
    integrate_axis(f, bounds, breakpoints, tol, &[])
}

fn integrate_axis<F: Fn(&[f64]) -> f64>(
    f: &F,
    bounds: &[(f64, f64)],
    breakpoints: &[Vec<f64>],
    tol: f64,
    prefix: &[f64],
) -> Result<Estimate> {
    let axis = prefix.len();
    let (lo, hi) = bounds[axis];
    let cuts = breakpoints.get(axis).map(Vec::as_slice).unwrap_or(&[]);
    let with = |x: f64| {
        let mut p = Vec::with_capacity(bounds.len());
        p.extend_from_slice(prefix);
        p.push(x);
        p
    };
    if axis + 1 == bounds.len() {
        return integrate(&|x| f(&with(x)), lo, hi, cuts, tol);
    }

    // half the budget for this axis, half spread over the inner integrals
    let inner_tol = 0.5 * tol / (hi - lo).abs().max(1.0);
    let failure = std::cell::RefCell::new(None);
    let outer = integrate(
        &|x| match integrate_axis(f, bounds, breakpoints, inner_tol, &with(x)) {
            Ok(est) => est.value,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        lo,
        hi,
        cuts,
        0.5 * tol,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(Estimate {
        value: outer.value,
        error: outer.error + inner_tol * (hi - lo).abs(),
    })
}

/// Composite trapezoid rule over equally spaced samples.
pub fn trapezoid(values: &[f64], spacing: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => spacing * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}
