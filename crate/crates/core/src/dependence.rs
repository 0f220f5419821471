//! Dependence-coefficient algebra.
//!
//! A [`ThetaSequence`] is a nonincreasing, nonnegative sequence `r -> theta_r`
//! (indexed from 1) that bounds covariances of Lipschitz functionals of a
//! field on index sets at `l1`-distance at least `r`:
//!
//! ```text
//! Cov(f(X_I), g(X_J)) <= min(#I, #J) Lip(f) Lip(g) Delta^d theta_r
//! ```
//!
//! This module manipulates such bounds: composing with a Lipschitz map
//! scales the sequence by `Lip^2`, passing to unit-cube block integrals
//! shifts the index by `d`, and quasi-associated fields with covariance
//! decay `c |t|_inf^{-d-eps}` get an explicit closed-form sequence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaSequence {
    /// Bound for an `R^s`-valued quasi-associated field whose covariances
    /// decay like `c |t|_inf^{-d-eps}`; `varmax` bounds `Var(X_i(0))`.
    Qa {
        c: f64,
        eps: f64,
        d: u32,
        s: u32,
        varmax: f64,
    },
    /// `scale * r^{-exponent}`.
    Power { scale: f64, exponent: f64 },
    /// Explicit values `theta_1, theta_2, ...`; zero past the end.
    Tabulated { values: Vec<f64> },
    /// `lip^2 * theta_r`.
    Scaled { inner: Box<ThetaSequence>, lip: f64 },
    /// `theta_{r-d}` for `r > d`, `theta_1` otherwise.
    Shifted { inner: Box<ThetaSequence>, d: u32 },
}

impl ThetaSequence {
    pub fn power(scale: f64, exponent: f64) -> Result<Self> {
        let t = ThetaSequence::Power { scale, exponent };
        t.validate()?;
        Ok(t)
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        let t = ThetaSequence::Tabulated { values };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ThetaSequence::Qa { c, eps, d, s, varmax } => {
                if !(eps.is_finite() && *eps > 0.0) {
                    return Err(Error::InvalidTheta(format!(
                        "eps must be positive (got {eps}); the lattice tail diverges"
                    )));
                }
                if !(c.is_finite() && *c > 0.0) {
                    return Err(Error::InvalidTheta(format!("c must be positive, got {c}")));
                }
                if *d == 0 || *s == 0 {
                    return Err(Error::InvalidTheta("d and s must be at least 1".into()));
                }
                if !(varmax.is_finite() && *varmax >= 0.0) {
                    return Err(Error::InvalidTheta(format!("varmax must be nonnegative, got {varmax}")));
                }
                Ok(())
            }
            ThetaSequence::Power { scale, exponent } => {
                if !(scale.is_finite() && *scale >= 0.0 && exponent.is_finite() && *exponent >= 0.0) {
                    return Err(Error::InvalidTheta(
                        "power sequence needs scale >= 0 and exponent >= 0".into(),
                    ));
                }
                Ok(())
            }
            ThetaSequence::Tabulated { values } => {
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::InvalidTheta(
                        "tabulated values must be finite and nonnegative".into(),
                    ));
                }
                if values.windows(2).any(|p| p[1] > p[0]) {
                    return Err(Error::InvalidTheta("tabulated values must be nonincreasing".into()));
                }
                Ok(())
            }
            ThetaSequence::Scaled { inner, lip } => {
                if !(lip.is_finite() && *lip >= 0.0) {
                    return Err(Error::InvalidTheta(format!(
                        "Lipschitz constant must be nonnegative, got {lip}"
                    )));
                }
                inner.validate()
            }
            ThetaSequence::Shifted { inner, d } => {
                if *d == 0 {
                    return Err(Error::InvalidTheta("shift must be at least 1".into()));
                }
                inner.validate()
            }
        }
    }

    /// `theta_r`. Panics for `r == 0`: sequences are indexed from 1.
    pub fn eval(&self, r: u64) -> f64 {
        assert!(r >= 1, "theta sequences are indexed from r = 1");
        match self {
            ThetaSequence::Qa { c, eps, d, s, varmax } => {
                if r == 1 {
                    3f64.powi(*d as i32) * varmax + qa_tail_bound(*c, *eps, *d, *s, 2)
                } else {
                    qa_tail_bound(*c, *eps, *d, *s, r)
                }
            }
            ThetaSequence::Power { scale, exponent } => scale * (r as f64).powf(-exponent),
            ThetaSequence::Tabulated { values } => values.get(r as usize - 1).copied().unwrap_or(0.0),
            ThetaSequence::Scaled { inner, lip } => lip * lip * inner.eval(r),
            ThetaSequence::Shifted { inner, d } => {
                let d = *d as u64;
                inner.eval(if r > d { r - d } else { 1 })
            }
        }
    }

    pub fn table(&self, max_r: u64) -> Vec<(u64, f64)> {
        (1..=max_r).map(|r| (r, self.eval(r))).collect()
    }
}

/// `(1 + (-1)^{d - iota - 1})`: 2 when `d - iota` is odd, 0 when even.
pub fn parity_factor(d: u32, iota: u32) -> f64 {
    if (d - iota) % 2 == 1 {
        2.0
    } else {
        0.0
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// The `r > 1` branch of the quasi-association bound:
/// `c s^2 sum_iota C(d, iota) (1 + (-1)^{d-iota-1}) 2^iota (r-1)^{-d-eps+iota+1} / (d+eps-iota-1)`.
fn qa_tail_bound(c: f64, eps: f64, d: u32, s: u32, r: u64) -> f64 {
    let rm1 = (r - 1) as f64;
    let df = d as f64;
    let sum: f64 = (0..d)
        .map(|iota| {
            let i = iota as f64;
            binomial(d, iota) * parity_factor(d, iota) * 2f64.powi(iota as i32) * rm1.powf(-df - eps + i + 1.0)
                / (df + eps - i - 1.0)
        })
        .sum();
    c * (s as f64).powi(2) * sum
}

/// Closed-form dependence sequence for a quasi-associated `R^s`-valued field
/// on `R^d` with `Cov(X_i(t1), X_j(t2)) <= c |t1 - t2|_inf^{-d-eps}`.
///
/// For `r = 1` the bound uses the Delta-free majorant `3^d varmax + theta_2`.
pub fn qa_to_bl_theta(c: f64, eps: f64, d: u32, s: u32, varmax: f64) -> Result<ThetaSequence> {
    let t = ThetaSequence::Qa { c, eps, d, s, varmax };
    t.validate()?;
    Ok(t)
}

/// Sequence for `f(X)` when `X` has sequence `theta` and `f` is Lipschitz.
pub fn lip_transform_theta(theta: ThetaSequence, lip: f64) -> Result<ThetaSequence> {
    let t = ThetaSequence::Scaled {
        inner: Box::new(theta),
        lip,
    };
    t.validate()?;
    Ok(t)
}

/// Sequence for unit-cube block integrals of a `d`-dimensional field.
pub fn shift_theta(theta: ThetaSequence, d: u32) -> Result<ThetaSequence> {
    let t = ThetaSequence::Shifted {
        inner: Box::new(theta),
        d,
    };
    t.validate()?;
    Ok(t)
}

/// `min(n1, n2) Lip(f) Lip(g)`.
pub fn psi(n1: u64, n2: u64, lip_f: f64, lip_g: f64) -> f64 {
    debug_assert!(n1 >= 1 && n2 >= 1);
    n1.min(n2) as f64 * (lip_f * lip_g)
}

/// Lipschitz constant of a map `R^n -> R` w.r.t. the `l1` norm, optionally
/// with its coordinate-wise constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzSpec {
    pub lip: f64,
    #[serde(default)]
    pub coordinatewise: Option<Vec<f64>>,
}

impl LipschitzSpec {
    pub fn new(lip: f64, coordinatewise: Option<Vec<f64>>) -> Result<Self> {
        if !(lip.is_finite() && lip >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Lipschitz constant must be nonnegative, got {lip}"
            )));
        }
        if let Some(c) = &coordinatewise {
            if c.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidArgument(
                    "coordinate-wise constants must be nonnegative".into(),
                ));
            }
        }
        Ok(Self { lip, coordinatewise })
    }
}

/// Shell sum `sum_{s >= ceil(r Delta)} (s/Delta)^{-d-eps} ((2s+1)^d - (2s-1)^d)`
/// over the lattice `Delta^{-1} Z^d`, computed term by term up to `cutoff`.
///
/// The remainder past `cutoff` is bracketed from the mean value bounds
/// `2d (2s-1)^{d-1} <= (2s+1)^d - (2s-1)^d <= 2d (2s+1)^{d-1}` and the
/// integral test. The returned value adds the upper end of that bracket,
/// so it never underestimates the infinite sum. Fails if the bracket is
/// wider than `1e-6` times the partial sum.
pub fn brute_force_tail_sum(r: f64, delta: f64, d: u32, eps: f64, cutoff: u64) -> Result<f64> {
    if !(r > 1.0 && delta > 1.0 && eps > 0.0 && d >= 1) {
        return Err(Error::TailSum(format!(
            "need r > 1, delta > 1, eps > 0, d >= 1 (got r={r}, delta={delta}, eps={eps}, d={d})"
        )));
    }
    let start = (r * delta).ceil() as u64;
    if start > cutoff {
        return Err(Error::TailSum(format!("first shell {start} exceeds cutoff {cutoff}")));
    }
    let di = d as i32;
    let expo = -(d as f64) - eps;
    let partial: f64 = (start..=cutoff)
        .rev()
        .map(|s| {
            let sf = s as f64;
            let shell = (2.0 * sf + 1.0).powi(di) - (2.0 * sf - 1.0).powi(di);
            (sf / delta).powf(expo) * shell
        })
        .sum();

    let n = cutoff as f64;
    let scale = delta.powf(d as f64 + eps) * 2.0 * d as f64 / eps;
    let upper = scale * (2.0 + 1.0 / n).powi(di - 1) * n.powf(-eps);
    let lower = scale * (2.0 - 1.0 / (n + 1.0)).powi(di - 1) * (n + 1.0).powf(-eps);
    if upper - lower > 1e-6 * partial {
        return Err(Error::TailSum(format!(
            "cutoff {cutoff} too small: tail bracket width {:e} vs partial sum {partial:e}",
            upper - lower
        )));
    }
    Ok(partial + upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn harmonic() -> ThetaSequence {
        ThetaSequence::power(1.0, 1.0).unwrap()
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi(2, 3, 2.0, 0.5), 2.0);
        assert_eq!(psi(5, 5, 0.0, 7.0), 0.0);
        assert_eq!(psi(1, 1_000_000, 1.0, 1.0), 1.0);
    }

    #[test]
    fn lipschitz_transform() {
        let t = lip_transform_theta(harmonic(), 3.0).unwrap();
        for r in 1..50 {
            assert_abs_diff_eq!(t.eval(r), 9.0 / r as f64, epsilon = 1e-14);
        }
        let zero = lip_transform_theta(harmonic(), 0.0).unwrap();
        assert!((1..100).all(|r| zero.eval(r) == 0.0));
        let same = lip_transform_theta(harmonic(), 1.0).unwrap();
        assert!((1..100).all(|r| same.eval(r) == harmonic().eval(r)));
        assert!(lip_transform_theta(harmonic(), -1.0).is_err());
    }

    #[test]
    fn shift_examples() {
        let t = shift_theta(harmonic(), 2).unwrap();
        assert_abs_diff_eq!(t.eval(5), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(t.eval(2), 1.0);
        assert_eq!(t.eval(1), 1.0);
        assert!(shift_theta(harmonic(), 0).is_err());
        let constant = shift_theta(ThetaSequence::power(0.7, 0.0).unwrap(), 1).unwrap();
        assert!((1..20).all(|r| constant.eval(r) == 0.7));
    }

    #[test]
    fn qa_closed_form_d1() {
        let t = qa_to_bl_theta(1.0, 1.0, 1, 1, 1.0).unwrap();
        for r in 2..20u64 {
            assert_abs_diff_eq!(t.eval(r), 2.0 / (r - 1) as f64, epsilon = 1e-14);
        }
        assert_eq!(t.eval(2), 2.0);
        assert_eq!(t.eval(1), 5.0);
    }

    #[test]
    fn qa_closed_form_d2_only_odd_gap_survives() {
        // d=2: only iota=1 contributes, 2 * 2 * 2 * (r-1)^{-eps} / eps
        let eps = 0.7;
        let t = qa_to_bl_theta(1.0, eps, 2, 1, 0.0).unwrap();
        for r in 2..10u64 {
            let expected = 8.0 * ((r - 1) as f64).powf(-eps) / eps;
            assert_abs_diff_eq!(t.eval(r), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn qa_scales_with_c_and_s() {
        let base = qa_to_bl_theta(1.0, 1.5, 3, 1, 0.0).unwrap();
        let scaled = qa_to_bl_theta(2.0, 1.5, 3, 3, 0.0).unwrap();
        for r in 2..30 {
            assert_abs_diff_eq!(scaled.eval(r), 18.0 * base.eval(r), epsilon = 1e-12);
        }
    }

    #[test]
    fn qa_rejects_nonpositive_eps() {
        assert!(qa_to_bl_theta(1.0, 0.0, 1, 1, 1.0).is_err());
        assert!(qa_to_bl_theta(1.0, -1.0, 1, 1, 1.0).is_err());
        let json = r#"{"kind":"qa","c":1.0,"eps":0.0,"d":1,"s":1,"varmax":1.0}"#;
        let parsed: ThetaSequence = serde_json::from_str(json).unwrap();
        assert!(parsed.validate().is_err());
    }

    #[test]
    fn parity_factor_values() {
        for d in 1..8 {
            for iota in 0..d {
                let expected = 1.0 + (-1f64).powi((d - iota - 1) as i32);
                assert_eq!(parity_factor(d, iota), expected);
                assert!(parity_factor(d, iota) == 0.0 || parity_factor(d, iota) == 2.0);
            }
        }
    }

    #[test]
    fn shell_expansion_matches_shell_count() {
        // (2s+1)^d - (2s-1)^d = sum_iota C(d,iota) parity 2^iota s^iota
        for d in 1..6u32 {
            for s in 1..20u32 {
                let sf = s as f64;
                let direct = (2.0 * sf + 1.0).powi(d as i32) - (2.0 * sf - 1.0).powi(d as i32);
                let expanded: f64 = (0..d)
                    .map(|i| binomial(d, i) * parity_factor(d, i) * (2.0 * sf).powi(i as i32))
                    .sum();
                assert_abs_diff_eq!(direct, expanded, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn tail_sum_d1_reference() {
        // 8 * sum_{s>=4} s^{-2} = 8 (pi^2/6 - 1 - 1/4 - 1/9)
        let expected = 8.0 * (PI * PI / 6.0 - 1.0 - 0.25 - 1.0 / 9.0);
        let v = brute_force_tail_sum(2.0, 2.0, 1, 1.0, 1_000_000).unwrap();
        assert_abs_diff_eq!(v, expected, epsilon = 1e-6);
        assert_abs_diff_eq!(v, 2.270584, epsilon = 1e-6);
    }

    #[test]
    fn tail_sum_guards() {
        assert!(brute_force_tail_sum(20.0, 4.0, 1, 1.0, 50).is_err());
        assert!(brute_force_tail_sum(2.0, 2.0, 1, 0.5, 100).is_err());
        assert!(brute_force_tail_sum(1.0, 2.0, 1, 1.0, 100).is_err());
    }

    #[test]
    fn tail_sum_below_closed_form() {
        let theta = qa_to_bl_theta(1.0, 1.0, 1, 1, 0.0).unwrap();
        let v = brute_force_tail_sum(10.0, 2.0, 1, 1.0, 1_000_000).unwrap();
        assert!(v <= 2.0 * theta.eval(10));
    }

    #[test]
    fn slowest_decay_at_half() {
        // d = 1, eps = 1/2: theta_1000 / theta_2 = 999^{-1/2}, above 1e-2
        let t = qa_to_bl_theta(1.0, 0.5, 1, 1, 0.0).unwrap();
        assert_abs_diff_eq!(t.eval(1000) / t.eval(2), 999f64.powf(-0.5), epsilon = 1e-14);
    }

    #[test]
    fn tabulated_sequences() {
        assert!(ThetaSequence::tabulated(vec![1.0, 2.0]).is_err());
        assert!(ThetaSequence::tabulated(vec![1.0, -0.5]).is_err());
        let t = ThetaSequence::tabulated(vec![3.0, 2.0, 0.5]).unwrap();
        assert_eq!(t.table(5), vec![(1, 3.0), (2, 2.0), (3, 0.5), (4, 0.0), (5, 0.0)]);
    }

    #[test]
    fn json_round_trip() {
        let t = shift_theta(
            lip_transform_theta(qa_to_bl_theta(1.0, 1.0, 2, 1, 0.5).unwrap(), 2.0).unwrap(),
            2,
        )
        .unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: ThetaSequence = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }

    fn arb_theta() -> impl Strategy<Value = ThetaSequence> {
        let leaf = prop_oneof![
            (0.01f64..10.0, 0.05f64..3.0, 1u32..4, 1u32..3, 0.0f64..5.0)
                .prop_map(|(c, eps, d, s, v)| qa_to_bl_theta(c, eps, d, s, v).unwrap()),
            (0.0f64..10.0, 0.0f64..3.0).prop_map(|(a, b)| ThetaSequence::power(a, b).unwrap()),
        ];
        leaf.prop_recursive(3, 8, 1, |inner| {
            prop_oneof![
                (inner.clone(), 0.0f64..4.0).prop_map(|(t, l)| lip_transform_theta(t, l).unwrap()),
                (inner, 1u32..4).prop_map(|(t, d)| shift_theta(t, d).unwrap()),
            ]
        })
    }

    proptest! {
        #[test]
        fn sequences_are_nonnegative_and_nonincreasing(t in arb_theta()) {
            let mut prev = f64::INFINITY;
            for r in 1..=1000 {
                let v = t.eval(r);
                prop_assert!(v >= 0.0);
                prop_assert!(v <= prev * (1.0 + 1e-12), "r={} {} > {}", r, v, prev);
                prev = v;
            }
        }

        #[test]
        fn lipschitz_transforms_compose(a in 0.0f64..5.0, b in 0.0f64..5.0, t in arb_theta()) {
            let twice = lip_transform_theta(lip_transform_theta(t.clone(), a).unwrap(), b).unwrap();
            let once = lip_transform_theta(t, a * b).unwrap();
            for r in 1..=100 {
                let (x, y) = (twice.eval(r), once.eval(r));
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }

        #[test]
        fn psi_is_symmetric(n1 in 1u64..1000, n2 in 1u64..1000, f in 0.0f64..10.0, g in 0.0f64..10.0) {
            prop_assert_eq!(psi(n1, n2, f, g), psi(n2, n1, g, f));
        }

        #[test]
        fn qa_sequences_vanish(c in 0.1f64..10.0, eps in 0.5f64..3.0, d in 1u32..4) {
            let t = qa_to_bl_theta(c, eps, d, 1, 1.0).unwrap();
            // every term decays at least like (r-1)^{-eps}
            prop_assert!(t.eval(1000) <= 999f64.powf(-eps) * t.eval(2) * (1.0 + 1e-12));
            prop_assert!(t.eval(1000) < t.eval(1) / 10.0);
            if eps >= 0.7 {
                prop_assert!(t.eval(1000) < 1e-2 * t.eval(2));
            }
        }
    }
}
