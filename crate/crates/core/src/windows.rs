//! Axis-aligned integration windows.
//!
//! A [`Window`] is a closed box `[lower, upper]` in `R^d`. Besides its volume
//! it knows the exact volume of its boundary collar `dist(x, ∂W) <= r`
//! (outer part from the Steiner formula for boxes, inner part from the box
//! shrunk by `r` on every side), which gives the Van Hove ratio, and the set
//! of integer unit cubes `j + [0,1)^d` it contains.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWindow")]
pub struct Window {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
struct RawWindow {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawWindow> for Window {
    type Error = Error;

    fn try_from(raw: RawWindow) -> Result<Self> {
        Window::new(raw.lower, raw.upper)
    }
}

impl Window {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidWindow("dimension must be at least 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidWindow(format!("non-finite bound on axis {i}")));
            }
            if lo >= hi {
                return Err(Error::InvalidWindow(format!(
                    "axis {i}: lower {lo} is not below upper {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[0, side]^d`.
    pub fn cube(dim: usize, side: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![side; dim])
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube_between(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn sides(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| hi - lo).collect()
    }

    pub fn volume(&self) -> f64 {
        self.sides().iter().product()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn contains_window(&self, other: &Window) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|i| self.lower[i] <= other.lower[i] && other.upper[i] <= self.upper[i])
    }

    /// Volume of the intersection with `other` (zero when disjoint).
    pub fn overlap_volume(&self, other: &Window) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        let mut vol = 1.0;
        for i in 0..self.dim() {
            let len = self.upper[i].min(other.upper[i]) - self.lower[i].max(other.lower[i]);
            if len <= 0.0 {
                return 0.0;
            }
            vol *= len;
        }
        vol
    }

    /// Minkowski sum with the box `[lo, hi]` given per axis.
    pub fn dilate(&self, lo: &[f64], hi: &[f64]) -> Result<Window> {
        if lo.len() != self.dim() || hi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: lo.len().min(hi.len()),
            });
        }
        Window::new(
            self.lower.iter().zip(lo).map(|(a, b)| a + b).collect(),
            self.upper.iter().zip(hi).map(|(a, b)| a + b).collect(),
        )
    }

    /// Translate by `offset`.
    pub fn translate(&self, offset: &[f64]) -> Result<Window> {
        self.dilate(offset, offset)
    }

    /// Volume of `{x : dist(x, W) <= r}`: the Steiner polynomial
    /// `sum_j kappa_j r^j e_{d-j}(sides)`, `e_k` the elementary symmetric
    /// polynomial of the side lengths.
    pub fn parallel_volume(&self, radius: f64) -> f64 {
        let sides = self.sides();
        let e = elementary_symmetric(&sides);
        let d = self.dim();
        (0..=d)
            .map(|j| unit_ball_volume(j) * radius.powi(j as i32) * e[d - j])
            .sum()
    }

    /// Volume of `∂W ⊕ r·B^d`, the set of points within distance `r` of the
    /// boundary. Outer part from the Steiner formula, inner part is the box
    /// minus its `r`-shrunk copy (empty once any side is below `2r`).
    pub fn boundary_collar_volume(&self, radius: f64) -> f64 {
        let outer = self.parallel_volume(radius) - self.volume();
        let shrunk: f64 = self.sides().iter().map(|s| (s - 2.0 * radius).max(0.0)).product();
        outer + (self.volume() - shrunk)
    }

    /// Union of the unit cubes `j + [0,1)^d` inside the window, as a box.
    /// `None` when no cube fits.
    pub fn inner_lattice_box(&self) -> Option<Window> {
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let (first, last) = axis_anchor_range(self.lower[i], self.upper[i])?;
            lo.push(first as f64);
            hi.push((last + 1) as f64);
        }
        Window::new(lo, hi).ok()
    }
}

/// Integer anchors `j` with `[j, j+1) ⊆ [lo, hi]`, as an inclusive range.
fn axis_anchor_range(lo: f64, hi: f64) -> Option<(i64, i64)> {
    let first = lo.ceil() as i64;
    let last = hi.floor() as i64 - 1;
    (first <= last).then_some((first, last))
}

/// `e_0..=e_n` of the given values.
fn elementary_symmetric(values: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; values.len() + 1];
    e[0] = 1.0;
    for (n, &v) in values.iter().enumerate() {
        for k in (1..=n + 1).rev() {
            e[k] += v * e[k - 1];
        }
    }
    e
}

/// `Gamma(n / 2)` for a positive integer `n`, from `Gamma(1/2) = sqrt(pi)`,
/// `Gamma(1) = 1` and `Gamma(x + 1) = x Gamma(x)`.
pub fn gamma_half_integer(n: u32) -> f64 {
    assert!(n > 0, "Gamma has a pole at 0");
    let (mut x, mut value) = if n.is_multiple_of(2) { (1.0, 1.0) } else { (0.5, PI.sqrt()) };
    while 2.0 * x < n as f64 {
        value *= x;
        x += 1.0;
    }
    value
}

/// Volume of the `j`-dimensional Euclidean unit ball, `pi^{j/2} / Gamma(j/2 + 1)`.
pub fn unit_ball_volume(j: usize) -> f64 {
    PI.powf(j as f64 / 2.0) / gamma_half_integer(j as u32 + 2)
}

/// Van Hove ratio `vol(∂W ⊕ B^d) / vol(W)`.
pub fn vh_ratio(w: &Window) -> f64 {
    w.boundary_collar_volume(1.0) / w.volume()
}

/// A finite set of integer unit-cube anchors in `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeCubeSet {
    dim: usize,
    anchors: BTreeSet<Vec<i64>>,
}

impl LatticeCubeSet {
    pub fn new(dim: usize, anchors: impl IntoIterator<Item = Vec<i64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        let mut set = BTreeSet::new();
        for a in anchors {
            if a.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.len(),
                });
            }
            if !set.insert(a) {
                return Err(Error::InvalidArgument("duplicate anchor".into()));
            }
        }
        Ok(Self { dim, anchors: set })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<i64>> {
        self.anchors.iter()
    }

    pub fn contains(&self, anchor: &[i64]) -> bool {
        self.anchors.contains(anchor)
    }

    pub fn is_subset(&self, other: &LatticeCubeSet) -> bool {
        self.dim == other.dim && self.anchors.is_subset(&other.anchors)
    }

    /// Lebesgue measure of the union of the cubes.
    pub fn union_volume(&self) -> f64 {
        self.anchors.len() as f64
    }

    /// The closed unit cube `j + [0,1]^d` for an anchor.
    pub fn cube(anchor: &[i64]) -> Window {
        Window::new(
            anchor.iter().map(|&j| j as f64).collect(),
            anchor.iter().map(|&j| j as f64 + 1.0).collect(),
        )
        .expect("unit cube is a valid window")
    }
}

/// All anchors `j ∈ Z^d` with `j + [0,1)^d ⊆ w`.
pub fn inner_lattice(w: &Window) -> LatticeCubeSet {
    let dim = w.dim();
    let ranges: Option<Vec<(i64, i64)>> = (0..dim)
        .map(|i| axis_anchor_range(w.lower()[i], w.upper()[i]))
        .collect();
    let mut anchors = BTreeSet::new();
    if let Some(ranges) = ranges {
        let mut current: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        'outer: loop {
            anchors.insert(current.clone());
            for axis in (0..dim).rev() {
                if current[axis] < ranges[axis].1 {
                    current[axis] += 1;
                    continue 'outer;
                }
                current[axis] = ranges[axis].0;
            }
            break;
        }
    }
    LatticeCubeSet { dim, anchors }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VhRow {
    pub index: usize,
    pub volume: f64,
    pub vh_ratio: f64,
    pub inner_volume_fraction: f64,
}

/// Van Hove ratio and inner-lattice volume fraction along a window sequence.
pub fn vh_diagnostics(seq: &[Window]) -> Result<Vec<VhRow>> {
    let first = seq
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty window sequence".into()))?;
    seq.iter()
        .enumerate()
        .map(|(index, w)| {
            if w.dim() != first.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    got: w.dim(),
                });
            }
            let volume = w.volume();
            let row = VhRow {
                index,
                volume,
                vh_ratio: vh_ratio(w),
                inner_volume_fraction: inner_lattice(w).union_volume() / volume,
            };
            if !row.vh_ratio.is_finite() || !row.inner_volume_fraction.is_finite() {
                return Err(Error::InvalidWindow(format!(
                    "non-finite diagnostics for window {index}"
                )));
            }
            Ok(row)
        })
        .collect()
}

pub fn vh_rows_to_csv(rows: &[VhRow]) -> String {
    let mut out = String::from("index,volume,vh_ratio,inner_volume_fraction\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:?},{:?},{:?}",
            r.index, r.volume, r.vh_ratio, r.inner_volume_fraction
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(Window::new(vec![], vec![]).is_err());
        assert!(Window::new(vec![0.0], vec![0.0]).is_err());
        assert!(Window::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(serde_json::from_str::<Window>(r#"{"lower":[2.0],"upper":[1.0]}"#).is_err());
    }

    #[test]
    fn json_shape() {
        let w = Window::new(vec![0.0, 1.0], vec![2.0, 3.0]).unwrap();
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(json, r#"{"lower":[0.0,1.0],"upper":[2.0,3.0]}"#);
        assert_eq!(serde_json::from_str::<Window>(&json).unwrap(), w);
    }

    #[test]
    fn ball_volumes() {
        assert_abs_diff_eq!(unit_ball_volume(0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(unit_ball_volume(1), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(unit_ball_volume(2), PI, epsilon = 1e-14);
        assert_abs_diff_eq!(unit_ball_volume(3), 4.0 * PI / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(unit_ball_volume(4), PI * PI / 2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(gamma_half_integer(5), 0.75 * PI.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn vh_ratio_interval() {
        let w = Window::cube(1, 10.0).unwrap();
        assert_abs_diff_eq!(vh_ratio(&w), 0.4, epsilon = 1e-14);
    }

    #[test]
    fn vh_ratio_square() {
        // outer collar 4*10 + pi, inner collar 10^2 - 8^2
        let w = Window::cube(2, 10.0).unwrap();
        let expected = (40.0 + PI + 40.0 - 4.0) / 100.0;
        assert_abs_diff_eq!(vh_ratio(&w), expected, epsilon = 1e-13);
        assert_abs_diff_eq!(vh_ratio(&w), 0.791416, epsilon = 1e-6);
    }

    #[test]
    fn vh_ratio_small_box_clamps_inner_collar() {
        // every point of [0,1.5] is within 1 of the boundary
        let w = Window::cube(1, 1.5).unwrap();
        assert_abs_diff_eq!(vh_ratio(&w), (2.0 + 1.5) / 1.5, epsilon = 1e-14);
    }

    #[test]
    fn vh_ratio_growing_intervals() {
        for l in [10.0, 100.0, 1e4, 1e6] {
            let w = Window::cube(1, l).unwrap();
            assert_abs_diff_eq!(vh_ratio(&w), 4.0 / l, epsilon = 1e-12);
        }
    }

    #[test]
    fn vh_ratio_cubes_decrease() {
        for d in 1..=3 {
            let ratios: Vec<f64> = [4.0, 8.0, 16.0, 32.0, 64.0]
                .iter()
                .map(|&l| vh_ratio(&Window::cube(d, l).unwrap()))
                .collect();
            assert!(ratios.iter().all(|&r| r > 0.0));
            assert!(ratios.windows(2).all(|p| p[1] < p[0]), "d={d}: {ratios:?}");
            assert!(*ratios.last().unwrap() < 0.2);
        }
    }

    #[test]
    fn inner_lattice_examples() {
        let a = inner_lattice(&Window::cube(1, 3.0).unwrap());
        assert_eq!(a.iter().cloned().collect::<Vec<_>>(), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(a.union_volume(), 3.0);

        let b = inner_lattice(&Window::new(vec![0.5], vec![3.5]).unwrap());
        assert_eq!(b.iter().cloned().collect::<Vec<_>>(), vec![vec![1], vec![2]]);
        assert_eq!(b.union_volume(), 2.0);

        let c = inner_lattice(&Window::cube(2, 2.5).unwrap());
        let expected: Vec<Vec<i64>> = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
        assert_eq!(c.iter().cloned().collect::<Vec<_>>(), expected);
        assert_eq!(c.union_volume(), 4.0);

        let empty = inner_lattice(&Window::new(vec![0.2], vec![1.1]).unwrap());
        assert!(empty.is_empty());
    }

    #[test]
    fn inner_lattice_matches_enumeration() {
        let w = Window::new(vec![-1.3, 0.0, 2.5], vec![2.0, 1.7, 5.0]).unwrap();
        let lattice = inner_lattice(&w);
        let mut count = 0;
        for a in -3..6_i64 {
            for b in -3..6_i64 {
                for c in -3..8_i64 {
                    let cube = LatticeCubeSet::cube(&[a, b, c]);
                    let inside = w.contains_window(&cube);
                    assert_eq!(inside, lattice.contains(&[a, b, c]));
                    count += inside as usize;
                }
            }
        }
        assert_eq!(count, lattice.len());
        let boxed = w.inner_lattice_box().unwrap();
        assert_eq!(boxed.volume(), lattice.union_volume());
    }

    #[test]
    fn diagnostics_examples() {
        let seq: Vec<Window> = [2.0, 4.0, 8.0].iter().map(|&l| Window::cube(1, l).unwrap()).collect();
        let rows = vh_diagnostics(&seq).unwrap();
        let ratios: Vec<f64> = rows.iter().map(|r| r.vh_ratio).collect();
        assert_eq!(ratios, vec![2.0, 1.0, 0.5]);
        assert_eq!(rows[1].inner_volume_fraction, 1.0);

        let shifted = vh_diagnostics(&[Window::new(vec![0.5], vec![4.5]).unwrap()]).unwrap();
        assert_eq!(shifted[0].inner_volume_fraction, 0.75);

        let csv = vh_rows_to_csv(&rows);
        assert!(csv.starts_with("index,volume,vh_ratio,inner_volume_fraction\n0,2.0,2.0,1.0\n"));
    }

    #[test]
    fn diagnostics_errors() {
        assert!(vh_diagnostics(&[]).is_err());
        let mixed = [Window::cube(1, 2.0).unwrap(), Window::cube(2, 2.0).unwrap()];
        assert!(matches!(vh_diagnostics(&mixed), Err(Error::DimensionMismatch { .. })));
    }

    fn arb_window() -> impl Strategy<Value = Window> {
        (1usize..=3)
            .prop_flat_map(|d| {
                (
                    proptest::collection::vec(-5.0f64..5.0, d),
                    proptest::collection::vec(0.1f64..12.0, d),
                )
            })
            .prop_map(|(lo, len)| {
                let hi = lo.iter().zip(&len).map(|(a, b)| a + b).collect();
                Window::new(lo, hi).unwrap()
            })
    }

    proptest! {
        #[test]
        fn sandwich(w in arb_window()) {
            let inner = inner_lattice(&w).union_volume();
            let d = w.dim() as f64;
            prop_assert!(inner <= w.volume() + 1e-12);
            prop_assert!(w.volume() <= inner + w.boundary_collar_volume(d.sqrt()) + 1e-9);
        }

        #[test]
        fn inner_lattice_is_monotone(w in arb_window(), grow in proptest::collection::vec(0.0f64..3.0, 6)) {
            let d = w.dim();
            let lo: Vec<f64> = (0..d).map(|i| -grow[i]).collect();
            let hi: Vec<f64> = (0..d).map(|i| grow[i + 3]).collect();
            let bigger = w.dilate(&lo, &hi).unwrap();
            prop_assert!(inner_lattice(&w).is_subset(&inner_lattice(&bigger)));
        }

        #[test]
        fn volume_is_product_of_sides(w in arb_window()) {
            let p: f64 = w.sides().iter().product();
            prop_assert_eq!(w.volume(), p);
        }
    }
}
