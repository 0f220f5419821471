//! Jordan decomposition of piecewise monotone functions of one variable.
//!
//! For `f` of bounded variation on `[a, b]` with `a <= 0 <= b`, let `P` and
//! `N` be the running positive and negative variation from `a`. Then
//!
//! * `f+(t) = f(0) + P(t) - P(0)` is nondecreasing,
//! * `f-(t) = f(t) - f+(t)` is nonincreasing,
//! * `h(t) = f+(t) - f-(t)` is nondecreasing, and `h(t2) - h(t1)` is the
//!   total variation of `f` over `[t1, t2]`,
//! * `f = g(h)` for a `g` with Lipschitz constant 1.
//!
//! `g` is piecewise linear with slopes in `{-1, 1}` on the range of `h`.
//! Jumps of `f` leave open gaps in that range, which are filled affinely.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MONOTONE_CHECK_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Constant,
}

/// A polynomial piece `sum_k poly[k] x^k` in the absolute coordinate `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub direction: Direction,
    pub poly: Vec<f64>,
}

impl Piece {
    pub fn new(direction: Direction, poly: Vec<f64>) -> Self {
        Self { direction, poly }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.poly.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

/// Piecewise monotone function on `[b_0, b_k]`, extended constantly outside.
///
/// Piece `i` lives on `(b_i, b_{i+1})`. At a breakpoint the value is taken
/// from `point_values` when given; otherwise the function is right-continuous,
/// except at `b_k` where it takes the left limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPiecewise")]
pub struct PiecewiseMonotoneFn {
    breakpoints: Vec<f64>,
    pieces: Vec<Piece>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    point_values: Option<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawPiecewise {
    breakpoints: Vec<f64>,
    pieces: Vec<Piece>,
    #[serde(default)]
    point_values: Option<Vec<f64>>,
}

impl TryFrom<RawPiecewise> for PiecewiseMonotoneFn {
    type Error = Error;
    fn try_from(raw: RawPiecewise) -> Result<Self> {
        Self::new(raw.breakpoints, raw.pieces, raw.point_values)
    }
}

impl PiecewiseMonotoneFn {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Piece>, point_values: Option<Vec<f64>>) -> Result<Self> {
        let f = Self {
            breakpoints,
            pieces,
            point_values,
        };
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<()> {
        let b = &self.breakpoints;
        if b.len() < 2 {
            return Err(Error::BoundedVariation("need at least two breakpoints".into()));
        }
        if b.iter().any(|x| !x.is_finite()) || b.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::BoundedVariation(
                "breakpoints must be finite and strictly increasing".into(),
            ));
        }
        if self.pieces.len() != b.len() - 1 {
            return Err(Error::BoundedVariation(format!(
                "{} breakpoints need {} pieces, got {}",
                b.len(),
                b.len() - 1,
                self.pieces.len()
            )));
        }
        if let Some(pv) = &self.point_values {
            if pv.len() != b.len() {
                return Err(Error::BoundedVariation(
                    "point_values must have one entry per breakpoint".into(),
                ));
            }
            if pv.iter().any(|v| !v.is_finite()) {
                return Err(Error::BoundedVariation("point values must be finite".into()));
            }
        }
        for (i, piece) in self.pieces.iter().enumerate() {
            if piece.poly.iter().any(|c| !c.is_finite()) {
                return Err(Error::BoundedVariation(format!(
                    "piece {i} has non-finite coefficients"
                )));
            }
            let (lo, hi) = (b[i], b[i + 1]);
            let values: Vec<f64> = (0..=MONOTONE_CHECK_POINTS)
                .map(|k| piece.eval(lo + (hi - lo) * k as f64 / MONOTONE_CHECK_POINTS as f64))
                .collect();
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::BoundedVariation(format!(
                    "piece {i} is not finite on its interval"
                )));
            }
            let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let slack = 1e-12 * scale;
            let ok = match piece.direction {
                Direction::Up => values.windows(2).all(|w| w[1] >= w[0] - slack),
                Direction::Down => values.windows(2).all(|w| w[1] <= w[0] + slack),
                Direction::Constant => values.iter().all(|v| (v - values[0]).abs() <= slack),
            };
            if !ok {
                return Err(Error::BoundedVariation(format!(
                    "piece {i} on [{lo}, {hi}] is not {:?}",
                    piece.direction
                )));
            }
        }
        Ok(())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn lower(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn upper(&self) -> f64 {
        *self.breakpoints.last().expect("validated")
    }

    fn breakpoint_value(&self, i: usize) -> f64 {
        if let Some(pv) = &self.point_values {
            return pv[i];
        }
        let last = self.pieces.len();
        let b = self.breakpoints[i];
        if i < last {
            self.pieces[i].eval(b)
        } else {
            self.pieces[last - 1].eval(b)
        }
    }

    fn position(&self, x: f64) -> std::result::Result<usize, usize> {
        self.breakpoints.binary_search_by(|b| b.total_cmp(&x))
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.lower() {
            return self.breakpoint_value(0);
        }
        if x >= self.upper() {
            return self.breakpoint_value(self.breakpoints.len() - 1);
        }
        match self.position(x) {
            Ok(i) => self.breakpoint_value(i),
            Err(i) => self.pieces[i - 1].eval(x),
        }
    }

    pub fn right_limit(&self, x: f64) -> f64 {
        if x < self.lower() || x >= self.upper() {
            return self.eval(x);
        }
        match self.position(x) {
            Ok(i) => self.pieces[i].eval(x),
            Err(i) => self.pieces[i - 1].eval(x),
        }
    }

    pub fn left_limit(&self, x: f64) -> f64 {
        if x <= self.lower() || x > self.upper() {
            return self.eval(x);
        }
        match self.position(x) {
            Ok(i) => self.pieces[i - 1].eval(x),
            Err(i) => self.pieces[i - 1].eval(x),
        }
    }

    /// `|x|` on `[lo, hi]` with `lo < 0 < hi`.
    pub fn abs(lo: f64, hi: f64) -> Result<Self> {
        Self::new(
            vec![lo, 0.0, hi],
            vec![
                Piece::new(Direction::Down, vec![0.0, -1.0]),
                Piece::new(Direction::Up, vec![0.0, 1.0]),
            ],
            None,
        )
    }

    /// `min(x, cap)` on `[lo, hi]` with `lo < cap < hi`.
    pub fn min_cap(cap: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(
            vec![lo, cap, hi],
            vec![
                Piece::new(Direction::Up, vec![0.0, 1.0]),
                Piece::new(Direction::Constant, vec![cap]),
            ],
            None,
        )
    }
}

/// Variation state at one point of the evaluation chain.
#[derive(Debug, Clone, Copy)]
struct Node {
    x: f64,
    left: f64,
    value: f64,
    right: f64,
    // cumulative (positive, negative) variation at left limit, value, right limit
    pv: [f64; 3],
    nv: [f64; 3],
}

fn build_chain(f: &PiecewiseMonotoneFn, a: f64, b: f64) -> Result<Vec<Node>> {
    if !(a < b) {
        return Err(Error::BoundedVariation(format!("need a < b, got [{a}, {b}]")));
    }
    if a < f.lower() || b > f.upper() {
        return Err(Error::BoundedVariation(format!(
            "interval [{a}, {b}] is outside the domain [{}, {}]",
            f.lower(),
            f.upper()
        )));
    }
    let mut points = vec![a];
    points.extend(f.breakpoints.iter().copied().filter(|&x| x > a && x < b));
    points.push(b);

    let up = |from: f64, to: f64| (to - from).max(0.0);
    let down = |from: f64, to: f64| (from - to).max(0.0);

    let mut nodes: Vec<Node> = Vec::with_capacity(points.len());
    for (k, &x) in points.iter().enumerate() {
        let value = f.eval(x);
        let right = if k + 1 == points.len() { value } else { f.right_limit(x) };
        let (left, pl, nl) = match nodes.last() {
            None => (value, 0.0, 0.0),
            Some(prev) => {
                let left = f.left_limit(x);
                (
                    left,
                    prev.pv[2] + up(prev.right, left),
                    prev.nv[2] + down(prev.right, left),
                )
            }
        };
        let pm = pl + up(left, value);
        let nm = nl + down(left, value);
        nodes.push(Node {
            x,
            left,
            value,
            right,
            pv: [pl, pm, pm + up(value, right)],
            nv: [nl, nm, nm + down(value, right)],
        });
    }
    Ok(nodes)
}

/// Cumulative (positive, negative) variation of `f` from the chain start to `t`.
fn variation_at(f: &PiecewiseMonotoneFn, nodes: &[Node], t: f64) -> (f64, f64) {
    let first = &nodes[0];
    let last = &nodes[nodes.len() - 1];
    if t <= first.x {
        return (first.pv[1], first.nv[1]);
    }
    if t >= last.x {
        return (last.pv[1], last.nv[1]);
    }
    match nodes.binary_search_by(|n| n.x.total_cmp(&t)) {
        Ok(i) => (nodes[i].pv[1], nodes[i].nv[1]),
        Err(i) => {
            let n = &nodes[i - 1];
            let v = f.eval(t);
            (n.pv[2] + (v - n.right).max(0.0), n.nv[2] + (n.right - v).max(0.0))
        }
    }
}

/// Total variation of `f` over `[a, b]`, jumps included.
pub fn total_variation(f: &PiecewiseMonotoneFn, a: f64, b: f64) -> Result<f64> {
    let nodes = build_chain(f, a, b)?;
    let last = nodes.last().expect("nonempty chain");
    Ok(last.pv[1] + last.nv[1])
}

/// An open gap `(lower, upper)` in the range of `h`, filled by `g(x) = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gap {
    pub lower: f64,
    pub upper: f64,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    f: PiecewiseMonotoneFn,
    nodes: Vec<Node>,
    f0: f64,
    p0: f64,
    n0: f64,
    /// knots `(h, g(h))` of the piecewise linear `g`, strictly increasing in `h`
    knots: Vec<(f64, f64)>,
    gaps: Vec<Gap>,
}

/// Decomposes `f` on `domain = (a, b)`, which must contain 0 and lie in `f`'s domain.
pub fn jordan_decompose(f: &PiecewiseMonotoneFn, domain: (f64, f64)) -> Result<Decomposition> {
    let (a, b) = domain;
    if !(a <= 0.0 && 0.0 <= b) {
        return Err(Error::BoundedVariation(format!("domain [{a}, {b}] does not contain 0")));
    }
    let nodes = build_chain(f, a, b)?;
    let f0 = f.eval(0.0);
    let (p0, n0) = variation_at(f, &nodes, 0.0);
    let h_of = |pv: f64, nv: f64| f0 + (pv - p0) + (nv - n0);

    let mut chain: Vec<(f64, f64, bool)> = Vec::new(); // (h, f, reached by a jump)
    for (k, n) in nodes.iter().enumerate() {
        if k > 0 {
            chain.push((h_of(n.pv[0], n.nv[0]), n.left, false));
        }
        chain.push((h_of(n.pv[1], n.nv[1]), n.value, k > 0));
        if k + 1 < nodes.len() {
            chain.push((h_of(n.pv[2], n.nv[2]), n.right, true));
        }
    }

    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(chain.len());
    let mut gaps = Vec::new();
    for &(h, v, jump) in &chain {
        match knots.last() {
            Some(&(lh, lv)) if h <= lh => {
                debug_assert!((v - lv).abs() <= 1e-9 * lv.abs().max(1.0));
            }
            Some(&(lh, lv)) => {
                if jump {
                    let slope = if v >= lv { 1.0 } else { -1.0 };
                    gaps.push(Gap {
                        lower: lh,
                        upper: h,
                        slope,
                        intercept: lv - slope * lh,
                    });
                }
                knots.push((h, v));
            }
            None => knots.push((h, v)),
        }
    }

    Ok(Decomposition {
        f: f.clone(),
        nodes,
        f0,
        p0,
        n0,
        knots,
        gaps,
    })
}

impl Decomposition {
    pub fn domain(&self) -> (f64, f64) {
        (self.nodes[0].x, self.nodes[self.nodes.len() - 1].x)
    }

    /// `f(t)`, with `t` clamped to the domain.
    pub fn f(&self, t: f64) -> f64 {
        let (a, b) = self.domain();
        self.f.eval(t.clamp(a, b))
    }

    pub fn f_plus(&self, t: f64) -> f64 {
        let (pv, _) = variation_at(&self.f, &self.nodes, t);
        self.f0 + (pv - self.p0)
    }

    pub fn f_minus(&self, t: f64) -> f64 {
        let (_, nv) = variation_at(&self.f, &self.nodes, t);
        self.n0 - nv
    }

    pub fn h(&self, t: f64) -> f64 {
        let (pv, nv) = variation_at(&self.f, &self.nodes, t);
        self.f0 + (pv - self.p0) + (nv - self.n0)
    }

    pub fn g(&self, x: f64) -> f64 {
        eval_g(self, x)
    }

    pub fn gaps(&self) -> &[Gap] {
        &self.gaps
    }

    /// Closed convex hull of the range of `h`.
    pub fn h_range(&self) -> (f64, f64) {
        (self.knots[0].0, self.knots[self.knots.len() - 1].0)
    }
}

/// `g(x)`: linear between knots of the range of `h`, constant outside its hull.
pub fn eval_g(dec: &Decomposition, x: f64) -> f64 {
    let knots = &dec.knots;
    let (h0, v0) = knots[0];
    let (hn, vn) = knots[knots.len() - 1];
    if x <= h0 {
        return v0;
    }
    if x >= hn {
        return vn;
    }
    let i = knots.partition_point(|&(h, _)| h <= x);
    let (ha, va) = knots[i - 1];
    let (hb, vb) = knots[i];
    va + (x - ha) * (vb - va) / (hb - ha)
}
