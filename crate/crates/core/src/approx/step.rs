//! Nondecreasing piecewise-constant functions on the rationals.
//!
//! A [`StepFunction`] is stored as points `(x_k, y_k)`, strictly increasing
//! in both coordinates, plus an optional cap:
//!
//! ```text
//! f(x) = y_0            x <= x_0
//! f(x) = y_k            x_{k-1} < x <= x_k
//! f(x) = cap (or +inf)  x > x_last
//! ```
//!
//! With no points the function is the constant `cap`. Every point may carry a
//! tag: a count vector naming a subset that realizes it. Tags add under
//! convolution and survive rounding, so an optimal point can be traced back to
//! an explicit selection.

use std::fmt;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{format, Rational};

/// A rational extended with both infinities.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Extended {
    NegInf,
    Finite(Rational),
    PosInf,
}

impl Extended {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Extended::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }
}

impl From<Rational> for Extended {
    fn from(v: Rational) -> Self {
        Extended::Finite(v)
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::NegInf => f.write_str("-inf"),
            Extended::Finite(v) => f.write_str(&format(v)),
            Extended::PosInf => f.write_str("inf"),
        }
    }
}

/// Per-group item counts of the subset behind a point; empty when unknown.
pub type Tag = Vec<u32>;

pub(crate) fn add_tags(a: &Tag, b: &Tag) -> Tag {
    if a.is_empty() || b.is_empty() {
        return Tag::new();
    }
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[derive(Clone, Debug, Eq)]
pub struct Point {
    pub x: Rational,
    pub y: Rational,
    pub tag: Tag,
}

impl Point {
    pub fn new(x: Rational, y: Rational) -> Self {
        Self {
            x,
            y,
            tag: Tag::new(),
        }
    }

    pub fn tagged(x: Rational, y: Rational, tag: Tag) -> Self {
        Self { x, y, tag }
    }
}

/// Tags are bookkeeping; equality is on coordinates.
impl PartialEq for Point {
    fn eq(&self, other: &Self) -> bool {
        self.x == other.x && self.y == other.y
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepFunction {
    points: Vec<Point>,
    cap: Option<Rational>,
}

impl StepFunction {
    /// Validates strict monotonicity and `cap >= y_last`; points at or above
    /// the cap are dropped since the cap already covers them.
    pub fn new(points: Vec<Point>, cap: Option<Rational>) -> Result<Self> {
        for pair in points.windows(2) {
            if pair[1].x <= pair[0].x || pair[1].y <= pair[0].y {
                return Err(Error::InvalidStepFunction(format!(
                    "points must increase strictly: ({}, {}) then ({}, {})",
                    format(&pair[0].x),
                    format(&pair[0].y),
                    format(&pair[1].x),
                    format(&pair[1].y)
                )));
            }
        }
        if points.is_empty() && cap.is_none() {
            return Err(Error::InvalidStepFunction("no points and no cap".into()));
        }
        Ok(Self::normalized(points, cap))
    }

    pub fn from_pairs(pairs: &[(Rational, Rational)], cap: Option<Rational>) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|(x, y)| Point::new(x.clone(), y.clone()))
                .collect(),
            cap,
        )
    }

    fn normalized(mut points: Vec<Point>, cap: Option<Rational>) -> Self {
        if let Some(c) = &cap {
            while points.last().is_some_and(|p| p.y >= *c) {
                points.pop();
            }
        }
        Self { points, cap }
    }

    /// The constant function `c`.
    pub fn constant(c: Rational) -> Self {
        Self {
            points: Vec::new(),
            cap: Some(c),
        }
    }

    /// `0` for `x <= 0`, `+inf` beyond: the neutral element of convolution.
    pub fn zero() -> Self {
        Self {
            points: vec![Point::new(Rational::zero(), Rational::zero())],
            cap: None,
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn cap(&self) -> Option<&Rational> {
        self.cap.as_ref()
    }

    /// Value left of (and at) the first point.
    pub fn floor_value(&self) -> Extended {
        match (self.points.first(), &self.cap) {
            (Some(p), _) => Extended::Finite(p.y.clone()),
            (None, Some(c)) => Extended::Finite(c.clone()),
            (None, None) => Extended::PosInf,
        }
    }

    pub fn eval(&self, x: &Rational) -> Extended {
        // first point with p.x >= x
        let i = self.points.partition_point(|p| p.x < *x);
        match self.points.get(i) {
            Some(p) => Extended::Finite(p.y.clone()),
            None => match &self.cap {
                Some(c) => Extended::Finite(c.clone()),
                None => Extended::PosInf,
            },
        }
    }

    /// The point realizing `f(x)`, if `x` is not beyond the last point.
    pub fn point_at(&self, x: &Rational) -> Option<&Point> {
        let i = self.points.partition_point(|p| p.x < *x);
        self.points.get(i)
    }

    pub fn is_nonnegative(&self) -> bool {
        match self.floor_value() {
            Extended::Finite(v) => !v.is_negative(),
            _ => true,
        }
    }

    /// `min(f, b)`.
    pub fn min_with(&self, b: &Rational) -> Self {
        let cap = match &self.cap {
            Some(c) if c < b => c.clone(),
            _ => b.clone(),
        };
        Self::normalized(self.points.clone(), Some(cap))
    }

    pub fn inverse(&self) -> InverseFunction {
        InverseFunction {
            points: self.points.clone(),
            cap: self.cap.clone(),
        }
    }

    /// Largest `x` with `f(x) <= y`.
    pub fn inverse_eval(&self, y: &Rational) -> Extended {
        self.inverse().eval(y)
    }

    /// Every coordinate where the graph can change: the point abscissae.
    pub fn breakpoints(&self) -> impl Iterator<Item = &Rational> {
        self.points.iter().map(|p| &p.x)
    }

    /// Builds the nondecreasing function whose inverse is the pointwise
    /// maximum of the given (level, reach) candidates: for each level `y`,
    /// `x` is reachable at cost `y`. Candidates at or above `cap` are ignored.
    pub(crate) fn from_candidates(mut cands: Vec<Point>, cap: Option<Rational>) -> Self {
        if let Some(c) = &cap {
            cands.retain(|p| p.y < *c);
        }
        // by level, then larger reach first
        cands.sort_by(|a, b| a.y.cmp(&b.y).then_with(|| b.x.cmp(&a.x)));
        let mut points: Vec<Point> = Vec::new();
        for p in cands {
            // equal levels arrive best-first, so the rest fail this test
            if points.last().is_none_or(|q| p.x > q.x) {
                points.push(p);
            }
        }
        Self::normalized(points, cap)
    }
}

impl fmt::Display for StepFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, p) in self.points.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "({}, {})", format(&p.x), format(&p.y))?;
        }
        match &self.cap {
            Some(c) => write!(f, "] cap {}", format(c)),
            None => f.write_str("] cap inf"),
        }
    }
}

/// `f^{-1}(y) = max { x : f(x) <= y }` over the same points: `-inf` below the
/// first level, `x_k` on `[y_k, y_{k+1})`, and `+inf` from the cap on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InverseFunction {
    points: Vec<Point>,
    cap: Option<Rational>,
}

impl InverseFunction {
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn eval(&self, y: &Rational) -> Extended {
        if let Some(c) = &self.cap {
            if y >= c {
                return Extended::PosInf;
            }
        }
        // last point with p.y <= y
        let i = self.points.partition_point(|p| p.y <= *y);
        match i {
            0 => Extended::NegInf,
            i => Extended::Finite(self.points[i - 1].x.clone()),
        }
    }

    /// The point realizing `f^{-1}(y)` when it is finite.
    pub fn point_at(&self, y: &Rational) -> Option<&Point> {
        if self.cap.as_ref().is_some_and(|c| y >= c) {
            return None;
        }
        let i = self.points.partition_point(|p| p.y <= *y);
        i.checked_sub(1).map(|i| &self.points[i])
    }

    pub fn invert(&self) -> StepFunction {
        StepFunction {
            points: self.points.clone(),
            cap: self.cap.clone(),
        }
    }
}

/// `(f (+) g)(x) = min_{x'} f(x') + g(x - x')` for arbitrary step functions.
///
/// The inverse of the result is the (max,+) convolution of the inverses,
/// attained on sums of point pairs.
pub fn minplus_conv(f: &StepFunction, g: &StepFunction) -> StepFunction {
    let cap = conv_cap(f, g);
    let mut cands = Vec::with_capacity(f.points.len() * g.points.len());
    for p in &f.points {
        for q in &g.points {
            cands.push(Point::tagged(
                &p.x + &q.x,
                &p.y + &q.y,
                add_tags(&p.tag, &q.tag),
            ));
        }
    }
    StepFunction::from_candidates(cands, cap)
}

/// Level from which `f (+) g` is constant: `min(cap_f + g_0, cap_g + f_0)`.
pub(crate) fn conv_cap(f: &StepFunction, g: &StepFunction) -> Option<Rational> {
    let side = |a: &StepFunction, b: &StepFunction| match (&a.cap, b.floor_value()) {
        (Some(c), Extended::Finite(v)) => Some(c + v),
        _ => None,
    };
    match (side(f, g), side(g, f)) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Compares two functions on every breakpoint of either and just past the
/// last one; exact for step functions.
pub fn same_graph(f: &StepFunction, g: &StepFunction) -> bool {
    let mut xs: Vec<Rational> = f.breakpoints().chain(g.breakpoints()).cloned().collect();
    xs.sort();
    xs.dedup();
    let one = Rational::from_integer(1.into());
    let (lo, hi) = match (xs.first(), xs.last()) {
        (Some(lo), Some(hi)) => (lo - &one, hi + &one),
        _ => (Rational::zero(), Rational::zero()),
    };
    xs.push(lo);
    xs.push(hi);
    xs.iter().all(|x| f.eval(x) == g.eval(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn step(pairs: &[(i64, i64)], cap: Option<i64>) -> StepFunction {
        let pairs: Vec<_> = pairs.iter().map(|&(x, y)| (int(x), int(y))).collect();
        StepFunction::from_pairs(&pairs, cap.map(int)).unwrap()
    }

    #[test]
    fn evaluation_is_left_continuous() {
        let f = step(&[(0, 0), (3, 2), (5, 4)], None);
        assert_eq!(f.eval(&int(-1)), Extended::Finite(int(0)));
        assert_eq!(f.eval(&int(0)), Extended::Finite(int(0)));
        assert_eq!(f.eval(&ratio(1, 2)), Extended::Finite(int(2)));
        assert_eq!(f.eval(&int(3)), Extended::Finite(int(2)));
        assert_eq!(f.eval(&int(4)), Extended::Finite(int(4)));
        assert_eq!(f.eval(&int(6)), Extended::PosInf);
    }

    #[test]
    fn inverse_values() {
        let f = step(&[(0, 0), (3, 2), (5, 4)], None);
        let inv = f.inverse();
        assert_eq!(inv.eval(&int(2)), Extended::Finite(int(3)));
        assert_eq!(inv.eval(&int(3)), Extended::Finite(int(3)));
        assert_eq!(inv.eval(&int(4)), Extended::Finite(int(5)));
        assert_eq!(inv.eval(&int(100)), Extended::Finite(int(5)));
        assert_eq!(inv.eval(&int(-1)), Extended::NegInf);
        assert_eq!(inv.invert(), f);

        let single = step(&[(0, 0), (7, 3)], None);
        assert_eq!(single.inverse_eval(&int(3)), Extended::Finite(int(7)));
        assert_eq!(
            single.inverse_eval(&ratio(29, 10)),
            Extended::Finite(int(0))
        );
    }

    #[test]
    fn capped_inverse_is_infinite_past_cap() {
        let f = step(&[(0, 0), (3, 2)], Some(4));
        assert_eq!(f.eval(&int(10)), Extended::Finite(int(4)));
        assert_eq!(f.inverse_eval(&int(3)), Extended::Finite(int(3)));
        assert_eq!(f.inverse_eval(&int(4)), Extended::PosInf);
    }

    #[test]
    fn rejects_non_monotone_points() {
        let pairs = [(int(0), int(1)), (int(1), int(0))];
        assert!(StepFunction::from_pairs(&pairs, None).is_err());
        let pairs = [(int(0), int(0)), (int(0), int(1))];
        assert!(StepFunction::from_pairs(&pairs, None).is_err());
    }

    #[test]
    fn convolution_of_two_items() {
        let f = step(&[(0, 0), (3, 1)], None);
        let g = step(&[(0, 0), (2, 1)], None);
        let h = minplus_conv(&f, &g);
        assert_eq!(h.eval(&int(3)), Extended::Finite(int(1)));
        assert_eq!(h.eval(&int(4)), Extended::Finite(int(2)));
        assert_eq!(h.eval(&int(5)), Extended::Finite(int(2)));
        assert_eq!(h.eval(&int(6)), Extended::PosInf);
        assert_eq!(minplus_conv(&f, &StepFunction::zero()), f);
        assert_eq!(minplus_conv(&g, &f), h);
    }

    #[test]
    fn min_with_drops_points_above() {
        let f = step(&[(0, 0), (3, 2), (5, 4)], None);
        let m = f.min_with(&int(3));
        assert_eq!(m, step(&[(0, 0), (3, 2)], Some(3)));
        let c = f.min_with(&int(0));
        assert_eq!(c, StepFunction::constant(int(0)));
        assert_eq!(c.eval(&int(-5)), Extended::Finite(int(0)));
    }

    #[test]
    fn constant_convolution() {
        let c = StepFunction::constant(int(2));
        let g = step(&[(0, 1), (4, 3)], None);
        let h = minplus_conv(&c, &g);
        assert!(same_graph(&h, &StepFunction::constant(int(3))));
    }
}
