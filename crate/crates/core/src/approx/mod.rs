//! (1+eps)-approximate knapsack for instances with few distinct weights.
//!
//! Items are grouped by weight. Each group's inverted knapsack (cheapest
//! weight reaching a value) is a uniform step function; the groups are
//! combined by (min,+) convolution after rounding every function up to a grid
//! of `eps * b` for a ladder of budgets `b`, and the per-budget results are
//! stitched into one approximation `h~` of the whole instance.

mod step;

use num_traits::{One, Signed, ToPrimitive, Zero};

pub use step::{minplus_conv, same_graph, Extended, InverseFunction, Point, StepFunction, Tag};

use crate::constraint::KnapsackInstance;
use crate::error::{Error, Result};
use crate::knapsack::Selection;
use crate::rational::{format, Rational};

/// A step function whose finite levels are all nonnegative multiples of `unit`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniformStepFunction {
    f: StepFunction,
    unit: Rational,
}

impl UniformStepFunction {
    pub fn new(f: StepFunction, unit: Rational) -> Result<Self> {
        if !unit.is_positive() {
            return Err(Error::InvalidStepFunction(format!(
                "unit must be positive, got {}",
                format(&unit)
            )));
        }
        for p in f.points() {
            if p.y.is_negative() || !(&p.y / &unit).is_integer() {
                return Err(Error::InvalidStepFunction(format!(
                    "level {} is not a nonnegative multiple of {}",
                    format(&p.y),
                    format(&unit)
                )));
            }
        }
        Ok(Self { f, unit })
    }

    pub fn function(&self) -> &StepFunction {
        &self.f
    }

    pub fn into_function(self) -> StepFunction {
        self.f
    }

    pub fn unit(&self) -> &Rational {
        &self.unit
    }

    /// Index of the highest finite level.
    fn top_level(&self) -> usize {
        self.f
            .points()
            .last()
            .map(|p| {
                (&p.y / &self.unit)
                    .to_integer()
                    .to_usize()
                    .expect("level index fits usize")
            })
            .unwrap_or(0)
    }

    /// `min(f, b)`; stays uniform since only points below `b` survive.
    pub fn min_with(&self, b: &Rational) -> Self {
        Self {
            f: self.f.min_with(b),
            unit: self.unit.clone(),
        }
    }
}

/// Items sharing one weight, values sorted descending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightGroup {
    pub weight: Rational,
    pub values: Vec<Rational>,
}

impl WeightGroup {
    pub fn new(weight: Rational, values: Vec<Rational>) -> Result<Self> {
        if !weight.is_positive() {
            return Err(Error::InvalidArgument(format!(
                "group weight must be positive, got {}",
                format(&weight)
            )));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "group values must be sorted descending".into(),
            ));
        }
        if values.iter().any(|v| v.is_negative()) {
            return Err(Error::InvalidArgument(
                "group values must be nonnegative".into(),
            ));
        }
        Ok(Self { weight, values })
    }
}

/// Inverted knapsack of a single group: taking the `j` largest values costs
/// `j * w`, giving points `(v_1 + .. + v_j, j w)` and `+inf` past the total.
/// Points are tagged with the count `j` in slot `slot` of an `m`-vector.
pub fn step_from_group_tagged(
    g: &WeightGroup,
    slot: usize,
    m: usize,
) -> Result<UniformStepFunction> {
    if g.values.is_empty() {
        return Err(Error::InvalidArgument("empty weight group".into()));
    }
    let tag = |j: u32| {
        let mut t = vec![0u32; m];
        t[slot] = j;
        t
    };
    let mut points = vec![Point::tagged(Rational::zero(), Rational::zero(), tag(0))];
    let mut x = Rational::zero();
    for (j, v) in g.values.iter().enumerate() {
        // zero values add weight without reach
        if v.is_zero() {
            continue;
        }
        x += v;
        points.push(Point::tagged(
            x.clone(),
            &g.weight * Rational::from_integer((j as i64 + 1).into()),
            tag(j as u32 + 1),
        ));
    }
    UniformStepFunction::new(StepFunction::new(points, None)?, g.weight.clone())
}

pub fn step_from_group(g: &WeightGroup) -> Result<UniformStepFunction> {
    step_from_group_tagged(g, 0, 1)
}

pub fn invert(f: &StepFunction) -> InverseFunction {
    f.inverse()
}

/// (min,+) convolution of two functions on the same grid: the inverse is
/// tabulated on the grid `{0, w, .., (l_f + l_g) w}` as
/// `max_{y'} f^{-1}(y') + g^{-1}(y - y')` and inverted back. Each cell keeps
/// its maximizing split, which fixes the tag of the resulting point.
pub fn minplus_conv_uniform(
    f: &UniformStepFunction,
    g: &UniformStepFunction,
) -> Result<UniformStepFunction> {
    if f.unit != g.unit {
        return Err(Error::InvalidStepFunction(format!(
            "unit mismatch: {} vs {}",
            format(&f.unit),
            format(&g.unit)
        )));
    }
    let unit = &f.unit;
    let level = |k: usize| unit * Rational::from_integer((k as i64).into());
    // grid inverse: index of the point realizing f^{-1}(k w), or None for
    // -inf; +inf cells lie at or past the cap and are excluded below
    let table = |u: &UniformStepFunction, len: usize| -> Vec<Option<usize>> {
        let pts = u.f.points();
        (0..=len)
            .map(|k| {
                let y = level(k);
                pts.partition_point(|p| p.y <= y).checked_sub(1)
            })
            .collect()
    };
    let (lf, lg) = (f.top_level(), g.top_level());
    let tf = table(f, lf);
    let tg = table(g, lg);
    let cap = step::conv_cap(&f.f, &g.f);
    let mut cands = Vec::new();
    for t in 0..=lf + lg {
        let mut best: Option<(Rational, usize, usize)> = None;
        for a in t.saturating_sub(lg)..=t.min(lf) {
            let (Some(i), Some(j)) = (tf[a], tg[t - a]) else {
                continue;
            };
            let x = &f.f.points()[i].x + &g.f.points()[j].x;
            if best.as_ref().is_none_or(|(bx, _, _)| x > *bx) {
                best = Some((x, i, j));
            }
        }
        if let Some((x, i, j)) = best {
            let tag = step::add_tags(&f.f.points()[i].tag, &g.f.points()[j].tag);
            cands.push(Point::tagged(x, level(t), tag));
        }
    }
    UniformStepFunction::new(StepFunction::from_candidates(cands, cap), unit.clone())
}

/// Rounds `min(f, b)` up to the grid `eps * b`: levels become
/// `ceil(min(b, y) / (eps b)) * eps b`, equal levels merging onto the point
/// with the largest reach.
pub fn clamp_ceil(f: &StepFunction, b: &Rational, eps: &Rational) -> Result<UniformStepFunction> {
    if !b.is_positive() {
        return Err(Error::InvalidArgument(format!(
            "clamp bound must be positive, got {}",
            format(b)
        )));
    }
    check_eps(eps)?;
    let unit = eps * b;
    let round = |y: &Rational| (y.min(b).clone() / &unit).ceil() * &unit;
    let cap = round(f.cap().unwrap_or(b));
    let mut points: Vec<Point> = Vec::new();
    for p in f.points() {
        let y = round(&p.y.clone().max(Rational::zero()));
        match points.last_mut() {
            Some(q) if q.y == y => *q = Point::tagged(p.x.clone(), y, p.tag.clone()),
            _ => points.push(Point::tagged(p.x.clone(), y, p.tag.clone())),
        }
    }
    UniformStepFunction::new(StepFunction::new(points, Some(cap))?, unit)
}

fn check_eps(eps: &Rational) -> Result<()> {
    if !eps.is_positive() || *eps > Rational::one() {
        return Err(Error::InvalidArgument(format!(
            "eps must lie in (0, 1], got {}",
            format(eps)
        )));
    }
    Ok(())
}

/// `psi_b`: rounds every leaf with [`clamp_ceil`], convolves neighbours
/// level by level (an unpaired function moves up unchanged), clamping each
/// result to `b`.
pub fn merge_tree(fs: &[StepFunction], b: &Rational, eps: &Rational) -> Result<StepFunction> {
    if fs.is_empty() {
        return Err(Error::InvalidArgument(
            "merge tree needs at least one function".into(),
        ));
    }
    let mut level = fs
        .iter()
        .map(|f| clamp_ceil(f, b, eps))
        .collect::<Result<Vec<_>>>()?;
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(c) => next.push(minplus_conv_uniform(&a, &c)?.min_with(b)),
                None => next.push(a),
            }
        }
        level = next;
    }
    Ok(level.pop().expect("nonempty").min_with(b).into_function())
}

/// The budget ladder `{ 2^i n max(w) : i <= 0 } ∩ [min(w), n max(w)]`,
/// ascending.
pub fn budget_ladder(groups: &[WeightGroup]) -> Vec<Rational> {
    let n: usize = groups.iter().map(|g| g.values.len()).sum();
    let max_w = groups
        .iter()
        .map(|g| &g.weight)
        .max()
        .cloned()
        .unwrap_or_else(Rational::zero);
    let min_w = groups
        .iter()
        .map(|g| &g.weight)
        .min()
        .cloned()
        .unwrap_or_else(Rational::zero);
    let two = Rational::from_integer(2.into());
    let mut b = max_w * Rational::from_integer((n as i64).into());
    let mut out = Vec::new();
    while b >= min_w && b.is_positive() {
        out.push(b.clone());
        b /= &two;
    }
    out.reverse();
    out
}

/// The ladder rung answering queries at weight budget `y`: the smallest
/// `b > y`, or the top rung when `y` is at or past it.
pub fn bracket_of<'a>(ladder: &'a [Rational], y: &Rational) -> &'a Rational {
    ladder
        .iter()
        .find(|b| y < *b)
        .unwrap_or_else(|| ladder.last().expect("nonempty ladder"))
}

/// Approximate inverted knapsack over weight groups.
#[derive(Clone, Debug)]
pub struct ApproxInverted {
    /// `h~`; point tags give per-group item counts.
    pub h: StepFunction,
    /// Budget ladder used for stitching (empty for a single group).
    pub ladder: Vec<Rational>,
}

impl ApproxInverted {
    /// `h~^{-1}(y)`: the largest value reachable within weight `y`.
    pub fn inverse_eval(&self, y: &Rational) -> Extended {
        self.h.inverse_eval(y)
    }
}

/// Builds `h~` with `h <= h~` pointwise and, writing `b(y)` for
/// [`bracket_of`], `h~(x) - h(x) <= m eps b(h~(x))`.
///
/// For each rung `b`, `psi_b` answers queries in `[b/2, b)` (the lowest rung
/// also answers everything below it). The exact all-items point is added, and
/// the stitched inverse is made nondecreasing by a running maximum. A single
/// group is already exact and is returned unrounded.
pub fn approx_inverted_knapsack(groups: &[WeightGroup], eps: &Rational) -> Result<ApproxInverted> {
    check_eps(eps)?;
    if groups.is_empty() {
        return Err(Error::InvalidArgument("no weight groups".into()));
    }
    let m = groups.len();
    let leaves = groups
        .iter()
        .enumerate()
        .map(|(i, g)| step_from_group_tagged(g, i, m).map(UniformStepFunction::into_function))
        .collect::<Result<Vec<_>>>()?;
    if m == 1 {
        return Ok(ApproxInverted {
            h: leaves.into_iter().next().expect("one leaf"),
            ladder: Vec::new(),
        });
    }

    let ladder = budget_ladder(groups);
    let mut cands = Vec::new();
    let mut lo = Rational::zero();
    for b in &ladder {
        let psi = merge_tree(&leaves, b, eps)?;
        let inv = psi.inverse();
        if let Some(p) = inv.point_at(&lo) {
            cands.push(Point::tagged(p.x.clone(), lo.clone(), p.tag.clone()));
        }
        cands.extend(
            psi.points()
                .iter()
                .filter(|p| p.y > lo && p.y < *b)
                .cloned(),
        );
        lo = b.clone();
    }
    let total_x: Rational = groups.iter().flat_map(|g| g.values.iter()).sum();
    let total_y: Rational = groups
        .iter()
        .map(|g| &g.weight * Rational::from_integer((g.values.len() as i64).into()))
        .sum();
    let all: Tag = groups.iter().map(|g| g.values.len() as u32).collect();
    cands.push(Point::tagged(total_x, total_y, all));
    Ok(ApproxInverted {
        h: StepFunction::from_candidates(cands, None),
        ladder,
    })
}

/// Items of one weight class in solver order: values descending, ties by
/// index.
#[derive(Clone, Debug)]
struct Class {
    group: WeightGroup,
    items: Vec<usize>,
}

fn weight_classes(inst: &KnapsackInstance) -> Vec<Class> {
    let mut by_weight: std::collections::BTreeMap<&Rational, Vec<usize>> = Default::default();
    for (j, w) in inst.weights.iter().enumerate() {
        if w.is_positive() {
            by_weight.entry(w).or_default().push(j);
        }
    }
    by_weight
        .into_iter()
        .map(|(w, mut items)| {
            items.sort_by(|&a, &b| inst.values[b].cmp(&inst.values[a]).then(a.cmp(&b)));
            let values = items.iter().map(|&j| inst.values[j].clone()).collect();
            Class {
                group: WeightGroup {
                    weight: w.clone(),
                    values,
                },
                items,
            }
        })
        .collect()
}

/// Zero-weight items are always taken; the rest are split by weight and the
/// per-class counts are read off `h~^{-1}(capacity)`. Within a class the
/// largest values are taken.
pub fn approx_knapsack_solve(inst: &KnapsackInstance, eps: &Rational) -> Result<Selection> {
    check_eps(eps)?;
    if inst.capacity.is_negative() {
        return Err(Error::NegativeCapacity(Box::new(inst.capacity.clone())));
    }
    let mut xi: Vec<bool> = inst.weights.iter().map(Zero::is_zero).collect();
    let classes = weight_classes(inst);
    if !classes.is_empty() {
        let groups: Vec<WeightGroup> = classes.iter().map(|c| c.group.clone()).collect();
        let approx = approx_inverted_knapsack(&groups, eps)?;
        let point = approx
            .h
            .inverse()
            .point_at(&inst.capacity)
            .cloned()
            .expect("h~ starts at (0, 0) and the capacity is nonnegative");
        for (class, &count) in classes.iter().zip(&point.tag) {
            for &j in &class.items[..count as usize] {
                xi[j] = true;
            }
        }
    }
    Ok(Selection::from_xi(inst, xi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn group(w: i64, values: &[i64]) -> WeightGroup {
        WeightGroup::new(int(w), values.iter().map(|&v| int(v)).collect()).unwrap()
    }

    fn fin(v: Rational) -> Extended {
        Extended::Finite(v)
    }

    #[test]
    fn group_step_function() {
        let h = step_from_group(&group(2, &[3, 2])).unwrap();
        let f = h.function();
        assert_eq!(f.eval(&int(0)), fin(int(0)));
        assert_eq!(f.eval(&int(3)), fin(int(2)));
        assert_eq!(f.eval(&ratio(7, 2)), fin(int(4)));
        assert_eq!(f.eval(&int(5)), fin(int(4)));
        assert_eq!(f.eval(&int(6)), Extended::PosInf);
        assert_eq!(invert(f).eval(&int(3)), fin(int(3)));

        let h = step_from_group(&group(1, &[1, 1, 1])).unwrap();
        assert_eq!(h.function().eval(&ratio(5, 2)), fin(int(3)));
        assert!(WeightGroup::new(int(1), vec![int(1), int(2)]).is_err());
    }

    #[test]
    fn uniform_convolution_matches_general() {
        let f = step_from_group(&group(1, &[3])).unwrap();
        let g = step_from_group(&group(1, &[2])).unwrap();
        let h = minplus_conv_uniform(&f, &g).unwrap();
        assert_eq!(h.function().eval(&int(3)), fin(int(1)));
        assert_eq!(h.function().eval(&int(4)), fin(int(2)));
        assert_eq!(h.function().eval(&int(5)), fin(int(2)));
        assert_eq!(h.function().eval(&int(6)), Extended::PosInf);
        assert_eq!(h.function(), &minplus_conv(f.function(), g.function()));

        let other = step_from_group(&group(2, &[2])).unwrap();
        assert!(minplus_conv_uniform(&f, &other).is_err());
    }

    #[test]
    fn clamp_ceil_rounds_up() {
        let f = StepFunction::from_pairs(&[(int(0), int(0)), (int(1), int(3))], None).unwrap();
        let u = clamp_ceil(&f, &int(4), &ratio(1, 2)).unwrap();
        assert_eq!(u.function().eval(&int(1)), fin(int(4)));
        assert_eq!(u.unit(), &int(2));

        let g =
            StepFunction::from_pairs(&[(int(0), int(0)), (int(1), int(2))], Some(int(4))).unwrap();
        let u = clamp_ceil(&g, &int(4), &ratio(1, 2)).unwrap();
        assert_eq!(u.function(), &g);
    }

    #[test]
    fn ladder_and_brackets() {
        let groups = [group(3, &[1, 1]), group(1, &[1])];
        // n max w = 9: rungs 9, 9/2, 9/4, 9/8
        let ladder = budget_ladder(&groups);
        assert_eq!(ladder, vec![ratio(9, 8), ratio(9, 4), ratio(9, 2), int(9)]);
        assert_eq!(bracket_of(&ladder, &int(0)), &ratio(9, 8));
        assert_eq!(bracket_of(&ladder, &int(3)), &ratio(9, 2));
        assert_eq!(bracket_of(&ladder, &int(20)), &int(9));
    }

    #[test]
    fn single_group_is_exact() {
        let g = group(3, &[5, 4, 1]);
        let a = approx_inverted_knapsack(std::slice::from_ref(&g), &int(1)).unwrap();
        assert_eq!(&a.h, step_from_group(&g).unwrap().function());
    }

    #[test]
    fn approx_solver_beats_early_exit() {
        let inst = KnapsackInstance::new(
            vec![int(60), int(50), int(50)],
            vec![int(10), int(9), int(9)],
            int(18),
        )
        .unwrap();
        let s = approx_knapsack_solve(&inst, &ratio(1, 100)).unwrap();
        assert_eq!(s.objective, int(100));
        assert_eq!(s.xi, vec![false, true, true]);
    }

    #[test]
    fn zero_weights_are_free() {
        let inst =
            KnapsackInstance::new(vec![int(1), int(2)], vec![int(0), int(0)], int(0)).unwrap();
        assert_eq!(
            approx_knapsack_solve(&inst, &ratio(1, 2)).unwrap().xi,
            vec![true, true]
        );
    }
}
