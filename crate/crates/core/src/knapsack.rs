//! Solvers for the projection knapsack and the weight projection built on them.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::constraint::{apply_selection, build_knapsack, KnapsackInstance, LayerCoeffs};
use crate::error::{Error, Result};
use crate::rational::{common_denominator, gcd_all, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selection {
    pub xi: Vec<bool>,
    pub objective: Rational,
    pub load: Rational,
    /// Capacity minus load.
    pub remaining: Rational,
}

impl Selection {
    pub fn from_xi(inst: &KnapsackInstance, xi: Vec<bool>) -> Self {
        let mut objective = Rational::zero();
        let mut load = Rational::zero();
        for (j, _) in xi.iter().enumerate().filter(|(_, &b)| b) {
            objective += &inst.values[j];
            load += &inst.weights[j];
        }
        let remaining = &inst.capacity - &load;
        Self {
            xi,
            objective,
            load,
            remaining,
        }
    }

    pub fn count(&self) -> usize {
        self.xi.iter().filter(|&&b| b).count()
    }

    pub fn is_feasible(&self) -> bool {
        !self.remaining.is_negative()
    }
}

fn check_capacity(inst: &KnapsackInstance) -> Result<()> {
    if inst.capacity.is_negative() {
        return Err(Error::NegativeCapacity(Box::new(inst.capacity.clone())));
    }
    Ok(())
}

/// Descending value/weight, zero weight counting as infinite density.
fn cmp_density(inst: &KnapsackInstance, a: usize, b: usize) -> Ordering {
    let (wa, wb) = (&inst.weights[a], &inst.weights[b]);
    match (wa.is_zero(), wb.is_zero()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        // va/wa > vb/wb  <=>  va*wb > vb*wa
        (false, false) => (&inst.values[b] * wa).cmp(&(&inst.values[a] * wb)),
    }
}

/// Item indices in greedy scan order: density desc, weight asc, index asc.
pub fn density_order(inst: &KnapsackInstance) -> Vec<usize> {
    let mut order: Vec<usize> = (0..inst.len()).collect();
    order.sort_by(|&a, &b| {
        cmp_density(inst, a, b)
            .then_with(|| inst.weights[a].cmp(&inst.weights[b]))
            .then(a.cmp(&b))
    });
    order
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GreedyMode {
    /// Stop at the first item that does not fit.
    #[default]
    EarlyExit,
    /// Skip items that do not fit and keep scanning.
    SkipAndContinue,
}

/// Profit-density greedy with the literal early exit.
pub fn greedy_solve(inst: &KnapsackInstance) -> Result<Selection> {
    greedy_solve_with(inst, GreedyMode::EarlyExit)
}

pub fn greedy_solve_with(inst: &KnapsackInstance, mode: GreedyMode) -> Result<Selection> {
    check_capacity(inst)?;
    let mut xi = vec![false; inst.len()];
    let mut load = Rational::zero();
    for j in density_order(inst) {
        let next = &load + &inst.weights[j];
        if next > inst.capacity {
            match mode {
                GreedyMode::EarlyExit => break,
                GreedyMode::SkipAndContinue => continue,
            }
        }
        load = next;
        xi[j] = true;
    }
    Ok(Selection::from_xi(inst, xi))
}

/// Largest DP table (items x capacity cells) the exact solver will allocate.
pub const MAX_DP_CELLS: usize = 4_000_000;
/// Largest item count the exact solver enumerates when the DP is too big.
pub const MAX_ENUM_ITEMS: usize = 24;

/// Globally optimal selection; among optima, the lexicographically smallest
/// `xi` (with `false < true`).
pub fn exact_solve_dp(inst: &KnapsackInstance) -> Result<Selection> {
    check_capacity(inst)?;
    let n = inst.len();
    let scale = common_denominator(inst.weights.iter().chain(std::iter::once(&inst.capacity)));
    let weights: Vec<BigInt> = inst
        .weights
        .iter()
        .map(|w| (w * &scale).to_integer())
        .collect();
    let cap = (&inst.capacity * &scale).floor().to_integer();
    let vscale = common_denominator(&inst.values);
    let values: Vec<BigInt> = inst
        .values
        .iter()
        .map(|v| (v * &vscale).to_integer())
        .collect();

    let cells = cap
        .to_usize()
        .and_then(|c| c.checked_add(1))
        .and_then(|c| c.checked_mul(n + 1));
    let xi = match cells {
        Some(cells) if cells <= MAX_DP_CELLS => dp_table(&values, &weights, cap.to_usize().unwrap()),
        _ if n <= MAX_ENUM_ITEMS => enumerate(&values, &weights, &cap),
        _ => {
            return Err(Error::InstanceTooLarge(format!(
                "{n} items with scaled capacity {cap}; limits are {MAX_DP_CELLS} DP cells or {MAX_ENUM_ITEMS} items"
            )))
        }
    };
    Ok(Selection::from_xi(inst, xi))
}

fn dp_table(values: &[BigInt], weights: &[BigInt], cap: usize) -> Vec<bool> {
    let n = values.len();
    // best[i][c]: optimum over items i.. with capacity c
    let mut best = vec![vec![BigInt::zero(); cap + 1]; n + 1];
    let w_small: Vec<Option<usize>> = weights
        .iter()
        .map(|w| w.to_usize().filter(|&w| w <= cap))
        .collect();
    for i in (0..n).rev() {
        let (head, tail) = best.split_at_mut(i + 1);
        let (row, next) = (&mut head[i], &tail[0]);
        for c in 0..=cap {
            let skip = &next[c];
            row[c] = match w_small[i] {
                Some(w) if w <= c => {
                    let take = &next[c - w] + &values[i];
                    if take > *skip {
                        take
                    } else {
                        skip.clone()
                    }
                }
                _ => skip.clone(),
            };
        }
    }
    let mut xi = vec![false; n];
    let mut c = cap;
    for i in 0..n {
        if best[i][c] != best[i + 1][c] {
            xi[i] = true;
            c -= w_small[i].expect("taken item fits");
        }
    }
    xi
}

/// Subset enumeration in lexicographic order; item 0 is the most significant bit.
fn enumerate(values: &[BigInt], weights: &[BigInt], cap: &BigInt) -> Vec<bool> {
    let n = values.len();
    let lo_n = n / 2;
    let hi_n = n - lo_n;
    // low half holds the last lo_n items
    let half_sums = |items: std::ops::Range<usize>| {
        let len = items.len();
        let mut out = vec![(BigInt::zero(), BigInt::zero()); 1 << len];
        for mask in 1usize..(1 << len) {
            let bit = mask.trailing_zeros() as usize;
            let item = items.end - 1 - bit;
            let prev = &out[mask & (mask - 1)];
            out[mask] = (&prev.0 + &values[item], &prev.1 + &weights[item]);
        }
        out
    };
    let hi = half_sums(0..hi_n);
    let lo = half_sums(hi_n..n);
    let mut best_mask = 0usize;
    let mut best_val: Option<BigInt> = None;
    for (h, (hv, hw)) in hi.iter().enumerate() {
        if hw > cap {
            continue;
        }
        for (l, (lv, lw)) in lo.iter().enumerate() {
            if hw + lw > *cap {
                continue;
            }
            let v = hv + lv;
            if best_val.as_ref().is_none_or(|b| v > *b) {
                best_val = Some(v);
                best_mask = (h << lo_n) | l;
            }
        }
    }
    (0..n).map(|i| best_mask >> (n - 1 - i) & 1 == 1).collect()
}

/// Upper bound on `optimum - greedy objective` for a greedy selection:
/// the `(|xi| + 1)`-th largest density times `min(max(A) - gcd(A), R)`.
pub fn gap_certificate(inst: &KnapsackInstance, greedy: &Selection) -> Result<Rational> {
    let rank = greedy.count();
    if rank >= inst.len() {
        return Ok(Rational::zero());
    }
    let order = density_order(inst);
    let j = order[rank];
    if inst.weights[j].is_zero() {
        return Err(Error::InvalidArgument(
            "selection leaves a zero-weight item unselected; not a greedy output".into(),
        ));
    }
    let density = &inst.values[j] / &inst.weights[j];
    let Some(g) = gcd_all(&inst.weights) else {
        return Ok(Rational::zero());
    };
    let max_w = inst
        .weights
        .iter()
        .max()
        .cloned()
        .unwrap_or_else(Rational::zero);
    let slack = (max_w - g).min(greedy.remaining.clone());
    Ok(density * slack.max(Rational::zero()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Solver {
    Greedy,
    Exact,
    /// The (1+eps) scheme with the given eps.
    Approx(Rational),
}

impl Solver {
    pub fn name(&self) -> &'static str {
        match self {
            Solver::Greedy => "greedy",
            Solver::Exact => "exact",
            Solver::Approx(_) => "approx",
        }
    }
}

pub fn solve(inst: &KnapsackInstance, solver: &Solver) -> Result<Selection> {
    match solver {
        Solver::Greedy => greedy_solve(inst),
        Solver::Exact => exact_solve_dp(inst),
        Solver::Approx(eps) => crate::approx::approx_knapsack_solve(inst, eps),
    }
}

#[derive(Clone, Debug)]
pub struct Projection {
    pub weights: Vec<Vec<Rational>>,
    pub instance: KnapsackInstance,
    pub selection: Selection,
}

/// Nearest point (in squared distance) to `z` whose dense-bound energy fits
/// `e_budget`, as found by the chosen solver.
pub fn project_weights(
    z: &[Vec<Rational>],
    coeffs: &[LayerCoeffs],
    e_budget: &Rational,
    solver: &Solver,
) -> Result<Projection> {
    let instance = build_knapsack(z, coeffs, e_budget)?;
    let selection = solve(&instance, solver)?;
    let mut offset = 0;
    let mut weights = Vec::with_capacity(z.len());
    for zl in z {
        weights.push(apply_selection(
            zl,
            &selection.xi[offset..offset + zl.len()],
        )?);
        offset += zl.len();
    }
    Ok(Projection {
        weights,
        instance,
        selection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn ints(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| int(x)).collect()
    }

    fn inst(values: &[i64], weights: &[i64], cap: i64) -> KnapsackInstance {
        KnapsackInstance::new(ints(values), ints(weights), int(cap)).unwrap()
    }

    #[test]
    fn greedy_early_exit_example() {
        let k = inst(&[60, 50, 50], &[10, 9, 9], 18);
        let g = greedy_solve(&k).unwrap();
        assert_eq!(g.xi, vec![true, false, false]);
        assert_eq!(
            (g.objective.clone(), g.remaining.clone()),
            (int(60), int(8))
        );
        let e = exact_solve_dp(&k).unwrap();
        assert_eq!(e.objective, int(100));
        assert_eq!(gap_certificate(&k, &g).unwrap(), ratio(400, 9));

        let skip = greedy_solve_with(&k, GreedyMode::SkipAndContinue).unwrap();
        assert_eq!(skip.xi, vec![true, false, false]);
    }

    #[test]
    fn greedy_takes_everything_when_it_fits() {
        let k = inst(&[1, 2, 3], &[1, 1, 1], 3);
        assert_eq!(greedy_solve(&k).unwrap().xi, vec![true; 3]);
    }

    #[test]
    fn zero_weight_item_is_free() {
        let k = inst(&[5, 3], &[0, 1], 0);
        assert_eq!(greedy_solve(&k).unwrap().xi, vec![true, false]);
        assert_eq!(exact_solve_dp(&k).unwrap().xi, vec![true, false]);
    }

    #[test]
    fn exact_examples() {
        let k = inst(&[9, 4, 4], &[3, 2, 2], 4);
        let e = exact_solve_dp(&k).unwrap();
        assert_eq!(
            (e.xi.clone(), e.objective.clone()),
            (vec![true, false, false], int(9))
        );
        let k = inst(&[9, 4, 4], &[3, 2, 2], 0);
        assert_eq!(exact_solve_dp(&k).unwrap().xi, vec![false; 3]);
    }

    #[test]
    fn exact_prefers_lexicographically_smallest() {
        let k = inst(&[2, 2, 2], &[1, 1, 1], 1);
        assert_eq!(exact_solve_dp(&k).unwrap().xi, vec![false, false, true]);
        let e = enumerate(
            &[2.into(), 2.into(), 2.into()],
            &[1.into(), 1.into(), 1.into()],
            &1.into(),
        );
        assert_eq!(e, vec![false, false, true]);
    }

    #[test]
    fn enumeration_matches_dp() {
        let values: Vec<BigInt> = [7, 3, 9, 4, 4, 1, 8].iter().map(|&v| v.into()).collect();
        let weights: Vec<BigInt> = [5, 2, 6, 3, 3, 1, 5].iter().map(|&v| v.into()).collect();
        for cap in 0..=25 {
            assert_eq!(
                dp_table(&values, &weights, cap),
                enumerate(&values, &weights, &cap.into())
            );
        }
    }

    #[test]
    fn certificate_is_zero_under_optimality_conditions() {
        let k = inst(&[5, 4, 3], &[2, 2, 2], 5);
        let g = greedy_solve(&k).unwrap();
        assert!(gap_certificate(&k, &g).unwrap().is_zero());
        let k = inst(&[5, 4, 3], &[2, 3, 2], 4);
        let g = greedy_solve(&k).unwrap();
        assert!(g.remaining.is_zero());
        assert!(gap_certificate(&k, &g).unwrap().is_zero());
    }

    #[test]
    fn negative_capacity_is_rejected() {
        let k = inst(&[1], &[1], -1);
        assert!(matches!(greedy_solve(&k), Err(Error::NegativeCapacity(_))));
    }

    #[test]
    fn projection_keeps_two_largest() {
        let z = vec![int(3), int(-1), ratio(1, 2), int(2)];
        let c = LayerCoeffs {
            alpha1: int(0),
            alpha2: int(0),
            alpha3: ratio(11, 2),
            alpha4: int(0),
            k: 0,
        };
        for solver in [Solver::Greedy, Solver::Exact] {
            let p = project_weights(
                std::slice::from_ref(&z),
                std::slice::from_ref(&c),
                &int(12),
                &solver,
            )
            .unwrap();
            assert_eq!(p.weights[0], vec![int(3), int(0), int(0), int(2)]);
        }
    }
}
