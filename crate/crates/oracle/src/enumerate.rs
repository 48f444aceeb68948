//! Subset enumeration for small knapsack instances.
//!
//! Values and weights are scaled to machine integers so every subset sum is
//! exact and cheap; results are converted back to rationals at the boundary.

use energon::constraint::KnapsackInstance;
use energon::Rational;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};

/// All subset sums of an instance, in integer units.
pub struct Subsets {
    n: usize,
    value_scale: BigInt,
    weight_scale: BigInt,
    /// `(value, weight)` of subset `mask`; bit `j` is item `j`.
    sums: Vec<(i128, i128)>,
    /// Distinct values ascending, with the least weight reaching at least
    /// that value.
    by_value: Vec<(i128, i128)>,
    /// Distinct weights ascending, with the largest value within that weight.
    by_weight: Vec<(i128, i128)>,
}

fn lcm_of_denoms(vs: &[Rational]) -> BigInt {
    vs.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

fn scaled(vs: &[Rational], scale: &BigInt) -> Option<Vec<i128>> {
    vs.iter()
        .map(|v| (v * scale).to_integer().to_i128())
        .collect()
}

impl Subsets {
    /// `None` when the scaled sums would not fit in `i128`.
    pub fn new(values: &[Rational], weights: &[Rational]) -> Option<Self> {
        let n = values.len();
        assert!(n <= 24, "enumeration is for small instances");
        let value_scale = lcm_of_denoms(values);
        let weight_scale = lcm_of_denoms(weights);
        let v = scaled(values, &value_scale)?;
        let w = scaled(weights, &weight_scale)?;
        let limit = i128::MAX / (n as i128 + 1);
        if v.iter().chain(&w).any(|x| x.abs() > limit) {
            return None;
        }
        let mut sums = vec![(0i128, 0i128); 1 << n];
        for mask in 1usize..(1 << n) {
            let j = mask.trailing_zeros() as usize;
            let (pv, pw) = sums[mask & (mask - 1)];
            sums[mask] = (pv + v[j], pw + w[j]);
        }
        let mut by_value = sums.clone();
        by_value.sort_unstable();
        let mut least = i128::MAX;
        for e in by_value.iter_mut().rev() {
            least = least.min(e.1);
            e.1 = least;
        }
        by_value.dedup_by_key(|e| e.0);
        let mut by_weight: Vec<(i128, i128)> = sums.iter().map(|&(v, w)| (w, v)).collect();
        by_weight.sort_unstable();
        let mut most = i128::MIN;
        for e in by_weight.iter_mut() {
            most = most.max(e.1);
            e.1 = most;
        }
        // keep the last entry per weight, which carries the running maximum
        by_weight.reverse();
        by_weight.dedup_by_key(|e| e.0);
        by_weight.reverse();
        Some(Self {
            n,
            value_scale,
            weight_scale,
            sums,
            by_value,
            by_weight,
        })
    }

    pub fn of(inst: &KnapsackInstance) -> Option<Self> {
        Self::new(&inst.values, &inst.weights)
    }

    fn weight_units(&self, y: &Rational) -> i128 {
        // largest integer weight <= y * scale
        (y * &self.weight_scale)
            .floor()
            .to_integer()
            .to_i128()
            .unwrap_or(i128::MAX)
    }

    fn value_units_ceil(&self, x: &Rational) -> i128 {
        (x * &self.value_scale)
            .ceil()
            .to_integer()
            .to_i128()
            .unwrap_or(i128::MAX)
    }

    fn value(&self, v: i128) -> Rational {
        Rational::new(BigInt::from(v), self.value_scale.clone())
    }

    fn weight(&self, w: i128) -> Rational {
        Rational::new(BigInt::from(w), self.weight_scale.clone())
    }

    /// Best subset within capacity; ties go to the lexicographically smallest
    /// selection vector.
    pub fn optimum(&self, capacity: &Rational) -> (Rational, Vec<bool>) {
        let cap = self.weight_units(capacity);
        // lexicographic order on selection vectors is numeric order on the
        // bit-reversed mask (item 0 most significant)
        let lex_key = |mask: usize| mask.reverse_bits() >> (usize::BITS as usize - self.n.max(1));
        let mut best: Option<(i128, usize)> = None;
        for (mask, &(v, w)) in self.sums.iter().enumerate() {
            if w > cap {
                continue;
            }
            let better = match best {
                None => true,
                Some((bv, bm)) => v > bv || (v == bv && lex_key(mask) < lex_key(bm)),
            };
            if better {
                best = Some((v, mask));
            }
        }
        let (v, mask) = best.expect("the empty set always fits");
        (
            self.value(v),
            (0..self.n).map(|j| mask >> j & 1 == 1).collect(),
        )
    }

    /// `h(x)`: least weight of a subset with value at least `x`; `None` when
    /// no subset reaches `x`.
    pub fn h(&self, x: &Rational) -> Option<Rational> {
        let need = self.value_units_ceil(x);
        let i = self.by_value.partition_point(|e| e.0 < need);
        self.by_value.get(i).map(|e| self.weight(e.1))
    }

    /// `h^{-1}(y)`: largest value of a subset with weight at most `y`; `None`
    /// below the lightest subset.
    pub fn h_inv(&self, y: &Rational) -> Option<Rational> {
        let cap = self.weight_units(y);
        let i = self.by_weight.partition_point(|e| e.0 <= cap);
        i.checked_sub(1).map(|i| self.value(self.by_weight[i].1))
    }

    /// Distinct subset value sums, ascending.
    pub fn value_levels(&self) -> Vec<Rational> {
        self.by_value.iter().map(|e| self.value(e.0)).collect()
    }

    /// Distinct subset weight sums, ascending.
    pub fn weight_levels(&self) -> Vec<Rational> {
        self.by_weight.iter().map(|e| self.weight(e.0)).collect()
    }

    /// True when no two subsets share a value sum.
    pub fn distinct_value_sums(&self) -> bool {
        self.by_value.len() == self.sums.len()
    }

    pub fn total_weight(&self) -> Rational {
        self.weight(self.sums.last().map(|s| s.1).unwrap_or(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use energon::rational::int;

    #[test]
    fn textbook_instance() {
        let v = [int(60), int(50), int(50)];
        let w = [int(10), int(9), int(9)];
        let s = Subsets::new(&v, &w).unwrap();
        let (best, xi) = s.optimum(&int(18));
        assert_eq!(best, int(100));
        assert_eq!(xi, vec![false, true, true]);
        assert_eq!(s.h(&int(61)), Some(int(18)));
        assert_eq!(s.h(&int(161)), None);
        assert_eq!(s.h_inv(&int(9)), Some(int(50)));
        assert_eq!(s.h_inv(&int(8)), Some(int(0)));
    }

    #[test]
    fn tables_agree_with_scans() {
        let v = [int(3), int(5), int(1), int(5)];
        let w = [int(2), int(4), int(1), int(3)];
        let s = Subsets::new(&v, &w).unwrap();
        for q in 0..16 {
            let q = int(q);
            let h = s
                .sums
                .iter()
                .filter(|(v, _)| int((*v).try_into().unwrap()) >= q)
                .map(|e| e.1)
                .min();
            assert_eq!(s.h(&q), h.map(|w| int(w.try_into().unwrap())));
            let hi = s
                .sums
                .iter()
                .filter(|(_, w)| int((*w).try_into().unwrap()) <= q)
                .map(|e| e.0)
                .max();
            assert_eq!(s.h_inv(&q), hi.map(|v| int(v.try_into().unwrap())));
        }
        assert!(!s.distinct_value_sums());
    }
}
