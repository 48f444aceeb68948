use energon::approx::approx_knapsack_solve;
use energon::constraint::{build_knapsack, magnitude_order, KnapsackInstance, LayerCoeffs};
use energon::knapsack::{
    exact_solve_dp, gap_certificate, greedy_solve, greedy_solve_with, project_weights, solve,
    GreedyMode, Selection, Solver,
};
use energon::rational::{int, ratio};
use energon::Rational;
use num_traits::{Signed, Zero};
use proptest::prelude::*;

fn brute_force(inst: &KnapsackInstance) -> Rational {
    let n = inst.len();
    let mut best = Rational::zero();
    for mask in 0u32..1 << n {
        let xi: Vec<bool> = (0..n).map(|j| mask >> j & 1 == 1).collect();
        let s = Selection::from_xi(inst, xi);
        if s.is_feasible() && s.objective > best {
            best = s.objective;
        }
    }
    best
}

/// Up to four distinct rational weights, small integer values.
fn instance(max_n: usize) -> impl Strategy<Value = KnapsackInstance> {
    (
        prop::collection::vec((1i64..=12, 1i64..=3), 1..=4),
        prop::collection::vec((0i64..=30, any::<prop::sample::Index>()), 0..=max_n),
        0i64..=60,
    )
        .prop_map(|(ws, items, cap)| {
            let ws: Vec<Rational> = ws.into_iter().map(|(n, d)| ratio(n, d)).collect();
            let (values, weights) = items
                .into_iter()
                .map(|(v, i)| (int(v), ws[i.index(ws.len())].clone()))
                .unzip();
            KnapsackInstance::new(values, weights, ratio(cap, 2)).unwrap()
        })
}

fn solvers() -> Vec<Solver> {
    vec![
        Solver::Greedy,
        Solver::Exact,
        Solver::Approx(ratio(1, 5)),
        Solver::Approx(ratio(1, 100)),
    ]
}

fn layer_coeffs() -> impl Strategy<Value = LayerCoeffs> {
    (0i64..=6, 0i64..=6, 1i64..=6, 0i64..=20, 0u64..=4).prop_map(|(a, extra, a3, a4, k)| {
        LayerCoeffs {
            alpha1: int(a),
            alpha2: int(a + extra),
            alpha3: int(a3),
            alpha4: int(a4),
            k,
        }
    })
}

fn tensor() -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec((-8i64..=8).prop_map(|v| ratio(v, 2)), 1..=8)
}

fn sq_dist(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .fold(Rational::zero(), |s, d| s + d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn every_solver_is_feasible_and_consistent(inst in instance(14)) {
        for s in solvers() {
            let sel = solve(&inst, &s).unwrap();
            prop_assert!(sel.load <= inst.capacity, "{} overloads", s.name());
            prop_assert_eq!(&Selection::from_xi(&inst, sel.xi.clone()), &sel);
        }
    }

    #[test]
    fn exact_matches_enumeration(inst in instance(12)) {
        prop_assert_eq!(exact_solve_dp(&inst).unwrap().objective, brute_force(&inst));
    }

    #[test]
    fn greedy_gap_is_certified(inst in instance(16)) {
        let g = greedy_solve(&inst).unwrap();
        let opt = exact_solve_dp(&inst).unwrap();
        let gap = &opt.objective - &g.objective;
        prop_assert!(!gap.is_negative());
        prop_assert!(gap <= gap_certificate(&inst, &g).unwrap());
        if g.remaining.is_zero() || inst.weights.windows(2).all(|w| w[0] == w[1]) {
            prop_assert!(gap.is_zero());
        }
    }

    #[test]
    fn skipping_extends_the_early_exit_prefix(inst in instance(16)) {
        let early = greedy_solve(&inst).unwrap();
        let skip = greedy_solve_with(&inst, GreedyMode::SkipAndContinue).unwrap();
        for (e, s) in early.xi.iter().zip(&skip.xi) {
            prop_assert!(!e || *s);
        }
        prop_assert!(skip.objective >= early.objective);
    }

    #[test]
    fn approx_never_beats_the_optimum(inst in instance(14)) {
        let opt = exact_solve_dp(&inst).unwrap().objective;
        for eps in [ratio(1, 2), ratio(1, 10)] {
            prop_assert!(approx_knapsack_solve(&inst, &eps).unwrap().objective <= opt);
        }
    }

    /// Within a weight class, selected items outvalue unselected ones.
    #[test]
    fn approx_selects_value_prefixes(inst in instance(14)) {
        let sel = approx_knapsack_solve(&inst, &ratio(1, 5)).unwrap();
        for j in 0..inst.len() {
            for i in 0..inst.len() {
                if inst.weights[i] == inst.weights[j] && sel.xi[j] && !sel.xi[i] {
                    prop_assert!(inst.values[j] >= inst.values[i]);
                }
            }
        }
    }

    #[test]
    fn projection_distance_identity(
        layers in prop::collection::vec((tensor(), layer_coeffs()), 1..=3),
        slack in 0i64..=120,
    ) {
        let (z, coeffs): (Vec<_>, Vec<_>) = layers.into_iter().unzip();
        let floor: Rational = coeffs.iter().map(|c| c.alpha4.clone()).sum();
        let budget = floor + ratio(slack, 2);
        let norm: Rational = z.iter().flatten().map(|v| v * v).sum();
        for s in solvers() {
            let p = project_weights(&z, &coeffs, &budget, &s).unwrap();
            let dist: Rational = z.iter().zip(&p.weights).map(|(a, b)| sq_dist(a, b)).sum();
            prop_assert_eq!(dist, &norm - &p.selection.objective);
            let energy: Rational = p
                .weights
                .iter()
                .zip(&coeffs)
                .map(|(w, c)| c.energy(w.iter().filter(|v| !v.is_zero()).count() as u64))
                .sum();
            prop_assert!(energy <= budget);
        }
    }

    #[test]
    fn top_k_items_carry_the_cheaper_weight(
        layers in prop::collection::vec((tensor(), layer_coeffs()), 1..=3),
    ) {
        let (z, coeffs): (Vec<_>, Vec<_>) = layers.into_iter().unzip();
        let floor: Rational = coeffs.iter().map(|c| c.alpha4.clone()).sum();
        let inst = build_knapsack(&z, &coeffs, &floor).unwrap();
        let mut offset = 0;
        for (zl, c) in z.iter().zip(&coeffs) {
            let top = &c.alpha1 + &c.alpha3;
            let order = magnitude_order(zl);
            let k = (c.k as usize).min(zl.len());
            let mut n_top = 0;
            for (rank, &i) in order.iter().enumerate() {
                let w = &inst.weights[offset + i];
                prop_assert_eq!(&inst.values[offset + i], &(&zl[i] * &zl[i]));
                if rank < k {
                    prop_assert_eq!(w, &top);
                }
                if *w == top {
                    n_top += 1;
                }
            }
            if c.alpha1 != c.alpha2 {
                prop_assert_eq!(n_top, k);
            }
            offset += zl.len();
        }
    }

    /// Equal item weights everywhere make greedy projection plain global
    /// magnitude pruning.
    #[test]
    fn equal_weights_give_magnitude_pruning(
        z in prop::collection::vec(tensor(), 1..=3),
        a in 1i64..=6,
        a4 in 0i64..=5,
        slack in 0i64..=80,
    ) {
        let c = LayerCoeffs { alpha1: int(a), alpha2: int(a), alpha3: int(1), alpha4: int(a4), k: 2 };
        let coeffs = vec![c; z.len()];
        let budget = int(a4 * z.len() as i64) + ratio(slack, 3);
        let p = project_weights(&z, &coeffs, &budget, &Solver::Greedy).unwrap();
        let keep = ((ratio(slack, 3) / int(a + 1)).floor().to_integer())
            .try_into()
            .unwrap_or(usize::MAX);
        let flat: Vec<Rational> = z.iter().flatten().cloned().collect();
        let mut expect = vec![Rational::zero(); flat.len()];
        for &i in magnitude_order(&flat).iter().take(keep) {
            expect[i] = flat[i].clone();
        }
        let got: Vec<Rational> = p.weights.into_iter().flatten().collect();
        prop_assert_eq!(got, expect);
    }

    #[test]
    fn generous_budget_is_identity_and_floor_budget_is_zero(
        layers in prop::collection::vec((tensor(), layer_coeffs()), 1..=3),
    ) {
        let (z, coeffs): (Vec<_>, Vec<_>) = layers.into_iter().unzip();
        let dense: Rational = z.iter().zip(&coeffs).map(|(zl, c)| c.energy(zl.len() as u64)).sum();
        let floor: Rational = coeffs.iter().map(|c| c.alpha4.clone()).sum();
        for s in solvers() {
            prop_assert_eq!(&project_weights(&z, &coeffs, &dense, &s).unwrap().weights, &z);
            let zeroed = project_weights(&z, &coeffs, &floor, &s).unwrap().weights;
            prop_assert!(zeroed.iter().flatten().all(Zero::is_zero));
        }
    }
}

#[test]
fn single_fc_example_keeps_two_largest() {
    let z = vec![vec![int(3), int(-1), ratio(1, 2), int(2)]];
    let c = LayerCoeffs {
        alpha1: int(0),
        alpha2: int(0),
        alpha3: ratio(11, 2),
        alpha4: int(0),
        k: 0,
    };
    for s in solvers() {
        let p = project_weights(&z, std::slice::from_ref(&c), &int(12), &s).unwrap();
        assert_eq!(p.weights[0], vec![int(3), int(0), int(0), int(2)]);
        assert_eq!(sq_dist(&p.weights[0], &z[0]), ratio(5, 4));
    }
}

#[test]
fn scheme_avoids_early_exit_loss() {
    let inst = KnapsackInstance::new(
        vec![int(60), int(50), int(50)],
        vec![int(10), int(9), int(9)],
        int(18),
    )
    .unwrap();
    let a = approx_knapsack_solve(&inst, &ratio(1, 100)).unwrap();
    assert_eq!(a.objective, int(100));
    assert_eq!(greedy_solve(&inst).unwrap().objective, int(60));
}
