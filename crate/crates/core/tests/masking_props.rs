use energon::masking::{apply_mask, clamp01, decay_q, l0_project, nnz, round_binary, top_q};
use proptest::prelude::*;

fn entries(max: usize) -> impl Strategy<Value = Vec<f64>> {
    // coarse grid so that magnitude ties actually occur
    prop::collection::vec((-8i32..=8).prop_map(|v| f64::from(v) / 4.0), 0..=max)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn projection_is_idempotent_and_sparse(m in entries(40), q in 0usize..45) {
        let p = l0_project(&m, q);
        prop_assert!(nnz(&p) <= q);
        prop_assert_eq!(l0_project(&p, q), p);
    }

    #[test]
    fn projection_is_optimal_by_enumeration(m in entries(10), q in 0usize..12) {
        let p = l0_project(&m, q);
        let best = dist2(&p, &m);
        let n = m.len();
        for subset in 0u32..1 << n {
            if subset.count_ones() as usize > q {
                continue;
            }
            let cand: Vec<f64> = (0..n).map(|i| if subset >> i & 1 == 1 { m[i] } else { 0.0 }).collect();
            prop_assert!(best <= dist2(&cand, &m));
        }
    }

    #[test]
    fn ties_at_rank_q_go_to_the_lower_index(m in entries(20), q in 0usize..20) {
        let kept = top_q(&m, q);
        for &i in &kept {
            for j in 0..m.len() {
                if kept.contains(&j) {
                    continue;
                }
                prop_assert!(m[i].abs() > m[j].abs() || (m[i].abs() == m[j].abs() && i < j));
            }
        }
    }

    #[test]
    fn masking_cannot_add_nonzeros(x in entries(30), m in entries(30)) {
        let n = x.len().min(m.len());
        let y = apply_mask(&x[..n], &m[..n]).unwrap();
        prop_assert!(nnz(&y) <= nnz(&m[..n]));
        prop_assert!(nnz(&y) <= nnz(&x[..n]));
    }

    #[test]
    fn clamp_then_round_is_binary(m in entries(30)) {
        let mut c = m.clone();
        clamp01(&mut c);
        prop_assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
        let mut again = c.clone();
        clamp01(&mut again);
        prop_assert_eq!(&again, &c);
        round_binary(&mut c);
        prop_assert!(c.iter().all(|v| *v == 0.0 || *v == 1.0));
    }

    #[test]
    fn decay_reaches_zero_on_schedule(q in 0usize..500, dq in 1usize..60) {
        let mut cur = q;
        let mut steps = 0;
        while cur > 0 {
            cur = decay_q(cur, dq);
            steps += 1;
        }
        prop_assert_eq!(steps, q.div_ceil(dq));
    }
}

#[test]
fn length_mismatch_is_an_error() {
    assert!(apply_mask(&[1.0, 2.0], &[1.0]).is_err());
}
