use energon::checkpoint::Checkpoint;
use energon::data::{gaussian_mixture, separable, Dataset};
use energon::energy::{HardwareConfig, LayerSpec};
use energon::masking::nnz;
use energon::nn::TinyNet;
use energon::rational::{int, ratio};
use energon::trainer::{
    bound_energy, coefficients, dense_energy, log_csv, m_phase, project, run, run_with,
    train_dense, Audit, Budget, ExitReason, SolverKind, TrainConfig, TrainOutcome,
};
use energon::{Error, Rational};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn hw() -> HardwareConfig {
    HardwareConfig::default()
}

fn specs() -> Vec<LayerSpec> {
    vec![LayerSpec::fc(4, 12), LayerSpec::fc(12, 2)]
}

fn net(seed: u64) -> TinyNet {
    TinyNet::new(&specs(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn data() -> (Dataset, Dataset) {
    gaussian_mixture(160, 2, 3).split(0.25, 3)
}

fn quick(budget: Budget) -> TrainConfig {
    let mut cfg = TrainConfig::new(budget);
    cfg.dense_epochs = 8;
    cfg.w_epochs = 1;
    cfg.max_outer_iters = 4;
    cfg
}

fn train(cfg: &TrainConfig) -> TrainOutcome {
    let (tr, va) = data();
    run(net(1), &tr, &va, &hw(), cfg).unwrap()
}

fn floor(net: &TinyNet) -> Rational {
    coefficients(net, &hw(), Default::default())
        .unwrap()
        .iter()
        .map(|c| c.alpha4.clone())
        .sum()
}

fn checkpoint(o: &TrainOutcome) -> Vec<u8> {
    Checkpoint {
        net: o.net.clone(),
        hardware: hw(),
        q: o.q.clone(),
        schedule: Some(o.schedule.clone()),
    }
    .to_bytes()
    .unwrap()
}

#[test]
fn forced_accuracy_drop_returns_previous_snapshot() {
    let mut cfg = quick(Budget::FractionOfDense(ratio(3, 4)));
    cfg.decay_iters = 1;
    cfg.max_outer_iters = 6;
    let (tr, va) = data();
    let mut seen: Vec<TinyNet> = Vec::new();
    let out = run_with(net(1), &tr, &va, &hw(), &cfg, &mut |t, n| {
        seen.push(n.clone());
        if t == 2 {
            0.5
        } else {
            0.9
        }
    })
    .unwrap();
    assert_eq!(out.exit, ExitReason::AccuracyDrop);
    assert_eq!(out.schedule.iteration, 1);
    assert_eq!(out.log.len(), 3);
    assert_eq!(out.net, seen[1]);
    assert_eq!(out.accuracy, 0.9);
}

#[test]
fn drop_before_reaching_target_does_not_exit() {
    let cfg = quick(Budget::FractionOfDense(ratio(1, 2)));
    let (tr, va) = data();
    let out = run_with(net(1), &tr, &va, &hw(), &cfg, &mut |t, _| {
        1.0 - t as f64 / 10.0
    })
    .unwrap();
    // the schedule reaches the target at iteration 2; the drop is seen at 3
    assert_eq!(out.exit, ExitReason::AccuracyDrop);
    assert_eq!(out.schedule.iteration, 2);
}

#[test]
fn zero_lambda_matches_no_distillation() {
    let mut a = quick(Budget::FractionOfDense(ratio(1, 2)));
    a.lambda = 0.0;
    let mut b = a.clone();
    b.distill = false;
    let (oa, ob) = (train(&a), train(&b));
    assert_eq!(checkpoint(&oa), checkpoint(&ob));
    assert_eq!(log_csv(&oa.log), log_csv(&ob.log));
}

#[test]
fn same_seed_same_bytes() {
    let cfg = quick(Budget::FractionOfDense(ratio(2, 5)));
    let (a, b) = (train(&cfg), train(&cfg));
    assert_eq!(checkpoint(&a), checkpoint(&b));
    assert_eq!(log_csv(&a.log), log_csv(&b.log));
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(checkpoint(&train(&other)), checkpoint(&a));
}

#[test]
fn full_budget_without_decay_is_a_no_op() {
    let mut cfg = quick(Budget::FractionOfDense(int(1)));
    cfg.dq = Some(0);
    cfg.w_epochs = 0;
    let out = train(&cfg);
    assert_eq!(out.exit, ExitReason::Converged);
    assert_eq!(out.log.len(), 1);
    for (l, d) in out.net.layers.iter().zip(&out.dense.layers) {
        assert_eq!(l.w, d.w);
        assert_eq!(l.b, d.b);
    }
    assert!(out.net.layers[0]
        .mask
        .as_ref()
        .unwrap()
        .iter()
        .all(|&m| m == 1.0));
}

#[test]
fn zero_dense_epochs_keep_the_initialization() {
    let mut cfg = quick(Budget::FractionOfDense(int(1)));
    cfg.dense_epochs = 0;
    let out = train(&cfg);
    assert!(out.dense_losses.is_empty());
    assert_eq!(out.dense, net(1));
}

#[test]
fn dense_training_fits_separable_data() {
    let d = separable(200, 0, 4);
    let mut n = TinyNet::new(
        &[LayerSpec::fc(2, 8), LayerSpec::fc(8, 2)],
        &mut ChaCha8Rng::seed_from_u64(2),
    )
    .unwrap();
    let mut cfg = TrainConfig::new(Budget::FractionOfDense(int(1)));
    cfg.dense_epochs = 20;
    let losses = train_dense(&mut n, &d, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(n.accuracy(&d.features, &d.labels) >= 0.99);
    assert!(losses.last().unwrap() < &losses[0]);
}

#[test]
fn floor_budget_zeroes_every_weight() {
    let mut cfg = quick(Budget::Absolute(floor(&net(1))));
    cfg.decay_iters = 1;
    // sparser masks would lower the floor and free capacity
    cfg.mask_layers.clear();
    let out = train(&cfg);
    assert!(out.net.layers.iter().all(|l| l.w.iter().all(|&w| w == 0.0)));
    assert_eq!(out.audit.w_nnz, 0);
    assert!(out.audit.feasible());
}

#[test]
fn budget_below_floor_is_rejected_before_training() {
    let cfg = quick(Budget::Absolute(floor(&net(1)) - ratio(1, 1000)));
    let (tr, va) = data();
    let mut calls = 0;
    let err = run_with(net(1), &tr, &va, &hw(), &cfg, &mut |_, _| {
        calls += 1;
        1.0
    })
    .unwrap_err();
    assert!(matches!(err, Error::InfeasibleBudget { .. }), "{err}");
    assert_eq!(calls, 0);
}

#[test]
fn oversized_decay_empties_the_mask() {
    let mut cfg = quick(Budget::FractionOfDense(ratio(1, 2)));
    cfg.dq = Some(1000);
    let out = train(&cfg);
    assert_eq!(out.q[0], Some(0));
    assert_eq!(nnz(out.net.layers[0].mask.as_ref().unwrap()), 0);
    assert_eq!(out.audit.m_nnz, 0);
}

#[test]
fn mask_phase_respects_q_and_rounds() {
    let (tr, _) = data();
    let mut n = net(5);
    n.add_masks(&[0, 1]).unwrap();
    let cfg = quick(Budget::FractionOfDense(int(1)));
    for q in [0, 1, 3, 7, 12] {
        let mut m = n.clone();
        let qs = [Some(q.min(4)), Some(q)];
        m_phase(
            &mut m,
            &tr,
            None,
            &qs,
            &cfg,
            &mut ChaCha8Rng::seed_from_u64(q as u64),
        )
        .unwrap();
        for (l, q) in m.layers.iter().zip(qs) {
            let mask = l.mask.as_ref().unwrap();
            assert!(nnz(mask) <= q.unwrap());
            assert!(mask.iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }
}

#[test]
fn every_logged_iterate_is_feasible() {
    for solver in [SolverKind::Greedy, SolverKind::Exact, SolverKind::Approx] {
        let mut cfg = quick(Budget::FractionOfDense(ratio(1, 3)));
        cfg.solver = solver;
        cfg.epsilon = Some(ratio(1, 10));
        cfg.w_epochs = 0;
        cfg.dense_epochs = 2;
        let out = train(&cfg);
        for row in &out.log {
            assert!(row.energy <= row.budget);
            assert!(row.measured <= row.energy);
        }
        assert!(out.audit.feasible());
    }
}

#[test]
fn projection_lands_under_any_feasible_budget() {
    let cfg = TrainConfig::new(Budget::FractionOfDense(int(1)));
    let dense = dense_energy(&specs(), &hw(), Default::default()).unwrap();
    for seed in 0..20u64 {
        let mut n = net(seed);
        if seed % 2 == 0 {
            n.add_masks(&[0]).unwrap();
            n.layers[0].mask.as_mut().unwrap()[seed as usize % 4] = 0.0;
        }
        let lo = floor(&n);
        let budget = &lo + (&dense - &lo) * ratio(seed as i64, 20);
        project(&mut n, &budget, &hw(), &cfg).unwrap();
        assert!(bound_energy(&n, &hw(), Default::default()).unwrap() <= budget);
        assert!(Audit::of(&n, &budget, &hw(), Default::default())
            .unwrap()
            .feasible());
    }
}
