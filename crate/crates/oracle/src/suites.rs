//! Randomized verification suites. Each returns a [`Report`] instead of
//! panicking so callers can tabulate results.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use energon::approx::{
    approx_inverted_knapsack, approx_knapsack_solve, bracket_of, minplus_conv, same_graph, Extended,
};
use energon::constraint::{extract_coefficients, InputStats, KnapsackInstance};
use energon::energy::{layer_energy, DramMode, HardwareConfig, LayerSpec, SupportPattern};
use energon::knapsack::{density_order, exact_solve_dp, gap_certificate, greedy_solve};
use energon::nn::{kd_loss, TinyNet};
use energon::rational::{from_count, int, ratio};
use energon::{Error, Rational};
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::enumerate::Subsets;
use crate::random::{self, Rng8};
use crate::sim::simulate;

#[derive(Clone, Debug)]
pub struct Report {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub elapsed: Duration,
    /// First few failures, or a one-line summary.
    pub detail: String,
}

impl Report {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: 0,
            elapsed: Duration::ZERO,
            detail: String::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }

    fn fail(&mut self, msg: impl AsRef<str>) {
        self.failures += 1;
        if self.failures <= 3 {
            let _ = writeln!(self.detail, "{}", msg.as_ref());
        }
    }

    fn finish(mut self, start: Instant) -> Self {
        self.elapsed = start.elapsed();
        if self.failures == 0 && self.detail.is_empty() {
            self.detail = format!("{} cases", self.cases);
        }
        self
    }
}

/// Deliberate faults for checking that the suites can fail.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Faults {
    /// Adds one unit of energy to every alpha3 coefficient.
    pub alpha3: bool,
}

/// Hardware whose input cache holds a few sliding windows of rows, so
/// convolutions see several cache fills.
fn conv_hardware(rng: &mut Rng8, layer: &LayerSpec) -> HardwareConfig {
    let mut hw = random::hardware(rng);
    if let LayerSpec::Conv(cv) = layer {
        let row = cv.c * cv.w;
        let shared = cv.r.saturating_sub(cv.s);
        hw.k_x = row * (shared + 1 + rng.random_range(0..4)) + rng.random_range(0..row);
    }
    hw
}

fn random_layer(rng: &mut Rng8) -> LayerSpec {
    if rng.random_bool(0.4) {
        random::fc_layer(rng)
    } else {
        random::conv_layer(rng)
    }
}

/// Closed-form counts against the event simulator, in both DRAM modes.
pub fn energy_oracle(seed: u64, layers: usize) -> Report {
    let start = Instant::now();
    let mut r = Report::new("energy model vs event simulator");
    let mut rng = random::rng(seed);
    for case in 0..layers {
        let layer = random_layer(&mut rng);
        let hw = conv_hardware(&mut rng, &layer);
        let (w, x) = random::supports(&mut rng, &layer);
        for mode in [DramMode::DenseUpperBound, DramMode::ExactSparse] {
            r.cases += 1;
            match layer_energy(&layer, &w, &x, &hw, mode) {
                Ok(e) => {
                    let sim = simulate(&layer, &w, &x, &hw, mode);
                    if e.counts != sim {
                        r.fail(format!(
                            "case {case} {layer:?} {mode:?}: formula {:?} vs simulator {sim:?}",
                            e.counts
                        ));
                    }
                }
                Err(err) => r.fail(format!("case {case} {layer:?}: {err}")),
            }
        }
    }
    // undersized input caches must be refused, not clamped
    let mut refused = 0;
    while refused < layers / 10 {
        let layer = random::conv_layer(&mut rng);
        let LayerSpec::Conv(cv) = layer else {
            unreachable!()
        };
        let shared = cv.r.saturating_sub(cv.s);
        // the smallest cache that holds one window of rows
        let needed = cv.c * cv.w * (shared + 1);
        if needed <= 1 {
            continue;
        }
        refused += 1;
        let mut hw = random::hardware(&mut rng);
        hw.k_x = rng.random_range(1..needed);
        let (w, x) = random::supports(&mut rng, &layer);
        r.cases += 1;
        match layer_energy(&layer, &w, &x, &hw, DramMode::DenseUpperBound) {
            Err(Error::InputCacheTooSmall { .. }) => {}
            other => r.fail(format!(
                "{layer:?} k_x={}: expected cache error, got {other:?}",
                hw.k_x
            )),
        }
    }
    r.finish(start)
}

/// Random support with exactly `n` of `len` entries set.
fn support_with(rng: &mut Rng8, layer: usize, shape: Vec<usize>, n: usize) -> SupportPattern {
    let len: usize = shape.iter().product();
    let mut bits = vec![false; len];
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(rng);
    for &i in &idx[..n] {
        bits[i] = true;
    }
    SupportPattern::new(layer, shape, bits).expect("shape matches")
}

/// The linear-in-cardinality coefficient form against the energy model with
/// a dense input, for every weight cardinality. Computation is charged at
/// its dense-input bound; without padding that bound is attained, so the
/// form must also equal the full energy.
pub fn coefficient_fidelity(seed: u64, layers: usize, faults: Faults) -> Report {
    let start = Instant::now();
    let mut r = Report::new("coefficient form vs dense-input energy");
    let mut rng = random::rng(seed);
    let mode = DramMode::DenseUpperBound;
    for case in 0..layers {
        let layer = random_layer(&mut rng);
        let hw = conv_hardware(&mut rng, &layer);
        let x = SupportPattern::dense(0, layer.input_shape());
        let stats = match InputStats::measure(&layer, &x, &hw, mode) {
            Ok(s) => s,
            Err(e) => {
                r.fail(format!("case {case}: {e}"));
                continue;
            }
        };
        let mut coeffs = extract_coefficients(&layer, &hw, &stats);
        if faults.alpha3 {
            coeffs.alpha3 += int(1);
        }
        let padded = matches!(layer, LayerSpec::Conv(cv) if cv.p > 0);
        for n in 0..=layer.weight_len() {
            r.cases += 1;
            let w = support_with(&mut rng, 0, layer.weight_shape(), n);
            let e = layer_energy(&layer, &w, &x, &hw, mode).expect("valid layer");
            let form = coeffs.energy(n as u64);
            let bound = &e.e_data + &hw.e_mac * from_count(layer.mac_upper_bound(n as u64));
            if form != bound || (!padded && form != e.total()) {
                r.fail(format!(
                    "case {case} {layer:?} |W|={n}: form {form} vs energy {} (bound {bound})",
                    e.total()
                ));
            }
        }
    }
    r.finish(start)
}

/// Capacity equal to the load of the first `k` items in density order, so
/// greedy ends with nothing left over.
fn exhausting_capacity(inst: &KnapsackInstance, rng: &mut Rng8) -> Rational {
    let order = density_order(inst);
    let k = rng.random_range(0..=order.len());
    order[..k].iter().map(|&j| inst.weights[j].clone()).sum()
}

/// Greedy against the exact optimum: the gap never exceeds the certificate,
/// and vanishes when all weights are equal or no budget remains.
pub fn greedy_certificate(seed: u64, instances: usize) -> Report {
    let start = Instant::now();
    let mut r = Report::new("greedy gap certificate");
    let mut rng = random::rng(seed);
    let (mut equal, mut exhausted) = (0, 0);
    for case in 0..instances {
        let mut inst = random::knapsack(&mut rng, 20, 4);
        if case % 5 == 0 {
            inst.capacity = exhausting_capacity(&inst, &mut rng);
        }
        r.cases += 1;
        let (g, e) = match (greedy_solve(&inst), exact_solve_dp(&inst)) {
            (Ok(g), Ok(e)) => (g, e),
            (g, e) => {
                r.fail(format!(
                    "case {case}: solver error {:?} {:?}",
                    g.err(),
                    e.err()
                ));
                continue;
            }
        };
        if inst.len() <= 14 {
            let (best, _) = Subsets::of(&inst)
                .expect("small instance")
                .optimum(&inst.capacity);
            if best != e.objective {
                r.fail(format!(
                    "case {case}: dp {} vs enumeration {best}",
                    e.objective
                ));
            }
        }
        let bound = gap_certificate(&inst, &g).expect("valid selection");
        let gap = &e.objective - &g.objective;
        if !g.is_feasible() || gap > bound || gap < Rational::zero() {
            r.fail(format!("case {case}: gap {gap} exceeds bound {bound}"));
        }
        let all_equal = inst.weights.windows(2).all(|p| p[0] == p[1]);
        if all_equal || g.remaining.is_zero() {
            equal += usize::from(all_equal);
            exhausted += usize::from(g.remaining.is_zero());
            if gap != Rational::zero() {
                r.fail(format!(
                    "case {case}: greedy suboptimal by {gap} under an optimality condition"
                ));
            }
        }
    }
    let mut r = r.finish(start);
    if r.failures == 0 {
        r.detail = format!(
            "{} instances ({equal} all-equal weights, {exhausted} with nothing remaining)",
            r.cases
        );
    }
    r
}

fn midpoints(mut xs: Vec<Rational>) -> Vec<Rational> {
    xs.sort();
    xs.dedup();
    let mut out = xs.clone();
    for p in xs.windows(2) {
        out.push((&p[0] + &p[1]) / int(2));
    }
    if let Some(last) = xs.last() {
        out.push(last + int(1));
    }
    out
}

fn opt(v: Option<Rational>) -> Extended {
    v.map_or(Extended::PosInf, Extended::Finite)
}

pub const SANDWICH_EPS: [(i64, i64); 3] = [(1, 2), (1, 5), (1, 10)];

/// The approximate inverted knapsack brackets the exact one: `h <= h~`,
/// `h~^{-1} <= h^{-1}` and `h~ - h <= 2 m eps b` with `b` the bracket of the
/// query.
pub fn approx_sandwich(seed: u64, instances: usize) -> Report {
    let start = Instant::now();
    let mut r = Report::new("approximation scheme sandwich");
    let mut rng = random::rng(seed);
    let mut done = 0;
    while done < instances {
        let inst = random::knapsack(&mut rng, 16, 4);
        let groups = random::groups_of(&inst);
        if groups.is_empty() {
            continue;
        }
        done += 1;
        let exact = Subsets::of(&inst).expect("small instance");
        let m = groups.len() as i64;
        for (n, d) in SANDWICH_EPS {
            r.cases += 1;
            let eps = ratio(n, d);
            let approx = match approx_inverted_knapsack(&groups, &eps) {
                Ok(a) => a,
                Err(e) => {
                    r.fail(format!("instance {done}: {e}"));
                    continue;
                }
            };
            let h = &approx.h;
            let xs = midpoints(
                exact
                    .value_levels()
                    .into_iter()
                    .chain(h.breakpoints().cloned())
                    .collect(),
            );
            for x in &xs {
                let (hx, tx) = (opt(exact.h(x)), h.eval(x));
                if hx > tx {
                    r.fail(format!(
                        "instance {done} eps {eps}: h({x}) = {hx} > h~ = {tx}"
                    ));
                    break;
                }
                if let (Extended::Finite(a), Extended::Finite(t)) = (&hx, &tx) {
                    if !approx.ladder.is_empty() {
                        let b = bracket_of(&approx.ladder, t);
                        let slack = int(2) * int(m) * &eps * b;
                        if t - a > slack {
                            r.fail(format!(
                                "instance {done} eps {eps}: h~({x}) - h = {} > {slack}",
                                t - a
                            ));
                            break;
                        }
                    }
                } else if tx != hx && hx != Extended::PosInf {
                    r.fail(format!(
                        "instance {done} eps {eps}: h~({x}) = {tx} but h = {hx}"
                    ));
                    break;
                }
            }
            let ys = midpoints(
                exact
                    .weight_levels()
                    .into_iter()
                    .chain(h.points().iter().map(|p| p.y.clone()))
                    .collect(),
            );
            for y in &ys {
                let inv = exact.h_inv(y).map_or(Extended::NegInf, Extended::Finite);
                if approx.inverse_eval(y) > inv {
                    r.fail(format!(
                        "instance {done} eps {eps}: h~^-1({y}) = {} > {inv}",
                        approx.inverse_eval(y)
                    ));
                    break;
                }
            }
        }
    }
    r.finish(start)
}

/// At `eps = 1/100` the scheme's selection against the enumeration optimum,
/// on instances where no two subsets share a value.
pub fn approx_exactness(seed: u64, instances: usize) -> Report {
    let start = Instant::now();
    let mut r = Report::new("approximation scheme exact at eps=1/100");
    let mut rng = random::rng(seed);
    let eps = ratio(1, 100);
    let mut tried = 0;
    while r.cases < instances {
        tried += 1;
        let inst = random::knapsack(&mut rng, 16, 4);
        let exact = Subsets::of(&inst).expect("small instance");
        if !exact.distinct_value_sums() {
            continue;
        }
        r.cases += 1;
        let (best, _) = exact.optimum(&inst.capacity);
        match approx_knapsack_solve(&inst, &eps) {
            Ok(sel) if sel.objective == best && sel.is_feasible() => {}
            Ok(sel) => r.fail(format!(
                "instance {}: n={} objective {} vs optimum {best} (shortfall {})",
                r.cases,
                inst.len(),
                sel.objective,
                &best - &sel.objective
            )),
            Err(e) => r.fail(format!("instance {}: {e}", r.cases)),
        }
    }
    let mut r = r.finish(start);
    let _ = write!(
        r.detail,
        "{} of {} sampled instances had distinct value sums",
        r.cases, tried
    );
    r
}

/// `min{f (+) g, b} == min{min{f, b} (+) min{g, b}, b}` on random
/// nonnegative step functions.
pub fn min_b_identity(seed: u64, pairs: usize) -> Report {
    let start = Instant::now();
    let mut r = Report::new("truncated convolution identity");
    let mut rng = random::rng(seed);
    for case in 0..pairs {
        let (f, g) = (
            random::step_function(&mut rng),
            random::step_function(&mut rng),
        );
        let b = random::rational(&mut rng, 0..=40, 3);
        r.cases += 1;
        let lhs = minplus_conv(&f, &g).min_with(&b);
        let rhs = minplus_conv(&f.min_with(&b), &g.min_with(&b)).min_with(&b);
        if !same_graph(&lhs, &rhs) {
            r.fail(format!(
                "case {case}: b={b}\n f={f}\n g={g}\n lhs={lhs}\n rhs={rhs}"
            ));
        }
    }
    r.finish(start)
}

pub const GRAD_STEP: f64 = 1e-4;
pub const GRAD_TOL: f64 = 1e-5;
/// Denominator floor for the relative error, so that gradients near zero are
/// compared absolutely.
pub const GRAD_FLOOR: f64 = 1e-3;

/// A net of at most 500 parameters with masks on two layers.
pub fn gradient_net(seed: u64) -> TinyNet {
    let mut rng = Rng8::seed_from_u64(seed);
    let specs = [
        LayerSpec::conv(1, 2, 3, 6, 6, 0, 1, 1),
        LayerSpec::fc(32, 6),
        LayerSpec::fc(6, 3),
    ];
    let mut net = TinyNet::new(&specs, &mut rng).expect("valid specs");
    net.add_masks(&[0, 1]).expect("layers exist");
    for l in &mut net.layers {
        for b in &mut l.b {
            *b = rng.random_range(-0.2..0.2);
        }
        if let Some(m) = &mut l.mask {
            for v in m.iter_mut() {
                *v = rng.random_range(0.3..1.0);
            }
        }
    }
    net
}

#[derive(Clone, Copy)]
enum Slot {
    W,
    B,
    M,
}

fn param(net: &mut TinyNet, li: usize, slot: Slot, k: usize) -> &mut f64 {
    let l = &mut net.layers[li];
    match slot {
        Slot::W => &mut l.w[k],
        Slot::B => &mut l.b[k],
        Slot::M => &mut l.mask.as_mut().expect("mask")[k],
    }
}

/// Central differences of the distillation loss against its analytic
/// gradient, over every weight, bias and mask entry.
/// Hidden pre-activations closer to zero than this make the evaluation point
/// too close to a ReLU kink for central differences; such points are redrawn.
pub const KINK_MARGIN: f64 = 5e-3;

type GradPoint = (TinyNet, Vec<Vec<f64>>, Vec<Vec<f64>>);

fn gradient_point(seed: u64) -> GradPoint {
    let net = gradient_net(seed);
    let mut rng = Rng8::seed_from_u64(seed ^ 0x5eed);
    let xs: Vec<Vec<f64>> = (0..4)
        .map(|_| {
            (0..net.input_len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let teacher: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    (net, xs, teacher)
}

fn clear_of_kinks(net: &TinyNet, xs: &[Vec<f64>]) -> bool {
    (1..net.layers.len()).all(|depth| {
        let head = TinyNet {
            layers: net.layers[..depth].to_vec(),
        };
        xs.iter()
            .all(|x| head.forward(x).iter().all(|z| z.abs() >= KINK_MARGIN))
    })
}

/// Central differences of the distillation loss against its analytic
/// gradient, over every weight, bias and mask entry.
pub fn gradient_check(seed: u64) -> Report {
    let start = Instant::now();
    let mut r = Report::new("loss gradient vs finite differences");
    let (mut net, xs, teacher) = (0u64..)
        .map(|k| gradient_point(seed.wrapping_add(k.wrapping_mul(0x9e37_79b9))))
        .find(|(n, xs, _)| clear_of_kinks(n, xs))
        .expect("some draw avoids every kink");
    let ys: Vec<usize> = (0..4).map(|i| i % 3).collect();
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let lambda = 0.5;
    let loss = |n: &TinyNet| kd_loss(n, &refs, &ys, Some(&teacher), lambda).0;
    let (_, g) = kd_loss(&net, &refs, &ys, Some(&teacher), lambda);
    let mut worst = 0.0f64;

    for li in 0..net.layers.len() {
        for slot in [Slot::W, Slot::B, Slot::M] {
            let len = match slot {
                Slot::W => net.layers[li].w.len(),
                Slot::B => net.layers[li].b.len(),
                Slot::M => net.layers[li].mask.as_ref().map_or(0, Vec::len),
            };
            for k in 0..len {
                let orig = *param(&mut net, li, slot, k);
                *param(&mut net, li, slot, k) = orig + GRAD_STEP;
                let up = loss(&net);
                *param(&mut net, li, slot, k) = orig - GRAD_STEP;
                let down = loss(&net);
                *param(&mut net, li, slot, k) = orig;
                let fd = (up - down) / (2.0 * GRAD_STEP);
                let an = match slot {
                    Slot::W => g.w[li][k],
                    Slot::B => g.b[li][k],
                    Slot::M => g.m[li].as_ref().expect("mask grad")[k],
                };
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(GRAD_FLOOR);
                worst = worst.max(rel);
                r.cases += 1;
                if rel > GRAD_TOL {
                    r.fail(format!(
                        "layer {li} param {k}: analytic {an} vs numeric {fd} (rel {rel:.2e})"
                    ));
                }
            }
        }
    }
    let mut r = r.finish(start);
    if r.failures == 0 {
        r.detail = format!("{} parameters, worst relative error {worst:.2e}", r.cases);
    }
    r
}

/// Suite sizes: the acceptance thresholds, or a quicker smoke run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Full,
    Quick,
}

/// The suites bundled with the command-line self-test.
pub fn selftest(scale: Scale, faults: Faults, seed: u64) -> Vec<Report> {
    let (layers, fid, knap, sand, pairs) = match scale {
        Scale::Full => (1000, 200, 10_000, 1000, 1000),
        Scale::Quick => (200, 40, 1000, 100, 300),
    };
    vec![
        energy_oracle(seed, layers),
        coefficient_fidelity(seed + 1, fid, faults),
        greedy_certificate(seed + 2, knap),
        approx_sandwich(seed + 3, sand),
        min_b_identity(seed + 4, pairs),
        gradient_check(seed + 5),
    ]
}

pub fn table(reports: &[Report]) -> String {
    let mut out = String::new();
    for r in reports {
        let _ = writeln!(
            out,
            "{:<4} {:<42} {:>7} cases {:>5} failed {:>8.2}s  {}",
            if r.passed() { "PASS" } else { "FAIL" },
            r.name,
            r.cases,
            r.failures,
            r.elapsed.as_secs_f64(),
            r.detail.lines().next().unwrap_or("")
        );
    }
    out
}
