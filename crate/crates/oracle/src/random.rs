//! Seeded generators for random layers, knapsack instances and step functions.

use energon::approx::{Point, StepFunction, WeightGroup};
use energon::constraint::KnapsackInstance;
use energon::energy::{ConvSpec, FcSpec, HardwareConfig, LayerSpec, SupportPattern};
use energon::Rational;
use num_bigint::BigInt;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn rational(rng: &mut Rng8, num: std::ops::RangeInclusive<i64>, max_den: i64) -> Rational {
    Rational::new(
        BigInt::from(rng.random_range(num)),
        BigInt::from(rng.random_range(1..=max_den)),
    )
}

pub fn hardware(rng: &mut Rng8) -> HardwareConfig {
    HardwareConfig {
        e_mac: rational(rng, 0..=8, 4),
        e_dram: rational(rng, 0..=40, 3),
        e_cache: rational(rng, 0..=12, 3),
        e_rf: rational(rng, 0..=4, 4),
        s_h: rng.random_range(1..=4),
        s_w: rng.random_range(1..=4),
        k_w: rng.random_range(1..=40),
        k_x: rng.random_range(1..=80),
    }
}

pub fn fc_layer(rng: &mut Rng8) -> LayerSpec {
    LayerSpec::Fc(FcSpec {
        c: rng.random_range(1..=6),
        d: rng.random_range(1..=6),
    })
}

/// A CONV layer with `c, d <= 3`, `h, w <= 8`, `r <= 3`.
pub fn conv_layer(rng: &mut Rng8) -> LayerSpec {
    loop {
        let groups = *[1, 1, 1, 2, 3].choose(rng).unwrap();
        let per = 3 / groups;
        let c = groups * rng.random_range(1..=per);
        let d = groups * rng.random_range(1..=per);
        let spec = ConvSpec {
            c,
            d,
            r: rng.random_range(1..=3),
            h: rng.random_range(1..=8),
            w: rng.random_range(1..=8),
            p: rng.random_range(0..=1),
            s: rng.random_range(1..=2),
            groups,
        };
        let layer = LayerSpec::Conv(spec);
        if layer.validate().is_ok() {
            return layer;
        }
    }
}

/// Each entry set with probability `density`.
pub fn support(rng: &mut Rng8, layer: usize, shape: Vec<usize>, density: f64) -> SupportPattern {
    let len = shape.iter().product();
    let bits = (0..len).map(|_| rng.random_bool(density)).collect();
    SupportPattern::new(layer, shape, bits).expect("length matches shape")
}

/// A layer's supports at random densities, including fully dense and empty.
pub fn supports(rng: &mut Rng8, layer: &LayerSpec) -> (SupportPattern, SupportPattern) {
    let mut density = || *[0.0, 0.3, 0.6, 1.0, 0.8].choose(rng).unwrap();
    let (dw, dx) = (density(), density());
    (
        support(rng, 0, layer.weight_shape(), dw),
        support(rng, 0, layer.input_shape(), dx),
    )
}

/// `n` items over at most `m` distinct positive weights.
pub fn knapsack(rng: &mut Rng8, n_max: usize, m_max: usize) -> KnapsackInstance {
    let n = rng.random_range(1..=n_max);
    let m = rng.random_range(1..=m_max.min(n));
    let mut distinct: Vec<Rational> = Vec::new();
    while distinct.len() < m {
        let w = rational(rng, 1..=12, 4);
        if !distinct.contains(&w) {
            distinct.push(w);
        }
    }
    // every weight class gets at least one item
    let mut weights: Vec<Rational> = distinct.clone();
    while weights.len() < n {
        weights.push(distinct[rng.random_range(0..m)].clone());
    }
    weights.shuffle(rng);
    let values = (0..n).map(|_| rational(rng, 0..=30, 6)).collect();
    let total: Rational = weights.iter().sum();
    let frac = Rational::new(BigInt::from(rng.random_range(0..=100)), BigInt::from(100));
    let capacity = total * frac;
    KnapsackInstance::new(values, weights, capacity).expect("consistent instance")
}

/// Groups of one instance's positive-weight items, values sorted descending.
pub fn groups_of(inst: &KnapsackInstance) -> Vec<WeightGroup> {
    let mut ws: Vec<&Rational> = inst
        .weights
        .iter()
        .filter(|w| **w > Rational::from_integer(0.into()))
        .collect();
    ws.sort();
    ws.dedup();
    ws.into_iter()
        .map(|w| {
            let mut vs: Vec<Rational> = inst
                .weights
                .iter()
                .zip(&inst.values)
                .filter(|(x, _)| *x == w)
                .map(|(_, v)| v.clone())
                .collect();
            vs.sort_by(|a, b| b.cmp(a));
            WeightGroup::new(w.clone(), vs).expect("valid group")
        })
        .collect()
}

/// A random nonnegative step function, possibly capped.
pub fn step_function(rng: &mut Rng8) -> StepFunction {
    let len = rng.random_range(0..=6);
    let mut x = rational(rng, 0..=4, 3);
    let mut y = rational(rng, 0..=4, 3);
    let mut points = Vec::new();
    for _ in 0..len {
        points.push(Point::new(x.clone(), y.clone()));
        x += rational(rng, 1..=5, 3);
        y += rational(rng, 1..=5, 3);
    }
    let cap = if points.is_empty() || rng.random_bool(0.5) {
        Some(y + rational(rng, 0..=5, 3))
    } else {
        None
    };
    StepFunction::new(points, cap).expect("monotone by construction")
}
