//! Linearizes the energy constraint in the weight support and builds the
//! equivalent 0/1 knapsack instance.
//!
//! With input-side statistics frozen and computation charged at its
//! dense-input bound, a layer's energy as a function of `n = ||W||_0` is
//!
//! ```text
//! E(n) = a1 * min(k, n) + a2 * max(0, n - k) + a3 * n + a4
//! ```

use std::fmt::Write as _;

use num_traits::{Signed, Zero};

use crate::energy::{conv_energy, fc_energy, DramMode, HardwareConfig, LayerSpec, SupportPattern};
use crate::error::{Error, Result};
use crate::rational::{ceil_div, format, from_count, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerCoeffs {
    pub alpha1: Rational,
    pub alpha2: Rational,
    pub alpha3: Rational,
    pub alpha4: Rational,
    pub k: u64,
}

impl LayerCoeffs {
    /// Energy at weight-support size `n`.
    pub fn energy(&self, n: u64) -> Rational {
        &self.alpha1 * from_count(self.k.min(n))
            + &self.alpha2 * from_count(n.saturating_sub(self.k))
            + &self.alpha3 * from_count(n)
            + &self.alpha4
    }
}

/// Input-side access counts of one layer, frozen during weight projection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct InputStats {
    pub n_dram_x: u64,
    pub n_cache_x: u64,
    /// The part of `n_rf_x` that does not depend on the weights.
    pub n_rf_x_input: u64,
}

impl InputStats {
    /// Measures the input-side counts for the given input support. These do
    /// not depend on the weights, so they are read off an empty weight support.
    pub fn measure(
        spec: &LayerSpec,
        x_supp: &SupportPattern,
        hw: &HardwareConfig,
        mode: DramMode,
    ) -> Result<Self> {
        let layer = x_supp.layer;
        let empty =
            SupportPattern::new(layer, spec.weight_shape(), vec![false; spec.weight_len()])?;
        let counts = match spec {
            LayerSpec::Fc(fc) => fc_energy(fc, &empty, x_supp, hw)?.counts,
            LayerSpec::Conv(cv) => conv_energy(cv, &empty, x_supp, hw, mode)?.counts,
        };
        Ok(Self {
            n_dram_x: counts.n_dram_x,
            n_cache_x: counts.n_cache_x,
            n_rf_x_input: counts.n_rf_x,
        })
    }
}

pub fn extract_coefficients(
    spec: &LayerSpec,
    hw: &HardwareConfig,
    stats: &InputStats,
) -> LayerCoeffs {
    let alpha4 = &hw.e_dram * from_count(stats.n_dram_x)
        + &hw.e_cache * from_count(stats.n_cache_x)
        + &hw.e_rf * from_count(stats.n_rf_x_input);
    match spec {
        LayerSpec::Fc(_) => LayerCoeffs {
            alpha1: Rational::zero(),
            alpha2: Rational::zero(),
            alpha3: &hw.e_mac + &hw.e_dram + &hw.e_cache + &hw.e_rf * from_count(3),
            alpha4,
            k: 0,
        },
        LayerSpec::Conv(cv) => {
            let windows = from_count(cv.windows() as u64);
            let passes = from_count(ceil_div(cv.windows() as u64, hw.s_h as u64));
            LayerCoeffs {
                alpha1: hw.e_dram.clone(),
                alpha2: &hw.e_dram * &passes,
                alpha3: &hw.e_mac * &windows
                    + &hw.e_cache * &passes
                    + &hw.e_rf * from_count(3) * &windows,
                alpha4,
                k: hw.k_w as u64,
            }
        }
    }
}

/// Coefficients for every layer given its current input support.
pub fn network_coefficients(
    layers: &[LayerSpec],
    x_supps: &[SupportPattern],
    hw: &HardwareConfig,
    mode: DramMode,
) -> Result<Vec<LayerCoeffs>> {
    if layers.len() != x_supps.len() {
        return Err(Error::InvalidArgument(format!(
            "{} layers but {} input supports",
            layers.len(),
            x_supps.len()
        )));
    }
    layers
        .iter()
        .zip(x_supps)
        .map(|(spec, x)| {
            Ok(extract_coefficients(
                spec,
                hw,
                &InputStats::measure(spec, x, hw, mode)?,
            ))
        })
        .collect()
}

/// `layer,alpha1,alpha2,alpha3,alpha4,k` with exact rational fields.
pub fn coefficients_csv(coeffs: &[LayerCoeffs]) -> String {
    let mut out = String::from("layer,alpha1,alpha2,alpha3,alpha4,k\n");
    for (i, c) in coeffs.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{}",
            format(&c.alpha1),
            format(&c.alpha2),
            format(&c.alpha3),
            format(&c.alpha4),
            c.k
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnapsackInstance {
    pub values: Vec<Rational>,
    pub weights: Vec<Rational>,
    pub capacity: Rational,
    /// Layer id of each item.
    pub layer_of: Vec<usize>,
}

impl KnapsackInstance {
    /// A plain instance whose items all belong to layer 0.
    pub fn new(values: Vec<Rational>, weights: Vec<Rational>, capacity: Rational) -> Result<Self> {
        let layer_of = vec![0; values.len()];
        Self::with_layers(values, weights, capacity, layer_of)
    }

    pub fn with_layers(
        values: Vec<Rational>,
        weights: Vec<Rational>,
        capacity: Rational,
        layer_of: Vec<usize>,
    ) -> Result<Self> {
        if values.len() != weights.len() || values.len() != layer_of.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values, {} weights, {} layer ids",
                values.len(),
                weights.len(),
                layer_of.len()
            )));
        }
        if values.iter().chain(&weights).any(|v| v.is_negative()) {
            return Err(Error::InvalidArgument(
                "values and weights must be nonnegative".into(),
            ));
        }
        Ok(Self {
            values,
            weights,
            capacity,
            layer_of,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Indices of `z` ordered by magnitude, largest first; equal magnitudes keep
/// index order.
pub fn magnitude_order(z: &[Rational]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..z.len()).collect();
    idx.sort_by(|&a, &b| z[b].abs().cmp(&z[a].abs()).then(a.cmp(&b)));
    idx
}

/// Values are `Z_j^2`. Within a layer the `k` largest-magnitude entries weigh
/// `a1 + a3` and the rest `a2 + a3`. The capacity is the budget left after the
/// weight-independent energy.
pub fn build_knapsack(
    z: &[Vec<Rational>],
    coeffs: &[LayerCoeffs],
    e_budget: &Rational,
) -> Result<KnapsackInstance> {
    if z.len() != coeffs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} weight tensors but {} coefficient sets",
            z.len(),
            coeffs.len()
        )));
    }
    let floor = coeffs
        .iter()
        .fold(Rational::zero(), |acc, c| acc + &c.alpha4);
    let capacity = e_budget - &floor;
    if capacity.is_negative() {
        return Err(Error::InfeasibleBudget {
            budget: Box::new(e_budget.clone()),
            floor: Box::new(floor),
        });
    }
    let total: usize = z.iter().map(Vec::len).sum();
    let mut values = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let mut layer_of = Vec::with_capacity(total);
    for (layer, (zl, c)) in z.iter().zip(coeffs).enumerate() {
        let mut in_top = vec![false; zl.len()];
        for &i in magnitude_order(zl)
            .iter()
            .take(c.k.min(zl.len() as u64) as usize)
        {
            in_top[i] = true;
        }
        let top = &c.alpha1 + &c.alpha3;
        let rest = &c.alpha2 + &c.alpha3;
        for (v, top_k) in zl.iter().zip(in_top) {
            values.push(v * v);
            weights.push(if top_k { top.clone() } else { rest.clone() });
            layer_of.push(layer);
        }
    }
    KnapsackInstance::with_layers(values, weights, capacity, layer_of)
}

/// Keeps `z[j]` where `xi[j]` is set.
pub fn apply_selection<T: Clone + Zero>(z: &[T], xi: &[bool]) -> Result<Vec<T>> {
    if z.len() != xi.len() {
        return Err(Error::InvalidArgument(format!(
            "{} weights but {} selection bits",
            z.len(),
            xi.len()
        )));
    }
    Ok(z.iter()
        .zip(xi)
        .map(|(v, &keep)| if keep { v.clone() } else { T::zero() })
        .collect())
}
