//! Closed-form inference energy of FC and CONV layers on a systolic array.
//!
//! The accelerator folds matrix products onto an `s_h x s_w` MAC grid, skips
//! MACs and memory accesses whose operand is zero, and moves data through a
//! DRAM -> cache -> register-file hierarchy. Every count below is a function
//! of the weight and input supports only.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{ceil_div, from_count, serde_q, Rational};

/// Unit energies and geometry of the target accelerator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardwareConfig {
    #[serde(with = "serde_q")]
    pub e_mac: Rational,
    #[serde(with = "serde_q")]
    pub e_dram: Rational,
    #[serde(with = "serde_q")]
    pub e_cache: Rational,
    #[serde(with = "serde_q")]
    pub e_rf: Rational,
    /// Systolic-array height.
    pub s_h: usize,
    /// Systolic-array width.
    pub s_w: usize,
    /// Weight cache capacity in elements.
    pub k_w: usize,
    /// Input cache capacity in elements.
    pub k_x: usize,
}

impl HardwareConfig {
    /// Relative units for experiments: `e_rf = 1, e_cache = 6, e_dram = 200,
    /// e_mac = 1`, a 16x16 array and 4096-element caches.
    ///
    /// These are illustrative placeholders, not measurements of any chip.
    pub fn illustrative() -> Self {
        Self {
            e_mac: crate::rational::int(1),
            e_dram: crate::rational::int(200),
            e_cache: crate::rational::int(6),
            e_rf: crate::rational::int(1),
            s_h: 16,
            s_w: 16,
            k_w: 4096,
            k_x: 4096,
        }
    }

    /// Rejects negative energies and zero geometry. Returns warnings for an
    /// unusual memory-energy ordering, which is allowed.
    pub fn validate(&self) -> Result<Vec<String>> {
        for (name, v) in [
            ("e_mac", &self.e_mac),
            ("e_dram", &self.e_dram),
            ("e_cache", &self.e_cache),
            ("e_rf", &self.e_rf),
        ] {
            if v.is_negative() {
                return Err(Error::InvalidHardware(format!("{name} must be >= 0")));
            }
        }
        for (name, v) in [
            ("s_h", self.s_h),
            ("s_w", self.s_w),
            ("k_w", self.k_w),
            ("k_x", self.k_x),
        ] {
            if v == 0 {
                return Err(Error::InvalidHardware(format!("{name} must be >= 1")));
            }
        }
        let mut warnings = Vec::new();
        if self.e_dram < self.e_cache || self.e_cache < self.e_rf {
            warnings.push("expected e_dram >= e_cache >= e_rf".to_string());
        }
        Ok(warnings)
    }
}

impl Default for HardwareConfig {
    fn default() -> Self {
        Self::illustrative()
    }
}

fn one() -> usize {
    1
}

/// Fully connected layer `X (1 x c) * W (c x d)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FcSpec {
    pub c: usize,
    pub d: usize,
}

/// Convolution of a `c x h x w` input with a `d x (c/groups) x r x r` kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub c: usize,
    pub d: usize,
    pub r: usize,
    pub h: usize,
    pub w: usize,
    #[serde(default)]
    pub p: usize,
    #[serde(default = "one")]
    pub s: usize,
    #[serde(default = "one")]
    pub groups: usize,
}

impl ConvSpec {
    pub fn out_h(&self) -> usize {
        (self.h + 2 * self.p - self.r) / self.s + 1
    }

    pub fn out_w(&self) -> usize {
        (self.w + 2 * self.p - self.r) / self.s + 1
    }

    /// Number of sliding windows, `h' * w'`.
    pub fn windows(&self) -> usize {
        self.out_h() * self.out_w()
    }

    pub fn channels_per_group(&self) -> usize {
        self.c / self.groups
    }

    pub fn filters_per_group(&self) -> usize {
        self.d / self.groups
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let ConvSpec {
            c,
            d,
            r,
            h,
            w,
            p,
            s,
            groups,
        } = *self;
        if c == 0 || d == 0 || r == 0 || h == 0 || w == 0 || s == 0 || groups == 0 {
            return Err(format!("conv dimensions must be >= 1: {self:?}"));
        }
        if r > h + 2 * p || r > w + 2 * p {
            return Err(format!(
                "kernel {r} larger than padded input {h}x{w} (p={p})"
            ));
        }
        if c % groups != 0 || d % groups != 0 {
            return Err(format!(
                "c={c} and d={d} must be divisible by groups={groups}"
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    Fc(FcSpec),
    Conv(ConvSpec),
}

impl LayerSpec {
    pub fn fc(c: usize, d: usize) -> Self {
        LayerSpec::Fc(FcSpec { c, d })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn conv(
        c: usize,
        d: usize,
        r: usize,
        h: usize,
        w: usize,
        p: usize,
        s: usize,
        groups: usize,
    ) -> Self {
        LayerSpec::Conv(ConvSpec {
            c,
            d,
            r,
            h,
            w,
            p,
            s,
            groups,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LayerSpec::Fc(fc) if fc.c == 0 || fc.d == 0 => Err(Error::InvalidLayer(format!(
                "fc dimensions must be >= 1: {fc:?}"
            ))),
            LayerSpec::Fc(_) => Ok(()),
            LayerSpec::Conv(conv) => conv.validate().map_err(Error::InvalidLayer),
        }
    }

    pub fn input_shape(&self) -> Vec<usize> {
        match self {
            LayerSpec::Fc(fc) => vec![fc.c],
            LayerSpec::Conv(cv) => vec![cv.c, cv.h, cv.w],
        }
    }

    /// FC weights are `c x d` (input-major); CONV kernels `d x c/groups x r x r`.
    pub fn weight_shape(&self) -> Vec<usize> {
        match self {
            LayerSpec::Fc(fc) => vec![fc.c, fc.d],
            LayerSpec::Conv(cv) => vec![cv.d, cv.channels_per_group(), cv.r, cv.r],
        }
    }

    pub fn output_shape(&self) -> Vec<usize> {
        match self {
            LayerSpec::Fc(fc) => vec![fc.d],
            LayerSpec::Conv(cv) => vec![cv.d, cv.out_h(), cv.out_w()],
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_shape().iter().product()
    }

    pub fn weight_len(&self) -> usize {
        self.weight_shape().iter().product()
    }

    pub fn output_len(&self) -> usize {
        self.output_shape().iter().product()
    }

    /// Upper bound on MACs for a weight support of size `w_nnz`, reached when
    /// the input is dense (and, for CONV, unpadded).
    pub fn mac_upper_bound(&self, w_nnz: u64) -> u64 {
        match self {
            LayerSpec::Fc(_) => w_nnz,
            LayerSpec::Conv(cv) => cv.windows() as u64 * w_nnz,
        }
    }
}

/// Binary occupancy of one layer's input or weight tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportPattern {
    pub layer: usize,
    shape: Vec<usize>,
    bits: Vec<bool>,
    nnz: usize,
}

impl SupportPattern {
    pub fn new(layer: usize, shape: Vec<usize>, bits: Vec<bool>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != bits.len() {
            return Err(Error::Shape {
                layer,
                message: format!(
                    "support has {} entries, shape {:?} needs {len}",
                    bits.len(),
                    shape
                ),
            });
        }
        let nnz = bits.iter().filter(|&&b| b).count();
        Ok(Self {
            layer,
            shape,
            bits,
            nnz,
        })
    }

    pub fn dense(layer: usize, shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            layer,
            shape,
            bits: vec![true; len],
            nnz: len,
        }
    }

    pub fn from_values(layer: usize, shape: Vec<usize>, values: &[f64]) -> Result<Self> {
        Self::new(layer, shape, values.iter().map(|v| *v != 0.0).collect())
    }

    pub fn weights_of(layer: usize, spec: &LayerSpec, values: &[f64]) -> Result<Self> {
        Self::from_values(layer, spec.weight_shape(), values)
    }

    pub fn input_of(layer: usize, spec: &LayerSpec, values: &[f64]) -> Result<Self> {
        Self::from_values(layer, spec.input_shape(), values)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    fn expect_shape(&self, what: &str, shape: &[usize]) -> Result<()> {
        if self.shape != shape {
            return Err(Error::Shape {
                layer: self.layer,
                message: format!(
                    "{what} support shape {:?} does not match expected {:?}",
                    self.shape, shape
                ),
            });
        }
        Ok(())
    }
}

/// How CONV input DRAM traffic is counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DramMode {
    /// Every overlap band between cache fills is charged `c * w * (r - s)`
    /// elements, as if the input were dense.
    #[default]
    DenseUpperBound,
    /// Only nonzeros inside the re-read overlap bands are charged.
    ExactSparse,
}

/// The seven per-layer access counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessCounts {
    pub n_mac: u64,
    pub n_dram_w: u64,
    pub n_cache_w: u64,
    pub n_rf_w: u64,
    pub n_dram_x: u64,
    pub n_cache_x: u64,
    pub n_rf_x: u64,
}

impl AccessCounts {
    pub fn comp_energy(&self, hw: &HardwareConfig) -> Rational {
        &hw.e_mac * from_count(self.n_mac)
    }

    pub fn data_energy(&self, hw: &HardwareConfig) -> Rational {
        &hw.e_dram * from_count(self.n_dram_x + self.n_dram_w)
            + &hw.e_cache * from_count(self.n_cache_x + self.n_cache_w)
            + &hw.e_rf * from_count(self.n_rf_x + self.n_rf_w)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerEnergy {
    pub counts: AccessCounts,
    pub e_comp: Rational,
    pub e_data: Rational,
}

impl LayerEnergy {
    pub fn from_counts(counts: AccessCounts, hw: &HardwareConfig) -> Self {
        Self {
            e_comp: counts.comp_energy(hw),
            e_data: counts.data_energy(hw),
            counts,
        }
    }

    pub fn total(&self) -> Rational {
        &self.e_comp + &self.e_data
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnergyBreakdown {
    pub layers: Vec<LayerEnergy>,
    pub e_comp: Rational,
    pub e_data: Rational,
}

impl EnergyBreakdown {
    pub fn from_layers(layers: Vec<LayerEnergy>) -> Self {
        let e_comp = layers
            .iter()
            .fold(Rational::zero(), |acc, l| acc + &l.e_comp);
        let e_data = layers
            .iter()
            .fold(Rational::zero(), |acc, l| acc + &l.e_data);
        Self {
            layers,
            e_comp,
            e_data,
        }
    }

    pub fn total(&self) -> Rational {
        &self.e_comp + &self.e_data
    }
}

pub fn fc_energy(
    spec: &FcSpec,
    w_supp: &SupportPattern,
    x_supp: &SupportPattern,
    hw: &HardwareConfig,
) -> Result<LayerEnergy> {
    let layer = LayerSpec::Fc(*spec);
    layer.validate()?;
    w_supp.expect_shape("weight", &layer.weight_shape())?;
    x_supp.expect_shape("input", &layer.input_shape())?;
    Ok(LayerEnergy::from_counts(
        fc_counts(spec, w_supp, x_supp, hw),
        hw,
    ))
}

fn fc_counts(
    spec: &FcSpec,
    w: &SupportPattern,
    x: &SupportPattern,
    hw: &HardwareConfig,
) -> AccessCounts {
    let (c, d) = (spec.c, spec.d);
    let w_nnz = w.nnz() as u64;
    let x_nnz = x.nnz() as u64;
    let k_x = hw.k_x as u64;
    let folds = ceil_div(d as u64, hw.s_w as u64);

    // sum(supp(X) supp(W)): row i of W meets input element i
    let n_mac = (0..c)
        .filter(|&i| x.get(i))
        .map(|i| w.bits()[i * d..(i + 1) * d].iter().filter(|&&b| b).count() as u64)
        .sum();

    AccessCounts {
        n_mac,
        n_dram_w: w_nnz,
        n_cache_w: w_nnz,
        n_rf_w: w_nnz,
        n_dram_x: folds * x_nnz.saturating_sub(k_x) + k_x.min(x_nnz) + d as u64,
        n_cache_x: folds * x_nnz,
        n_rf_x: d as u64 * x_nnz + 2 * w_nnz,
    }
}

/// Im2col view of an input support.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnfoldedSupport {
    /// Nonzeros of the `h'w' x c r^2` unfolded matrix.
    pub nnz: u64,
    /// Nonzeros inside each receptive field, row-major over output positions.
    pub per_window: Vec<u64>,
    /// Per unfolded column `(channel, ky, kx)`: number of windows where that
    /// position holds a nonzero.
    pub per_column: Vec<u64>,
}

pub fn unfold_support(x_supp: &SupportPattern, spec: &ConvSpec) -> Result<UnfoldedSupport> {
    let layer = LayerSpec::Conv(*spec);
    layer.validate()?;
    x_supp.expect_shape("input", &layer.input_shape())?;
    Ok(unfold(x_supp, spec))
}

fn unfold(x: &SupportPattern, spec: &ConvSpec) -> UnfoldedSupport {
    let ConvSpec {
        c, r, h, w, p, s, ..
    } = *spec;
    let (oh, ow) = (spec.out_h(), spec.out_w());
    let mut per_window = vec![0u64; oh * ow];
    let mut per_column = vec![0u64; c * r * r];
    for oy in 0..oh {
        for ox in 0..ow {
            let mut count = 0;
            for ch in 0..c {
                for ky in 0..r {
                    let iy = (oy * s + ky) as isize - p as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..r {
                        let ix = (ox * s + kx) as isize - p as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        if x.get((ch * h + iy as usize) * w + ix as usize) {
                            count += 1;
                            per_column[(ch * r + ky) * r + kx] += 1;
                        }
                    }
                }
            }
            per_window[oy * ow + ox] = count;
        }
    }
    UnfoldedSupport {
        nnz: per_window.iter().sum(),
        per_window,
        per_column,
    }
}

/// Cache-fill schedule for row-granularity input loading.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RowSchedule {
    /// Input rows held by one cache fill, `floor(k_x / (c w))`.
    pub rows_per_fill: usize,
    /// Rows shared by consecutive fills, `max(r - s, 0)`.
    pub overlap_rows: usize,
    /// First-row distance between consecutive fills.
    pub step: usize,
    /// Number of fills, `ceil(h / step)`.
    pub fills: usize,
}

impl RowSchedule {
    pub fn new(layer: usize, spec: &ConvSpec, hw: &HardwareConfig) -> Result<Self> {
        let rows_per_fill = hw.k_x / (spec.c * spec.w);
        let overlap_rows = spec.r.saturating_sub(spec.s);
        if rows_per_fill <= overlap_rows {
            return Err(Error::InputCacheTooSmall {
                layer,
                rows_per_fill,
                kernel: spec.r,
                stride: spec.s,
            });
        }
        let step = rows_per_fill - overlap_rows;
        Ok(Self {
            rows_per_fill,
            overlap_rows,
            step,
            fills: spec.h.div_ceil(step),
        })
    }

    /// Row ranges re-read at each fill boundary. The last bands may extend
    /// past the bottom of the input.
    pub fn overlap_bands(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        (1..self.fills).map(move |t| t * self.step..t * self.step + self.overlap_rows)
    }
}

pub fn conv_energy(
    spec: &ConvSpec,
    w_supp: &SupportPattern,
    x_supp: &SupportPattern,
    hw: &HardwareConfig,
    mode: DramMode,
) -> Result<LayerEnergy> {
    let layer = LayerSpec::Conv(*spec);
    layer.validate()?;
    w_supp.expect_shape("weight", &layer.weight_shape())?;
    x_supp.expect_shape("input", &layer.input_shape())?;
    let counts = conv_counts(spec, w_supp, x_supp, hw, mode)?;
    Ok(LayerEnergy::from_counts(counts, hw))
}

fn conv_counts(
    spec: &ConvSpec,
    w: &SupportPattern,
    x: &SupportPattern,
    hw: &HardwareConfig,
    mode: DramMode,
) -> Result<AccessCounts> {
    let schedule = RowSchedule::new(w.layer, spec, hw)?;
    let ConvSpec {
        c,
        d,
        r,
        h,
        w: width,
        groups,
        ..
    } = *spec;
    let windows = spec.windows() as u64;
    let w_nnz = w.nnz() as u64;
    let x_nnz = x.nnz() as u64;
    let k_w = hw.k_w as u64;
    let unfolded = unfold(x, spec);

    // sum(supp(Xbar) supp(Wbar)): column k of Xbar meets row k of Wbar, and
    // Wbar is block diagonal over groups.
    let cpg = spec.channels_per_group();
    let fpg = spec.filters_per_group();
    let taps = r * r;
    let mut n_mac = 0u64;
    for j in 0..d {
        let g = j / fpg;
        for ci in 0..cpg {
            let channel = g * cpg + ci;
            for t in 0..taps {
                if w.get((j * cpg + ci) * taps + t) {
                    n_mac += unfolded.per_column[channel * taps + t];
                }
            }
        }
    }

    let row_folds = ceil_div(windows, hw.s_h as u64);
    let col_folds = ceil_div(d as u64, hw.s_w as u64);

    let overlap = match mode {
        DramMode::DenseUpperBound => {
            (schedule.fills as u64 - 1) * (c * width * schedule.overlap_rows) as u64
        }
        DramMode::ExactSparse => {
            let mut row_nnz = vec![0u64; h];
            for ch in 0..c {
                for (y, count) in row_nnz.iter_mut().enumerate() {
                    let start = (ch * h + y) * width;
                    *count += x.bits()[start..start + width]
                        .iter()
                        .filter(|&&b| b)
                        .count() as u64;
                }
            }
            schedule
                .overlap_bands()
                .map(|band| {
                    row_nnz[band.start.min(h)..band.end.min(h)]
                        .iter()
                        .sum::<u64>()
                })
                .sum()
        }
    };

    Ok(AccessCounts {
        n_mac,
        n_dram_w: row_folds * w_nnz.saturating_sub(k_w) + k_w.min(w_nnz),
        n_cache_w: row_folds * w_nnz,
        n_rf_w: windows * w_nnz,
        n_dram_x: x_nnz + overlap + d as u64 * windows,
        n_cache_x: ceil_div(col_folds * unfolded.nnz, groups as u64),
        n_rf_x: (d / groups) as u64 * unfolded.nnz + 2 * windows * w_nnz,
    })
}

/// Energy of one layer of either kind.
pub fn layer_energy(
    spec: &LayerSpec,
    w_supp: &SupportPattern,
    x_supp: &SupportPattern,
    hw: &HardwareConfig,
    mode: DramMode,
) -> Result<LayerEnergy> {
    match spec {
        LayerSpec::Fc(fc) => fc_energy(fc, w_supp, x_supp, hw),
        LayerSpec::Conv(cv) => conv_energy(cv, w_supp, x_supp, hw, mode),
    }
}

/// Sum of per-layer energies; `x_supps[i]` is the (mask-induced) support of
/// layer `i`'s input.
pub fn total_energy(
    layers: &[LayerSpec],
    w_supps: &[SupportPattern],
    x_supps: &[SupportPattern],
    hw: &HardwareConfig,
    mode: DramMode,
) -> Result<EnergyBreakdown> {
    if w_supps.len() != layers.len() || x_supps.len() != layers.len() {
        return Err(Error::InvalidArgument(format!(
            "{} layers but {} weight and {} input supports",
            layers.len(),
            w_supps.len(),
            x_supps.len()
        )));
    }
    let per_layer = layers
        .iter()
        .zip(w_supps.iter().zip(x_supps))
        .enumerate()
        .map(|(i, (spec, (w, x)))| {
            if w.layer != i || x.layer != i {
                return Err(Error::Shape {
                    layer: i,
                    message: format!("supports tagged for layers {} and {}", w.layer, x.layer),
                });
            }
            layer_energy(spec, w, x, hw, mode)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergyBreakdown::from_layers(per_layer))
}
