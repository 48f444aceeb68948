//! Event-count replay of one layer's inference on the folded systolic array.
//!
//! Nothing here uses the closed-form counts: every access is an explicit
//! event in a loop over folds, passes, windows and cache fills.

use std::collections::HashSet;

use energon::energy::{
    AccessCounts, ConvSpec, DramMode, FcSpec, HardwareConfig, LayerSpec, SupportPattern,
};

/// A cache that keeps the first `capacity` distinct elements it sees and
/// never evicts them; everything else is fetched from DRAM on every use.
struct PinnedCache {
    capacity: usize,
    resident: HashSet<usize>,
    misses: u64,
}

impl PinnedCache {
    fn new(capacity: usize) -> Self {
        Self {
            capacity,
            resident: HashSet::new(),
            misses: 0,
        }
    }

    fn read(&mut self, id: usize) {
        if self.resident.contains(&id) {
            return;
        }
        self.misses += 1;
        if self.resident.len() < self.capacity {
            self.resident.insert(id);
        }
    }
}

pub fn simulate(
    layer: &LayerSpec,
    w: &SupportPattern,
    x: &SupportPattern,
    hw: &HardwareConfig,
    mode: DramMode,
) -> AccessCounts {
    match layer {
        LayerSpec::Fc(fc) => simulate_fc(fc, w.bits(), x.bits(), hw),
        LayerSpec::Conv(cv) => simulate_conv(cv, w.bits(), x.bits(), hw, mode),
    }
}

fn simulate_fc(spec: &FcSpec, w: &[bool], x: &[bool], hw: &HardwareConfig) -> AccessCounts {
    let (c, d) = (spec.c, spec.d);
    let mut n = AccessCounts::default();
    let mut x_cache = PinnedCache::new(hw.k_x);

    // weights stream through once: DRAM -> cache -> PE register
    for i in 0..c {
        for j in 0..d {
            if w[i * d + j] {
                n.n_dram_w += 1;
                n.n_cache_w += 1;
                n.n_rf_w += 1;
            }
        }
    }

    // output columns are folded onto the array width
    let mut col = 0;
    while col < d {
        let cols = col..(col + hw.s_w).min(d);
        for i in (0..c).filter(|&i| x[i]) {
            x_cache.read(i);
            n.n_cache_x += 1;
            for j in cols.clone() {
                // the input passes through every PE of its row
                n.n_rf_x += 1;
                if w[i * d + j] {
                    n.n_mac += 1;
                }
            }
        }
        col += hw.s_w;
    }
    // each stored weight's PE reads and writes a partial sum
    n.n_rf_x += 2 * n.n_rf_w;
    n.n_dram_x = x_cache.misses + d as u64; // plus output write-back
    n
}

fn simulate_conv(
    spec: &ConvSpec,
    w: &[bool],
    x: &[bool],
    hw: &HardwareConfig,
    mode: DramMode,
) -> AccessCounts {
    let ConvSpec {
        c,
        d,
        r,
        h,
        w: width,
        p,
        s,
        groups,
    } = *spec;
    let (oh, ow) = (spec.out_h(), spec.out_w());
    let cpg = c / groups;
    let fpg = d / groups;
    let windows = oh * ow;
    let at = |ch: usize, iy: isize, ix: isize| -> bool {
        iy >= 0
            && ix >= 0
            && (iy as usize) < h
            && (ix as usize) < width
            && x[(ch * h + iy as usize) * width + ix as usize]
    };
    let w_at = |j: usize, ci: usize, ky: usize, kx: usize| w[((j * cpg + ci) * r + ky) * r + kx];
    let mut n = AccessCounts::default();

    // direct convolution, skipping zero operands
    for j in 0..d {
        let g = j / fpg;
        for oy in 0..oh {
            for ox in 0..ow {
                for ci in 0..cpg {
                    for ky in 0..r {
                        for kx in 0..r {
                            let iy = (oy * s + ky) as isize - p as isize;
                            let ix = (ox * s + kx) as isize - p as isize;
                            if w_at(j, ci, ky, kx) && at(g * cpg + ci, iy, ix) {
                                n.n_mac += 1;
                            }
                        }
                    }
                }
            }
        }
    }

    // windows are folded onto the array height; each pass reloads the
    // weights into the cache, and the weight cache pins what fits
    let w_ids: Vec<usize> = (0..w.len()).filter(|&i| w[i]).collect();
    let mut w_cache = PinnedCache::new(hw.k_w);
    let mut start = 0;
    while start < windows {
        let pass = start..(start + hw.s_h).min(windows);
        for &id in &w_ids {
            w_cache.read(id);
            n.n_cache_w += 1;
            for _window in pass.clone() {
                n.n_rf_w += 1;
                // partial sum read and write at the PE
                n.n_rf_x += 2;
            }
        }
        start += hw.s_h;
    }
    n.n_dram_w = w_cache.misses;

    // unfolded input rows: each nonzero in a window is read by every filter of
    // its group
    let mut unfolded = 0u64;
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                for ky in 0..r {
                    for kx in 0..r {
                        let iy = (oy * s + ky) as isize - p as isize;
                        let ix = (ox * s + kx) as isize - p as isize;
                        if at(ch, iy, ix) {
                            unfolded += 1;
                            n.n_rf_x += fpg as u64;
                        }
                    }
                }
            }
        }
    }
    // the unfolded matrix is streamed once per fold of filters; grouped
    // layers share the stream across groups
    let folds = d.div_ceil(hw.s_w) as u64;
    n.n_cache_x = (folds * unfolded).div_ceil(groups as u64);

    n.n_dram_x = input_fills(spec, x, hw, mode) + (d * windows) as u64;
    n
}

/// DRAM input reads: the cache is filled with whole rows, consecutive fills
/// sharing the rows a sliding window straddles.
fn input_fills(spec: &ConvSpec, x: &[bool], hw: &HardwareConfig, mode: DramMode) -> u64 {
    let ConvSpec {
        c,
        r,
        h,
        w: width,
        s,
        ..
    } = *spec;
    let rows_per_fill = hw.k_x / (c * width);
    let shared = r.saturating_sub(s);
    assert!(rows_per_fill > shared, "input cache too small");
    let advance = rows_per_fill - shared;
    let row_nnz = |y: usize| -> u64 {
        (0..c)
            .map(|ch| {
                (0..width)
                    .filter(|&col| x[(ch * h + y) * width + col])
                    .count() as u64
            })
            .sum()
    };
    let mut loaded = 0u64;
    let mut first = 0;
    let mut fill = 0;
    while first < h {
        for y in first..first + rows_per_fill {
            let reread = fill > 0 && y < first + shared;
            match mode {
                DramMode::ExactSparse if y < h => loaded += row_nnz(y),
                DramMode::ExactSparse => {}
                // rows shared with the previous fill are charged as dense,
                // including rows past the bottom edge
                DramMode::DenseUpperBound if reread => loaded += (c * width) as u64,
                DramMode::DenseUpperBound if y < h => loaded += row_nnz(y),
                DramMode::DenseUpperBound => {}
            }
        }
        first += advance;
        fill += 1;
    }
    loaded
}

#[cfg(test)]
mod tests {
    use super::*;
    use energon::rational::{int, ratio};

    fn hw() -> HardwareConfig {
        HardwareConfig {
            e_mac: int(1),
            e_dram: int(2),
            e_cache: int(1),
            e_rf: ratio(1, 2),
            s_h: 2,
            s_w: 2,
            k_w: 2,
            k_x: 6,
        }
    }

    #[test]
    fn fc_example() {
        let layer = LayerSpec::fc(3, 2);
        let w =
            SupportPattern::new(0, vec![3, 2], vec![true, true, true, false, false, true]).unwrap();
        let x = SupportPattern::dense(0, vec![3]);
        let mut hw = hw();
        hw.k_x = 2;
        let n = simulate(&layer, &w, &x, &hw, DramMode::DenseUpperBound);
        assert_eq!((n.n_mac, n.n_cache_x, n.n_dram_x, n.n_rf_x), (4, 3, 5, 14));
        assert_eq!((n.n_dram_w, n.n_cache_w, n.n_rf_w), (4, 4, 4));
    }

    #[test]
    fn conv_example() {
        let layer = LayerSpec::conv(1, 1, 2, 3, 3, 0, 1, 1);
        let w = SupportPattern::dense(0, vec![1, 1, 2, 2]);
        let x = SupportPattern::dense(0, vec![1, 3, 3]);
        let n = simulate(&layer, &w, &x, &hw(), DramMode::DenseUpperBound);
        assert_eq!(n.n_mac, 16);
        assert_eq!((n.n_cache_w, n.n_rf_w, n.n_dram_w), (8, 16, 6));
        assert_eq!((n.n_cache_x, n.n_rf_x, n.n_dram_x), (16, 48, 19));
    }
}
