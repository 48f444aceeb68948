//! A small feed-forward network of FC and CONV layers with hand-written
//! reverse-mode gradients.
//!
//! Activations are flat `f64` vectors in channel-major order; ReLU sits
//! between layers and the last layer's pre-activation is the network output.
//! Any layer may carry an input mask, multiplied into its input.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::energy::{ConvSpec, LayerSpec};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    /// FC: `c x d` row-major. CONV: `d x c/groups x r x r`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub mask: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TinyNet {
    pub layers: Vec<Layer>,
}

/// Gradients with the same layout as the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub m: Vec<Option<Vec<f64>>>,
}

impl Grads {
    fn zeros(net: &TinyNet) -> Self {
        Self {
            w: net.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            b: net.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
            m: net
                .layers
                .iter()
                .map(|l| l.mask.as_ref().map(|m| vec![0.0; m.len()]))
                .collect(),
        }
    }
}

impl TinyNet {
    /// He-normal weights, zero biases, no masks.
    pub fn new(specs: &[LayerSpec], rng: &mut ChaCha8Rng) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidArgument(
                "network needs at least one layer".into(),
            ));
        }
        for (i, s) in specs.iter().enumerate() {
            s.validate()?;
            if i > 0 && specs[i - 1].output_len() != s.input_len() {
                return Err(Error::Shape {
                    layer: i,
                    message: format!(
                        "input size {} does not match previous output {}",
                        s.input_len(),
                        specs[i - 1].output_len()
                    ),
                });
            }
        }
        let layers = specs
            .iter()
            .map(|spec| {
                let fan_in = match spec {
                    LayerSpec::Fc(fc) => fc.c,
                    LayerSpec::Conv(cv) => cv.channels_per_group() * cv.r * cv.r,
                };
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
                let w = (0..spec.weight_len()).map(|_| normal.sample(rng)).collect();
                let bias_len = spec.output_shape()[0];
                Layer {
                    spec: *spec,
                    w,
                    b: vec![0.0; bias_len],
                    mask: None,
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].spec.input_len()
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().expect("nonempty").spec.output_len()
    }

    /// Installs an all-ones mask on the input of each listed layer.
    pub fn add_masks(&mut self, layers: &[usize]) -> Result<()> {
        for &i in layers {
            let layer = self
                .layers
                .get_mut(i)
                .ok_or_else(|| Error::InvalidArgument(format!("no layer {i} to mask")))?;
            layer.mask = Some(vec![1.0; layer.spec.input_len()]);
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).logits
    }

    fn trace(&self, x: &[f64]) -> Trace {
        assert_eq!(x.len(), self.input_len(), "input size");
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                a = pre
                    .last()
                    .map(|z: &Vec<f64>| z.iter().map(|v| v.max(0.0)).collect())
                    .expect("previous layer");
            }
            let xm = match &layer.mask {
                Some(m) => a.iter().zip(m).map(|(v, m)| v * m).collect(),
                None => a.clone(),
            };
            let z = layer_forward(layer, &xm);
            inputs.push(a.clone());
            pre.push(z);
        }
        let logits = pre.last().cloned().expect("nonempty");
        Trace {
            inputs,
            pre,
            logits,
        }
    }

    /// Backpropagates `dlogits` through one traced sample, accumulating into
    /// `g`.
    fn backward(&self, t: &Trace, dlogits: &[f64], g: &mut Grads) {
        let mut dz = dlogits.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let a = &t.inputs[i];
            let xm: Vec<f64> = match &layer.mask {
                Some(m) => a.iter().zip(m).map(|(v, m)| v * m).collect(),
                None => a.clone(),
            };
            let dxm = layer_backward(layer, &xm, &dz, &mut g.w[i], &mut g.b[i]);
            let da: Vec<f64> = match &layer.mask {
                Some(m) => {
                    let gm = g.m[i].as_mut().expect("mask gradient slot");
                    for k in 0..m.len() {
                        gm[k] += dxm[k] * a[k];
                    }
                    dxm.iter().zip(m).map(|(d, m)| d * m).collect()
                }
                None => dxm,
            };
            if i > 0 {
                let zp = &t.pre[i - 1];
                dz = da
                    .iter()
                    .zip(zp)
                    .map(|(d, z)| if *z > 0.0 { *d } else { 0.0 })
                    .collect();
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.forward(x))
    }

    pub fn accuracy(&self, xs: &[Vec<f64>], ys: &[usize]) -> f64 {
        if xs.is_empty() {
            return 0.0;
        }
        let correct = xs
            .iter()
            .zip(ys)
            .filter(|(x, y)| self.predict(x) == **y)
            .count();
        correct as f64 / xs.len() as f64
    }

    /// Number of trainable parameters (weights, biases and masks).
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.len() + l.b.len() + l.mask.as_ref().map_or(0, Vec::len))
            .sum()
    }
}

struct Trace {
    /// Unmasked input of each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation output of each layer.
    pre: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

fn conv_index(
    spec: &ConvSpec,
    oy: usize,
    ox: usize,
    ky: usize,
    kx: usize,
) -> Option<(usize, usize)> {
    let iy = (oy * spec.s + ky) as isize - spec.p as isize;
    let ix = (ox * spec.s + kx) as isize - spec.p as isize;
    if iy < 0 || ix < 0 || iy as usize >= spec.h || ix as usize >= spec.w {
        None
    } else {
        Some((iy as usize, ix as usize))
    }
}

fn layer_forward(layer: &Layer, x: &[f64]) -> Vec<f64> {
    match &layer.spec {
        LayerSpec::Fc(fc) => {
            let mut z = layer.b.clone();
            for (xi, row) in x.iter().zip(layer.w.chunks(fc.d)).take(fc.c) {
                if *xi == 0.0 {
                    continue;
                }
                for (zj, wij) in z.iter_mut().zip(row) {
                    *zj += xi * wij;
                }
            }
            z
        }
        LayerSpec::Conv(cv) => {
            let (oh, ow) = (cv.out_h(), cv.out_w());
            let (cpg, fpg, r) = (cv.channels_per_group(), cv.filters_per_group(), cv.r);
            let mut z = vec![0.0; cv.d * oh * ow];
            for j in 0..cv.d {
                let g = j / fpg;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = layer.b[j];
                        for ci in 0..cpg {
                            let ch = g * cpg + ci;
                            for ky in 0..r {
                                for kx in 0..r {
                                    if let Some((iy, ix)) = conv_index(cv, oy, ox, ky, kx) {
                                        acc += layer.w[((j * cpg + ci) * r + ky) * r + kx]
                                            * x[(ch * cv.h + iy) * cv.w + ix];
                                    }
                                }
                            }
                        }
                        z[(j * oh + oy) * ow + ox] = acc;
                    }
                }
            }
            z
        }
    }
}

/// Accumulates weight and bias gradients; returns the input gradient.
fn layer_backward(
    layer: &Layer,
    x: &[f64],
    dz: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; x.len()];
    match &layer.spec {
        LayerSpec::Fc(fc) => {
            for (gbj, dzj) in gb.iter_mut().zip(dz) {
                *gbj += dzj;
            }
            for i in 0..fc.c {
                let row = i * fc.d..(i + 1) * fc.d;
                let mut acc = 0.0;
                for ((w, g), d) in layer.w[row.clone()].iter().zip(&mut gw[row]).zip(dz) {
                    *g += x[i] * d;
                    acc += w * d;
                }
                dx[i] = acc;
            }
        }
        LayerSpec::Conv(cv) => {
            let (oh, ow) = (cv.out_h(), cv.out_w());
            let (cpg, fpg, r) = (cv.channels_per_group(), cv.filters_per_group(), cv.r);
            for j in 0..cv.d {
                let g = j / fpg;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let d = dz[(j * oh + oy) * ow + ox];
                        gb[j] += d;
                        for ci in 0..cpg {
                            let ch = g * cpg + ci;
                            for ky in 0..r {
                                for kx in 0..r {
                                    if let Some((iy, ix)) = conv_index(cv, oy, ox, ky, kx) {
                                        let wi = ((j * cpg + ci) * r + ky) * r + kx;
                                        let xi = (ch * cv.h + iy) * cv.w + ix;
                                        gw[wi] += x[xi] * d;
                                        dx[xi] += layer.w[wi] * d;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    dx
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn log_softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

/// Mini-batch loss `(1 - lambda) CE + lambda ||z - z_teacher||^2 / K`,
/// averaged over the batch, and its gradients.
///
/// `teacher` holds the dense model's logits per sample; `None` drops the
/// distillation term entirely.
pub fn kd_loss(
    net: &TinyNet,
    xs: &[&[f64]],
    ys: &[usize],
    teacher: Option<&[Vec<f64>]>,
    lambda: f64,
) -> (f64, Grads) {
    let mut g = Grads::zeros(net);
    let scale = 1.0 / xs.len().max(1) as f64;
    let mut loss = 0.0;
    for (n, (x, &y)) in xs.iter().zip(ys).enumerate() {
        let t = net.trace(x);
        let z = &t.logits;
        let k = z.len() as f64;
        let ls = log_softmax(z);
        let mut dz: Vec<f64> = ls.iter().map(|l| l.exp()).collect();
        dz[y] -= 1.0;
        let ce = -ls[y];
        let (sample_loss, dz) = match teacher {
            None => (ce, dz.iter().map(|d| d * scale).collect::<Vec<_>>()),
            Some(teacher) => {
                let zt = &teacher[n];
                let kd: f64 = z
                    .iter()
                    .zip(zt)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    / k;
                let dz = dz
                    .iter()
                    .zip(z.iter().zip(zt))
                    .map(|(dce, (a, b))| {
                        ((1.0 - lambda) * dce + lambda * 2.0 * (a - b) / k) * scale
                    })
                    .collect();
                ((1.0 - lambda) * ce + lambda * kd, dz)
            }
        };
        loss += sample_loss * scale;
        net.backward(&t, &dz, &mut g);
    }
    (loss, g)
}

/// Shuffled mini-batch index lists covering `0..n`.
pub fn batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx.chunks(batch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn net() -> TinyNet {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let specs = [
            LayerSpec::conv(1, 2, 2, 4, 4, 1, 2, 1),
            LayerSpec::fc(18, 3),
        ];
        let mut net = TinyNet::new(&specs, &mut rng).unwrap();
        net.add_masks(&[0, 1]).unwrap();
        for l in &mut net.layers {
            for b in &mut l.b {
                *b = 0.1;
            }
        }
        net
    }

    #[test]
    fn shape_chain_is_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(TinyNet::new(&[LayerSpec::fc(2, 3), LayerSpec::fc(4, 2)], &mut rng).is_err());
    }

    #[test]
    fn zero_lambda_is_plain_cross_entropy() {
        let net = net();
        let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let teacher = vec![vec![1.0, -2.0, 0.5]];
        let (a, ga) = kd_loss(&net, &[&x], &[1], Some(&teacher), 0.0);
        let (b, gb) = kd_loss(&net, &[&x], &[1], None, 0.0);
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(ga, gb);
    }

    #[test]
    fn self_distillation_term_vanishes() {
        let net = net();
        let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).cos()).collect();
        let teacher = vec![net.forward(&x)];
        let (loss, _) = kd_loss(&net, &[&x], &[0], Some(&teacher), 1.0);
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut net = net();
        let xs: Vec<Vec<f64>> = (0..2)
            .map(|s| (0..16).map(|i| ((i + 5 * s) as f64 * 0.61).sin()).collect())
            .collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let teacher: Vec<Vec<f64>> = vec![vec![0.3, -0.1, 0.2], vec![-0.4, 0.0, 0.9]];
        let ys = [2, 0];
        let (_, g) = kd_loss(&net, &refs, &ys, Some(&teacher), 0.5);
        let h = 1e-4;
        for li in 0..net.layers.len() {
            for k in 0..net.layers[li].w.len() {
                let orig = net.layers[li].w[k];
                net.layers[li].w[k] = orig + h;
                let (up, _) = kd_loss(&net, &refs, &ys, Some(&teacher), 0.5);
                net.layers[li].w[k] = orig - h;
                let (down, _) = kd_loss(&net, &refs, &ys, Some(&teacher), 0.5);
                net.layers[li].w[k] = orig;
                let fd = (up - down) / (2.0 * h);
                assert!(
                    (fd - g.w[li][k]).abs() <= 1e-6 * (1.0 + fd.abs()),
                    "w[{li}][{k}]: {fd} vs {}",
                    g.w[li][k]
                );
            }
        }
    }
}
