//! Trainable input masks and their projections.

use std::io::Write;

use crate::error::{Error, Result};

/// `X ⊙ M`.
pub fn apply_mask(x: &[f64], m: &[f64]) -> Result<Vec<f64>> {
    if x.len() != m.len() {
        return Err(Error::InvalidArgument(format!(
            "input has {} entries, mask {}",
            x.len(),
            m.len()
        )));
    }
    Ok(x.iter().zip(m).map(|(a, b)| a * b).collect())
}

/// Indices of the `q` largest magnitudes, ties to the lower index.
pub fn top_q(m: &[f64], q: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..m.len()).collect();
    idx.sort_by(|&a, &b| m[b].abs().total_cmp(&m[a].abs()).then(a.cmp(&b)));
    idx.truncate(q);
    idx
}

/// Nearest point with at most `q` nonzeros: keeps the `q` largest magnitudes.
pub fn l0_project(m: &[f64], q: usize) -> Vec<f64> {
    let mut out = vec![0.0; m.len()];
    for i in top_q(m, q) {
        out[i] = m[i];
    }
    out
}

pub fn clamp01(m: &mut [f64]) {
    for v in m {
        *v = v.clamp(0.0, 1.0);
    }
}

pub const ROUND_THRESHOLD: f64 = 0.5;

/// 1 where `m >= 1/2`, else 0.
pub fn round_binary(m: &mut [f64]) {
    for v in m {
        *v = if *v >= ROUND_THRESHOLD { 1.0 } else { 0.0 };
    }
}

pub fn decay_q(q: usize, dq: usize) -> usize {
    q.saturating_sub(dq)
}

/// Default decay step: a tenth of the mask size, at least one.
pub fn default_dq(mask_len: usize) -> usize {
    mask_len.div_ceil(10).max(1)
}

pub fn nnz(v: &[f64]) -> usize {
    v.iter().filter(|x| **x != 0.0).count()
}

/// Writes a mask as an 8-bit binary PGM (`P5`), `[0,1]` mapped to `0..255`.
pub fn write_pgm<W: Write>(out: &mut W, m: &[f64], width: usize, height: usize) -> Result<()> {
    if width * height != m.len() {
        return Err(Error::InvalidArgument(format!(
            "{width}x{height} image from {} mask entries",
            m.len()
        )));
    }
    write!(out, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = m
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    out.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_application() {
        assert_eq!(
            apply_mask(&[2.0, -3.0], &[1.0, 0.0]).unwrap(),
            vec![2.0, 0.0]
        );
        assert_eq!(
            apply_mask(&[2.0, -3.0], &[1.0, 1.0]).unwrap(),
            vec![2.0, -3.0]
        );
        assert!(apply_mask(&[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn projection_examples() {
        assert_eq!(
            l0_project(&[0.9, 0.1, 0.5, 0.4], 2),
            vec![0.9, 0.0, 0.5, 0.0]
        );
        let m = [0.3, 0.0, 0.7];
        assert_eq!(l0_project(&m, 5), m.to_vec());
        assert_eq!(l0_project(&[0.5, 0.5, 0.5], 2), vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn clamp_and_round() {
        let mut m = [1.3, -0.2, 0.5, 0.49];
        clamp01(&mut m);
        assert_eq!(m, [1.0, 0.0, 0.5, 0.49]);
        round_binary(&mut m);
        assert_eq!(m, [1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn decay() {
        assert_eq!(decay_q(100, 10), 90);
        assert_eq!(decay_q(5, 10), 0);
        let mut q = 25;
        let mut steps = 0;
        while q > 0 {
            q = decay_q(q, 10);
            steps += 1;
        }
        assert_eq!(steps, 3);
        assert_eq!(default_dq(64), 7);
        assert_eq!(default_dq(3), 1);
    }

    #[test]
    fn pgm_header() {
        let mut buf = Vec::new();
        write_pgm(&mut buf, &[0.0, 1.0], 2, 1).unwrap();
        assert_eq!(buf, b"P5\n2 1\n255\n\x00\xff");
    }
}
