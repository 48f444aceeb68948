//! Versioned binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   8 bytes   b"ENRGCKPT"
//! version u32       currently 1
//! hlen    u64       length of the JSON header in bytes
//! header  hlen      UTF-8 JSON, see `Header`
//! payload           f64 LE arrays in header order: for each layer its
//!                   weights, biases, then mask if present
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::{HardwareConfig, LayerSpec};
use crate::error::{Error, Result};
use crate::nn::{Layer, TinyNet};
use crate::trainer::ScheduleState;

pub const MAGIC: &[u8; 8] = b"ENRGCKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub net: TinyNet,
    pub hardware: HardwareConfig,
    /// Mask sparsity budget per layer, `None` for unmasked layers.
    pub q: Vec<Option<usize>>,
    pub schedule: Option<ScheduleState>,
}

#[derive(Serialize, Deserialize)]
struct ArrayInfo {
    name: String,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    layers: Vec<LayerSpec>,
    hardware: HardwareConfig,
    q: Vec<Option<usize>>,
    schedule: Option<ScheduleState>,
    arrays: Vec<ArrayInfo>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        if self.q.len() != self.net.layers.len() {
            return Err(bad("one q entry per layer required"));
        }
        let mut arrays = Vec::new();
        let mut payload: Vec<&[f64]> = Vec::new();
        for (i, l) in self.net.layers.iter().enumerate() {
            arrays.push(ArrayInfo {
                name: format!("layer{i}.w"),
                len: l.w.len(),
            });
            payload.push(&l.w);
            arrays.push(ArrayInfo {
                name: format!("layer{i}.b"),
                len: l.b.len(),
            });
            payload.push(&l.b);
            if let Some(m) = &l.mask {
                arrays.push(ArrayInfo {
                    name: format!("layer{i}.mask"),
                    len: m.len(),
                });
                payload.push(m);
            }
        }
        let header = Header {
            layers: self.net.specs(),
            hardware: self.hardware.clone(),
            q: self.q.clone(),
            schedule: self.schedule.clone(),
            arrays,
        };
        let json = serde_json::to_vec(&header)?;
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(json.len() as u64).to_le_bytes())?;
        out.write_all(&json)?;
        for a in payload {
            for v in a {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut v = Vec::new();
        self.write_to(&mut v)?;
        Ok(v)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input
            .read_exact(&mut magic)
            .map_err(|_| bad("file too short"))?;
        if &magic != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let mut u32b = [0u8; 4];
        input.read_exact(&mut u32b)?;
        let version = u32::from_le_bytes(u32b);
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let mut u64b = [0u8; 8];
        input.read_exact(&mut u64b)?;
        let hlen =
            usize::try_from(u64::from_le_bytes(u64b)).map_err(|_| bad("header too large"))?;
        let mut json = Vec::new();
        input.take(hlen as u64).read_to_end(&mut json)?;
        if json.len() != hlen {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&json)?;
        if header.q.len() != header.layers.len() {
            return Err(bad("one q entry per layer required"));
        }
        let mut arrays = header.arrays.iter();
        let mut read_array = |expect: &str, len: usize| -> Result<Vec<f64>> {
            let info = arrays
                .next()
                .ok_or_else(|| bad(format!("missing array {expect}")))?;
            if info.name != expect || info.len != len {
                return Err(bad(format!(
                    "expected {expect} of length {len}, found {} of length {}",
                    info.name, info.len
                )));
            }
            let mut buf = vec![0u8; len * 8];
            input
                .read_exact(&mut buf)
                .map_err(|_| bad(format!("truncated array {expect}")))?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect())
        };
        let mut layers = Vec::with_capacity(header.layers.len());
        for (i, spec) in header.layers.iter().enumerate() {
            spec.validate()?;
            let w = read_array(&format!("layer{i}.w"), spec.weight_len())?;
            let b = read_array(&format!("layer{i}.b"), spec.output_shape()[0])?;
            let has_mask = header
                .arrays
                .iter()
                .any(|a| a.name == format!("layer{i}.mask"));
            let mask = if has_mask {
                Some(read_array(&format!("layer{i}.mask"), spec.input_len())?)
            } else {
                None
            };
            layers.push(Layer {
                spec: *spec,
                w,
                b,
                mask,
            });
        }
        let mut rest = Vec::new();
        input.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(bad(format!("{} trailing bytes", rest.len())));
        }
        Ok(Self {
            net: TinyNet { layers },
            hardware: header.hardware,
            q: header.q,
            schedule: header.schedule,
        })
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        Self::read_from(&mut bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
