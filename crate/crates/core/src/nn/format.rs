//! Binary model files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "EMOV" | version u8 | arch u8 | input kind u8 | input width u32
//! label count u8 | label index u8 * count
//! layer count u32 | per layer: tag u8, then u32 fields
//!     0 dense (input, output)   1 conv1d (kernel, in, out)
//!     2 relu   3 mean_pool (window)   4 global_mean_pool
//! normalizer width u32 | mean f64 * width | scale f64 * width
//! tensor count u32 | per tensor: rank u8, dims u32 * rank, values f64 * product(dims)
//! ```

use std::path::Path;

use super::model::{Model, Normalizer};
use super::spec::{Arch, InputShape, LayerSpec, ModelSpec};
use super::tensor::Tensor;
use super::NnError;
use crate::emotion::{EmotionLabel, NUM_EMOTIONS};

pub const MAGIC: &[u8; 4] = b"EMOV";
pub const VERSION: u8 = 1;

pub fn serialize_model(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    let spec = model.spec();
    out.push(match spec.arch {
        Arch::Dnn => 0,
        Arch::Cnn => 1,
        Arch::Fused => 2,
    });
    let (kind, width) = match spec.input {
        InputShape::Vector(w) => (0u8, w),
        InputShape::Sequence(w) => (1u8, w),
    };
    out.push(kind);
    put_u32(&mut out, width);
    out.push(NUM_EMOTIONS as u8);
    out.extend(model.labels().iter().map(|e| e.index() as u8));
    put_u32(&mut out, spec.layers.len());
    for layer in &spec.layers {
        match *layer {
            LayerSpec::Dense { input, output } => {
                out.push(0);
                put_u32(&mut out, input);
                put_u32(&mut out, output);
            }
            LayerSpec::Conv1d {
                kernel,
                in_channels,
                out_channels,
            } => {
                out.push(1);
                put_u32(&mut out, kernel);
                put_u32(&mut out, in_channels);
                put_u32(&mut out, out_channels);
            }
            LayerSpec::Relu => out.push(2),
            LayerSpec::MeanPool { window } => {
                out.push(3);
                put_u32(&mut out, window);
            }
            LayerSpec::GlobalMeanPool => out.push(4),
        }
    }
    let norm = model.normalizer();
    put_u32(&mut out, norm.width());
    for v in norm.mean.iter().chain(&norm.scale) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    put_u32(&mut out, model.params().len());
    for t in model.params() {
        out.push(t.rank() as u8);
        for d in t.shape() {
            put_u32(&mut out, *d);
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| NnError::ModelFormat(format!("truncated at byte {} (wanted {n} more)", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize, NnError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, NnError> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| NnError::ModelFormat("size overflow".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn deserialize_model(bytes: &[u8]) -> Result<Model, NnError> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(NnError::ModelFormat("bad magic, expected EMOV".into()));
    }
    let version = c.u8()?;
    if version != VERSION {
        return Err(NnError::ModelFormat(format!("unsupported version {version}")));
    }
    let arch = match c.u8()? {
        0 => Arch::Dnn,
        1 => Arch::Cnn,
        2 => Arch::Fused,
        t => return Err(NnError::ModelFormat(format!("unknown arch tag {t}"))),
    };
    let input = match (c.u8()?, c.u32()?) {
        (0, w) => InputShape::Vector(w),
        (1, w) => InputShape::Sequence(w),
        (t, _) => return Err(NnError::ModelFormat(format!("unknown input kind {t}"))),
    };
    let n_labels = c.u8()? as usize;
    let labels = c.take(n_labels)?;
    let canonical: Vec<u8> = EmotionLabel::ALL.iter().map(|e| e.index() as u8).collect();
    if labels != canonical.as_slice() {
        return Err(NnError::ModelFormat(format!("label order {labels:?} is not canonical")));
    }
    let n_layers = c.u32()?;
    let mut layers = Vec::with_capacity(n_layers.min(1024));
    for _ in 0..n_layers {
        layers.push(match c.u8()? {
            0 => LayerSpec::Dense {
                input: c.u32()?,
                output: c.u32()?,
            },
            1 => LayerSpec::Conv1d {
                kernel: c.u32()?,
                in_channels: c.u32()?,
                out_channels: c.u32()?,
            },
            2 => LayerSpec::Relu,
            3 => LayerSpec::MeanPool { window: c.u32()? },
            4 => LayerSpec::GlobalMeanPool,
            t => return Err(NnError::ModelFormat(format!("unknown layer tag {t}"))),
        });
    }
    let spec = ModelSpec { arch, input, layers };
    spec.validate()?;

    let width = c.u32()?;
    let mean = c.f64s(width)?;
    let scale = c.f64s(width)?;
    let n_params = c.u32()?;
    let mut params = Vec::with_capacity(n_params.min(1024));
    for _ in 0..n_params {
        let rank = c.u8()? as usize;
        let shape = (0..rank).map(|_| c.u32()).collect::<Result<Vec<_>, _>>()?;
        let n = shape.iter().try_fold(1usize, |acc, d| acc.checked_mul(*d));
        let n = n.ok_or_else(|| NnError::ModelFormat("tensor size overflow".into()))?;
        params.push(Tensor::new(shape, c.f64s(n)?)?);
    }
    if c.pos != bytes.len() {
        return Err(NnError::ModelFormat(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    Model::new(spec, params, Normalizer { mean, scale })
}

pub fn save_model(model: &Model, path: &Path) -> Result<(), NnError> {
    std::fs::write(path, serialize_model(model)).map_err(|e| NnError::Io(format!("{}: {e}", path.display())))
}

pub fn load_model(path: &Path) -> Result<Model, NnError> {
    let bytes = std::fs::read(path).map_err(|e| NnError::Io(format!("{}: {e}", path.display())))?;
    deserialize_model(&bytes)
}
