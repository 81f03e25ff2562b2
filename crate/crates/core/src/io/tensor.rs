//! Named `f64` tensor container.
//!
//! Layout: `"DGBW"`, version `u32` LE, header length `u64` LE, a JSON header
//! `{"tensors":[{"name":..,"shape":[..],"offset":..}]}`, then the data
//! section as little-endian `f64`. Offsets are in bytes from the start of
//! the data section.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conv::Conv2d;
use crate::error::{Error, Result};
use crate::probhead::ProbHeadWeights;

use super::{read_file, write_file, Cursor};

pub const TENSOR_MAGIC: &[u8; 4] = b"DGBW";
const TENSOR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let name = name.into();
        let expected = element_count(&shape)?;
        if expected != data.len() {
            return Err(Error::InvalidParam(format!(
                "tensor {name} has shape {shape:?} but {} values",
                data.len()
            )));
        }
        Ok(Self { name, shape, data })
    }
}

fn element_count(shape: &[usize]) -> Result<usize> {
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::DimensionOverflow(format!("{shape:?}")))
}

#[derive(Serialize, Deserialize)]
struct Header {
    tensors: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

pub fn encode_tensors(tensors: &[Tensor]) -> Vec<u8> {
    let mut offset = 0u64;
    let entries = tensors
        .iter()
        .map(|t| {
            let e = Entry { name: t.name.clone(), shape: t.shape.clone(), offset };
            offset += 8 * t.data.len() as u64;
            e
        })
        .collect();
    let header = serde_json::to_vec(&Header { tensors: entries }).expect("plain header serialises");
    let mut out = Vec::with_capacity(16 + header.len() + offset as usize);
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for t in tensors {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<Tensor>> {
    let mut cur = Cursor::new(bytes, "tensor file");
    if cur.take(4)? != TENSOR_MAGIC {
        return Err(Error::BadMagic("expected DGBW".into()));
    }
    let version = cur.u32_le()?;
    if version != TENSOR_VERSION {
        return Err(Error::Malformed(format!("unsupported tensor file version {version}")));
    }
    let header_len = usize::try_from(cur.u64_le()?).map_err(|_| Error::DimensionOverflow("header length".into()))?;
    let header: Header = serde_json::from_slice(cur.take(header_len)?)
        .map_err(|e| Error::Malformed(format!("tensor header: {e}")))?;
    let data = cur.take(bytes.len() - 16 - header_len)?;
    header
        .tensors
        .into_iter()
        .map(|e| {
            let count = element_count(&e.shape)?;
            let start = usize::try_from(e.offset).map_err(|_| Error::DimensionOverflow(e.name.clone()))?;
            let end = count
                .checked_mul(8)
                .and_then(|len| start.checked_add(len))
                .ok_or_else(|| Error::DimensionOverflow(e.name.clone()))?;
            let raw = data
                .get(start..end)
                .ok_or_else(|| Error::Truncated(format!("tensor {} extends past the data section", e.name)))?;
            let values = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            Ok(Tensor { name: e.name, shape: e.shape, data: values })
        })
        .collect()
}

pub fn read_tensors(path: impl AsRef<Path>) -> Result<Vec<Tensor>> {
    decode_tensors(&read_file(path.as_ref())?)
}

pub fn write_tensors(tensors: &[Tensor], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_tensors(tensors))
}

/// Stage weights as `stage{i}.{conv}.weight` / `stage{i}.{conv}.bias`.
pub fn weights_to_tensors(stages: &[ProbHeadWeights]) -> Vec<Tensor> {
    let mut out = Vec::new();
    for (i, w) in stages.iter().enumerate() {
        for (name, conv) in w.named_convs() {
            out.push(Tensor {
                name: format!("stage{i}.{name}.weight"),
                shape: conv.weight_shape().to_vec(),
                data: conv.weights().to_vec(),
            });
            out.push(Tensor {
                name: format!("stage{i}.{name}.bias"),
                shape: vec![conv.out_channels()],
                data: conv.biases().to_vec(),
            });
        }
    }
    out
}

/// Inverse of [`weights_to_tensors`] for `n_stages` stages.
pub fn weights_from_tensors(tensors: &[Tensor], n_stages: usize) -> Result<Vec<ProbHeadWeights>> {
    let find = |name: &str| {
        tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Malformed(format!("missing tensor {name}")))
    };
    let names = ProbHeadWeights::zeros(1, 1, 0).named_convs().into_iter().map(|(n, _)| n).collect::<Vec<_>>();
    let stages = (0..n_stages)
        .map(|i| {
            let convs = names
                .iter()
                .map(|name| {
                    let w = find(&format!("stage{i}.{name}.weight"))?;
                    let b = find(&format!("stage{i}.{name}.bias"))?;
                    let [o, c, ky, kx]: [usize; 4] = w
                        .shape
                        .as_slice()
                        .try_into()
                        .map_err(|_| Error::Malformed(format!("{} must be 4-D", w.name)))?;
                    if ky != kx {
                        return Err(Error::Malformed(format!("{} has a non-square kernel", w.name)));
                    }
                    if b.shape != [o] {
                        return Err(Error::Malformed(format!("{} must have shape [{o}]", b.name)));
                    }
                    Conv2d::new(c, o, ky, w.data.clone(), b.data.clone())
                })
                .collect::<Result<Vec<_>>>()?;
            ProbHeadWeights::from_convs(convs)
        })
        .collect::<Result<Vec<_>>>()?;
    let extra = tensors.iter().find(|t| {
        t.name
            .strip_prefix("stage")
            .and_then(|rest| rest.split('.').next())
            .and_then(|i| i.parse::<usize>().ok())
            .is_some_and(|i| i >= n_stages)
    });
    if let Some(t) = extra {
        return Err(Error::InvalidParam(format!(
            "weight file has tensor {} but the run uses {n_stages} stages",
            t.name
        )));
    }
    Ok(stages)
}
