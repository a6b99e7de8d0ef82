//! Binary checkpoint: a JSON header (config echo plus caller metadata)
//! followed by named parameter blocks stored as little-endian `f64`.
//!
//! ```text
//! "ARGCTXCK" u32:version u64:header_len header_json
//! u32:n_blocks { u32:name_len name u32:ndims u64:dims.. f64:data.. }*
//! ```

use std::fs;
use std::path::Path;

use serde_json::Value;

use super::adam::AdamState;
use super::model::{Model, ModelConfig};
use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"ARGCTXCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub adam: Option<AdamState>,
    /// Free-form metadata such as the experiment config and seed.
    pub extra: Value,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_block(out: &mut Vec<u8>, name: &str, t: &Tensor) {
    put_u32(out, name.len() as u32);
    out.extend_from_slice(name.as_bytes());
    put_u32(out, t.shape.len() as u32);
    for &d in &t.shape {
        put_u64(out, d as u64);
    }
    for x in &t.data {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Data(format!("checkpoint truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn block(&mut self) -> Result<(String, Tensor)> {
        let n = self.u32()? as usize;
        let name = String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Data("checkpoint block name is not UTF-8".into()))?;
        let ndims = self.u32()? as usize;
        let shape = (0..ndims).map(|_| self.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let len: usize = shape.iter().product();
        let raw = self.take(len * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((name, Tensor { shape, data }))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::json!({
            "model_config": self.model.config,
            "adam_step": self.adam.as_ref().map(|a| a.step),
            "extra": self.extra,
        });
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u64(&mut out, header.len() as u64);
        out.extend_from_slice(&header);

        let params = self.model.params();
        let n_blocks = params.len() * if self.adam.is_some() { 3 } else { 1 };
        put_u32(&mut out, n_blocks as u32);
        for (name, t) in &params {
            put_block(&mut out, name, t);
        }
        if let Some(adam) = &self.adam {
            for (k, (name, t)) in params.iter().enumerate() {
                put_block(&mut out, &format!("adam.m.{name}"), &Tensor { shape: t.shape.clone(), data: adam.m[k].clone() });
                put_block(&mut out, &format!("adam.v.{name}"), &Tensor { shape: t.shape.clone(), data: adam.v[k].clone() });
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Data("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Data(format!("unsupported checkpoint version {version}")));
        }
        let hlen = r.u64()? as usize;
        let header: Value = serde_json::from_slice(r.take(hlen)?)
            .map_err(|e| Error::Data(format!("checkpoint header: {e}")))?;
        let config: ModelConfig = serde_json::from_value(header["model_config"].clone())
            .map_err(|e| Error::Data(format!("checkpoint model config: {e}")))?;
        let mut model = Model::new(config, 0)?;
        let n_blocks = r.u32()? as usize;
        let mut blocks = std::collections::HashMap::new();
        for _ in 0..n_blocks {
            let (name, t) = r.block()?;
            blocks.insert(name, t);
        }
        let names: Vec<(String, Vec<usize>)> =
            model.params().into_iter().map(|(n, t)| (n, t.shape.clone())).collect();
        let mut take = |name: &str, shape: &[usize]| -> Result<Tensor> {
            let t = blocks
                .remove(name)
                .ok_or_else(|| Error::Data(format!("checkpoint is missing block {name}")))?;
            if t.shape != shape {
                return Err(Error::Data(format!("block {name} has shape {:?}, expected {shape:?}", t.shape)));
            }
            Ok(t)
        };
        for ((name, shape), slot) in names.iter().zip(model.params_mut()) {
            *slot = take(name, shape)?;
        }
        let adam = match header["adam_step"].as_u64() {
            Some(step) => {
                let mut m = Vec::new();
                let mut v = Vec::new();
                for (name, shape) in &names {
                    m.push(take(&format!("adam.m.{name}"), shape)?.data);
                    v.push(take(&format!("adam.v.{name}"), shape)?.data);
                }
                Some(AdamState { step, m, v })
            }
            None => None,
        };
        if let Some(extra) = blocks.keys().next() {
            return Err(Error::Data(format!("unexpected checkpoint block {extra}")));
        }
        Ok(Checkpoint {
            model,
            adam,
            extra: header["extra"].clone(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes)
    }
}
