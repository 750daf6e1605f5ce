//! Binary parameter container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! header:  b"DVQN" | u32 version (= 1) | u32 record count
//! record:  u32 name length | UTF-8 name | u32 rank | rank x u32 dims | f64 values
//! ```
//!
//! Metadata travels as empty records (shape `[0]`) named `@meta/<key>=<value>`.

use std::path::Path;

use super::tensor::ParamTensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DVQN";
pub const FORMAT_VERSION: u32 = 1;
const META_PREFIX: &str = "@meta/";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub params: Vec<ParamTensor>,
    pub meta: Vec<(String, String)>,
}

impl Checkpoint {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn param(&self, name: &str) -> Option<&ParamTensor> {
        self.params.iter().find(|p| p.name() == name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let count = u32::try_from(self.params.len() + self.meta.len())
            .map_err(|_| Error::Format("too many records".into()))?;
        out.extend_from_slice(&count.to_le_bytes());
        for (k, v) in &self.meta {
            if k.contains('=') {
                return Err(Error::Format(format!("metadata key `{k}` contains '='")));
            }
            write_record(&mut out, &format!("{META_PREFIX}{k}={v}"), &[0], &[])?;
        }
        for p in &self.params {
            if p.name().starts_with(META_PREFIX) {
                return Err(Error::Format(format!("parameter name `{}` is reserved", p.name())));
            }
            write_record(&mut out, p.name(), p.shape(), p.values())?;
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let count = r.u32()?;
        let mut ck = Checkpoint::default();
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|e| Error::Format(format!("record name: {e}")))?
                .to_owned();
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Format("shape overflow".into()))?;
            let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Format("shape overflow".into()))?)?;
            let values = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            if let Some(meta) = name.strip_prefix(META_PREFIX) {
                let (k, v) = meta
                    .split_once('=')
                    .ok_or_else(|| Error::Format(format!("malformed metadata record `{name}`")))?;
                ck.meta.push((k.to_owned(), v.to_owned()));
            } else {
                ck.params.push(ParamTensor::new(name, shape, values)?);
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn write_record(out: &mut Vec<u8>, name: &str, shape: &[usize], values: &[f64]) -> Result<()> {
    let len = u32::try_from(name.len()).map_err(|_| Error::Format("name too long".into()))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        let d = u32::try_from(d).map_err(|_| Error::Format("dimension exceeds u32".into()))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}
