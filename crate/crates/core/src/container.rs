//! Binary container of named `f64` arrays with a JSON manifest, used for
//! model checkpoints and the knowledge-bank cache.
//!
//! Layout (all integers little-endian):
//! `"HINIMP01"`, manifest length `u64`, manifest JSON, array count `u64`,
//! then per array: name length `u32`, name, rows `u64`, cols `u64`,
//! `rows * cols` values as `f64`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::autodiff::Tensor;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"HINIMP01";

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub manifest: serde_json::Value,
    pub arrays: BTreeMap<String, Tensor>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

impl Container {
    pub fn new(manifest: serde_json::Value) -> Self {
        Self {
            manifest,
            arrays: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.arrays.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.arrays
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing array {name:?}")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = serde_json::to_vec(&self.manifest).expect("JSON values always serialize");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        out.extend_from_slice(&manifest);
        out.extend_from_slice(&(self.arrays.len() as u64).to_le_bytes());
        for (name, t) in &self.arrays {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let mlen = r.u64()? as usize;
        let manifest = serde_json::from_slice(r.take(mlen)?)?;
        let count = r.u64()?;
        let mut arrays = BTreeMap::new();
        for _ in 0..count {
            let nlen = r.u32()? as usize;
            let name = String::from_utf8(r.take(nlen)?.to_vec())
                .map_err(|_| Error::Checkpoint("array name is not UTF-8".into()))?;
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let bytes = r.take(rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).ok_or_else(|| {
                Error::Checkpoint(format!("array {name:?} too large"))
            })?)?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            arrays.insert(name, Tensor::new(rows, cols, data)?);
        }
        if r.pos != buf.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self { manifest, arrays })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }
}
