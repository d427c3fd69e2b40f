//! IDX files: a big-endian magic word, big-endian `u32` dimension sizes and
//! an unsigned-byte payload. Only label vectors (`0x00000801`) and image
//! stacks (`0x00000803`) are accepted.

use std::path::Path;

use crate::diffcore::DenseArray;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdxKind {
    Labels,
    Images,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdxData {
    pub kind: IdxKind,
    pub dims: Vec<usize>,
    pub payload: Vec<u8>,
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxData> {
    if bytes.len() < 4 {
        return Err(Error::Idx(format!("truncated header: {} of 4 magic bytes", bytes.len())));
    }
    let magic = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let (kind, ndims) = match magic {
        0x0000_0801 => (IdxKind::Labels, 1),
        0x0000_0803 => (IdxKind::Images, 3),
        other => return Err(Error::Idx(format!("bad magic 0x{other:08x}"))),
    };
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(Error::Idx(format!(
            "truncated header: expected {header} bytes, found {}",
            bytes.len()
        )));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let expected = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Idx(format!("dimension product overflows: {dims:?}")))?;
    let found = bytes.len() - header;
    if found < expected {
        return Err(Error::Idx(format!(
            "truncated payload: expected {expected} bytes, found {found}"
        )));
    }
    if found > expected {
        return Err(Error::Idx(format!(
            "trailing data: expected {expected} payload bytes, found {found}"
        )));
    }
    Ok(IdxData {
        kind,
        dims,
        payload: bytes[header..].to_vec(),
    })
}

pub fn read_idx(path: &Path) -> Result<IdxData> {
    parse_idx(&std::fs::read(path)?)
}

impl IdxData {
    /// Number of records (first dimension).
    pub fn records(&self) -> usize {
        self.dims[0]
    }

    fn take(&self, limit: Option<usize>) -> usize {
        limit.map_or(self.records(), |k| k.min(self.records()))
    }

    /// First `limit` images flattened to rows with pixels scaled to `[0, 1]`.
    pub fn images(&self, limit: Option<usize>) -> Result<DenseArray> {
        if self.kind != IdxKind::Images {
            return Err(Error::Idx("file holds labels, not images".into()));
        }
        let width: usize = self.dims[1..].iter().product();
        let n = self.take(limit);
        let data = self.payload[..n * width].iter().map(|&b| b as f64 / 255.0).collect();
        DenseArray::matrix(n, width, data)
    }

    pub fn labels(&self, limit: Option<usize>) -> Result<Vec<usize>> {
        if self.kind != IdxKind::Labels {
            return Err(Error::Idx("file holds images, not labels".into()));
        }
        Ok(self.payload[..self.take(limit)].iter().map(|&b| b as usize).collect())
    }
}
