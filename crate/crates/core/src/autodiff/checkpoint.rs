//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "MEKD" | version: u32 | count: u32 |
//!   count × ( name_len: u16 | name: utf-8 | rank: u8 | extents: rank × u32 | values: f64 × Π extents )
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::graph::Param;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MEKD";
pub const VERSION: u32 = 1;

pub fn encode(params: &[Param]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count = u32::try_from(params.len()).map_err(|_| Error::Format("too many parameters".into()))?;
    out.extend_from_slice(&count.to_le_bytes());
    for p in params {
        let name = p.name.as_bytes();
        let len = u16::try_from(name.len())
            .map_err(|_| Error::Format(format!("parameter name too long: {}", p.name)))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name);
        let shape = p.value.shape();
        let rank = u8::try_from(shape.len()).map_err(|_| Error::Format("rank exceeds 255".into()))?;
        out.push(rank);
        for &d in shape {
            let d = u32::try_from(d).map_err(|_| Error::Format("extent exceeds u32".into()))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in p.value.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Format(format!("checkpoint truncated at byte {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Param>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32()? as usize;
    let mut params = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Format("parameter name is not utf-8".into()))?
            .to_string();
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        if n.saturating_mul(8) > bytes.len() - r.pos {
            return Err(Error::Format(format!("checkpoint truncated in `{name}`")));
        }
        let values = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let value = Tensor::new(shape, values)
            .map_err(|e| Error::Format(format!("parameter `{name}`: {e}")))?;
        params.push(Param { name, value });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok(params)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`, so an
/// interrupted write never clobbers an existing file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save(path: &Path, params: &[Param]) -> Result<()> {
    write_atomic(path, &encode(params)?)
}

pub fn load(path: &Path) -> Result<Vec<Param>> {
    decode(&fs::read(path)?)
}
