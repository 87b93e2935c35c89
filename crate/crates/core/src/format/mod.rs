//! Little-endian binary containers and plain-text ingestion.
//!
//! | magic  | contents                                   |
//! |--------|--------------------------------------------|
//! | `AESE` | one aesthetic embedding with JSON metadata |
//! | `AESC` | one linear scorer head with JSON metadata  |
//! | `MCLP` | every dual-encoder parameter               |
//!
//! `AESE` and `AESC` share a header: magic, `u16` version, `u32` dim, `u8`
//! dtype (0 = f32), one reserved zero byte, then `dim` f32 values. `AESC`
//! stores its bias as one more f32. Both end with a `u32` length and that
//! many bytes of UTF-8 JSON.

mod ingest;
mod vectors;
mod weights;

pub use ingest::{encode_raw, parse_csv_embeddings, parse_image, parse_raw_embeddings};
pub use vectors::{
    decode_aesc, decode_aese, encode_aesc, encode_aese, load_aesthetic, load_scorer, save_aesthetic, save_scorer,
};
pub use weights::{decode_weights, encode_weights, load_weights, save_weights};

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const AESE_MAGIC: [u8; 4] = *b"AESE";
pub const AESC_MAGIC: [u8; 4] = *b"AESC";
pub const MCLP_MAGIC: [u8; 4] = *b"MCLP";
pub const FORMAT_VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileKind {
    Aesthetic,
    Scorer,
    Weights,
}

impl FileKind {
    pub fn magic(self) -> [u8; 4] {
        match self {
            FileKind::Aesthetic => AESE_MAGIC,
            FileKind::Scorer => AESC_MAGIC,
            FileKind::Weights => MCLP_MAGIC,
        }
    }
}

/// Identifies a container by its first four bytes.
pub fn sniff(bytes: &[u8]) -> Result<FileKind> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4, "magic")?;
    match magic {
        m if m == AESE_MAGIC => Ok(FileKind::Aesthetic),
        m if m == AESC_MAGIC => Ok(FileKind::Scorer),
        m if m == MCLP_MAGIC => Ok(FileKind::Weights),
        m => Err(Error::UnknownMagic(String::from_utf8_lossy(m).into_owned())),
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

/// Bounds-checked little-endian cursor. Errors name the byte offset.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        let remaining = self.bytes.len() - self.pos;
        if n > remaining {
            return Err(Error::Format(format!(
                "truncated at offset {}: {field} needs {n} bytes, {remaining} remain",
                self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn expect_magic(&mut self, magic: [u8; 4]) -> Result<()> {
        let found = self.take(4, "magic")?;
        if found != magic {
            return Err(Error::Format(format!(
                "expected magic {:?}, found {:?}",
                String::from_utf8_lossy(&magic),
                String::from_utf8_lossy(found)
            )));
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self, field: &str) -> Result<u8> {
        Ok(self.take(1, field)?[0])
    }

    pub(crate) fn u16(&mut self, field: &str) -> Result<u16> {
        let b = self.take(2, field)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    pub(crate) fn u32(&mut self, field: &str) -> Result<u32> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes(b.try_into().expect("four bytes")))
    }

    pub(crate) fn f32(&mut self, field: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, field)?.try_into().expect("four bytes")))
    }

    pub(crate) fn f32s(&mut self, n: usize, field: &str) -> Result<Vec<f32>> {
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| Error::Format(format!("{field}: element count {n} overflows")))?;
        Ok(self
            .take(bytes, field)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("four bytes")))
            .collect())
    }

    pub(crate) fn version(&mut self) -> Result<u16> {
        let v = self.u16("version")?;
        if v != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {v}")));
        }
        Ok(v)
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after offset {}",
                self.bytes.len() - self.pos,
                self.pos
            )));
        }
        Ok(())
    }
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn dim_u32(dim: usize) -> Result<u32> {
    u32::try_from(dim).map_err(|_| Error::Format(format!("dimension {dim} does not fit in u32")))
}
