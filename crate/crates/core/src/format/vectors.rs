use std::fs;
use std::path::Path;

use super::{dim_u32, put_f32s, read_file, Reader, AESC_MAGIC, AESE_MAGIC, DTYPE_F32, FORMAT_VERSION};
use crate::aesthetics::{AestheticEmbedding, AestheticMetadata};
use crate::error::{Error, Result};
use crate::scorer::{ScorerMetadata, ScorerWeights};
use crate::tensor::Tensor;

/// Largest accepted deviation of a stored aesthetic from unit norm.
pub const NORM_TOLERANCE: f64 = 1e-5;

fn header(out: &mut Vec<u8>, magic: [u8; 4], dim: usize) -> Result<()> {
    out.extend_from_slice(&magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&dim_u32(dim)?.to_le_bytes());
    out.push(DTYPE_F32);
    out.push(0);
    Ok(())
}

fn metadata(out: &mut Vec<u8>, json: &[u8]) -> Result<()> {
    out.extend_from_slice(&dim_u32(json.len())?.to_le_bytes());
    out.extend_from_slice(json);
    Ok(())
}

/// Returns the dimension after validating version, dtype and reserved byte.
fn read_header(r: &mut Reader, magic: [u8; 4]) -> Result<usize> {
    r.expect_magic(magic)?;
    r.version()?;
    let dim = r.u32("dim")? as usize;
    let dtype = r.u8("dtype")?;
    if dtype != DTYPE_F32 {
        return Err(Error::Format(format!("unsupported dtype {dtype}")));
    }
    let reserved = r.u8("reserved")?;
    if reserved != 0 {
        return Err(Error::Format(format!("reserved byte is {reserved}, expected 0")));
    }
    if dim == 0 {
        return Err(Error::Format("dimension is zero".into()));
    }
    Ok(dim)
}

fn read_metadata<M: serde::de::DeserializeOwned>(r: &mut Reader) -> Result<M> {
    let len = r.u32("meta_len")? as usize;
    let json = r.take(len, "metadata")?;
    let text = std::str::from_utf8(json).map_err(|e| Error::Format(format!("metadata is not UTF-8: {e}")))?;
    let meta = serde_json::from_str(text).map_err(|e| Error::Format(format!("bad metadata: {e}")))?;
    r.finish()?;
    Ok(meta)
}

pub fn encode_aese(e: &AestheticEmbedding<f32>) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + 4 * e.dim());
    header(&mut out, AESE_MAGIC, e.dim())?;
    put_f32s(&mut out, e.vector().data());
    let json = serde_json::to_vec(&e.metadata).expect("metadata serializes");
    metadata(&mut out, &json)?;
    Ok(out)
}

/// Parses an `AESE` container. With `check_norm` the payload must be unit
/// length within [`NORM_TOLERANCE`].
pub fn decode_aese(bytes: &[u8], check_norm: bool) -> Result<AestheticEmbedding<f32>> {
    let mut r = Reader::new(bytes);
    let dim = read_header(&mut r, AESE_MAGIC)?;
    let payload = r.f32s(dim, "payload")?;
    let meta: AestheticMetadata = read_metadata(&mut r)?;
    if !payload.iter().all(|x| x.is_finite()) {
        return Err(Error::Format("payload has non-finite values".into()));
    }
    if check_norm {
        let norm = payload.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Format(format!("payload norm {norm} is not 1")));
        }
    }
    AestheticEmbedding::from_parts(Tensor::from_vec(payload), meta).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_aesthetic(path: &Path, e: &AestheticEmbedding<f32>) -> Result<()> {
    fs::write(path, encode_aese(e)?)?;
    Ok(())
}

pub fn load_aesthetic(path: &Path, check_norm: bool) -> Result<AestheticEmbedding<f32>> {
    decode_aese(&read_file(path)?, check_norm)
}

pub fn encode_aesc(s: &ScorerWeights<f32>) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(20 + 4 * s.dim());
    header(&mut out, AESC_MAGIC, s.dim())?;
    put_f32s(&mut out, s.w().data());
    out.extend_from_slice(&s.bias().to_le_bytes());
    let json = serde_json::to_vec(&s.metadata).expect("metadata serializes");
    metadata(&mut out, &json)?;
    Ok(out)
}

/// Parses an `AESC` container, optionally against the current joint width.
pub fn decode_aesc(bytes: &[u8], expected_dim: Option<usize>) -> Result<ScorerWeights<f32>> {
    let mut r = Reader::new(bytes);
    let dim = read_header(&mut r, AESC_MAGIC)?;
    let w = r.f32s(dim, "weights")?;
    let b = r.f32("bias")?;
    let meta: ScorerMetadata = read_metadata(&mut r)?;
    if meta.expected_dim != dim {
        return Err(Error::Format(format!(
            "metadata expects dimension {}, payload has {dim}",
            meta.expected_dim
        )));
    }
    if let Some(want) = expected_dim {
        if want != dim {
            return Err(Error::dim("scorer vs joint width", &[dim], &[want]));
        }
    }
    let mut s = ScorerWeights::new(Tensor::from_vec(w), b, &meta.name).map_err(|e| Error::Format(e.to_string()))?;
    s.metadata = meta;
    Ok(s)
}

pub fn save_scorer(path: &Path, s: &ScorerWeights<f32>) -> Result<()> {
    fs::write(path, encode_aesc(s)?)?;
    Ok(())
}

pub fn load_scorer(path: &Path, expected_dim: Option<usize>) -> Result<ScorerWeights<f32>> {
    decode_aesc(&read_file(path)?, expected_dim)
}
