use std::fs;
use std::path::Path;

use super::{dim_u32, put_f32s, read_file, Reader, FORMAT_VERSION, MCLP_MAGIC};
use crate::clip::{EncoderConfig, MiniClipWeights};
use crate::error::{Error, Result};
use crate::tensor::Real;

/// `MCLP`, version, the eight config fields as `u32`, then every parameter
/// in declaration order as f32.
pub fn encode_weights<T: Real>(weights: &MiniClipWeights<T>) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(38 + 4 * weights.parameter_count());
    out.extend_from_slice(&MCLP_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for field in weights.config().to_fields() {
        out.extend_from_slice(&dim_u32(field)?.to_le_bytes());
    }
    for (_, t) in weights.named_tensors() {
        let values: Vec<f32> = t.data().iter().map(|x| x.to_f64_lossy() as f32).collect();
        put_f32s(&mut out, &values);
    }
    Ok(out)
}

pub fn decode_weights(bytes: &[u8]) -> Result<MiniClipWeights<f32>> {
    let mut r = Reader::new(bytes);
    r.expect_magic(MCLP_MAGIC)?;
    r.version()?;
    let mut fields = [0usize; 8];
    for f in fields.iter_mut() {
        *f = r.u32("config")? as usize;
    }
    let config = EncoderConfig::from_fields(fields);
    config
        .validate()
        .map_err(|e| Error::Format(format!("embedded config is invalid: {e}")))?;
    let expected = expected_len(&config).ok_or_else(|| Error::Format("embedded config is implausibly large".into()))?;
    if bytes.len() < expected {
        return Err(Error::Format(format!(
            "truncated at offset {}: config needs {expected} bytes in total",
            bytes.len()
        )));
    }
    let mut weights = MiniClipWeights::zeros(config)?;
    for (name, t) in weights.named_tensors_mut() {
        let values = r.f32s(t.len(), &name)?;
        t.data_mut().copy_from_slice(&values);
    }
    r.finish()?;
    if !weights.all_finite() {
        return Err(Error::Format("parameters contain non-finite values".into()));
    }
    Ok(weights)
}

/// Byte length implied by `config`, computed without allocating.
fn expected_len(c: &EncoderConfig) -> Option<usize> {
    let [vocab, ctx, d, layers, _, joint, _, patch] = c.to_fields().map(|f| f as u128);
    let h = 4 * d;
    let block = 4 * d * d + 2 * d * h + h + 8 * d;
    let text = (vocab + ctx) * d + layers * block + 2 * d + d * joint;
    let vision = patch * patch * d + d * joint;
    let params = text + vision;
    // refuse anything above 1 GiB of parameters before allocating
    (params <= 1 << 28).then(|| 38 + 4 * params as usize)
}

pub fn save_weights<T: Real>(path: &Path, weights: &MiniClipWeights<T>) -> Result<()> {
    fs::write(path, encode_weights(weights)?)?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<MiniClipWeights<f32>> {
    decode_weights(&read_file(path)?)
}
