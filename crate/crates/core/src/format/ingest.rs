//! Precomputed embeddings and toy images from headerless floats or CSV.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Headerless little-endian f32 values, `dim` per embedding.
pub fn parse_raw_embeddings(bytes: &[u8], dim: usize) -> Result<Vec<Tensor<f32>>> {
    if dim == 0 {
        return Err(Error::Config("embedding dimension must be positive".into()));
    }
    let stride = dim * 4;
    if !bytes.len().is_multiple_of(stride) {
        return Err(Error::Format(format!(
            "raw length {} bytes is not a multiple of dim×4 = {stride}",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(stride)
        .map(|row| {
            Tensor::from_vec(
                row.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("four bytes")))
                    .collect(),
            )
        })
        .collect())
}

pub fn encode_raw(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    super::put_f32s(&mut out, values);
    out
}

fn csv_rows(text: &str) -> Result<Vec<Vec<f32>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("csv: {e}")))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field
                    .parse::<f32>()
                    .map_err(|_| Error::Format(format!("row {}, column {}: {field:?} is not a number", r + 1, c + 1)))
            })
            .collect::<Result<Vec<f32>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// One embedding per CSV row. Rows must share a length, which must equal
/// `dim` when given.
pub fn parse_csv_embeddings(text: &str, dim: Option<usize>) -> Result<Vec<Tensor<f32>>> {
    let rows = csv_rows(text)?;
    let want = match (dim, rows.first()) {
        (Some(d), _) => d,
        (None, Some(first)) => first.len(),
        (None, None) => return Ok(Vec::new()),
    };
    rows.into_iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != want {
                return Err(Error::Input(format!(
                    "row {} has {} values, expected {want}",
                    i + 1,
                    row.len()
                )));
            }
            Ok(Tensor::from_vec(row))
        })
        .collect()
}

/// A `side × side` grayscale image, either as raw f32 bytes or as a CSV
/// grid of `side` rows.
pub fn parse_image(bytes: &[u8], csv: bool, side: usize) -> Result<Tensor<f32>> {
    let pixels = if csv {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::Format(format!("image csv is not UTF-8: {e}")))?;
        let rows = csv_rows(text)?;
        if rows.len() != side || rows.iter().any(|r| r.len() != side) {
            return Err(Error::Format(format!("image csv must be a {side}×{side} grid")));
        }
        rows.concat()
    } else {
        if bytes.len() != side * side * 4 {
            return Err(Error::Format(format!(
                "raw image must be {} bytes ({side}×{side} f32), got {}",
                side * side * 4,
                bytes.len()
            )));
        }
        parse_raw_embeddings(bytes, side * side)?.remove(0).into_data()
    };
    if !pixels.iter().all(|p| p.is_finite()) {
        return Err(Error::Format("image has non-finite pixels".into()));
    }
    Tensor::new(vec![side, side], pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_rows() {
        let bytes = encode_raw(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let rows = parse_raw_embeddings(&bytes, 3).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].data(), &[4.0, 5.0, 6.0]);
        let err = parse_raw_embeddings(&bytes[..20], 3).unwrap_err().to_string();
        assert!(err.contains("multiple of dim×4 = 12"), "{err}");
    }

    #[test]
    fn csv_rows_and_errors() {
        let rows = parse_csv_embeddings("1,0\n\n0, 1\n", Some(2)).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].data(), &[0.0, 1.0]);
        assert!(matches!(
            parse_csv_embeddings("1,0\n1,2,3\n", None),
            Err(Error::Input(_))
        ));
        assert!(matches!(parse_csv_embeddings("1,x\n", None), Err(Error::Format(_))));
        assert!(matches!(parse_csv_embeddings("1,0,0\n", Some(2)), Err(Error::Input(_))));
    }

    #[test]
    fn images() {
        let grid = "0,1\n2,3\n";
        let img = parse_image(grid.as_bytes(), true, 2).unwrap();
        assert_eq!(img.shape(), &[2, 2]);
        assert_eq!(img.data(), &[0.0, 1.0, 2.0, 3.0]);
        let raw = encode_raw(&[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(parse_image(&raw, false, 2).unwrap(), img);
        assert!(parse_image(&raw[..12], false, 2).is_err());
        assert!(parse_image(b"0,1\n", true, 2).is_err());
    }
}
