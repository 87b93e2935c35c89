use super::MiniClipWeights;
use crate::error::{Error, Result};
use crate::tensor::{self, Real, Tensor};

/// Cuts a square image into non-overlapping `patch × patch` tiles, row
/// major, each flattened row major: `[patches × patch²]`.
pub fn image_patches<T: Real>(image: &Tensor<T>, patch: usize) -> Result<Tensor<T>> {
    let side = match image.shape() {
        [r, c] if r == c => *r,
        other => return Err(Error::dim("image must be square", other, &[0, 0])),
    };
    if patch == 0 || side % patch != 0 {
        return Err(Error::Config(format!(
            "patch side {patch} does not divide image side {side}"
        )));
    }
    let per_side = side / patch;
    let mut out = Vec::with_capacity(image.len());
    for pr in 0..per_side {
        for pc in 0..per_side {
            for r in 0..patch {
                let row = pr * patch + r;
                let start = row * side + pc * patch;
                out.extend_from_slice(&image.data()[start..start + patch]);
            }
        }
    }
    Tensor::new(vec![per_side * per_side, patch * patch], out)
}

/// Visual embedding `v`: patches → patch projection → mean pool → joint
/// projection. Never recorded for differentiation.
pub fn encode_image<T: Real>(weights: &MiniClipWeights<T>, image: &Tensor<T>) -> Result<Tensor<T>> {
    let cfg = weights.config();
    let expected = [cfg.image_side, cfg.image_side];
    if image.shape() != expected {
        return Err(Error::dim("encode_image", image.shape(), &expected));
    }
    let patches = image_patches(image, cfg.patch_side)?;
    let embedded = tensor::matmul(&patches, &weights.vision.patch_projection)?;
    let pooled = tensor::mean_rows(&embedded)?;
    let pooled = pooled.reshape(vec![1, cfg.d_model])?;
    tensor::matmul(&pooled, &weights.vision.projection)?.reshape(vec![cfg.d_joint])
}

impl<T: Real> MiniClipWeights<T> {
    pub fn encode_image(&self, image: &Tensor<T>) -> Result<Tensor<T>> {
        encode_image(self, image)
    }
}
