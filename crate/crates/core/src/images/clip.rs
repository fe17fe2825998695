use super::ImageError;
use crate::providers::EmbeddingVector;

/// Weight applied to the clamped cosine in [`clip_score`].
pub const CLIP_S_WEIGHT: f64 = 2.5;

/// Cosine similarity, clamped to `[-1, 1]` against rounding.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, ImageError> {
    if u.dims() != v.dims() {
        return Err(ImageError::DimMismatch { left: u.dims(), right: v.dims() });
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(ImageError::ZeroVector);
    }
    let dot: f64 = u.values().iter().zip(v.values()).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// `w * max(cos(text, image), 0)`.
pub fn clip_score(text: &EmbeddingVector, image: &EmbeddingVector, w: f64) -> Result<f64, ImageError> {
    Ok(w * cosine(text, image)?.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn identity_orthogonal_antipodal() {
        let a = v(&[3.0, -1.0, 2.0]);
        assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(cosine(&a, &a.scaled(-1.0).unwrap()).unwrap(), -1.0);
    }

    #[test]
    fn clamp_and_weight() {
        // cos = 0.5
        let c = v(&[1.0, 0.0]);
        let u = v(&[0.5, 3f64.sqrt() / 2.0]);
        assert!((clip_score(&c, &u, CLIP_S_WEIGHT).unwrap() - 1.25).abs() < 1e-12);
        let w = v(&[-0.3, 0.91f64.sqrt()]);
        assert_eq!(clip_score(&c, &w, CLIP_S_WEIGHT).unwrap(), 0.0);
        assert_eq!(clip_score(&c, &c, CLIP_S_WEIGHT).unwrap(), 2.5);
    }

    #[test]
    fn errors() {
        assert!(matches!(cosine(&v(&[1.0]), &v(&[1.0, 2.0])), Err(ImageError::DimMismatch { left: 1, right: 2 })));
        assert!(matches!(cosine(&v(&[0.0, 0.0]), &v(&[1.0, 2.0])), Err(ImageError::ZeroVector)));
    }

    #[test]
    fn symmetric() {
        let a = v(&[0.3, -0.2, 0.9]);
        let b = v(&[-0.4, 0.1, 0.5]);
        assert_eq!(cosine(&a, &b).unwrap(), cosine(&b, &a).unwrap());
    }
}
