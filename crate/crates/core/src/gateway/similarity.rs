use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VectorError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero-norm vector")]
    ZeroVector,
    #[error("empty vector")]
    Empty,
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>, VectorError> {
    if v.is_empty() {
        return Err(VectorError::Empty);
    }
    let norm = l2_norm(v);
    if norm == 0.0 || !norm.is_finite() {
        return Err(VectorError::ZeroVector);
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// `dot(a, b) / (|a| |b|)`, clamped to [-1, 1] against rounding.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, VectorError> {
    if a.len() != b.len() {
        return Err(VectorError::DimensionMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(VectorError::Empty);
    }
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(VectorError::ZeroVector);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}
