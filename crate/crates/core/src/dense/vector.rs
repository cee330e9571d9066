use crate::error::{Error, Result};

/// Largest norm deviation accepted without re-normalizing.
pub const NORM_TOLERANCE: f64 = 1e-6;
/// Largest norm deviation that is repaired locally instead of rejected.
pub const RENORMALIZE_LIMIT: f64 = 1e-3;

/// A finite, unit-L2-norm embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

pub fn l2_norm(values: &[f32]) -> f64 {
    values.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
}

/// Dot product accumulated in f64, in index order.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (&x, &y)| acc + x as f64 * y as f64)
}

impl EmbeddingVector {
    /// Scale an arbitrary finite, non-zero vector to unit norm.
    pub fn normalize(values: &[f32]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("<vector>".into()));
        }
        let norm = l2_norm(values);
        if norm == 0.0 {
            return Err(Error::BadNorm {
                id: "<vector>".into(),
                norm,
            });
        }
        Ok(Self(values.iter().map(|&v| (v as f64 / norm) as f32).collect()))
    }

    /// Accept a provider vector: as-is when already unit-norm, re-normalized with
    /// a warning when slightly off, rejected when far off.
    pub fn from_provider(id: &str, values: Vec<f32>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(id.to_string()));
        }
        let norm = l2_norm(&values);
        let dev = (norm - 1.0).abs();
        if dev <= NORM_TOLERANCE {
            return Ok(Self(values));
        }
        if dev <= RENORMALIZE_LIMIT {
            log::warn!("re-normalizing embedding for `{id}` (norm {norm})");
            return Self::normalize(&values);
        }
        Err(Error::BadNorm {
            id: id.to_string(),
            norm,
        })
    }

    /// Unit vector along `axis`.
    pub fn basis(dim: usize, axis: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    pub fn dot(&self, other: &Self) -> f64 {
        dot(&self.0, &other.0)
    }
}
