//! Ports for the pretrained components the pipeline depends on: image
//! encoder, text encoders, and concept detector. Production adapters can
//! wrap real models behind these traits; the test suite runs entirely on
//! the deterministic fixture adapters in [`crate::fixture`].

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::data::ImageRef;
use crate::error::{Error, Result};

/// Fixed-length real vector produced by an embedding port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_array(&self) -> Array1<f64> {
        Array1::from_vec(self.0.clone())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// L2-normalized copy; zero vectors are an error.
    pub fn normalized(&self) -> Result<EmbeddingVector> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::UndefinedSimilarity("cannot normalize zero vector".into()));
        }
        Ok(EmbeddingVector(self.0.iter().map(|x| x / n).collect()))
    }
}

/// One detected concept with its confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptDetection {
    pub concept: String,
    pub confidence: f64,
}

pub trait ImageEmbedder: Send + Sync {
    fn embed_image(&self, image: &ImageRef) -> Result<EmbeddingVector>;
    fn dim(&self) -> usize;
}

pub trait TextEmbedder: Send + Sync {
    fn embed_text(&self, text: &str) -> Result<EmbeddingVector>;
    fn dim(&self) -> usize;
}

pub trait ConceptDetector: Send + Sync {
    /// At most `k` detections, confidence-sorted descending.
    fn detect_concepts(&self, image: &ImageRef, k: usize) -> Result<Vec<ConceptDetection>>;
}

/// Standard cosine similarity. Zero vectors are an error rather than a
/// silent 0 so adapter bugs cannot hide behind a neutral value.
pub fn cosine_similarity(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::Argument(format!(
            "dimension mismatch: {} vs {}",
            u.dim(),
            v.dim()
        )));
    }
    let nu = u.norm();
    let nv = v.norm();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::UndefinedSimilarity("cosine of zero vector".into()));
    }
    let dot: f64 = u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum();
    Ok(dot / (nu * nv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_identity() {
        let u = EmbeddingVector(vec![0.3, -1.2, 4.5]);
        assert!((cosine_similarity(&u, &u).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cosine_orthogonal_axes() {
        let u = EmbeddingVector(vec![1.0, 0.0]);
        let v = EmbeddingVector(vec![0.0, 1.0]);
        assert_eq!(cosine_similarity(&u, &v).unwrap(), 0.0);
    }

    #[test]
    fn cosine_hand_value() {
        let u = EmbeddingVector(vec![1.0, 1.0]);
        let v = EmbeddingVector(vec![1.0, 0.0]);
        assert!((cosine_similarity(&u, &v).unwrap() - 0.7071).abs() < 1e-4);
    }

    #[test]
    fn cosine_zero_vector_is_error() {
        let u = EmbeddingVector(vec![0.0, 0.0]);
        let v = EmbeddingVector(vec![1.0, 0.0]);
        assert!(matches!(
            cosine_similarity(&u, &v),
            Err(Error::UndefinedSimilarity(_))
        ));
    }

    #[test]
    fn cosine_dimension_mismatch() {
        let u = EmbeddingVector(vec![1.0]);
        let v = EmbeddingVector(vec![1.0, 0.0]);
        assert!(matches!(cosine_similarity(&u, &v), Err(Error::Argument(_))));
    }
}
