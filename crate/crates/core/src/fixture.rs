//! Deterministic fixture adapters standing in for the pretrained models.
//!
//! A [`FixtureTable`] maps every image ref to a topic tag and a concept
//! list, and carries one lexicon per topic. Adapters derive all vectors
//! from seeded hashes of that table: each topic gets a near-orthogonal
//! unit centroid, image vectors sit close to their topic centroid, and
//! text vectors average the centroids of the topic words they mention.
//! Everything is a pure function of (input, seed) — no network, no state.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{tokenize, ImageRef};
use crate::error::{Error, Result};
use crate::ports::{ConceptDetection, ConceptDetector, EmbeddingVector, ImageEmbedder, TextEmbedder};

/// Perturbation scale of image vectors around their topic centroid.
const IMAGE_NOISE: f64 = 0.05;
/// Perturbation scale of lexicon-word text vectors; topic names embed to
/// the exact centroid so their prompts win the similarity ranking.
const WORD_NOISE: f64 = 0.15;
/// Tiny jitter keeping distinct strings distinct.
const TEXT_JITTER: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageFixture {
    pub topic: String,
    /// Concepts with confidences, sorted descending.
    pub concepts: Vec<ConceptDetection>,
}

/// Structured fixture file: image ref -> {topic tag, concepts}, plus the
/// per-topic lexicons the text embedder keys on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureTable {
    pub version: u32,
    pub dim: usize,
    pub seed: u64,
    pub topics: BTreeMap<String, Vec<String>>,
    pub images: BTreeMap<String, ImageFixture>,
}

impl FixtureTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("fixture table: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Schema(format!("fixture table: {e}")))?;
        std::fs::write(path.as_ref(), text)?;
        Ok(())
    }
}

fn seed_from(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

fn unit_noise(seed: u64, label: &str, dim: usize) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_from(seed, label));
    let mut v: Array1<f64> =
        Array1::from_iter((0..dim).map(|_| StandardNormal.sample(&mut rng)));
    let n = v.dot(&v).sqrt();
    if n > 0.0 {
        v /= n;
    }
    v
}

fn cos(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.dot(b) / (a.dot(a).sqrt() * b.dot(b).sqrt())
}

/// Shared geometry derived from a fixture table: topic centroids plus
/// a word -> topic index for the text embedder.
#[derive(Debug)]
pub struct FixtureGeometry {
    table: FixtureTable,
    centroids: BTreeMap<String, Array1<f64>>,
    word_topic: BTreeMap<String, String>,
}

impl FixtureGeometry {
    pub fn new(table: FixtureTable) -> Self {
        let mut centroids: BTreeMap<String, Array1<f64>> = BTreeMap::new();
        for topic in table.topics.keys() {
            // Re-draw until near-orthogonal to all earlier centroids so
            // cross-topic cosines stay well separated.
            let mut best: Option<Array1<f64>> = None;
            for attempt in 0..32 {
                let cand = unit_noise(table.seed, &format!("centroid/{topic}/{attempt}"), table.dim);
                let worst = centroids
                    .values()
                    .map(|c| cos(c, &cand).abs())
                    .fold(0.0_f64, f64::max);
                if worst <= 0.2 {
                    best = Some(cand);
                    break;
                }
                if best.is_none() {
                    best = Some(cand);
                }
            }
            centroids.insert(topic.clone(), best.unwrap());
        }
        let mut word_topic = BTreeMap::new();
        for (topic, lexicon) in &table.topics {
            word_topic.insert(topic.clone(), topic.clone());
            for word in lexicon {
                word_topic.insert(word.clone(), topic.clone());
            }
        }
        FixtureGeometry {
            table,
            centroids,
            word_topic,
        }
    }

    pub fn table(&self) -> &FixtureTable {
        &self.table
    }

    pub fn centroid(&self, topic: &str) -> Option<&Array1<f64>> {
        self.centroids.get(topic)
    }

    fn word_vector(&self, word: &str) -> Option<Array1<f64>> {
        let topic = self.word_topic.get(word)?;
        let centroid = &self.centroids[topic];
        if word == topic {
            return Some(centroid.clone());
        }
        let mut v = centroid + &(unit_noise(self.table.seed, &format!("word/{word}"), self.table.dim) * WORD_NOISE);
        let n = v.dot(&v).sqrt();
        v /= n;
        Some(v)
    }
}

#[derive(Debug, Clone)]
pub struct FixtureImageEmbedder {
    geo: Arc<FixtureGeometry>,
}

#[derive(Debug, Clone)]
pub struct FixtureTextEmbedder {
    geo: Arc<FixtureGeometry>,
}

#[derive(Debug, Clone)]
pub struct FixtureConceptDetector {
    geo: Arc<FixtureGeometry>,
}

/// Builds the three fixture adapters over one shared geometry.
pub fn fixture_adapters(
    table: FixtureTable,
) -> (FixtureImageEmbedder, FixtureTextEmbedder, FixtureConceptDetector) {
    let geo = Arc::new(FixtureGeometry::new(table));
    (
        FixtureImageEmbedder { geo: geo.clone() },
        FixtureTextEmbedder { geo: geo.clone() },
        FixtureConceptDetector { geo },
    )
}

impl ImageEmbedder for FixtureImageEmbedder {
    fn embed_image(&self, image: &ImageRef) -> Result<EmbeddingVector> {
        let table = self.geo.table();
        let fixture = table
            .images
            .get(image.as_str())
            .ok_or_else(|| Error::Lookup(format!("unknown image ref {image}")))?;
        let centroid = &self.geo.centroids[&fixture.topic];
        let noise = unit_noise(table.seed, &format!("image/{image}"), table.dim);
        let v = centroid + &(noise * IMAGE_NOISE);
        Ok(EmbeddingVector(v.to_vec()))
    }

    fn dim(&self) -> usize {
        self.geo.table().dim
    }
}

impl TextEmbedder for FixtureTextEmbedder {
    fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        if text.trim().is_empty() {
            return Err(Error::Argument("cannot embed empty text".into()));
        }
        let table = self.geo.table();
        let dim = table.dim;
        let tokens = tokenize(text);
        let mut acc = Array1::zeros(dim);
        let mut hits = 0usize;
        for token in &tokens {
            if let Some(v) = self.geo.word_vector(token) {
                acc += &v;
                hits += 1;
            }
        }
        let mut v = if hits > 0 {
            let mut mean = acc / hits as f64;
            let n = mean.dot(&mean).sqrt();
            if n > 0.0 {
                mean /= n;
            }
            mean
        } else {
            unit_noise(table.seed, &format!("text/{text}"), dim)
        };
        v += &(unit_noise(table.seed, &format!("jitter/{text}"), dim) * TEXT_JITTER);
        Ok(EmbeddingVector(v.to_vec()))
    }

    fn dim(&self) -> usize {
        self.geo.table().dim
    }
}

impl ConceptDetector for FixtureConceptDetector {
    fn detect_concepts(&self, image: &ImageRef, k: usize) -> Result<Vec<ConceptDetection>> {
        if k == 0 {
            return Err(Error::Argument("k must be >= 1".into()));
        }
        let fixture = self
            .geo
            .table()
            .images
            .get(image.as_str())
            .ok_or_else(|| Error::Lookup(format!("unknown image ref {image}")))?;
        Ok(fixture.concepts.iter().take(k).cloned().collect())
    }
}
