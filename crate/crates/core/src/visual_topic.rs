//! Visual topic extraction: per-image concept detection, noise
//! filtering, prompt assembly, zero-shot similarity ranking against the
//! mean image feature, and top-1 selection.

use std::collections::HashSet;
use std::path::Path;

use ndarray::Array1;

use crate::data::StorySample;
use crate::error::{Error, Result};
use crate::ports::{ConceptDetector, ImageEmbedder, TextEmbedder};
use crate::rake::{Provenance, TopicPhrase};

pub const PROMPT_PREFIX: &str = "The topic of this photo is ";

const BUILTIN_BLOCKLIST: &str = include_str!("../data/blocklist.txt");

/// The fixed noise-concept blocklist shipped with the crate.
pub fn builtin_blocklist() -> HashSet<String> {
    parse_blocklist(BUILTIN_BLOCKLIST)
}

/// Loads a blocklist file: one concept per line, `#` comments allowed.
pub fn load_blocklist(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    Ok(parse_blocklist(&std::fs::read_to_string(path.as_ref())?))
}

fn parse_blocklist(text: &str) -> HashSet<String> {
    text.lines()
        .filter_map(|line| {
            let word = line.split('#').next().unwrap_or("").trim();
            (!word.is_empty()).then(|| word.to_lowercase())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePrompt {
    pub concept: String,
    pub sentence: String,
}

/// Order-preserving removal of blocklisted concepts and duplicates
/// (first occurrence kept).
pub fn filter_noise_concepts(concepts: &[String], blocklist: &HashSet<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    concepts
        .iter()
        .filter(|c| !blocklist.contains(c.as_str()) && seen.insert(c.as_str()))
        .cloned()
        .collect()
}

/// Assembles one prompt sentence per concept using the fixed template.
pub fn build_candidate_prompts(concepts: &[String]) -> Result<Vec<CandidatePrompt>> {
    if concepts.is_empty() {
        return Err(Error::Argument("no concepts to build prompts from".into()));
    }
    concepts
        .iter()
        .map(|c| {
            if c.is_empty() {
                return Err(Error::Argument("empty concept string".into()));
            }
            Ok(CandidatePrompt {
                concept: c.clone(),
                sentence: format!("{PROMPT_PREFIX}{c}"),
            })
        })
        .collect()
}

/// Knobs for [`extract_visual_topic`]. `use_raw_dot` replaces the cosine
/// ranking with the unnormalized dot product for comparison runs.
#[derive(Debug, Clone, Copy)]
pub struct VisualTopicConfig {
    pub concepts_per_image: usize,
    pub use_raw_dot: bool,
}

impl Default for VisualTopicConfig {
    fn default() -> Self {
        VisualTopicConfig {
            concepts_per_image: 3,
            use_raw_dot: false,
        }
    }
}

/// End-to-end visual topic extraction for one sample. Image features are
/// L2-normalized before mean pooling; candidate concepts are the deduped
/// union of per-image survivors; ties break toward the earliest prompt.
pub fn extract_visual_topic(
    sample: &StorySample,
    detector: &dyn ConceptDetector,
    image_embedder: &dyn ImageEmbedder,
    text_embedder: &dyn TextEmbedder,
    blocklist: &HashSet<String>,
    config: &VisualTopicConfig,
) -> Result<TopicPhrase> {
    if sample.images.is_empty() {
        return Err(Error::Schema(format!("album {}: no images", sample.album_id)));
    }

    let mut raw_concepts = Vec::new();
    for image in &sample.images {
        for det in detector.detect_concepts(image, config.concepts_per_image)? {
            raw_concepts.push(det.concept);
        }
    }
    let survivors = filter_noise_concepts(&raw_concepts, blocklist);
    if survivors.is_empty() {
        return Err(Error::NoCandidates(format!(
            "album {}: every detected concept was filtered",
            sample.album_id
        )));
    }
    let prompts = build_candidate_prompts(&survivors)?;

    let mut mean: Option<Array1<f64>> = None;
    for image in &sample.images {
        let feature = image_embedder.embed_image(image)?.normalized()?;
        let arr = feature.as_array();
        mean = Some(match mean {
            Some(m) => m + &arr,
            None => arr,
        });
    }
    let mut mean = mean.unwrap() / sample.images.len() as f64;
    let norm = mean.dot(&mean).sqrt();
    if norm == 0.0 {
        return Err(Error::UndefinedSimilarity(format!(
            "album {}: zero mean image feature",
            sample.album_id
        )));
    }
    if !config.use_raw_dot {
        mean /= norm;
    }

    let mut best: Option<(f64, &CandidatePrompt)> = None;
    for prompt in &prompts {
        let text = text_embedder.embed_text(&prompt.sentence)?;
        let arr = text.as_array();
        let score = if config.use_raw_dot {
            mean.dot(&arr)
        } else {
            let n = arr.dot(&arr).sqrt();
            if n == 0.0 {
                return Err(Error::UndefinedSimilarity(format!(
                    "zero prompt embedding for {:?}",
                    prompt.sentence
                )));
            }
            mean.dot(&arr) / n
        };
        // Strict > keeps the earliest prompt on ties.
        if best.map_or(true, |(s, _)| score > s) {
            best = Some((score, prompt));
        }
    }
    let (score, prompt) = best.unwrap();
    Ok(TopicPhrase {
        text: prompt.concept.clone(),
        score,
        provenance: Provenance::Visual,
    })
}
