//! Deterministic synthetic topic-tagged corpus generator: a desk-scale
//! stand-in for a real visual-storytelling dataset. Each album is tagged
//! with one topic, its sentences lean on that topic's dedicated lexicon,
//! and its image refs resolve through a matching fixture table so the
//! whole pipeline runs offline.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::data::{CorpusSpec, ImageRef, StorySample};
use crate::error::{Error, Result};
use crate::fixture::{FixtureTable, ImageFixture};
use crate::ports::ConceptDetection;

const TOPIC_POOL: [(&str, [&str; 8]); 8] = [
    ("wedding", ["bride", "groom", "ceremony", "vows", "rings", "reception", "cake", "dress"]),
    ("beach", ["sand", "waves", "shells", "surf", "tide", "sunset", "shore", "ocean"]),
    ("graduation", ["diploma", "gown", "tassel", "campus", "dean", "stage", "caps", "honors"]),
    ("hiking", ["trail", "summit", "ridge", "backpack", "boots", "forest", "creek", "peak"]),
    ("market", ["stalls", "vendors", "produce", "spices", "crowd", "bargain", "baskets", "fruit"]),
    ("concert", ["guitar", "drums", "encore", "lights", "chorus", "band", "singer", "speakers"]),
    ("museum", ["exhibit", "gallery", "statue", "paintings", "curator", "hall", "relics", "tour"]),
    ("winter", ["snow", "sled", "mittens", "frost", "ice", "cocoa", "blizzard", "skates"]),
];

const GENERAL_POOL: [&str; 16] = [
    "day", "trip", "family", "friends", "photos", "fun", "moment", "group", "everyone", "lunch",
    "walk", "smile", "laughter", "memories", "morning", "evening",
];

// All of these are in the built-in stopword list.
const FUNCTION_WORDS: [&str; 12] = [
    "the", "a", "we", "at", "to", "was", "and", "of", "in", "so", "had", "they",
];

const MIN_LEXICON: usize = 4;
const MAX_LEXICON: usize = 8;

/// Generated corpus plus the fixture table its image refs resolve with.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub samples: Vec<StorySample>,
    pub fixture: FixtureTable,
}

fn seed_from(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

fn topic_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            if i < TOPIC_POOL.len() {
                TOPIC_POOL[i].0.to_string()
            } else {
                format!("topic{i}")
            }
        })
        .collect()
}

fn topic_lexicon(i: usize, size: usize) -> Vec<String> {
    if i < TOPIC_POOL.len() && size <= MAX_LEXICON {
        TOPIC_POOL[i].1[..size].iter().map(|s| s.to_string()).collect()
    } else {
        (0..size).map(|j| format!("t{i}w{j}")).collect()
    }
}

/// Allocates disjoint per-topic lexicons and the shared general pool
/// under the `vocab_size` content-token budget.
fn allocate_lexicons(spec: &CorpusSpec) -> Result<(Vec<String>, Vec<Vec<String>>, Vec<String>)> {
    let names = topic_names(spec.n_topics);
    let per_topic = (spec.vocab_size.saturating_sub(2)) / spec.n_topics;
    let lex_size = per_topic.min(MAX_LEXICON);
    if lex_size < MIN_LEXICON {
        return Err(Error::Config(format!(
            "vocab_size {} too small to allocate {} disjoint topic lexicons of {} words",
            spec.vocab_size, spec.n_topics, MIN_LEXICON
        )));
    }
    let lexicons: Vec<Vec<String>> = (0..spec.n_topics).map(|i| topic_lexicon(i, lex_size)).collect();
    let general_budget = spec.vocab_size - spec.n_topics * lex_size;
    let general: Vec<String> = (0..general_budget)
        .map(|i| {
            if i < GENERAL_POOL.len() {
                GENERAL_POOL[i].to_string()
            } else {
                format!("item{i}")
            }
        })
        .collect();
    Ok((names, lexicons, general))
}

fn gen_sentence(
    rng: &mut ChaCha8Rng,
    lexicon: &[String],
    general: &[String],
) -> Vec<String> {
    let len = rng.gen_range(5..=7);
    let mut sentence: Vec<String> = Vec::with_capacity(len);
    for pos in 0..len {
        let u: f64 = rng.gen();
        let word = if pos == 0 || u < 0.30 {
            FUNCTION_WORDS[rng.gen_range(0..FUNCTION_WORDS.len())].to_string()
        } else if u < 0.80 || general.is_empty() {
            lexicon[rng.gen_range(0..lexicon.len())].clone()
        } else {
            general[rng.gen_range(0..general.len())].clone()
        };
        sentence.push(word);
    }
    // Keep the topic signal recoverable: at least two lexicon tokens.
    let lex_count = sentence.iter().filter(|w| lexicon.contains(w)).count();
    if lex_count < 2 {
        for slot in [1, 2] {
            sentence[slot] = lexicon[rng.gen_range(0..lexicon.len())].clone();
        }
    }
    sentence
}

fn gen_concepts(
    rng: &mut ChaCha8Rng,
    topic: &str,
    lexicon: &[String],
) -> Vec<ConceptDetection> {
    let mut names: Vec<String> = vec![topic.to_string()];
    let a = rng.gen_range(0..lexicon.len());
    let mut b = rng.gen_range(0..lexicon.len());
    if b == a {
        b = (b + 1) % lexicon.len();
    }
    names.push(lexicon[a].clone());
    names.push(lexicon[b].clone());
    // Noise concept exercised by the downstream blocklist filter.
    if rng.gen::<f64>() < 0.25 {
        names.insert(1, "people".to_string());
    }
    let mut confidence = 0.95;
    names
        .into_iter()
        .map(|concept| {
            let c = confidence;
            confidence *= 0.8 + 0.1 * rng.gen::<f64>();
            ConceptDetection {
                concept,
                confidence: c,
            }
        })
        .collect()
}

/// Generates the corpus together with its fixture table. Byte-identical
/// output for equal specs.
pub fn generate_synthetic_corpus_full(spec: &CorpusSpec, fixture_dim: usize) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let (names, lexicons, general) = allocate_lexicons(spec)?;

    let mut samples = Vec::new();
    let mut images: BTreeMap<String, ImageFixture> = BTreeMap::new();
    for (ti, topic) in names.iter().enumerate() {
        let lexicon = &lexicons[ti];
        for k in 0..spec.samples_per_topic {
            let album_id = format!("{topic}-{k:03}");
            let mut rng = ChaCha8Rng::seed_from_u64(seed_from(spec.seed, &album_id));
            let mut refs = Vec::new();
            let mut sentences = Vec::new();
            for j in 0..spec.images_per_story {
                let r = format!("{album_id}/img{j}");
                images.insert(
                    r.clone(),
                    ImageFixture {
                        topic: topic.clone(),
                        concepts: gen_concepts(&mut rng, topic, lexicon),
                    },
                );
                refs.push(ImageRef::new(r));
                sentences.push(gen_sentence(&mut rng, lexicon, &general));
            }
            samples.push(StorySample {
                album_id,
                images: refs,
                sentences,
                gold_topic: Some(topic.clone()),
            });
        }
    }

    let topics: BTreeMap<String, Vec<String>> = names
        .iter()
        .cloned()
        .zip(lexicons.iter().cloned())
        .collect();
    Ok(SyntheticCorpus {
        samples,
        fixture: FixtureTable {
            version: 1,
            dim: fixture_dim,
            seed: spec.seed,
            topics,
            images,
        },
    })
}

/// Samples-only view of [`generate_synthetic_corpus_full`] with the
/// default fixture dimension of 64.
pub fn generate_synthetic_corpus(spec: &CorpusSpec) -> Result<Vec<StorySample>> {
    Ok(generate_synthetic_corpus_full(spec, 64)?.samples)
}
