//! Dataset schema, tokenization, and vocabulary.
//!
//! Dataset files are UTF-8, one JSON record per line, with keys
//! `album_id`, `images` (list of strings), `sentences` (list of strings)
//! and an optional `gold_topic`. Sentences are stored as plain text on
//! disk and tokenized on load.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Opaque image identifier, resolvable by an embedder/detector port.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImageRef(pub String);

impl ImageRef {
    pub fn new(s: impl Into<String>) -> Self {
        ImageRef(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ImageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One album: ordered images plus one tokenized sentence per image.
#[derive(Debug, Clone, PartialEq)]
pub struct StorySample {
    pub album_id: String,
    pub images: Vec<ImageRef>,
    pub sentences: Vec<Vec<String>>,
    pub gold_topic: Option<String>,
}

impl StorySample {
    /// Checks the schema invariants: equal image/sentence counts, at
    /// least one image, and no empty sentence after tokenization.
    pub fn validate(&self) -> Result<()> {
        if self.images.is_empty() {
            return Err(Error::Schema(format!("album {}: no images", self.album_id)));
        }
        if self.images.len() != self.sentences.len() {
            return Err(Error::Schema(format!(
                "album {}: {} images but {} sentences",
                self.album_id,
                self.images.len(),
                self.sentences.len()
            )));
        }
        for (i, s) in self.sentences.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::Schema(format!(
                    "album {}: sentence {} empty after tokenization",
                    self.album_id, i
                )));
            }
        }
        Ok(())
    }
}

/// Lowercases, splits on whitespace, and breaks punctuation out into
/// separate single-character tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            for lc in c.to_lowercase() {
                word.push(lc);
            }
        } else {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Token/index bijection with fixed reserved indices
/// (PAD=0, BOS=1, EOS=2, UNK=3).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    index_to_token: Vec<String>,
    token_to_index: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from an already-ordered non-reserved token
    /// list (e.g. read back from a checkpoint).
    pub fn from_non_reserved(tokens: Vec<String>) -> Self {
        Self::from_tokens(tokens)
    }

    /// Non-reserved tokens in index order.
    pub fn non_reserved(&self) -> &[String] {
        &self.index_to_token[RESERVED.len()..]
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let mut index_to_token: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        index_to_token.extend(tokens);
        let token_to_index = index_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            index_to_token,
            token_to_index,
        }
    }

    pub fn len(&self) -> usize {
        self.index_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false // reserved entries are always present
    }

    pub fn index_of(&self, token: &str) -> usize {
        self.token_to_index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token_at(&self, index: usize) -> Option<&str> {
        self.index_to_token.get(index).map(|s| s.as_str())
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.index_of(t)).collect()
    }

    pub fn decode(&self, indices: &[usize]) -> Vec<String> {
        indices
            .iter()
            .filter_map(|&i| self.token_at(i).map(|s| s.to_string()))
            .collect()
    }

    /// SHA-256 over the full token list; used to bind checkpoints to the
    /// vocabulary they were trained with.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.index_to_token {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex_string(&h.finalize())
    }

    /// Serializes as one token per line; line number = index after the
    /// reserved block.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        for t in &self.index_to_token[RESERVED.len()..] {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut tokens = Vec::new();
        for line in r.lines() {
            let line = line?;
            if !line.is_empty() {
                tokens.push(line);
            }
        }
        Ok(Vocabulary::from_tokens(tokens))
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Builds a vocabulary from the training split. Tokens with frequency
/// >= `min_count` are kept; indices are assigned by frequency descending,
/// ties broken lexicographically.
pub fn build_vocabulary(samples: &[StorySample], min_count: usize) -> Result<Vocabulary> {
    if min_count < 1 {
        return Err(Error::Argument("min_count must be >= 1".into()));
    }
    if samples.is_empty() {
        return Err(Error::Argument("cannot build vocabulary from empty corpus".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in samples {
        for sentence in &s.sentences {
            for token in sentence {
                *counts.entry(token.as_str()).or_insert(0) += 1;
            }
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(Vocabulary::from_tokens(
        kept.into_iter().map(|(t, _)| t.to_string()).collect(),
    ))
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    album_id: String,
    images: Vec<String>,
    sentences: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gold_topic: Option<String>,
}

/// Parses a line-delimited dataset file. Errors name the offending line.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<StorySample>> {
    let file = std::fs::File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut samples = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        let sample = StorySample {
            album_id: raw.album_id,
            images: raw.images.into_iter().map(ImageRef).collect(),
            sentences: raw.sentences.iter().map(|s| tokenize(s)).collect(),
            gold_topic: raw.gold_topic,
        };
        sample.validate().map_err(|e| Error::Parse {
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        samples.push(sample);
    }
    Ok(samples)
}

/// Writes samples in the line-delimited record format. Token lists are
/// joined with single spaces; `load_dataset` of the output round-trips.
pub fn write_dataset(samples: &[StorySample], mut w: impl Write) -> Result<()> {
    for s in samples {
        s.validate()?;
        let raw = RawRecord {
            album_id: s.album_id.clone(),
            images: s.images.iter().map(|r| r.0.clone()).collect(),
            sentences: s.sentences.iter().map(|toks| toks.join(" ")).collect(),
            gold_topic: s.gold_topic.clone(),
        };
        serde_json::to_writer(&mut w, &raw)
            .map_err(|e| Error::Schema(format!("serialize record: {e}")))?;
        writeln!(w)?;
    }
    Ok(())
}

/// Parameters of the deterministic synthetic corpus generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_topics: usize,
    pub samples_per_topic: usize,
    pub images_per_story: usize,
    pub vocab_size: usize,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_topics == 0
            || self.samples_per_topic == 0
            || self.images_per_story == 0
            || self.vocab_size == 0
        {
            return Err(Error::Config("all CorpusSpec fields must be positive".into()));
        }
        Ok(())
    }
}
