//! Subcommand implementations. Each returns `Result<()>`; exit-code
//! mapping happens in `main`.

pub mod ablate;
pub mod evaluate;
pub mod generate;
pub mod synth;
pub mod topics;
pub mod train;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tarnlab_core::fixture::{
    fixture_adapters, FixtureConceptDetector, FixtureImageEmbedder, FixtureTextEmbedder,
};
use tarnlab_core::rake::{builtin_stopwords, load_stopwords};
use tarnlab_core::trainer::TrainConfig;
use tarnlab_core::visual_topic::{builtin_blocklist, load_blocklist};
use tarnlab_core::{Error, FixtureTable, Result};

/// One decoded story, aligned to its source album.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedStory {
    pub album_id: String,
    pub sentences: Vec<String>,
}

pub fn load_adapters(
    fixture_path: &Path,
) -> Result<(FixtureImageEmbedder, FixtureTextEmbedder, FixtureConceptDetector)> {
    let table = FixtureTable::load(fixture_path)?;
    Ok(fixture_adapters(table))
}

/// Loads the word list at `path`, falling back to the built-in list
/// with a notice when the file is absent.
pub fn stopword_set(path: Option<&Path>) -> Result<HashSet<String>> {
    word_list(path, "stopword list", |p: &Path| load_stopwords(p), builtin_stopwords)
}

pub fn blocklist_set(path: Option<&Path>) -> Result<HashSet<String>> {
    word_list(path, "blocklist", |p: &Path| load_blocklist(p), builtin_blocklist)
}

fn word_list(
    path: Option<&Path>,
    what: &str,
    load: impl Fn(&Path) -> Result<HashSet<String>>,
    builtin: impl Fn() -> HashSet<String>,
) -> Result<HashSet<String>> {
    match path {
        Some(p) if p.exists() => load(p),
        Some(p) => {
            eprintln!("notice: {what} {} not found, using built-in list", p.display());
            Ok(builtin())
        }
        None => Ok(builtin()),
    }
}

/// Reads a TOML train config; absent path means all defaults.
pub fn load_train_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
        None => Ok(TrainConfig::default()),
    }
}

pub fn config_to_json(config: &TrainConfig) -> Result<serde_json::Value> {
    serde_json::to_value(config).map_err(|e| Error::Schema(format!("serialize config: {e}")))
}

/// Stable per-label seed derivation shared across commands.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

pub fn write_jsonl<T: Serialize>(items: impl IntoIterator<Item = T>, path: &Path) -> Result<()> {
    let mut out = String::new();
    for item in items {
        let line = serde_json::to_string(&item)
            .map_err(|e| Error::Schema(format!("serialize record: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| Error::Parse {
            line: lineno + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}
