//! Topic sidecar file: per-album visual and linguistic topics,
//! line-delimited JSON keyed by album id.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rake::TopicPhrase;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicRecord {
    pub album_id: String,
    /// None when every detected concept was filtered out.
    pub topic_v: Option<TopicPhrase>,
    /// None when the ground-truth story is all stopwords.
    pub topic_l: Option<TopicPhrase>,
}

pub type TopicSidecar = BTreeMap<String, TopicRecord>;

pub fn load_sidecar(path: impl AsRef<Path>) -> Result<TopicSidecar> {
    let file = std::fs::File::open(path.as_ref())?;
    let mut out = BTreeMap::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TopicRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        out.insert(record.album_id.clone(), record);
    }
    Ok(out)
}

pub fn write_sidecar(sidecar: &TopicSidecar, mut w: impl Write) -> Result<()> {
    for record in sidecar.values() {
        serde_json::to_writer(&mut w, record)
            .map_err(|e| Error::Schema(format!("serialize topic record: {e}")))?;
        writeln!(w)?;
    }
    Ok(())
}
