//! `topics`: precompute the visual and linguistic topic for every
//! sample of a split into a sidecar file.

use tarnlab_core::rake::{story_topic, Provenance};
use tarnlab_core::sidecar::{write_sidecar, TopicRecord, TopicSidecar};
use tarnlab_core::visual_topic::{extract_visual_topic, VisualTopicConfig};
use tarnlab_core::{load_dataset, Error, Result};

use crate::args::TopicsArgs;
use crate::manifest::RunManifest;
use crate::resolve_path;

use super::{blocklist_set, load_adapters, stopword_set};

pub fn run(args: &TopicsArgs) -> Result<()> {
    let data_path = resolve_path(&args.data);
    let fixture_path = resolve_path(&args.fixture);
    let out_path = resolve_path(&args.out);

    let samples = load_dataset(&data_path)?;
    let (image_embedder, text_embedder, detector) = load_adapters(&fixture_path)?;
    let blocklist = blocklist_set(args.blocklist.as_deref().map(resolve_path).as_deref())?;
    let stopwords = stopword_set(args.stopwords.as_deref().map(resolve_path).as_deref())?;
    let vt_config = VisualTopicConfig::default();

    let mut sidecar = TopicSidecar::new();
    let mut no_candidate_warnings = 0usize;
    for sample in &samples {
        let topic_v = match extract_visual_topic(
            sample,
            &detector,
            &image_embedder,
            &text_embedder,
            &blocklist,
            &vt_config,
        ) {
            Ok(t) => Some(t),
            Err(Error::NoCandidates(msg)) => {
                eprintln!("warning: {msg}");
                no_candidate_warnings += 1;
                None
            }
            Err(e) => return Err(e),
        };
        let topic_l = story_topic(&sample.sentences, &stopwords, Provenance::Linguistic);
        sidecar.insert(
            sample.album_id.clone(),
            TopicRecord {
                album_id: sample.album_id.clone(),
                topic_v,
                topic_l,
            },
        );
    }

    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut buf = Vec::new();
    write_sidecar(&sidecar, &mut buf)?;
    std::fs::write(&out_path, buf)?;

    let mut manifest = RunManifest::new(
        "topics",
        serde_json::json!({ "no_candidate_warnings": no_candidate_warnings }),
        0,
    );
    manifest.record_input(&data_path)?;
    manifest.record_input(&fixture_path)?;
    manifest.record_output(&out_path);
    manifest.write(&manifest_path(&out_path))?;

    if no_candidate_warnings > 0 {
        eprintln!("topics: {no_candidate_warnings} albums had every concept filtered");
    }
    Ok(())
}

pub fn manifest_path(out: &std::path::Path) -> std::path::PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}
