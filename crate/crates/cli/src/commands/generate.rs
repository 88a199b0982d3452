//! `generate`: decode one story per sample from a checkpoint.

use tarnlab_core::narrator::{encode_sequence, load_checkpoint, DecodeMode};
use tarnlab_core::ports::ImageEmbedder;
use tarnlab_core::trainer::story_tokens_to_text;
use tarnlab_core::{load_dataset, Result};

use crate::args::{GenerateArgs, Mode};
use crate::manifest::RunManifest;
use crate::resolve_path;

use super::{derive_seed, load_adapters, topics::manifest_path, write_jsonl, GeneratedStory};

pub fn run(args: &GenerateArgs) -> Result<()> {
    let checkpoint_path = resolve_path(&args.checkpoint);
    let data_path = resolve_path(&args.data);
    let fixture_path = resolve_path(&args.fixture);
    let out_path = resolve_path(&args.out);

    let (params, vocab, _) = load_checkpoint(&checkpoint_path)?;
    let samples = load_dataset(&data_path)?;
    let (image_embedder, _, _) = load_adapters(&fixture_path)?;

    let mut stories = Vec::with_capacity(samples.len());
    for sample in &samples {
        let features: Vec<_> = sample
            .images
            .iter()
            .map(|img| image_embedder.embed_image(img))
            .collect::<Result<_>>()?;
        let enc = encode_sequence(&features)?;
        let mode = match args.mode {
            Mode::Greedy => DecodeMode::Greedy,
            Mode::Sample => DecodeMode::Sample {
                seed: derive_seed(args.seed, &sample.album_id),
            },
        };
        let decoded = params.generate_story(&enc, mode, args.max_len)?;
        let sentences = story_tokens_to_text(&vocab, &decoded.story)
            .into_iter()
            .map(|toks| toks.join(" "))
            .collect();
        stories.push(GeneratedStory {
            album_id: sample.album_id.clone(),
            sentences,
        });
    }

    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_jsonl(&stories, &out_path)?;

    let mut manifest = RunManifest::new(
        "generate",
        serde_json::json!({
            "mode": match args.mode { Mode::Greedy => "greedy", Mode::Sample => "sample" },
            "max_len": args.max_len,
        }),
        args.seed,
    );
    manifest.record_input(&checkpoint_path)?;
    manifest.record_input(&data_path)?;
    manifest.record_input(&fixture_path)?;
    manifest.record_output(&out_path);
    manifest.write(&manifest_path(&out_path))?;

    eprintln!("generate: {} stories -> {}", stories.len(), out_path.display());
    Ok(())
}
