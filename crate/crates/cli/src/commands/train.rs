//! `train`: two-phase training over a split, writing a checkpoint,
//! line-delimited log, and manifest.

use std::path::Path;

use tarnlab_core::narrator::save_checkpoint;
use tarnlab_core::sidecar::load_sidecar;
use tarnlab_core::trainer::{train, TrainConfig, TrainPorts};
use tarnlab_core::{load_dataset, Result};

use crate::args::TrainArgs;
use crate::manifest::RunManifest;
use crate::resolve_path;

use super::{config_to_json, load_adapters, load_train_config, stopword_set, write_jsonl};

/// Config file first, then flags; flags win.
pub fn resolved_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut config = load_train_config(args.config.as_deref().map(resolve_path).as_deref())?;
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.lambda {
        config.weights.lambda = v;
    }
    if let Some(v) = args.gamma {
        config.weights.gamma = v;
    }
    if let Some(v) = args.eta {
        config.weights.eta = v;
    }
    if let Some(v) = args.omega {
        config.omega = v;
    }
    if let Some(v) = args.lr {
        config.learning_rate = v;
    }
    if let Some(v) = args.dropout {
        config.dropout = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.mle_epochs {
        config.mle_epochs = v;
    }
    if let Some(v) = args.mixed_epochs {
        config.mixed_epochs = v;
    }
    if let Some(v) = args.d_h {
        config.d_h = v;
    }
    if let Some(v) = args.d_e {
        config.d_e = v;
    }
    if let Some(v) = args.max_len {
        config.max_len = v;
    }
    Ok(config)
}

pub fn run_with_config(
    config: &TrainConfig,
    data_path: &Path,
    topics_path: &Path,
    fixture_path: &Path,
    out_dir: &Path,
) -> Result<()> {
    let samples = load_dataset(data_path)?;
    let topics = load_sidecar(topics_path)?;
    let (image_embedder, text_embedder, _) = load_adapters(fixture_path)?;
    let stopwords = stopword_set(None)?;
    let ports = TrainPorts {
        image_embedder: &image_embedder,
        sentence_embedder: &text_embedder,
        stopwords: &stopwords,
    };
    let outcome = train(config, &samples, &topics, &ports)?;

    std::fs::create_dir_all(out_dir)?;
    let config_json = config_to_json(config)?;
    let checkpoint_path = out_dir.join("checkpoint.json");
    save_checkpoint(&outcome.params, &outcome.vocab, config_json.clone(), &checkpoint_path)?;
    let log_path = out_dir.join("train_log.jsonl");
    write_jsonl(&outcome.log, &log_path)?;

    let mut manifest = RunManifest::new("train", config_json, config.seed);
    manifest.record_input(data_path)?;
    manifest.record_input(topics_path)?;
    manifest.record_input(fixture_path)?;
    manifest.record_output(&checkpoint_path);
    manifest.record_output(&log_path);
    manifest.write(&out_dir.join("manifest.json"))?;

    eprintln!(
        "train: {} steps logged -> {}",
        outcome.log.len(),
        out_dir.display()
    );
    Ok(())
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let config = resolved_config(args)?;
    run_with_config(
        &config,
        &resolve_path(&args.data),
        &resolve_path(&args.topics),
        &resolve_path(&args.fixture),
        &resolve_path(&args.out),
    )
}
