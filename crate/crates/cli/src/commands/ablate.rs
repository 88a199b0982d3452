//! `ablate`: train a grid of reward configurations with shared seeds
//! and tabulate held-out metrics per cell.

use serde::Serialize;
use tarnlab_core::fixture::{FixtureImageEmbedder, FixtureTextEmbedder};
use tarnlab_core::metrics::metric_report;
use tarnlab_core::narrator::{encode_sequence, DecodeMode, NarratorParams};
use tarnlab_core::ports::ImageEmbedder;
use tarnlab_core::rake::TopicPhrase;
use tarnlab_core::rewards::topic_reward_visual;
use tarnlab_core::sidecar::load_sidecar;
use tarnlab_core::trainer::{story_tokens_to_text, train, TrainPorts};
use tarnlab_core::visual_topic::{extract_visual_topic, VisualTopicConfig};
use tarnlab_core::{load_dataset, Error, Result, RewardWeights, StorySample, Vocabulary};

use crate::args::{AblateArgs, Grid};
use crate::manifest::RunManifest;
use crate::resolve_path;

use super::{blocklist_set, load_adapters, load_train_config, stopword_set};

#[derive(Debug, Clone, Serialize)]
pub struct CellMetrics {
    pub seed: u64,
    pub bleu_1: f64,
    pub rouge_l: f64,
    pub cider: f64,
    /// Mean cosine between each held-out story's generated topic and
    /// its visual topic.
    pub topic_cv: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub name: String,
    pub weights: RewardWeights,
    /// True for the pure-MLE row (no reinforcement phase at all).
    pub mle_only: bool,
    pub per_seed: Vec<CellMetrics>,
    pub mean_bleu_1: f64,
    pub mean_topic_cv: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationTable {
    pub grid: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
}

fn weights(lambda: f64, gamma: f64, eta: f64) -> RewardWeights {
    RewardWeights { lambda, gamma, eta }
}

/// Row specs: name, weights, MLE-only flag.
pub fn grid_rows(grid: Grid) -> Vec<(String, RewardWeights, bool)> {
    match grid {
        Grid::Table3 => vec![
            ("baseline".into(), weights(0.0, 0.0, 0.0), true),
            ("bleu".into(), weights(0.5, 0.0, 0.0), false),
            ("bleu+cv".into(), weights(0.5, 0.5, 0.0), false),
            ("bleu+cl".into(), weights(0.5, 0.0, 0.5), false),
            ("full".into(), weights(0.5, 0.5, 0.5), false),
        ],
        Grid::Table4 => (3..=8)
            .map(|g| {
                let gamma = g as f64 / 10.0;
                let eta = 1.0 - gamma;
                (format!("g{gamma:.1}-e{eta:.1}"), weights(0.5, gamma, eta), false)
            })
            .collect(),
    }
}

pub struct EvalContext<'a> {
    pub samples: &'a [StorySample],
    pub topics_v: &'a [TopicPhrase],
    pub image_embedder: &'a FixtureImageEmbedder,
    pub text_embedder: &'a FixtureTextEmbedder,
    pub stopwords: &'a std::collections::HashSet<String>,
    pub max_len: usize,
}

/// Greedy-decodes the held-out split and scores one trained cell.
pub fn evaluate_cell(
    params: &NarratorParams,
    vocab: &Vocabulary,
    seed: u64,
    ctx: &EvalContext<'_>,
) -> Result<CellMetrics> {
    let mut cands = Vec::new();
    let mut refs = Vec::new();
    let mut topic_sum = 0.0;
    for (sample, topic_v) in ctx.samples.iter().zip(ctx.topics_v) {
        let features: Vec<_> = sample
            .images
            .iter()
            .map(|img| ctx.image_embedder.embed_image(img))
            .collect::<Result<_>>()?;
        let enc = encode_sequence(&features)?;
        let decoded = params.generate_story(&enc, DecodeMode::Greedy, ctx.max_len)?;
        let story = story_tokens_to_text(vocab, &decoded.story);
        topic_sum += topic_reward_visual(&story, topic_v, ctx.text_embedder, ctx.stopwords)?;
        for (cand, reference) in story.into_iter().zip(&sample.sentences) {
            cands.push(cand);
            refs.push(reference.clone());
        }
    }
    let report = metric_report(&cands, &refs)?;
    Ok(CellMetrics {
        seed,
        bleu_1: report.bleu[0],
        rouge_l: report.rouge_l,
        cider: report.cider,
        topic_cv: topic_sum / ctx.samples.len().max(1) as f64,
    })
}

fn markdown_table(table: &AblationTable) -> String {
    let mut out = String::new();
    out.push_str(&format!("# Ablation grid: {}\n\n", table.grid));
    out.push_str("| configuration | lambda | gamma | eta | mean BLEU-1 | mean topic-cv |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for row in &table.rows {
        out.push_str(&format!(
            "| {} | {:.1} | {:.1} | {:.1} | {:.4} | {:.4} |\n",
            row.name,
            row.weights.lambda,
            row.weights.gamma,
            row.weights.eta,
            row.mean_bleu_1,
            row.mean_topic_cv
        ));
    }
    out
}

pub fn run(args: &AblateArgs) -> Result<()> {
    let data_path = resolve_path(&args.data);
    let eval_path = resolve_path(&args.eval_data);
    let topics_path = resolve_path(&args.topics);
    let fixture_path = resolve_path(&args.fixture);
    let out_dir = resolve_path(&args.out);
    if args.seeds.is_empty() {
        return Err(Error::Argument("at least one seed is required".into()));
    }

    let base_config = load_train_config(args.config.as_deref().map(resolve_path).as_deref())?;
    let samples = load_dataset(&data_path)?;
    let eval_samples = load_dataset(&eval_path)?;
    let topics = load_sidecar(&topics_path)?;
    let (image_embedder, text_embedder, detector) = load_adapters(&fixture_path)?;
    let stopwords = stopword_set(None)?;
    let blocklist = blocklist_set(None)?;
    let vt_config = VisualTopicConfig::default();
    let topics_v: Vec<TopicPhrase> = eval_samples
        .iter()
        .map(|s| {
            extract_visual_topic(
                s,
                &detector,
                &image_embedder,
                &text_embedder,
                &blocklist,
                &vt_config,
            )
        })
        .collect::<Result<_>>()?;
    let ctx = EvalContext {
        samples: &eval_samples,
        topics_v: &topics_v,
        image_embedder: &image_embedder,
        text_embedder: &text_embedder,
        stopwords: &stopwords,
        max_len: base_config.max_len,
    };

    let grid_name = match args.grid {
        Grid::Table3 => "table3",
        Grid::Table4 => "table4",
    };
    let mut rows = Vec::new();
    for (name, cell_weights, mle_only) in grid_rows(args.grid) {
        let mut per_seed = Vec::new();
        for &seed in &args.seeds {
            let mut config = base_config.clone();
            config.seed = seed;
            config.weights = cell_weights.clone();
            if mle_only {
                config.mixed_epochs = 0;
            }
            let ports = TrainPorts {
                image_embedder: &image_embedder,
                sentence_embedder: &text_embedder,
                stopwords: &stopwords,
            };
            let outcome = train(&config, &samples, &topics, &ports)?;
            per_seed.push(evaluate_cell(&outcome.params, &outcome.vocab, seed, &ctx)?);
            eprintln!("ablate: {grid_name}/{name} seed {seed} done");
        }
        let n = per_seed.len() as f64;
        rows.push(AblationRow {
            name,
            weights: cell_weights,
            mle_only,
            mean_bleu_1: per_seed.iter().map(|c| c.bleu_1).sum::<f64>() / n,
            mean_topic_cv: per_seed.iter().map(|c| c.topic_cv).sum::<f64>() / n,
            per_seed,
        });
    }
    let table = AblationTable {
        grid: grid_name.to_string(),
        seeds: args.seeds.clone(),
        rows,
    };

    std::fs::create_dir_all(&out_dir)?;
    let json_path = out_dir.join("ablation.json");
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(&table)
            .map_err(|e| Error::Schema(format!("serialize ablation table: {e}")))?,
    )?;
    let md_path = out_dir.join("ablation.md");
    std::fs::write(&md_path, markdown_table(&table))?;

    let mut manifest = RunManifest::new(
        "ablate",
        serde_json::json!({ "grid": grid_name, "seeds": args.seeds }),
        args.seeds[0],
    );
    manifest.record_input(&data_path)?;
    manifest.record_input(&eval_path)?;
    manifest.record_input(&topics_path)?;
    manifest.record_input(&fixture_path)?;
    manifest.record_output(&json_path);
    manifest.record_output(&md_path);
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(())
}
