//! `evaluate`: score a generated-story file against its reference
//! split, merge optional external scores, and emit plots.

use std::collections::BTreeMap;

use tarnlab_core::data::tokenize;
use tarnlab_core::metrics::metric_report;
use tarnlab_core::trainer::TrainLogRecord;
use tarnlab_core::{load_dataset, Error, Result};

use crate::args::EvaluateArgs;
use crate::manifest::RunManifest;
use crate::plots::{bar_chart, line_chart};
use crate::resolve_path;

use super::{read_jsonl, GeneratedStory};

fn check_alignment(generated: &[GeneratedStory], references: &[tarnlab_core::StorySample]) -> Result<()> {
    let gen_ids: Vec<&str> = generated.iter().map(|g| g.album_id.as_str()).collect();
    let ref_ids: Vec<&str> = references.iter().map(|r| r.album_id.as_str()).collect();
    let missing: Vec<&str> = ref_ids.iter().filter(|id| !gen_ids.contains(id)).copied().collect();
    let extra: Vec<&str> = gen_ids.iter().filter(|id| !ref_ids.contains(id)).copied().collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::Schema(format!(
            "album id mismatch; missing from generated: [{}], unknown in generated: [{}]",
            missing.join(", "),
            extra.join(", ")
        )));
    }
    Ok(())
}

pub fn run(args: &EvaluateArgs) -> Result<()> {
    let generated_path = resolve_path(&args.generated);
    let data_path = resolve_path(&args.data);
    let out_dir = resolve_path(&args.out);

    let generated: Vec<GeneratedStory> = read_jsonl(&generated_path)?;
    let references = load_dataset(&data_path)?;
    check_alignment(&generated, &references)?;
    let by_id: BTreeMap<&str, &GeneratedStory> =
        generated.iter().map(|g| (g.album_id.as_str(), g)).collect();

    let mut cands = Vec::new();
    let mut refs = Vec::new();
    for sample in &references {
        let story = by_id[sample.album_id.as_str()];
        if story.sentences.len() != sample.sentences.len() {
            return Err(Error::Schema(format!(
                "album {}: {} generated sentences vs {} references",
                sample.album_id,
                story.sentences.len(),
                sample.sentences.len()
            )));
        }
        for (cand, reference) in story.sentences.iter().zip(&sample.sentences) {
            cands.push(tokenize(cand));
            refs.push(reference.clone());
        }
    }

    let mut report = metric_report(&cands, &refs)?;
    if let Some(external_path) = &args.external {
        let external_path = resolve_path(external_path);
        let text = std::fs::read_to_string(&external_path)?;
        let scores: BTreeMap<String, f64> = serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("external scores: {e}")))?;
        report.external.extend(scores);
    }

    std::fs::create_dir_all(&out_dir)?;
    let report_path = out_dir.join("report.json");
    let report_text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Schema(format!("serialize report: {e}")))?;
    std::fs::write(&report_path, report_text)?;

    let metrics_svg = out_dir.join("metrics.svg");
    std::fs::write(&metrics_svg, metric_bars(&report))?;

    let mut manifest = RunManifest::new("evaluate", serde_json::json!({}), 0);
    manifest.record_input(&generated_path)?;
    manifest.record_input(&data_path)?;
    manifest.record_output(&report_path);
    manifest.record_output(&metrics_svg);

    if let Some(log_path) = &args.train_log {
        let log_path = resolve_path(log_path);
        let log: Vec<TrainLogRecord> = read_jsonl(&log_path)?;
        let rewards_svg = out_dir.join("rewards.svg");
        std::fs::write(&rewards_svg, reward_curves(&log))?;
        manifest.record_input(&log_path)?;
        manifest.record_output(&rewards_svg);
    }
    manifest.write(&out_dir.join("manifest.json"))?;

    eprintln!(
        "evaluate: {} stories scored -> {}",
        references.len(),
        out_dir.display()
    );
    Ok(())
}

fn metric_bars(report: &tarnlab_core::MetricReport) -> String {
    let mut bars: Vec<(String, f64)> = (0..4)
        .map(|i| (format!("bleu-{}", i + 1), report.bleu[i]))
        .collect();
    bars.push(("rouge-l".into(), report.rouge_l));
    bars.push(("cider".into(), report.cider));
    for (name, value) in &report.external {
        bars.push((name.clone(), *value));
    }
    bar_chart("evaluation metrics", &bars)
}

fn reward_curves(log: &[TrainLogRecord]) -> String {
    type Pick = fn(&TrainLogRecord) -> f64;
    let series: Vec<(String, Vec<(f64, f64)>)> = [
        ("reward", (|r| r.mean_reward) as Pick),
        ("r_bleu", |r| r.mean_r_bleu),
        ("r_cv", |r| r.mean_r_cv),
        ("r_cl", |r| r.mean_r_cl),
    ]
    .into_iter()
    .map(|(name, pick)| {
        (
            name.to_string(),
            log.iter()
                .filter(|r| r.phase == "mixed")
                .map(|r| (r.step as f64, pick(r)))
                .collect(),
        )
    })
    .collect();
    line_chart("reward components", &series)
}

/// Used by `ablate` to reuse the alignment and flattening logic.
pub fn flatten_pairs(
    generated: &[GeneratedStory],
    references: &[tarnlab_core::StorySample],
) -> Result<(Vec<Vec<String>>, Vec<Vec<String>>)> {
    check_alignment(generated, references)?;
    let by_id: BTreeMap<&str, &GeneratedStory> =
        generated.iter().map(|g| (g.album_id.as_str(), g)).collect();
    let mut cands = Vec::new();
    let mut refs = Vec::new();
    for sample in references {
        let story = by_id[sample.album_id.as_str()];
        for (cand, reference) in story.sentences.iter().zip(&sample.sentences) {
            cands.push(tokenize(cand));
            refs.push(reference.clone());
        }
    }
    Ok((cands, refs))
}
