//! Reward functions for the reinforcement phase: sentence-level BLEU for
//! fluency plus two topic-consistency cosines (visual and linguistic),
//! combined per sentence as r = lambda*r_bleu + gamma*r_cv + eta*r_cl.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{brevity_penalty, ngram_counts, MAX_NGRAM};
use crate::ports::{cosine_similarity, TextEmbedder};
use crate::rake::{story_topic, Provenance, TopicPhrase};

/// Mixing weights of the composite reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub lambda: f64,
    pub gamma: f64,
    pub eta: f64,
}

impl Default for RewardWeights {
    /// The best-performing configuration: lambda = gamma = eta = 0.5.
    fn default() -> Self {
        RewardWeights {
            lambda: 0.5,
            gamma: 0.5,
            eta: 0.5,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || self.gamma < 0.0 || self.eta < 0.0 {
            return Err(Error::Config("reward weights must be non-negative".into()));
        }
        Ok(())
    }
}

/// Per-story reward attribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_bleu: Vec<f64>,
    pub r_topic_cv: f64,
    pub r_topic_cl: f64,
    /// Per-sentence composite; topic terms broadcast story-wide.
    pub composite: Vec<f64>,
    /// Baseline the trainer subtracted; 0 until one is recorded.
    pub baseline: f64,
}

impl RewardBreakdown {
    pub fn mean_composite(&self) -> f64 {
        if self.composite.is_empty() {
            0.0
        } else {
            self.composite.iter().sum::<f64>() / self.composite.len() as f64
        }
    }

    pub fn mean_bleu(&self) -> f64 {
        if self.r_bleu.is_empty() {
            0.0
        } else {
            self.r_bleu.iter().sum::<f64>() / self.r_bleu.len() as f64
        }
    }
}

/// Smoothed sentence-level BLEU: geometric mean of clipped n-gram
/// precisions n = 1..4 times the brevity penalty. Orders n >= 2 use
/// add-one smoothing on both match and total counts; a zero unigram
/// precision yields 0.
pub fn sentence_bleu(candidate: &[String], reference: &[String]) -> Result<f64> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(Error::Argument("sentence_bleu on empty input".into()));
    }
    let mut log_sum = 0.0;
    for n in 1..=MAX_NGRAM {
        let c = ngram_counts(candidate, n);
        let r = ngram_counts(reference, n);
        let total: usize = c.values().sum();
        let matched: usize = c
            .iter()
            .map(|(g, &count)| count.min(r.get(g).copied().unwrap_or(0)))
            .sum();
        let p = if n == 1 {
            if total == 0 || matched == 0 {
                return Ok(0.0);
            }
            matched as f64 / total as f64
        } else {
            (matched + 1) as f64 / (total + 1) as f64
        };
        log_sum += p.ln();
    }
    Ok(brevity_penalty(candidate.len(), reference.len()) * (log_sum / MAX_NGRAM as f64).exp())
}

fn topic_reward(
    story: &[Vec<String>],
    target: &TopicPhrase,
    sentence_embedder: &dyn TextEmbedder,
    stopwords: &HashSet<String>,
) -> Result<f64> {
    // Degenerate samples with no extractable topic earn a neutral 0.
    let Some(topic_c) = story_topic(story, stopwords, Provenance::Candidate) else {
        return Ok(0.0);
    };
    let u = sentence_embedder.embed_text(&topic_c.text)?;
    let v = sentence_embedder.embed_text(&target.text)?;
    cosine_similarity(&u, &v)
}

/// Cosine between the generated story's RAKE topic and the visual topic.
pub fn topic_reward_visual(
    story: &[Vec<String>],
    topic_v: &TopicPhrase,
    sentence_embedder: &dyn TextEmbedder,
    stopwords: &HashSet<String>,
) -> Result<f64> {
    topic_reward(story, topic_v, sentence_embedder, stopwords)
}

/// Cosine between the generated story's RAKE topic and the linguistic
/// topic. `topic_l` must have been precomputed for the sample.
pub fn topic_reward_linguistic(
    story: &[Vec<String>],
    topic_l: Option<&TopicPhrase>,
    sentence_embedder: &dyn TextEmbedder,
    stopwords: &HashSet<String>,
) -> Result<f64> {
    let topic_l = topic_l.ok_or_else(|| {
        Error::Config("topic_l missing; precompute topics for the training split".into())
    })?;
    topic_reward(story, topic_l, sentence_embedder, stopwords)
}

/// Computes the full per-sentence breakdown for one generated story.
/// `reference` provides the aligned ground-truth sentence for each
/// generated sentence's BLEU term.
pub fn composite_reward(
    story: &[Vec<String>],
    reference: &[Vec<String>],
    topic_v: &TopicPhrase,
    topic_l: Option<&TopicPhrase>,
    sentence_embedder: &dyn TextEmbedder,
    stopwords: &HashSet<String>,
    weights: &RewardWeights,
) -> Result<RewardBreakdown> {
    weights.validate()?;
    if story.len() != reference.len() {
        return Err(Error::Argument(format!(
            "{} generated sentences vs {} references",
            story.len(),
            reference.len()
        )));
    }
    let r_bleu: Vec<f64> = story
        .iter()
        .zip(reference)
        .map(|(c, r)| {
            if c.is_empty() {
                Ok(0.0)
            } else {
                sentence_bleu(c, r)
            }
        })
        .collect::<Result<_>>()?;
    let r_cv = if weights.gamma == 0.0 {
        0.0
    } else {
        topic_reward_visual(story, topic_v, sentence_embedder, stopwords)?
    };
    let r_cl = if weights.eta == 0.0 {
        0.0
    } else {
        topic_reward_linguistic(story, topic_l, sentence_embedder, stopwords)?
    };
    let composite = r_bleu
        .iter()
        .map(|&b| weights.lambda * b + weights.gamma * r_cv + weights.eta * r_cl)
        .collect();
    Ok(RewardBreakdown {
        r_bleu,
        r_topic_cv: r_cv,
        r_topic_cl: r_cl,
        composite,
        baseline: 0.0,
    })
}
