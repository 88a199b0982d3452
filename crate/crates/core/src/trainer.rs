//! Two-phase optimization: maximum-likelihood pretraining, then a mixed
//! objective omega * Loss_RL + (1 - omega) * Loss_MLE where Loss_RL is a
//! REINFORCE-with-baseline score-function estimator over sampled
//! stories. The RL objective is written as a loss to minimize:
//! sum over sampled sentences of (b - r(y_i)) * log pi(y_i), which is
//! equivalent to maximizing E[(r - b) log pi].

use std::collections::HashSet;

use ndarray::Array2;
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::Tape;
use crate::data::{build_vocabulary, StorySample, Vocabulary, EOS, PAD, BOS, UNK};
use crate::error::{Error, Result};
use crate::narrator::{
    encode_sequence, DecodeMode, DropoutPlan, EncodedSequence, NarratorConfig, NarratorParams,
};
use crate::ports::{ImageEmbedder, TextEmbedder};
use crate::rake::TopicPhrase;
use crate::rewards::{composite_reward, RewardBreakdown, RewardWeights};
use crate::sidecar::TopicSidecar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    MovingAverage,
    GreedySelfCritical,
}

fn default_lr() -> f64 {
    1e-4
}
fn default_dropout() -> f64 {
    0.6
}
fn default_batch() -> usize {
    8
}
fn default_omega() -> f64 {
    0.5
}
fn default_epochs() -> usize {
    30
}
fn default_seed() -> u64 {
    7
}
fn default_baseline() -> BaselineMode {
    BaselineMode::MovingAverage
}
fn default_d_h() -> usize {
    32
}
fn default_d_e() -> usize {
    24
}
fn default_max_len() -> usize {
    20
}
fn default_grad_clip() -> f64 {
    5.0
}
fn default_min_count() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default)]
    pub weights: RewardWeights,
    #[serde(default = "default_epochs")]
    pub mle_epochs: usize,
    #[serde(default = "default_epochs")]
    pub mixed_epochs: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_baseline")]
    pub baseline_mode: BaselineMode,
    #[serde(default = "default_d_h")]
    pub d_h: usize,
    #[serde(default = "default_d_e")]
    pub d_e: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default = "default_grad_clip")]
    pub grad_clip: f64,
    #[serde(default = "default_min_count")]
    pub min_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(Error::Config("omega must be in [0, 1]".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        self.weights.validate()
    }
}

/// One train-log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub step: usize,
    pub phase: String,
    pub loss_mle: f64,
    pub loss_rl: f64,
    pub loss_mixed: f64,
    pub mean_reward: f64,
    pub baseline: f64,
    pub mean_r_bleu: f64,
    pub mean_r_cv: f64,
    pub mean_r_cl: f64,
}

/// Loss value with its analytic parameter gradients.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    pub per_token: f64,
    pub token_count: usize,
    pub grads: Vec<Array2<f64>>,
}

/// One teacher-forcing item: encoded features plus target sentences
/// (EOS-terminated token ids). Sentences are processed unpadded, so no
/// PAD positions enter the loss.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub enc: EncodedSequence,
    pub targets: Vec<Vec<usize>>,
}

/// Negative log-likelihood of the gold tokens under teacher forcing,
/// summed over the batch; `per_token` is the reporting average.
pub fn mle_loss(
    params: &NarratorParams,
    batch: &[TrainItem],
    dropout: &mut DropoutPlan,
) -> Result<LossOutput> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let mut tape = Tape::new(&params.tensors);
    let mut terms = Vec::new();
    for item in batch {
        let nodes = params.story_log_prob_nodes(&mut tape, &item.enc, &item.targets, dropout)?;
        for sentence in nodes {
            for node in sentence {
                terms.push((node, -1.0));
            }
        }
    }
    let root = tape.scaled_sum(&terms);
    let value = tape.scalar(root);
    let grads = tape.backward(root);
    let token_count = terms.len();
    Ok(LossOutput {
        value,
        per_token: value / token_count as f64,
        token_count,
        grads,
    })
}

/// One sampled story with its rewards, ready for the RL loss. The
/// recorded per-token log-probs must come from the same parameter state.
#[derive(Debug, Clone)]
pub struct RlSample {
    pub enc: EncodedSequence,
    pub story: Vec<Vec<usize>>,
    /// Per-sentence composite reward r(y_i).
    pub rewards: Vec<f64>,
    pub baseline: f64,
    pub recorded_log_probs: Vec<Vec<f64>>,
}

/// Score-function loss: sum over sampled sentences of
/// (b - r(y_i)) * sum of token log-probs. The baseline carries no
/// gradient. Dropout is never applied here; the teacher-forced pass must
/// reproduce the recorded sampling log-probs exactly.
pub fn rl_loss(params: &NarratorParams, samples: &[RlSample]) -> Result<LossOutput> {
    if samples.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let mut tape = Tape::new(&params.tensors);
    let mut terms = Vec::new();
    let mut token_count = 0usize;
    for sample in samples {
        if sample.story.len() != sample.rewards.len()
            || sample.story.len() != sample.recorded_log_probs.len()
        {
            return Err(Error::Integrity(
                "sampled story, rewards, and log-prob record disagree on sentence count".into(),
            ));
        }
        let nodes = params.story_log_prob_nodes(
            &mut tape,
            &sample.enc,
            &sample.story,
            &mut DropoutPlan::disabled(),
        )?;
        for ((sentence_nodes, recorded), &reward) in
            nodes.iter().zip(&sample.recorded_log_probs).zip(&sample.rewards)
        {
            if sentence_nodes.len() != recorded.len() {
                return Err(Error::Integrity(
                    "log-prob record length does not match sampled sentence".into(),
                ));
            }
            for (&node, &recorded_lp) in sentence_nodes.iter().zip(recorded) {
                if (tape.scalar(node) - recorded_lp).abs() > 1e-6 {
                    return Err(Error::Integrity(
                        "recorded log-probs do not match current parameters".into(),
                    ));
                }
            }
            token_count += sentence_nodes.len();
            let advantage_weight = sample.baseline - reward;
            for &node in sentence_nodes {
                terms.push((node, advantage_weight));
            }
        }
    }
    let root = tape.scaled_sum(&terms);
    let value = tape.scalar(root);
    let grads = tape.backward(root);
    Ok(LossOutput {
        value,
        per_token: value / token_count.max(1) as f64,
        token_count,
        grads,
    })
}

/// omega * rl + (1 - omega) * mle, for both values and gradients.
pub fn mixed_loss(rl: &LossOutput, mle: &LossOutput, omega: f64) -> Result<LossOutput> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(Error::Argument("omega must be in [0, 1]".into()));
    }
    let grads = rl
        .grads
        .iter()
        .zip(&mle.grads)
        .map(|(a, b)| a * omega + b * (1.0 - omega))
        .collect();
    Ok(LossOutput {
        value: omega * rl.value + (1.0 - omega) * mle.value,
        per_token: omega * rl.per_token + (1.0 - omega) * mle.per_token,
        token_count: mle.token_count,
        grads,
    })
}

/// Reward baseline tracker. Moving average: b starts at the first batch
/// mean, then b <- 0.9 b + 0.1 mean.
#[derive(Debug, Clone, Default)]
pub struct BaselineTracker {
    value: Option<f64>,
}

impl BaselineTracker {
    pub fn observe(&mut self, mean_reward: f64) -> f64 {
        let b = match self.value {
            None => mean_reward,
            Some(prev) => 0.9 * prev + 0.1 * mean_reward,
        };
        self.value = Some(b);
        b
    }

    pub fn current(&self) -> Option<f64> {
        self.value
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: usize,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(lr: f64, shapes: &[Array2<f64>]) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.iter().map(|s| Array2::zeros(s.raw_dim())).collect(),
            v: shapes.iter().map(|s| Array2::zeros(s.raw_dim())).collect(),
        }
    }

    pub fn step(&mut self, params: &mut [Array2<f64>], grads: &[Array2<f64>]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            ndarray::Zip::from(p)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                });
        }
    }
}

pub fn clip_global_norm(grads: &mut [Array2<f64>], max_norm: f64) {
    let norm: f64 = grads
        .iter()
        .map(|g| g.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads {
            *g *= scale;
        }
    }
}

/// Decodes token ids to token strings, dropping reserved tokens.
pub fn story_tokens_to_text(vocab: &Vocabulary, story: &[Vec<usize>]) -> Vec<Vec<String>> {
    story
        .iter()
        .map(|sentence| {
            sentence
                .iter()
                .filter(|&&t| t != PAD && t != BOS && t != EOS && t != UNK)
                .filter_map(|&t| vocab.token_at(t).map(|s| s.to_string()))
                .collect()
        })
        .collect()
}

pub struct TrainPorts<'a> {
    pub image_embedder: &'a dyn ImageEmbedder,
    pub sentence_embedder: &'a dyn TextEmbedder,
    pub stopwords: &'a HashSet<String>,
}

pub struct TrainOutcome {
    pub params: NarratorParams,
    pub vocab: Vocabulary,
    pub log: Vec<TrainLogRecord>,
}

fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

fn sample_topics<'a>(
    topics: &'a TopicSidecar,
    album_id: &str,
    weights: &RewardWeights,
) -> Result<(Option<&'a TopicPhrase>, Option<&'a TopicPhrase>)> {
    let record = topics
        .get(album_id)
        .ok_or_else(|| Error::Config(format!("no topic record for album {album_id}")))?;
    if weights.gamma > 0.0 && record.topic_v.is_none() {
        return Err(Error::Config(format!("album {album_id}: topic_v missing")));
    }
    Ok((record.topic_v.as_ref(), record.topic_l.as_ref()))
}

/// Runs both phases and returns the final parameters plus the log.
/// Deterministic given (config, dataset, topics, port seeds).
pub fn train(
    config: &TrainConfig,
    dataset: &[StorySample],
    topics: &TopicSidecar,
    ports: &TrainPorts<'_>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Argument("empty training dataset".into()));
    }
    let vocab = build_vocabulary(dataset, config.min_count)?;
    let items: Vec<TrainItem> = dataset
        .iter()
        .map(|sample| {
            let features = sample
                .images
                .iter()
                .map(|r| ports.image_embedder.embed_image(r))
                .collect::<Result<Vec<_>>>()?;
            let enc = encode_sequence(&features)?;
            let targets = sample
                .sentences
                .iter()
                .map(|s| {
                    let mut ids = vocab.encode(s);
                    ids.push(EOS);
                    ids
                })
                .collect();
            Ok(TrainItem { enc, targets })
        })
        .collect::<Result<_>>()?;

    let narrator_config = NarratorConfig {
        vocab_size: vocab.len(),
        d_v: ports.image_embedder.dim(),
        d_h: config.d_h,
        d_e: config.d_e,
        dropout: config.dropout,
        max_len: config.max_len,
        init_seed: derive_seed(config.seed, "init"),
    };
    let mut params = NarratorParams::init(narrator_config)?;
    let mut adam = Adam::new(config.learning_rate, &params.tensors);
    let mut log = Vec::new();
    let mut step = 0usize;

    // Phase 1: MLE.
    for epoch in 0..config.mle_epochs {
        for batch in batches(items.len(), config.batch_size, config.seed, "mle", epoch) {
            let batch_items: Vec<TrainItem> = batch.iter().map(|&i| items[i].clone()).collect();
            let mut dropout =
                DropoutPlan::seeded(config.dropout, derive_seed(config.seed, &format!("drop/{step}")));
            let loss = mle_loss(&params, &batch_items, &mut dropout)?;
            if !loss.value.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite MLE loss at step {step}: {}",
                    loss.value
                )));
            }
            let mut grads = loss.grads;
            clip_global_norm(&mut grads, config.grad_clip);
            adam.step(&mut params.tensors, &grads);
            log.push(TrainLogRecord {
                step,
                phase: "mle".into(),
                loss_mle: loss.per_token,
                loss_rl: 0.0,
                loss_mixed: loss.per_token,
                mean_reward: 0.0,
                baseline: 0.0,
                mean_r_bleu: 0.0,
                mean_r_cv: 0.0,
                mean_r_cl: 0.0,
            });
            step += 1;
        }
    }

    // Phase 2: mixed RL + MLE on the same batches.
    let mut baseline = BaselineTracker::default();
    for epoch in 0..config.mixed_epochs {
        for batch in batches(items.len(), config.batch_size, config.seed, "mixed", epoch) {
            let mut breakdowns: Vec<RewardBreakdown> = Vec::with_capacity(batch.len());
            let mut decoded = Vec::with_capacity(batch.len());
            for (k, &idx) in batch.iter().enumerate() {
                let sample = &dataset[idx];
                let item = &items[idx];
                let out = params.generate_story(
                    &item.enc,
                    DecodeMode::Sample {
                        seed: derive_seed(config.seed, &format!("sample/{step}/{k}")),
                    },
                    config.max_len,
                )?;
                let story_text = story_tokens_to_text(&vocab, &out.story);
                let (topic_v, topic_l) = sample_topics(topics, &sample.album_id, &config.weights)?;
                let placeholder;
                let topic_v = match topic_v {
                    Some(t) => t,
                    None => {
                        placeholder = TopicPhrase {
                            text: sample.album_id.clone(),
                            score: 0.0,
                            provenance: crate::rake::Provenance::Visual,
                        };
                        &placeholder
                    }
                };
                let breakdown = composite_reward(
                    &story_text,
                    &sample.sentences,
                    topic_v,
                    topic_l,
                    ports.sentence_embedder,
                    ports.stopwords,
                    &config.weights,
                )?;
                breakdowns.push(breakdown);
                decoded.push((idx, out));
            }

            let batch_mean = breakdowns.iter().map(|b| b.mean_composite()).sum::<f64>()
                / breakdowns.len() as f64;
            let b_global = match config.baseline_mode {
                BaselineMode::MovingAverage => baseline.observe(batch_mean),
                BaselineMode::GreedySelfCritical => 0.0, // per-sample below
            };

            let mut rl_samples = Vec::with_capacity(batch.len());
            for ((idx, out), breakdown) in decoded.into_iter().zip(&breakdowns) {
                let b = match config.baseline_mode {
                    BaselineMode::MovingAverage => b_global,
                    BaselineMode::GreedySelfCritical => {
                        let greedy = params.generate_story(
                            &items[idx].enc,
                            DecodeMode::Greedy,
                            config.max_len,
                        )?;
                        let text = story_tokens_to_text(&vocab, &greedy.story);
                        let (topic_v, topic_l) =
                            sample_topics(topics, &dataset[idx].album_id, &config.weights)?;
                        let placeholder;
                        let topic_v = match topic_v {
                            Some(t) => t,
                            None => {
                                placeholder = TopicPhrase {
                                    text: dataset[idx].album_id.clone(),
                                    score: 0.0,
                                    provenance: crate::rake::Provenance::Visual,
                                };
                                &placeholder
                            }
                        };
                        composite_reward(
                            &text,
                            &dataset[idx].sentences,
                            topic_v,
                            topic_l,
                            ports.sentence_embedder,
                            ports.stopwords,
                            &config.weights,
                        )?
                        .mean_composite()
                    }
                };
                rl_samples.push(RlSample {
                    enc: items[idx].enc.clone(),
                    story: out.story,
                    rewards: breakdown.composite.clone(),
                    baseline: b,
                    recorded_log_probs: out.log_probs,
                });
            }

            let batch_items: Vec<TrainItem> = batch.iter().map(|&i| items[i].clone()).collect();
            let loss_rl = rl_loss(&params, &rl_samples)?;
            let mut dropout =
                DropoutPlan::seeded(config.dropout, derive_seed(config.seed, &format!("drop/{step}")));
            let loss_mle = mle_loss(&params, &batch_items, &mut dropout)?;
            let mixed = mixed_loss(&loss_rl, &loss_mle, config.omega)?;
            if !mixed.value.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite mixed loss at step {step}: rl {} mle {}",
                    loss_rl.value, loss_mle.value
                )));
            }
            let mut grads = mixed.grads;
            clip_global_norm(&mut grads, config.grad_clip);
            adam.step(&mut params.tensors, &grads);

            let n = breakdowns.len() as f64;
            log.push(TrainLogRecord {
                step,
                phase: "mixed".into(),
                loss_mle: loss_mle.per_token,
                loss_rl: loss_rl.value,
                loss_mixed: mixed.value,
                mean_reward: batch_mean,
                baseline: rl_samples.first().map_or(0.0, |s| s.baseline),
                mean_r_bleu: breakdowns.iter().map(|b| b.mean_bleu()).sum::<f64>() / n,
                mean_r_cv: breakdowns.iter().map(|b| b.r_topic_cv).sum::<f64>() / n,
                mean_r_cl: breakdowns.iter().map(|b| b.r_topic_cl).sum::<f64>() / n,
            });
            step += 1;
        }
        params.check_finite()?;
    }

    Ok(TrainOutcome { params, vocab, log })
}

fn batches(n: usize, batch_size: usize, seed: u64, phase: &str, epoch: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("shuffle/{phase}/{epoch}")));
    order.shuffle(&mut rng);
    order.chunks(batch_size).map(|c| c.to_vec()).collect()
}
