//! The generation model: mean-pooled feature encoder plus a hierarchical
//! manager/worker recurrent decoder. The manager takes one step per
//! image on [V̄; v_i; final worker state of the previous sentence] and
//! emits a goal vector; the worker emits words from softmax(f(h)) on
//! [v_i; goal; previous word embedding].
//!
//! Both cells are standard LSTMs: with x the input and h, c the carried
//! state, gates = Wx·x + Wh·h + b split into quarters (i, f, g, o),
//! c' = sigmoid(f)*c + sigmoid(i)*tanh(g), h' = sigmoid(o)*tanh(c').
//!
//! Decoding runs on a plain (no-tape) forward pass; training losses
//! rebuild the same computation on the autodiff tape. The two paths are
//! cross-checked by test.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{NodeId, Tape};
use crate::data::{Vocabulary, BOS, EOS};
use crate::error::{Error, Result};
use crate::ports::EmbeddingVector;

pub const P_EMBED: usize = 0;
pub const P_MGR_WX: usize = 1;
pub const P_MGR_WH: usize = 2;
pub const P_MGR_B: usize = 3;
pub const P_WRK_WX: usize = 4;
pub const P_WRK_WH: usize = 5;
pub const P_WRK_B: usize = 6;
pub const P_PROJ_W: usize = 7;
pub const P_PROJ_B: usize = 8;
const N_TENSORS: usize = 9;

const INIT_RANGE: f64 = 0.08;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarratorConfig {
    pub vocab_size: usize,
    pub d_v: usize,
    pub d_h: usize,
    pub d_e: usize,
    pub dropout: f64,
    pub max_len: usize,
    pub init_seed: u64,
}

impl NarratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 5 || self.d_v == 0 || self.d_h == 0 || self.d_e == 0 {
            return Err(Error::Config("narrator dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        if self.max_len == 0 {
            return Err(Error::Config("max_len must be >= 1".into()));
        }
        Ok(())
    }

    /// Total scalar parameter count implied by the dimensions.
    pub fn expected_params(&self) -> usize {
        let (v, dv, dh, de) = (self.vocab_size, self.d_v, self.d_h, self.d_e);
        let mgr = 4 * dh * (2 * dv + dh) + 4 * dh * dh + 4 * dh;
        let wrk = 4 * dh * (dv + dh + de) + 4 * dh * dh + 4 * dh;
        v * de + mgr + wrk + v * dh + v
    }
}

/// All learned parameters of encoder-free narration (the encoder itself
/// has no weights; features come from the image-embedding port).
#[derive(Debug, Clone)]
pub struct NarratorParams {
    pub config: NarratorConfig,
    pub tensors: Vec<Array2<f64>>,
}

impl NarratorParams {
    /// Seeded uniform init in [-0.08, 0.08].
    pub fn init(config: NarratorConfig) -> Result<Self> {
        config.validate()?;
        let (v, dv, dh, de) = (config.vocab_size, config.d_v, config.d_h, config.d_e);
        let shapes = [
            (v, de),
            (4 * dh, 2 * dv + dh),
            (4 * dh, dh),
            (4 * dh, 1),
            (4 * dh, dv + dh + de),
            (4 * dh, dh),
            (4 * dh, 1),
            (v, dh),
            (v, 1),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let tensors: Vec<Array2<f64>> = shapes
            .iter()
            .map(|&(r, c)| {
                Array2::from_shape_fn((r, c), |_| rng.gen_range(-INIT_RANGE..INIT_RANGE))
            })
            .collect();
        let params = NarratorParams { config, tensors };
        let actual: usize = params.tensors.iter().map(|t| t.len()).sum();
        assert_eq!(actual, params.config.expected_params());
        Ok(params)
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn check_finite(&self) -> Result<()> {
        for (i, t) in self.tensors.iter().enumerate() {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("non-finite value in tensor {i}")));
            }
        }
        Ok(())
    }
}

/// Per-image features plus their arithmetic mean (the Eq.-1 encoder).
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSequence {
    pub per_image: Vec<Array1<f64>>,
    pub mean: Array1<f64>,
}

pub fn encode_sequence(features: &[EmbeddingVector]) -> Result<EncodedSequence> {
    if features.is_empty() {
        return Err(Error::Argument("encode_sequence needs >= 1 feature".into()));
    }
    let dim = features[0].dim();
    let mut per_image = Vec::with_capacity(features.len());
    let mut mean = Array1::zeros(dim);
    for f in features {
        if f.dim() != dim {
            return Err(Error::Schema(format!(
                "feature dimension mismatch: {} vs {dim}",
                f.dim()
            )));
        }
        let arr = f.as_array();
        mean += &arr;
        per_image.push(arr);
    }
    mean /= features.len() as f64;
    Ok(EncodedSequence { per_image, mean })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Array1<f64>,
    pub c: Array1<f64>,
}

impl LstmState {
    pub fn zeros(d_h: usize) -> Self {
        LstmState {
            h: Array1::zeros(d_h),
            c: Array1::zeros(d_h),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn lstm_step(
    wx: &Array2<f64>,
    wh: &Array2<f64>,
    b: &Array2<f64>,
    x: &Array1<f64>,
    state: &LstmState,
) -> LstmState {
    let d_h = state.h.len();
    let pre = wx.dot(x) + wh.dot(&state.h) + b.column(0);
    let mut h = Array1::zeros(d_h);
    let mut c = Array1::zeros(d_h);
    for j in 0..d_h {
        let i_g = sigmoid(pre[j]);
        let f_g = sigmoid(pre[d_h + j]);
        let g_g = pre[2 * d_h + j].tanh();
        let o_g = sigmoid(pre[3 * d_h + j]);
        c[j] = f_g * state.c[j] + i_g * g_g;
        h[j] = o_g * c[j].tanh();
    }
    LstmState { h, c }
}

impl NarratorParams {
    /// One manager step for image `i`; returns the new manager state
    /// whose hidden part is the goal vector.
    pub fn manager_step(
        &self,
        enc: &EncodedSequence,
        i: usize,
        prev_worker_final: &Array1<f64>,
        prev_manager: &LstmState,
    ) -> Result<LstmState> {
        if i >= enc.per_image.len() {
            return Err(Error::Argument(format!(
                "image index {i} out of range ({} images)",
                enc.per_image.len()
            )));
        }
        let x = concat3(&enc.mean, &enc.per_image[i], prev_worker_final);
        Ok(lstm_step(
            &self.tensors[P_MGR_WX],
            &self.tensors[P_MGR_WH],
            &self.tensors[P_MGR_B],
            &x,
            prev_manager,
        ))
    }

    /// One worker step: new state plus the next-word distribution.
    pub fn worker_step(
        &self,
        v_i: &Array1<f64>,
        goal: &Array1<f64>,
        prev_token_embedding: &Array1<f64>,
        prev_state: &LstmState,
    ) -> Result<(LstmState, Array1<f64>)> {
        for arr in [v_i, goal, prev_token_embedding] {
            if arr.iter().any(|v| v.is_nan()) {
                return Err(Error::Numeric("NaN in worker input".into()));
            }
        }
        let x = concat3(v_i, goal, prev_token_embedding);
        let state = lstm_step(
            &self.tensors[P_WRK_WX],
            &self.tensors[P_WRK_WH],
            &self.tensors[P_WRK_B],
            &x,
            prev_state,
        );
        let logits = self.tensors[P_PROJ_W].dot(&state.h) + self.tensors[P_PROJ_B].column(0);
        Ok((state, softmax(&logits)))
    }

    fn embedding(&self, token: usize) -> Result<Array1<f64>> {
        if token >= self.config.vocab_size {
            return Err(Error::Schema(format!(
                "token index {token} outside vocabulary of {}",
                self.config.vocab_size
            )));
        }
        Ok(self.tensors[P_EMBED].row(token).to_owned())
    }
}

fn concat3(a: &Array1<f64>, b: &Array1<f64>, c: &Array1<f64>) -> Array1<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len() + c.len());
    v.extend(a.iter());
    v.extend(b.iter());
    v.extend(c.iter());
    Array1::from_vec(v)
}

fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut e = logits.mapv(|v| (v - max).exp());
    let sum = e.sum();
    e /= sum;
    e
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Greedy,
    Sample { seed: u64 },
}

/// Decoder output. Sentences end with EOS unless truncated at max_len;
/// log_probs align token-for-token with the emitted tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    pub story: Vec<Vec<usize>>,
    pub log_probs: Vec<Vec<f64>>,
    pub goal_vectors: Vec<Array1<f64>>,
}

impl NarratorParams {
    pub fn generate_story(
        &self,
        enc: &EncodedSequence,
        mode: DecodeMode,
        max_len: usize,
    ) -> Result<DecodeOutput> {
        if max_len == 0 {
            return Err(Error::Argument("max_len must be >= 1".into()));
        }
        let d_h = self.config.d_h;
        let mut rng = match mode {
            DecodeMode::Greedy => None,
            DecodeMode::Sample { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };

        let mut story = Vec::new();
        let mut log_probs = Vec::new();
        let mut goal_vectors = Vec::new();
        let mut manager = LstmState::zeros(d_h);
        let mut worker_final = Array1::zeros(d_h);

        for i in 0..enc.per_image.len() {
            manager = self.manager_step(enc, i, &worker_final, &manager)?;
            goal_vectors.push(manager.h.clone());

            let mut worker = LstmState::zeros(d_h);
            let mut prev = self.embedding(BOS)?;
            let mut sentence = Vec::new();
            let mut sentence_lp = Vec::new();
            for _ in 0..max_len {
                let (state, dist) = self.worker_step(&enc.per_image[i], &manager.h, &prev, &worker)?;
                worker = state;
                let token = match &mut rng {
                    None => argmax(&dist),
                    Some(r) => sample_index(&dist, r),
                };
                sentence_lp.push(dist[token].ln());
                sentence.push(token);
                if token == EOS {
                    break;
                }
                prev = self.embedding(token)?;
            }
            worker_final = worker.h.clone();
            story.push(sentence);
            log_probs.push(sentence_lp);
        }
        Ok(DecodeOutput {
            story,
            log_probs,
            goal_vectors,
        })
    }

    /// Teacher-forced per-token log-probabilities of a given story
    /// (tokens taken exactly as provided).
    pub fn story_log_prob(&self, enc: &EncodedSequence, story: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
        if story.len() != enc.per_image.len() {
            return Err(Error::Schema(format!(
                "{} sentences vs {} images",
                story.len(),
                enc.per_image.len()
            )));
        }
        let d_h = self.config.d_h;
        let mut manager = LstmState::zeros(d_h);
        let mut worker_final = Array1::zeros(d_h);
        let mut out = Vec::new();
        for (i, sentence) in story.iter().enumerate() {
            if sentence.is_empty() {
                return Err(Error::Schema(format!("sentence {i} is empty")));
            }
            manager = self.manager_step(enc, i, &worker_final, &manager)?;
            let mut worker = LstmState::zeros(d_h);
            let mut prev = self.embedding(BOS)?;
            let mut lps = Vec::with_capacity(sentence.len());
            for &token in sentence {
                let (state, dist) = self.worker_step(&enc.per_image[i], &manager.h, &prev, &worker)?;
                worker = state;
                if token >= dist.len() {
                    return Err(Error::Schema(format!("token {token} outside vocabulary")));
                }
                lps.push(dist[token].ln());
                prev = self.embedding(token)?;
            }
            worker_final = worker.h.clone();
            out.push(lps);
        }
        Ok(out)
    }
}

fn argmax(dist: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in dist.iter().enumerate() {
        if v > dist[best] {
            best = i;
        }
    }
    best
}

fn sample_index(dist: &Array1<f64>, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.len() - 1
}

/// Inverted-dropout masks for the taped training path, one pair per
/// (sentence, token) step: worker-input mask and pre-projection mask.
pub struct DropoutPlan {
    rate: f64,
    rng: Option<ChaCha8Rng>,
}

impl DropoutPlan {
    pub fn disabled() -> Self {
        DropoutPlan {
            rate: 0.0,
            rng: None,
        }
    }

    pub fn seeded(rate: f64, seed: u64) -> Self {
        if rate <= 0.0 {
            return Self::disabled();
        }
        DropoutPlan {
            rate,
            rng: Some(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    fn mask(&mut self, len: usize) -> Option<Array1<f64>> {
        let rng = self.rng.as_mut()?;
        let keep = 1.0 - self.rate;
        Some(Array1::from_shape_fn(len, |_| {
            if rng.gen::<f64>() < self.rate {
                0.0
            } else {
                1.0 / keep
            }
        }))
    }
}

impl NarratorParams {
    /// Builds the teacher-forced story computation on `tape`, returning
    /// one log-prob node per story token. `tape` must have been created
    /// over `self.tensors`.
    pub fn story_log_prob_nodes(
        &self,
        tape: &mut Tape<'_>,
        enc: &EncodedSequence,
        story: &[Vec<usize>],
        dropout: &mut DropoutPlan,
    ) -> Result<Vec<Vec<NodeId>>> {
        if story.len() != enc.per_image.len() {
            return Err(Error::Schema(format!(
                "{} sentences vs {} images",
                story.len(),
                enc.per_image.len()
            )));
        }
        let d_h = self.config.d_h;
        let mean = tape.constant(enc.mean.clone());
        let images: Vec<NodeId> = enc
            .per_image
            .iter()
            .map(|v| tape.constant(v.clone()))
            .collect();

        let mut mgr_h = tape.zeros(d_h);
        let mut mgr_c = tape.zeros(d_h);
        let mut worker_final = tape.zeros(d_h);
        let mut out = Vec::new();

        for (i, sentence) in story.iter().enumerate() {
            if sentence.is_empty() {
                return Err(Error::Schema(format!("sentence {i} is empty")));
            }
            let x = tape.concat(&[mean, images[i], worker_final]);
            let (h, c) = lstm_step_taped(tape, P_MGR_WX, P_MGR_WH, P_MGR_B, x, mgr_h, mgr_c, d_h);
            mgr_h = h;
            mgr_c = c;

            let mut wrk_h = tape.zeros(d_h);
            let mut wrk_c = tape.zeros(d_h);
            let mut prev = tape.embed_row(P_EMBED, BOS);
            let mut lps = Vec::with_capacity(sentence.len());
            for &token in sentence {
                if token >= self.config.vocab_size {
                    return Err(Error::Schema(format!("token {token} outside vocabulary")));
                }
                let mut x = tape.concat(&[images[i], mgr_h, prev]);
                if let Some(mask) = dropout.mask(self.config.d_v + d_h + self.config.d_e) {
                    let m = tape.constant(mask);
                    x = tape.mul(x, m);
                }
                let (h, c) =
                    lstm_step_taped(tape, P_WRK_WX, P_WRK_WH, P_WRK_B, x, wrk_h, wrk_c, d_h);
                wrk_h = h;
                wrk_c = c;
                let mut pre_proj = wrk_h;
                if let Some(mask) = dropout.mask(d_h) {
                    let m = tape.constant(mask);
                    pre_proj = tape.mul(pre_proj, m);
                }
                let logits = tape.matvec(P_PROJ_W, pre_proj);
                let logits = tape.add_bias(P_PROJ_B, logits);
                lps.push(tape.log_softmax_pick(logits, token));
                prev = tape.embed_row(P_EMBED, token);
            }
            worker_final = wrk_h;
            out.push(lps);
        }
        Ok(out)
    }
}

#[allow(clippy::too_many_arguments)]
fn lstm_step_taped(
    tape: &mut Tape<'_>,
    wx: usize,
    wh: usize,
    b: usize,
    x: NodeId,
    h: NodeId,
    c: NodeId,
    d_h: usize,
) -> (NodeId, NodeId) {
    let px = tape.matvec(wx, x);
    let ph = tape.matvec(wh, h);
    let pre = tape.add(px, ph);
    let pre = tape.add_bias(b, pre);
    let i_pre = tape.slice(pre, 0, d_h);
    let f_pre = tape.slice(pre, d_h, d_h);
    let g_pre = tape.slice(pre, 2 * d_h, d_h);
    let o_pre = tape.slice(pre, 3 * d_h, d_h);
    let i_g = tape.sigmoid(i_pre);
    let f_g = tape.sigmoid(f_pre);
    let g_g = tape.tanh(g_pre);
    let o_g = tape.sigmoid(o_pre);
    let fc = tape.mul(f_g, c);
    let ig = tape.mul(i_g, g_g);
    let c_new = tape.add(fc, ig);
    let c_tanh = tape.tanh(c_new);
    let h_new = tape.mul(o_g, c_tanh);
    (h_new, c_new)
}

/// Versioned checkpoint container binding parameters to the vocabulary
/// they were trained with.
#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: NarratorConfig,
    pub vocab_tokens: Vec<String>,
    pub vocab_hash: String,
    pub train_config: serde_json::Value,
    pub tensors: Vec<Vec<Vec<f64>>>,
}

pub fn save_checkpoint(
    params: &NarratorParams,
    vocab: &Vocabulary,
    train_config: serde_json::Value,
    path: impl AsRef<std::path::Path>,
) -> Result<()> {
    let ckpt = Checkpoint {
        version: 1,
        config: params.config.clone(),
        vocab_tokens: vocab.non_reserved().to_vec(),
        vocab_hash: vocab.hash(),
        train_config,
        tensors: params
            .tensors
            .iter()
            .map(|t| t.rows().into_iter().map(|r| r.to_vec()).collect())
            .collect(),
    };
    let text = serde_json::to_string(&ckpt)
        .map_err(|e| Error::Schema(format!("serialize checkpoint: {e}")))?;
    std::fs::write(path.as_ref(), text)?;
    Ok(())
}

pub fn load_checkpoint(
    path: impl AsRef<std::path::Path>,
) -> Result<(NarratorParams, Vocabulary, serde_json::Value)> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let ckpt: Checkpoint =
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("checkpoint: {e}")))?;
    let vocab = Vocabulary::from_non_reserved(ckpt.vocab_tokens);
    if vocab.hash() != ckpt.vocab_hash {
        return Err(Error::Integrity(format!(
            "vocabulary hash mismatch: checkpoint {} vs rebuilt {}",
            ckpt.vocab_hash,
            vocab.hash()
        )));
    }
    let tensors: Vec<Array2<f64>> = ckpt
        .tensors
        .into_iter()
        .map(|rows| {
            let nrows = rows.len();
            let ncols = rows.first().map_or(0, |r| r.len());
            Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect())
                .map_err(|e| Error::Schema(format!("checkpoint tensor shape: {e}")))
        })
        .collect::<Result<_>>()?;
    if tensors.len() != N_TENSORS {
        return Err(Error::Schema(format!(
            "checkpoint holds {} tensors, expected {N_TENSORS}",
            tensors.len()
        )));
    }
    let params = NarratorParams {
        config: ckpt.config,
        tensors,
    };
    if params.num_params() != params.config.expected_params() {
        return Err(Error::Integrity("checkpoint parameter count mismatch".into()));
    }
    Ok((params, vocab, ckpt.train_config))
}
