//! Topic-aware reinforcement pipeline for visual storytelling, desk
//! scale: synthetic topic-tagged corpora, dual-view topic extraction
//! (zero-shot visual ranking + RAKE), a hierarchical manager/worker
//! narrator with exact analytic gradients, composite fluency/topic
//! rewards, two-phase MLE + REINFORCE training, and n-gram evaluation
//! metrics.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod fixture;
pub mod metrics;
pub mod narrator;
pub mod ports;
pub mod rake;
pub mod rewards;
pub mod sidecar;
pub mod synth;
pub mod trainer;
pub mod visual_topic;

pub use data::{
    build_vocabulary, load_dataset, tokenize, write_dataset, CorpusSpec, ImageRef, StorySample,
    Vocabulary,
};
pub use error::{Error, Result};
pub use fixture::{fixture_adapters, FixtureTable};
pub use metrics::{cider, corpus_bleu, metric_report, rouge_l, MetricReport};
pub use narrator::{
    encode_sequence, load_checkpoint, save_checkpoint, DecodeMode, DecodeOutput, EncodedSequence,
    NarratorConfig, NarratorParams,
};
pub use ports::{cosine_similarity, ConceptDetection, EmbeddingVector};
pub use rake::{rake_extract, story_topic, Provenance, TopicPhrase};
pub use rewards::{composite_reward, sentence_bleu, RewardBreakdown, RewardWeights};
pub use sidecar::{load_sidecar, write_sidecar, TopicRecord, TopicSidecar};
pub use synth::{generate_synthetic_corpus, generate_synthetic_corpus_full, SyntheticCorpus};
pub use trainer::{train, BaselineMode, TrainConfig, TrainLogRecord, TrainOutcome, TrainPorts};
pub use visual_topic::{extract_visual_topic, VisualTopicConfig};
