//! Corpus-level automatic metrics: BLEU-1..4, ROUGE-L, and TF-IDF
//! weighted CIDEr. Candidates and references are aligned token lists,
//! one entry per sample.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_NGRAM: usize = 4;
/// ROUGE-L F-measure beta (recall-weighted, the common default).
pub const ROUGE_BETA: f64 = 1.2;
/// CIDEr presentation scale.
pub const CIDER_SCALE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu: [f64; MAX_NGRAM],
    pub rouge_l: f64,
    pub cider: f64,
    pub sample_count: usize,
    /// True when IDF was computed over a single reference document.
    pub cider_degenerate_idf: bool,
    pub config: MetricConfig,
    /// Externally produced scores merged into the report (e.g. METEOR).
    #[serde(default)]
    pub external: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub max_ngram: usize,
    pub rouge_beta: f64,
    pub cider_scale: f64,
    pub corpus_bleu_smoothing: String,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            max_ngram: MAX_NGRAM,
            rouge_beta: ROUGE_BETA,
            cider_scale: CIDER_SCALE,
            corpus_bleu_smoothing: "none".to_string(),
        }
    }
}

fn check_aligned(candidates: &[Vec<String>], references: &[Vec<String>]) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::Argument("empty corpus".into()));
    }
    if candidates.len() != references.len() {
        return Err(Error::Argument(format!(
            "{} candidates vs {} references",
            candidates.len(),
            references.len()
        )));
    }
    Ok(())
}

pub fn ngram_counts(tokens: &[String], n: usize) -> HashMap<Vec<String>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU-1..BLEU-4: clipped n-gram precision aggregated over
/// the corpus, geometric mean of orders 1..n, brevity penalty from total
/// lengths. No smoothing, so a zero precision at order n zeroes BLEU-k
/// for every k >= n.
pub fn corpus_bleu(
    candidates: &[Vec<String>],
    references: &[Vec<String>],
) -> Result<[f64; MAX_NGRAM]> {
    check_aligned(candidates, references)?;
    let mut matches = [0usize; MAX_NGRAM];
    let mut totals = [0usize; MAX_NGRAM];
    let mut cand_len = 0usize;
    let mut ref_len = 0usize;
    for (cand, reference) in candidates.iter().zip(references) {
        cand_len += cand.len();
        ref_len += reference.len();
        for n in 1..=MAX_NGRAM {
            let c = ngram_counts(cand, n);
            let r = ngram_counts(reference, n);
            for (gram, &count) in &c {
                totals[n - 1] += count;
                matches[n - 1] += count.min(r.get(gram).copied().unwrap_or(0));
            }
        }
    }
    let bp = brevity_penalty(cand_len, ref_len);
    let mut out = [0.0; MAX_NGRAM];
    for k in 1..=MAX_NGRAM {
        let mut log_sum = 0.0;
        let mut zero = false;
        for n in 1..=k {
            if totals[n - 1] == 0 || matches[n - 1] == 0 {
                zero = true;
                break;
            }
            log_sum += (matches[n - 1] as f64 / totals[n - 1] as f64).ln();
        }
        out[k - 1] = if zero { 0.0 } else { bp * (log_sum / k as f64).exp() };
    }
    Ok(out)
}

pub fn brevity_penalty(cand_len: usize, ref_len: usize) -> f64 {
    if cand_len == 0 {
        0.0
    } else if cand_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    }
}

pub fn lcs_length(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure (beta = [`ROUGE_BETA`]) per aligned pair, averaged
/// over the corpus.
pub fn rouge_l(candidates: &[Vec<String>], references: &[Vec<String>]) -> Result<f64> {
    check_aligned(candidates, references)?;
    let mut sum = 0.0;
    for (cand, reference) in candidates.iter().zip(references) {
        sum += rouge_l_pair(cand, reference);
    }
    Ok(sum / candidates.len() as f64)
}

fn rouge_l_pair(cand: &[String], reference: &[String]) -> f64 {
    if cand.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_length(cand, reference) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / cand.len() as f64;
    let r = lcs / reference.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// CIDEr: per-order cosine of TF-IDF n-gram vectors (n = 1..4), averaged
/// over orders and pairs, scaled by [`CIDER_SCALE`]. IDF document
/// frequencies are counted over the reference corpus. A single-document
/// corpus is degenerate (every IDF is zero) but still computed.
pub fn cider(candidates: &[Vec<String>], references: &[Vec<String>]) -> Result<(f64, bool)> {
    check_aligned(candidates, references)?;
    let n_docs = references.len();
    let degenerate = n_docs < 2;

    // Document frequency per order.
    let mut df: Vec<HashMap<Vec<String>, usize>> = vec![HashMap::new(); MAX_NGRAM];
    for reference in references {
        for n in 1..=MAX_NGRAM {
            for gram in ngram_counts(reference, n).into_keys() {
                *df[n - 1].entry(gram).or_insert(0) += 1;
            }
        }
    }
    let idf = |n: usize, gram: &Vec<String>| -> f64 {
        let d = df[n - 1].get(gram).copied().unwrap_or(0).max(1) as f64;
        (n_docs as f64 / d).ln()
    };

    let mut total = 0.0;
    for (cand, reference) in candidates.iter().zip(references) {
        let mut per_n_sum = 0.0;
        for n in 1..=MAX_NGRAM {
            per_n_sum += tfidf_cosine(cand, reference, n, &idf);
        }
        total += per_n_sum / MAX_NGRAM as f64;
    }
    Ok((CIDER_SCALE * total / candidates.len() as f64, degenerate))
}

fn tfidf_vector(
    tokens: &[String],
    n: usize,
    idf: &dyn Fn(usize, &Vec<String>) -> f64,
) -> HashMap<Vec<String>, f64> {
    let counts = ngram_counts(tokens, n);
    let total: usize = counts.values().sum();
    if total == 0 {
        return HashMap::new();
    }
    counts
        .into_iter()
        .map(|(gram, c)| {
            let w = (c as f64 / total as f64) * idf(n, &gram);
            (gram, w)
        })
        .collect()
}

fn tfidf_cosine(
    cand: &[String],
    reference: &[String],
    n: usize,
    idf: &dyn Fn(usize, &Vec<String>) -> f64,
) -> f64 {
    let cv = tfidf_vector(cand, n, idf);
    let rv = tfidf_vector(reference, n, idf);
    let dot: f64 = cv
        .iter()
        .filter_map(|(g, w)| rv.get(g).map(|x| w * x))
        .sum();
    let nc: f64 = cv.values().map(|w| w * w).sum::<f64>().sqrt();
    let nr: f64 = rv.values().map(|w| w * w).sum::<f64>().sqrt();
    if nc == 0.0 || nr == 0.0 {
        0.0
    } else {
        dot / (nc * nr)
    }
}

/// Computes the full report for aligned candidate/reference corpora.
pub fn metric_report(
    candidates: &[Vec<String>],
    references: &[Vec<String>],
) -> Result<MetricReport> {
    let bleu = corpus_bleu(candidates, references)?;
    let rouge = rouge_l(candidates, references)?;
    let (cider_score, degenerate) = cider(candidates, references)?;
    Ok(MetricReport {
        bleu,
        rouge_l: rouge,
        cider: cider_score,
        sample_count: candidates.len(),
        cider_degenerate_idf: degenerate,
        config: MetricConfig::default(),
        external: BTreeMap::new(),
    })
}
