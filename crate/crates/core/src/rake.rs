//! RAKE keyword extraction, used for the linguistic topic view and for
//! extracting a topic from generated stories.
//!
//! Candidate phrases are maximal runs of non-stopword tokens between
//! stopwords and punctuation. Each word is scored deg(w)/freq(w) over the
//! co-occurrence graph of candidate phrases (deg counts the word itself
//! once per occurrence), and a phrase scores the sum of its member word
//! scores. Runs longer than [`MAX_PHRASE_WORDS`] are split into
//! consecutive chunks so no degenerate whole-sentence phrase survives.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::tokenize;
use crate::error::Result;

pub const MAX_PHRASE_WORDS: usize = 4;

const BUILTIN_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// The fixed stopword list shipped with the crate.
pub fn builtin_stopwords() -> HashSet<String> {
    parse_stopwords(BUILTIN_STOPWORDS.as_bytes()).expect("built-in stopword list is valid")
}

/// Loads a stopword file: UTF-8, one token per line, `#` comments allowed.
pub fn load_stopwords(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_stopwords(std::io::BufReader::new(file))
}

fn parse_stopwords(r: impl BufRead) -> Result<HashSet<String>> {
    let mut set = HashSet::new();
    for line in r.lines() {
        let line = line?;
        let word = line.split('#').next().unwrap_or("").trim();
        if !word.is_empty() {
            set.insert(word.to_lowercase());
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Visual,
    Linguistic,
    Candidate,
}

/// A ranked word or phrase with its score and extraction provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicPhrase {
    pub text: String,
    pub score: f64,
    pub provenance: Provenance,
}

fn is_punct(token: &str) -> bool {
    token.chars().all(|c| !c.is_alphanumeric())
}

fn candidate_phrases(tokens: &[String], stopwords: &HashSet<String>) -> Vec<Vec<String>> {
    let mut phrases = Vec::new();
    let mut run: Vec<String> = Vec::new();
    for token in tokens {
        if is_punct(token) || stopwords.contains(token) {
            flush_run(&mut run, &mut phrases);
        } else {
            run.push(token.clone());
        }
    }
    flush_run(&mut run, &mut phrases);
    phrases
}

fn flush_run(run: &mut Vec<String>, phrases: &mut Vec<Vec<String>>) {
    for chunk in run.chunks(MAX_PHRASE_WORDS) {
        phrases.push(chunk.to_vec());
    }
    run.clear();
}

/// Extracts ranked keyword phrases from `text`. All-stopword input yields
/// an empty list. Output is sorted by score descending, ties broken
/// lexicographically, duplicates removed.
pub fn rake_extract(text: &str, stopwords: &HashSet<String>) -> Vec<TopicPhrase> {
    let tokens = tokenize(text);
    let phrases = candidate_phrases(&tokens, stopwords);
    rank_phrases(&phrases)
}

fn rank_phrases(phrases: &[Vec<String>]) -> Vec<TopicPhrase> {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    let mut deg: BTreeMap<&str, usize> = BTreeMap::new();
    for phrase in phrases {
        for word in phrase {
            *freq.entry(word).or_insert(0) += 1;
            *deg.entry(word).or_insert(0) += phrase.len();
        }
    }
    let word_score = |w: &str| deg[w] as f64 / freq[w] as f64;

    let mut seen = BTreeSet::new();
    let mut out: Vec<TopicPhrase> = phrases
        .iter()
        .filter_map(|phrase| {
            let text = phrase.join(" ");
            if !seen.insert(text.clone()) {
                return None;
            }
            let score = phrase.iter().map(|w| word_score(w)).sum();
            Some(TopicPhrase {
                text,
                score,
                provenance: Provenance::Candidate,
            })
        })
        .collect();
    out.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then_with(|| a.text.cmp(&b.text))
    });
    out
}

/// Top-1 RAKE phrase of a whole story (sentences concatenated with
/// sentence breaks so phrases never span sentences). Scores are
/// invariant to sentence order by construction. Returns `None` when no
/// candidate phrase exists.
pub fn story_topic(
    sentences: &[Vec<String>],
    stopwords: &HashSet<String>,
    provenance: Provenance,
) -> Option<TopicPhrase> {
    let mut phrases = Vec::new();
    for sentence in sentences {
        phrases.extend(candidate_phrases(sentence, stopwords));
    }
    rank_phrases(&phrases).into_iter().next().map(|mut p| {
        p.provenance = provenance;
        p
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stops(words: &[&str]) -> HashSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn red_fox_red_hen_tie() {
        // Graph: freq(red)=2 deg(red)=4, freq(fox)=1 deg(fox)=2,
        // freq(hen)=1 deg(hen)=2. Both phrases score 2+2=4.
        let out = rake_extract("the red fox and the red hen", &stops(&["the", "and"]));
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].text, "red fox");
        assert_eq!(out[1].text, "red hen");
        assert!((out[0].score - 4.0).abs() < 1e-12);
        assert!((out[1].score - 4.0).abs() < 1e-12);
    }

    #[test]
    fn all_stopwords_empty() {
        assert!(rake_extract("the the the", &stops(&["the"])).is_empty());
    }

    #[test]
    fn single_content_word_scores_one() {
        let out = rake_extract("wedding", &stops(&["the"]));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].text, "wedding");
        assert!((out[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn punctuation_breaks_phrases() {
        let out = rake_extract("red fox, red hen", &stops(&[]));
        let texts: Vec<&str> = out.iter().map(|p| p.text.as_str()).collect();
        assert!(texts.contains(&"red fox"));
        assert!(texts.contains(&"red hen"));
        assert!(!texts.iter().any(|t| t.contains(',')));
    }

    #[test]
    fn long_runs_are_chunked() {
        let out = rake_extract("one two three four five six", &stops(&[]));
        assert!(out.iter().all(|p| p.text.split(' ').count() <= MAX_PHRASE_WORDS));
    }

    #[test]
    fn story_topic_repeated_bigram_wins() {
        let stopwords = stops(&["a", "was", "it", "such", "the", "at"]);
        let story: Vec<Vec<String>> = vec![
            tokenize("it was a good day"),
            tokenize("such a good day at the beach"),
        ];
        let top = story_topic(&story, &stopwords, Provenance::Linguistic).unwrap();
        assert_eq!(top.text, "good day");
        assert_eq!(top.provenance, Provenance::Linguistic);
    }

    #[test]
    fn story_topic_pure_stopwords_is_none() {
        let stopwords = stops(&["the", "a"]);
        let story = vec![tokenize("the a the")];
        assert!(story_topic(&story, &stopwords, Provenance::Candidate).is_none());
    }

    #[test]
    fn story_topic_single_content_word() {
        let stopwords = builtin_stopwords();
        let story = vec![tokenize("wedding")];
        let top = story_topic(&story, &stopwords, Provenance::Linguistic).unwrap();
        assert_eq!(top.text, "wedding");
    }

    #[test]
    fn story_topic_sentence_order_invariant() {
        let stopwords = builtin_stopwords();
        let a = vec![tokenize("the bride smiled"), tokenize("a lovely wedding cake")];
        let b = vec![tokenize("a lovely wedding cake"), tokenize("the bride smiled")];
        let ta = story_topic(&a, &stopwords, Provenance::Candidate).unwrap();
        let tb = story_topic(&b, &stopwords, Provenance::Candidate).unwrap();
        assert_eq!(ta.text, tb.text);
        assert!((ta.score - tb.score).abs() < 1e-12);
    }

    #[test]
    fn word_score_at_least_one() {
        let out = rake_extract(
            "bright sun over calm sea and bright sky",
            &stops(&["and", "over"]),
        );
        for p in &out {
            let n = p.text.split(' ').count() as f64;
            assert!(p.score >= n, "phrase {:?} score {} below word count", p.text, p.score);
        }
    }

    #[test]
    fn stopword_file_comments() {
        let set = parse_stopwords("the # article\n# full comment\nand\n".as_bytes()).unwrap();
        assert!(set.contains("the"));
        assert!(set.contains("and"));
        assert_eq!(set.len(), 2);
    }
}
