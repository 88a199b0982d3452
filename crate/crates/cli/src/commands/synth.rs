//! `synth`: generate a synthetic corpus and write shuffled
//! train/val/test splits plus the companion fixture table.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tarnlab_core::data::CorpusSpec;
use tarnlab_core::synth::generate_synthetic_corpus_full;
use tarnlab_core::{write_dataset, Result, StorySample};

use crate::args::SynthArgs;
use crate::manifest::RunManifest;
use crate::resolve_path;

use super::derive_seed;

/// Val and test each take a tenth of the shuffled corpus (at least one
/// sample each once the corpus has three or more), train the rest.
fn split_sizes(n: usize) -> (usize, usize, usize) {
    let held = (n / 10).max(if n >= 3 { 1 } else { 0 });
    (n - 2 * held, held, held)
}

pub fn run(args: &SynthArgs) -> Result<()> {
    let spec = CorpusSpec {
        n_topics: args.topics,
        samples_per_topic: args.per_topic,
        images_per_story: args.images,
        vocab_size: args.vocab,
        seed: args.seed,
    };
    let corpus = generate_synthetic_corpus_full(&spec, args.dim)?;

    let out_dir = resolve_path(&args.out);
    std::fs::create_dir_all(&out_dir)?;

    let mut samples = corpus.samples;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(args.seed, "split"));
    samples.shuffle(&mut rng);
    let (n_train, n_val, _) = split_sizes(samples.len());
    let (train, rest) = samples.split_at(n_train);
    let (val, test) = rest.split_at(n_val);

    let mut manifest = RunManifest::new(
        "synth",
        serde_json::to_value(&spec).map_err(|e| tarnlab_core::Error::Schema(e.to_string()))?,
        args.seed,
    );
    for (name, split) in [("train", train), ("val", val), ("test", test)] {
        let path = out_dir.join(format!("{name}.jsonl"));
        let mut buf = Vec::new();
        write_dataset(split, &mut buf)?;
        std::fs::write(&path, buf)?;
        manifest.record_output(&path);
    }
    let fixture_path = out_dir.join("fixture.json");
    corpus.fixture.save(&fixture_path)?;
    manifest.record_output(&fixture_path);
    manifest.write(&out_dir.join("manifest.json"))?;

    let counts = |s: &[StorySample]| s.len();
    eprintln!(
        "synth: {} samples ({} train / {} val / {} test) -> {}",
        counts(train) + counts(val) + counts(test),
        counts(train),
        counts(val),
        counts(test),
        out_dir.display()
    );
    Ok(())
}
