//! Experiment orchestration: corpus ingestion, synthetic data, multi-trial
//! protocol sweeps, and CSV/JSON result emission.

mod experiment;
mod output;

pub use experiment::{
    dump_first_trial_messages, run_experiment, ExecMode, ExperimentConfig, Protocol, ResolvedParams,
};
pub use output::{write_outputs, ExperimentResult, ResultRow, TopkMetrics, CSV_SCHEMA_VERSION};

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::protocol::Dataset;
use crate::rng::{stream, StreamDomain};

/// A token corpus resolved against a fixed vocabulary. Bin ids follow
/// vocabulary line order.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub vocabulary: Vec<String>,
    pub dataset: Dataset,
    /// Records dropped in lenient mode.
    pub skipped: usize,
}

/// Load a vocabulary (one token per line; line number = bin id) and a record
/// file (one token per line). Strict mode rejects unknown tokens; lenient
/// mode skips and counts them.
pub fn load_corpus(
    vocab_path: impl AsRef<Path>,
    records_path: impl AsRef<Path>,
    lenient: bool,
) -> Result<Corpus> {
    let vocab_text = std::fs::read_to_string(vocab_path)?;
    let mut vocabulary = Vec::new();
    let mut ids: HashMap<&str, u32> = HashMap::new();
    for line in vocab_text.lines() {
        let tok = line.trim();
        if tok.is_empty() {
            continue;
        }
        if ids.contains_key(tok) {
            return Err(Error::Parse(format!("duplicate vocabulary token {tok:?}")));
        }
        ids.insert(tok, vocabulary.len() as u32 + 1);
        vocabulary.push(tok.to_string());
    }
    if vocabulary.is_empty() {
        return Err(Error::Parse("vocabulary is empty".into()));
    }
    let records_text = std::fs::read_to_string(records_path)?;
    let mut items = Vec::new();
    let mut skipped = 0usize;
    for line in records_text.lines() {
        let tok = line.trim();
        if tok.is_empty() {
            continue;
        }
        match ids.get(tok) {
            Some(&id) => items.push(id),
            None if lenient => skipped += 1,
            None => return Err(Error::Parse(format!("unknown token {tok:?}"))),
        }
    }
    if items.is_empty() {
        return Err(Error::Domain("no usable records (n >= 1 required)".into()));
    }
    let d = vocabulary.len();
    Ok(Corpus {
        vocabulary,
        dataset: Dataset::new(items, d)?,
        skipped,
    })
}

/// Exact PMF of the Zipf(`s`) law truncated to `[1, d]`.
pub fn zipf_pmf(d: usize, s: f64) -> Vec<f64> {
    let mut weights: Vec<f64> = (1..=d).map(|j| (j as f64).powf(-s)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

/// `n` i.i.d. draws from truncated Zipf(`s`), deterministic under `seed`.
pub fn synth_zipf(n: usize, d: usize, s: f64, seed: u64) -> Result<Dataset> {
    if s.is_nan() || s <= 0.0 {
        return Err(Error::Domain("zipf exponent must be positive".into()));
    }
    if n == 0 || d == 0 {
        return Err(Error::Domain("n and d must be at least 1".into()));
    }
    let pmf = zipf_pmf(d, s);
    let mut cdf = Vec::with_capacity(d);
    let mut acc = 0.0;
    for p in &pmf {
        acc += p;
        cdf.push(acc);
    }
    *cdf.last_mut().unwrap() = 1.0;
    let mut rng = stream(seed, StreamDomain::Data, 0, 0);
    let items: Vec<u32> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            cdf.partition_point(|&c| c <= u) as u32 + 1
        })
        .collect();
    Dataset::new(items, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(name: &str, contents: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("shufflehist-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("{name}-{}", std::process::id()));
        std::fs::write(&path, contents).unwrap();
        path
    }

    #[test]
    fn corpus_examples() {
        let vocab = write_tmp("vocab", "a\nb\nc\n");
        let records = write_tmp("recs", "b\nb\na\n");
        let corpus = load_corpus(&vocab, &records, false).unwrap();
        assert_eq!(corpus.dataset.items(), &[2, 2, 1]);
        let hist = corpus.dataset.histogram();
        assert!((hist[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((hist[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(hist[2], 0.0);
        assert_eq!(corpus.skipped, 0);
    }

    #[test]
    fn corpus_error_paths() {
        let vocab = write_tmp("vocab2", "a\nb\na\n");
        let records = write_tmp("recs2", "a\n");
        assert!(matches!(
            load_corpus(&vocab, &records, false),
            Err(Error::Parse(_))
        ));

        let vocab = write_tmp("vocab3", "a\nb\n");
        let records = write_tmp("recs3", "");
        assert!(load_corpus(&vocab, &records, false).is_err());

        let records = write_tmp("recs4", "a\nz\n");
        assert!(matches!(
            load_corpus(&vocab, &records, false),
            Err(Error::Parse(_))
        ));
        let corpus = load_corpus(&vocab, &records, true).unwrap();
        assert_eq!(corpus.dataset.n(), 1);
        assert_eq!(corpus.skipped, 1);

        assert!(matches!(
            load_corpus("/definitely/not/here", &records, false),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn zipf_deterministic_and_skewed() {
        let a = synth_zipf(5000, 50, 1.1, 42).unwrap();
        let b = synth_zipf(5000, 50, 1.1, 42).unwrap();
        assert_eq!(a.items(), b.items());
        let c = synth_zipf(5000, 50, 1.1, 43).unwrap();
        assert_ne!(a.items(), c.items());

        // huge exponent: essentially all mass on item 1
        let heavy = synth_zipf(1000, 50, 40.0, 7).unwrap();
        assert!(heavy.items().iter().all(|&x| x == 1));
    }

    #[test]
    fn zipf_matches_exact_pmf() {
        let (n, d, s) = (1_000_000usize, 20usize, 1.2);
        let data = synth_zipf(n, d, s, 9).unwrap();
        let pmf = zipf_pmf(d, s);
        let counts = data.counts();
        for (j, (&c, &p)) in counts.iter().zip(&pmf).enumerate() {
            let mean = n as f64 * p;
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (c as f64 - mean).abs() < 3.5 * sd,
                "bin {j}: count {c} vs mean {mean:.1}"
            );
        }
    }
}
