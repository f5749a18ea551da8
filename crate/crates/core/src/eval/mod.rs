//! Word error rate, accuracy and the chunk-size experiment matrix.

mod edit;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::aligner::{pair_line, train_aligner_on, AlignError, AlignerConfig};
use crate::chunker::{make_examples, ChunkError, MAX_CHUNK};
use crate::corpus::{Region, TokenizedPair};
use crate::model::{normalize_tokens, train_model, ModelConfig, ModelError, NormalizerModel, TrainReport};

pub use edit::{accuracy, wer, word_edit_counts, EditCounts};

pub const BASELINE_LABEL: &str = "no normalization";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("reference is empty (S + D + C = 0)")]
    EmptyReference,
    #[error("no test lines")]
    EmptyTestSet,
    #[error("chunk size {0} outside 1..={MAX_CHUNK}")]
    ChunkSize(usize),
    #[error("aligner: {0}")]
    Aligner(#[from] AlignError),
    #[error("k={k}: {source}")]
    Chunk {
        k: usize,
        #[source]
        source: ChunkError,
    },
    #[error("k={k}: {source}")]
    Model {
        k: usize,
        #[source]
        source: ModelError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub counts: EditCounts,
    pub wer: f64,
    pub accuracy: f64,
}

impl Score {
    pub fn from_counts(counts: EditCounts) -> Result<Self, EvalError> {
        Ok(Score { counts, wer: wer(&counts)?, accuracy: accuracy(&counts)? })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub system_label: String,
    pub lines: usize,
    pub counts: EditCounts,
    pub wer: f64,
    pub accuracy: f64,
    /// Regions with at least one reference word.
    pub per_region: BTreeMap<Region, Score>,
}

/// Scores `normalize` on every test line against its reference, summing
/// counts over the corpus before dividing.
pub fn evaluate_system<F>(label: &str, test_pairs: &[TokenizedPair], mut normalize: F) -> Result<EvalReport, EvalError>
where
    F: FnMut(&[String]) -> Vec<String>,
{
    if test_pairs.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let mut total = EditCounts::default();
    let mut regions: BTreeMap<Region, EditCounts> = BTreeMap::new();
    for pair in test_pairs {
        let hyp = normalize(&pair.dialect_tokens);
        let c = word_edit_counts(&pair.normalized_tokens, &hyp);
        total += c;
        if let Some(r) = pair.region {
            *regions.entry(r).or_default() += c;
        }
    }
    let score = Score::from_counts(total)?;
    let per_region = regions
        .into_iter()
        .filter(|(_, c)| c.reference_len() > 0)
        .map(|(r, c)| Score::from_counts(c).map(|s| (r, s)))
        .collect::<Result<_, _>>()?;
    Ok(EvalReport {
        system_label: label.to_string(),
        lines: test_pairs.len(),
        counts: total,
        wer: score.wer,
        accuracy: score.accuracy,
        per_region,
    })
}

/// The identity system: dialect tokens scored as if already normalized.
pub fn evaluate_baseline(test_pairs: &[TokenizedPair]) -> Result<EvalReport, EvalError> {
    evaluate_system(BASELINE_LABEL, test_pairs, |d| d.to_vec())
}

pub fn chunk_label(k: usize) -> String {
    format!("chunk of {k}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub chunk_sizes: Vec<usize>,
    /// Shared by every model, seed included.
    pub model: ModelConfig,
    pub aligner: AlignerConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Baseline first, then one row per chunk size in the order given.
    pub reports: Vec<EvalReport>,
    pub training: Vec<(usize, TrainReport)>,
    pub models: Vec<NormalizerModel>,
}

/// Aligns the corpus, then for each chunk size builds examples from the
/// training lines, trains a model and scores it on the test lines.
pub fn run_experiment_matrix(
    train_pairs: &[TokenizedPair],
    test_pairs: &[TokenizedPair],
    config: &ExperimentConfig,
) -> Result<ExperimentResult, EvalError> {
    if let Some(&k) = config.chunk_sizes.iter().find(|k| !(1..=MAX_CHUNK).contains(*k)) {
        return Err(EvalError::ChunkSize(k));
    }
    let mut reports = vec![evaluate_baseline(test_pairs)?];
    let mut training = Vec::new();
    let mut models = Vec::new();
    if config.chunk_sizes.is_empty() {
        return Ok(ExperimentResult { reports, training, models });
    }

    let all: Vec<TokenizedPair> = train_pairs
        .iter()
        .chain(test_pairs)
        .filter(|p| !p.dialect_tokens.is_empty() && !p.normalized_tokens.is_empty())
        .cloned()
        .collect();
    let aligner = train_aligner_on(&all, &config.aligner)?;
    let aligned: Vec<_> = train_pairs.iter().map(|p| pair_line(p, &aligner)).collect();

    for &k in &config.chunk_sizes {
        let mut examples = Vec::new();
        for line in &aligned {
            examples.extend(make_examples(line, k).map_err(|source| EvalError::Chunk { k, source })?);
        }
        let (model, report) =
            train_model(&examples, &config.model).map_err(|source| EvalError::Model { k, source })?;
        reports.push(evaluate_system(&chunk_label(k), test_pairs, |d| normalize_tokens(&model, d))?);
        training.push((k, report));
        models.push(model);
    }
    Ok(ExperimentResult { reports, training, models })
}

/// Human-readable results table; rates are percentages.
pub fn format_report_table(reports: &[EvalReport]) -> String {
    let width = reports.iter().map(|r| r.system_label.chars().count()).max().unwrap_or(0).max(6);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<width$}  {:>8}  {:>8}  {:>7}  {:>7}  {:>7}  {:>7}",
        "system", "WER", "accuracy", "S", "D", "I", "C"
    );
    for r in reports {
        let c = &r.counts;
        let _ = writeln!(
            s,
            "{:<width$}  {:>8.2}  {:>7.1}%  {:>7}  {:>7}  {:>7}  {:>7}",
            r.system_label,
            100.0 * r.wer,
            100.0 * r.accuracy,
            c.substitutions,
            c.deletions,
            c.insertions,
            c.correct
        );
    }
    s
}

/// Machine-readable `key=value` report, one block per system.
pub fn format_report_kv(reports: &[EvalReport]) -> String {
    let mut s = String::new();
    for r in reports {
        let c = &r.counts;
        let _ = writeln!(s, "system_label={}", r.system_label);
        let _ = writeln!(s, "lines={}", r.lines);
        let _ = writeln!(s, "S={}\nD={}\nI={}\nC={}", c.substitutions, c.deletions, c.insertions, c.correct);
        let _ = writeln!(s, "wer={:.6}\naccuracy={:.6}", r.wer, r.accuracy);
        for (region, sc) in &r.per_region {
            let rc = &sc.counts;
            let _ = writeln!(
                s,
                "region={} S={} D={} I={} C={} wer={:.6} accuracy={:.6}",
                region, rc.substitutions, rc.deletions, rc.insertions, rc.correct, sc.wer, sc.accuracy
            );
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs() -> Vec<TokenizedPair> {
        vec![
            TokenizedPair::new(&["int", "he"], &["inte", "han"], Some(Region::Nyland)),
            TokenizedPair::new(&["a", "b", "c"], &["a", "b", "c"], Some(Region::Aland)),
            TokenizedPair::new(&["x"], &["y", "z"], None),
        ]
    }

    #[test]
    fn baseline_counts_and_regions() {
        let r = evaluate_baseline(&pairs()).unwrap();
        assert_eq!(r.counts, EditCounts::new(3, 1, 0, 3));
        assert!((r.wer - 4.0 / 7.0).abs() < 1e-12);
        assert!((r.accuracy - 3.0 / 7.0).abs() < 1e-12);
        assert_eq!(r.per_region[&Region::Nyland].wer, 1.0);
        assert_eq!(r.per_region[&Region::Aland].wer, 0.0);
        assert_eq!(r.per_region.len(), 2);
    }

    #[test]
    fn oracle_scores_perfectly() {
        let p = pairs();
        let mut i = 0;
        let r = evaluate_system("oracle", &p, |_| {
            i += 1;
            p[i - 1].normalized_tokens.clone()
        })
        .unwrap();
        assert_eq!((r.wer, r.accuracy), (0.0, 1.0));
    }

    #[test]
    fn micro_average_matches_summed_counts() {
        let r = evaluate_baseline(&pairs()).unwrap();
        let summed: EditCounts = pairs()
            .iter()
            .map(|p| word_edit_counts(&p.normalized_tokens, &p.dialect_tokens))
            .sum();
        assert_eq!(wer(&summed).unwrap(), r.wer);
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(matches!(evaluate_baseline(&[]), Err(EvalError::EmptyTestSet)));
        let empty = vec![TokenizedPair::new(&["a"], &[], None)];
        assert!(matches!(evaluate_baseline(&empty), Err(EvalError::EmptyReference)));
    }

    #[test]
    fn matrix_rejects_bad_k_and_labels_rows() {
        let cfg = ExperimentConfig { chunk_sizes: vec![6], model: ModelConfig::default(), aligner: AlignerConfig::default() };
        assert!(matches!(run_experiment_matrix(&pairs(), &pairs(), &cfg), Err(EvalError::ChunkSize(6))));
        let model = ModelConfig { embedding_dim: 4, hidden_dim: 4, train_steps: 2, batch_size: 2, ..Default::default() };
        let cfg = ExperimentConfig { chunk_sizes: vec![1, 2], model, aligner: AlignerConfig::default() };
        let res = run_experiment_matrix(&pairs(), &pairs(), &cfg).unwrap();
        let labels: Vec<_> = res.reports.iter().map(|r| r.system_label.as_str()).collect();
        assert_eq!(labels, [BASELINE_LABEL, "chunk of 1", "chunk of 2"]);
        assert_eq!(res.training.len(), 2);
    }

    #[test]
    fn training_errors_name_k() {
        let model = ModelConfig { hidden_dim: 0, ..Default::default() };
        let cfg = ExperimentConfig { chunk_sizes: vec![1], model, aligner: AlignerConfig::default() };
        let err = run_experiment_matrix(&pairs(), &pairs(), &cfg).unwrap_err();
        assert!(err.to_string().starts_with("k=1:"), "{err}");
    }

    #[test]
    fn tables_have_one_row_per_system() {
        let r = evaluate_baseline(&pairs()).unwrap();
        let t = format_report_table(&[r.clone(), r.clone()]);
        assert_eq!(t.lines().count(), 3);
        assert!(t.contains("57.14"));
        let kv = format_report_kv(&[r]);
        assert!(kv.contains("system_label=no normalization\n"));
        assert!(kv.contains("region=Åland S=0 D=0 I=0 C=3 wer=0.000000 accuracy=1.000000"));
    }
}
