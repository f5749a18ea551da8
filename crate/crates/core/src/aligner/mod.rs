//! Token aligner: IBM Model 2 with a fixed diagonal-preference distortion
//! prior, trained by EM, and the projection of its Viterbi links onto
//! per-dialect-token pairs.
//!
//! Alignment direction is normalized (target) given dialect (source), so each
//! normalized token has exactly one dialect parent or NULL.

mod io;

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::corpus::TokenizedPair;

pub use io::{load_aligner, parse_aligner, save_aligner, write_aligner, ALIGNER_HEADER};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("invalid aligner config: {0}")]
    Config(String),
    #[error("cannot train an aligner on an empty corpus")]
    EmptyCorpus,
    #[error("line {0} has an empty side")]
    EmptyLine(usize),
    #[error("distortion is undefined for target length {m} and source length {n}")]
    EmptySentence { m: usize, n: usize },
    #[error("target position {i} out of range for length {m}")]
    Position { i: usize, m: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("aligner file line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignerConfig {
    /// Diagonal tension; 0 gives a uniform distortion prior.
    pub lambda: f64,
    pub p_null: f64,
    pub smoothing_alpha: f64,
    pub em_iterations: usize,
}

impl Default for AlignerConfig {
    fn default() -> Self {
        AlignerConfig {
            lambda: 4.0,
            p_null: 0.08,
            smoothing_alpha: 0.01,
            em_iterations: 5,
        }
    }
}

impl AlignerConfig {
    pub fn validate(&self) -> Result<(), AlignError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(AlignError::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(0.0..1.0).contains(&self.p_null) {
            return Err(AlignError::Config(format!("p_null must be in [0,1), got {}", self.p_null)));
        }
        if !(self.smoothing_alpha >= 0.0 && self.smoothing_alpha.is_finite()) {
            return Err(AlignError::Config(format!(
                "smoothing_alpha must be >= 0, got {}",
                self.smoothing_alpha
            )));
        }
        if self.em_iterations == 0 {
            return Err(AlignError::Config("em_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Source side of a link; `None` is the NULL word.
pub type SourceIndex = Option<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignmentLink {
    pub target_index: usize,
    pub source_index: SourceIndex,
}

impl AlignmentLink {
    pub fn new(target_index: usize, source_index: SourceIndex) -> Self {
        AlignmentLink { target_index, source_index }
    }
}

/// A dialect token and the (possibly empty, possibly multi-word) standard
/// string it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenPair {
    pub dialect: String,
    pub normalized: String,
}

impl TokenPair {
    pub fn new(dialect: &str, normalized: &str) -> Self {
        TokenPair {
            dialect: dialect.to_string(),
            normalized: normalized.to_string(),
        }
    }

    pub fn normalized_words(&self) -> impl Iterator<Item = &str> {
        self.normalized.split_whitespace()
    }
}

/// Prior probability that target position `i` (of `m`) aligns to source `j`
/// (of `n`), or to NULL when `j` is `None`.
pub fn distortion_prob(
    i: usize,
    j: SourceIndex,
    m: usize,
    n: usize,
    config: &AlignerConfig,
) -> Result<f64, AlignError> {
    if m == 0 || n == 0 {
        return Err(AlignError::EmptySentence { m, n });
    }
    if i >= m {
        return Err(AlignError::Position { i, m });
    }
    match j {
        None => Ok(config.p_null),
        Some(j) if j >= n => Err(AlignError::Position { i: j, m: n }),
        Some(j) => {
            let row = distortion_row(i, m, n, config.lambda);
            Ok((1.0 - config.p_null) * row[j])
        }
    }
}

/// Normalized diagonal weights over source positions `0..n` (without the
/// NULL share).
fn distortion_row(i: usize, m: usize, n: usize, lambda: f64) -> Vec<f64> {
    let rel = i as f64 / m as f64;
    let mut row: Vec<f64> = (0..n)
        .map(|j| (-lambda * (rel - j as f64 / n as f64).abs()).exp())
        .collect();
    let z: f64 = row.iter().sum();
    row.iter_mut().for_each(|w| *w /= z);
    row
}

/// Translation distribution `t(· | source)`. Targets never co-observed with
/// the source share the smoothing floor.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationRow {
    pub(crate) probs: HashMap<String, f64>,
    pub(crate) floor: f64,
}

impl TranslationRow {
    pub fn prob(&self, target: &str) -> f64 {
        self.probs.get(target).copied().unwrap_or(self.floor)
    }

    /// Explicit entries, in no particular order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Total mass over a target vocabulary of the given size.
    pub fn total_mass(&self, target_vocab_size: usize) -> f64 {
        let explicit: f64 = self.probs.values().sum();
        explicit + (target_vocab_size - self.probs.len()) as f64 * self.floor
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentModel {
    pub(crate) table: HashMap<String, TranslationRow>,
    pub(crate) null_row: TranslationRow,
    pub config: AlignerConfig,
    pub(crate) source_vocab: BTreeSet<String>,
    pub(crate) target_vocab: BTreeSet<String>,
}

impl AlignmentModel {
    pub fn source_vocab(&self) -> &BTreeSet<String> {
        &self.source_vocab
    }

    pub fn target_vocab(&self) -> &BTreeSet<String> {
        &self.target_vocab
    }

    pub fn row(&self, source: &str) -> Option<&TranslationRow> {
        self.table.get(source)
    }

    pub fn null_row(&self) -> &TranslationRow {
        &self.null_row
    }

    /// `t(target | source)`, with `None` as the NULL source. Unseen tokens on
    /// either side back off to uniform over the target vocabulary.
    pub fn translation_prob(&self, target: &str, source: Option<&str>) -> f64 {
        let uniform = 1.0 / self.target_vocab.len().max(1) as f64;
        if !self.target_vocab.contains(target) {
            return uniform;
        }
        match source {
            None => self.null_row.prob(target),
            Some(s) => self.table.get(s).map_or(uniform, |row| row.prob(target)),
        }
    }

    fn choose_link(&self, i: usize, source: &[String], target: &[String], prior: &[f64]) -> SourceIndex {
        let e = target[i].as_str();
        let mut best: SourceIndex = None;
        let mut best_score = f64::NEG_INFINITY;
        for (j, f) in source.iter().enumerate() {
            let score = self.translation_prob(e, Some(f)) * prior[j];
            if score > best_score {
                best_score = score;
                best = Some(j);
            }
        }
        let null_score = self.translation_prob(e, None) * self.config.p_null;
        if null_score > best_score {
            best = None;
        }
        best
    }
}

/// Per-iteration diagnostics from [`train_aligner_traced`].
#[derive(Debug, Clone, PartialEq)]
pub struct AlignerTrace {
    /// Corpus log-likelihood under the parameters at the start of each
    /// iteration, followed by the value under the final parameters.
    pub log_likelihood: Vec<f64>,
}

pub fn train_aligner(
    pairs: &[(Vec<String>, Vec<String>)],
    config: &AlignerConfig,
) -> Result<AlignmentModel, AlignError> {
    train_aligner_traced(pairs, config).map(|(m, _)| m)
}

pub fn train_aligner_on(
    pairs: &[TokenizedPair],
    config: &AlignerConfig,
) -> Result<AlignmentModel, AlignError> {
    let owned: Vec<(Vec<String>, Vec<String>)> = pairs
        .iter()
        .map(|p| (p.dialect_tokens.clone(), p.normalized_tokens.clone()))
        .collect();
    train_aligner(&owned, config)
}

/// EM over the translation table with the distortion prior held fixed.
/// Tables start uniform, so training is deterministic.
pub fn train_aligner_traced(
    pairs: &[(Vec<String>, Vec<String>)],
    config: &AlignerConfig,
) -> Result<(AlignmentModel, AlignerTrace), AlignError> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(AlignError::EmptyCorpus);
    }
    for (idx, (f, e)) in pairs.iter().enumerate() {
        if f.is_empty() || e.is_empty() {
            return Err(AlignError::EmptyLine(idx + 1));
        }
    }

    let source_vocab: BTreeSet<String> = pairs.iter().flat_map(|(f, _)| f.iter().cloned()).collect();
    let target_vocab: BTreeSet<String> = pairs.iter().flat_map(|(_, e)| e.iter().cloned()).collect();
    let uniform = 1.0 / target_vocab.len() as f64;

    let mut model = AlignmentModel {
        table: source_vocab
            .iter()
            .map(|f| (f.clone(), TranslationRow { probs: HashMap::new(), floor: uniform }))
            .collect(),
        null_row: TranslationRow { probs: HashMap::new(), floor: uniform },
        config: *config,
        source_vocab,
        target_vocab,
    };

    // distortion priors depend only on (m, n); cache them
    let mut priors: HashMap<(usize, usize), Vec<Vec<f64>>> = HashMap::new();
    for (f, e) in pairs {
        let (m, n) = (e.len(), f.len());
        priors
            .entry((m, n))
            .or_insert_with(|| (0..m).map(|i| distortion_row(i, m, n, config.lambda)).collect());
    }

    let mut trace = AlignerTrace { log_likelihood: Vec::with_capacity(config.em_iterations + 1) };
    let v_t = model.target_vocab.len() as f64;
    for _ in 0..config.em_iterations {
        let mut counts: HashMap<&str, HashMap<&str, f64>> = HashMap::new();
        let mut null_counts: HashMap<&str, f64> = HashMap::new();
        let mut ll = 0.0;
        for (f, e) in pairs {
            let prior = &priors[&(e.len(), f.len())];
            for (i, ei) in e.iter().enumerate() {
                let null_w = model.null_row.prob(ei) * config.p_null;
                let ws: Vec<f64> = f
                    .iter()
                    .enumerate()
                    .map(|(j, fj)| model.table[fj].prob(ei) * (1.0 - config.p_null) * prior[i][j])
                    .collect();
                let z = null_w + ws.iter().sum::<f64>();
                ll += z.ln();
                if null_w > 0.0 {
                    *null_counts.entry(ei).or_default() += null_w / z;
                }
                for (j, w) in ws.into_iter().enumerate() {
                    *counts.entry(f[j].as_str()).or_default().entry(ei).or_default() += w / z;
                }
            }
        }
        trace.log_likelihood.push(ll);

        let alpha = config.smoothing_alpha;
        let reestimate = |row_counts: Option<&HashMap<&str, f64>>| -> TranslationRow {
            let explicit = row_counts.map_or(0.0, |c| c.values().sum::<f64>());
            let denom = explicit + alpha * v_t;
            if denom <= 0.0 {
                return TranslationRow { probs: HashMap::new(), floor: 1.0 / v_t };
            }
            TranslationRow {
                probs: row_counts
                    .into_iter()
                    .flatten()
                    .map(|(e, c)| (e.to_string(), (c + alpha) / denom))
                    .collect(),
                floor: alpha / denom,
            }
        };
        let new_table: HashMap<String, TranslationRow> = model
            .source_vocab
            .iter()
            .map(|f| (f.clone(), reestimate(counts.get(f.as_str()))))
            .collect();
        let new_null = if config.p_null > 0.0 {
            reestimate(Some(&null_counts))
        } else {
            TranslationRow { probs: HashMap::new(), floor: 1.0 / v_t }
        };
        model.table = new_table;
        model.null_row = new_null;
    }
    trace.log_likelihood.push(corpus_log_likelihood(&model, pairs));
    Ok((model, trace))
}

/// `sum over lines and target positions of ln sum_j t(e_i|f_j) a(j|i,m,n)`,
/// including the NULL source.
pub fn corpus_log_likelihood(model: &AlignmentModel, pairs: &[(Vec<String>, Vec<String>)]) -> f64 {
    let cfg = &model.config;
    let mut ll = 0.0;
    for (f, e) in pairs {
        let (m, n) = (e.len(), f.len());
        for (i, ei) in e.iter().enumerate() {
            let prior = distortion_row(i, m, n, cfg.lambda);
            let mut z = model.translation_prob(ei, None) * cfg.p_null;
            for (j, fj) in f.iter().enumerate() {
                z += model.translation_prob(ei, Some(fj)) * (1.0 - cfg.p_null) * prior[j];
            }
            ll += z.ln();
        }
    }
    ll
}

/// Per-target argmax over sources and NULL. Ties go to the smallest source
/// index, and a source beats NULL on equal score.
pub fn viterbi_align(
    model: &AlignmentModel,
    dialect_tokens: &[String],
    normalized_tokens: &[String],
) -> Result<Vec<AlignmentLink>, AlignError> {
    let (m, n) = (normalized_tokens.len(), dialect_tokens.len());
    if m == 0 || n == 0 {
        return Err(AlignError::EmptySentence { m, n });
    }
    Ok((0..m)
        .map(|i| {
            let prior: Vec<f64> = distortion_row(i, m, n, model.config.lambda)
                .into_iter()
                .map(|w| w * (1.0 - model.config.p_null))
                .collect();
            AlignmentLink::new(i, model.choose_link(i, dialect_tokens, normalized_tokens, &prior))
        })
        .collect())
}

/// Groups target tokens under their dialect parent.
///
/// NULL-linked targets attach to the parent of the nearest preceding linked
/// target, or to the first dialect token when nothing precedes them.
/// Unlinked dialect tokens map to the empty string.
pub fn project_token_pairs(
    dialect_tokens: &[String],
    normalized_tokens: &[String],
    links: &[AlignmentLink],
) -> Vec<TokenPair> {
    let mut parent: Vec<SourceIndex> = vec![None; normalized_tokens.len()];
    for link in links {
        if link.target_index < parent.len() {
            parent[link.target_index] = link.source_index.filter(|&j| j < dialect_tokens.len());
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); dialect_tokens.len()];
    let mut last_parent: Option<usize> = None;
    for (i, p) in parent.iter().enumerate() {
        let owner = match p {
            Some(j) => {
                last_parent = Some(*j);
                *j
            }
            None => last_parent.unwrap_or(0),
        };
        if let Some(g) = groups.get_mut(owner) {
            g.push(i);
        }
    }
    dialect_tokens
        .iter()
        .zip(groups)
        .map(|(d, idx)| TokenPair {
            dialect: d.clone(),
            normalized: idx
                .iter()
                .map(|&i| normalized_tokens[i].as_str())
                .collect::<Vec<_>>()
                .join(" "),
        })
        .collect()
}

/// Positional zip for equal-length lines; aligner otherwise.
pub fn pair_line(pair: &TokenizedPair, model: &AlignmentModel) -> Vec<TokenPair> {
    let (d, n) = (&pair.dialect_tokens, &pair.normalized_tokens);
    if d.len() == n.len() {
        return d.iter().zip(n).map(|(a, b)| TokenPair::new(a, b)).collect();
    }
    if d.is_empty() {
        return Vec::new();
    }
    if n.is_empty() {
        return d.iter().map(|a| TokenPair::new(a, "")).collect();
    }
    let links = viterbi_align(model, d, n).expect("both sides non-empty");
    project_token_pairs(d, n, &links)
}

/// Writes aligned lines: one utterance per line, TAB-separated
/// `dialect:normalized` fields. `:` never survives corpus cleaning.
pub fn format_aligned_lines(lines: &[Vec<TokenPair>]) -> String {
    let mut out = String::new();
    for line in lines {
        let fields: Vec<String> =
            line.iter().map(|p| format!("{}:{}", p.dialect, p.normalized)).collect();
        out.push_str(&fields.join("\t"));
        out.push('\n');
    }
    out
}

pub fn parse_aligned_lines(text: &str) -> Result<Vec<Vec<TokenPair>>, AlignError> {
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let raw = raw.trim_end_matches('\r');
        if raw.is_empty() {
            continue;
        }
        let mut line = Vec::new();
        for field in raw.split('\t') {
            let (d, n) = field.split_once(':').ok_or_else(|| AlignError::Format {
                line: idx + 1,
                message: format!("field {field:?} lacks ':' separator"),
            })?;
            line.push(TokenPair::new(d, n));
        }
        lines.push(line);
    }
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn cfg(lambda: f64, p_null: f64) -> AlignerConfig {
        AlignerConfig { lambda, p_null, ..AlignerConfig::default() }
    }

    #[test]
    fn zero_tension_is_uniform() {
        let c = cfg(0.0, 0.0);
        for j in 0..4 {
            let p = distortion_prob(1, Some(j), 3, 4, &c).unwrap();
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn diagonal_is_maximal() {
        let c = cfg(4.0, 0.1);
        // i/m = 2/4 = j/n = 1/2
        let probs: Vec<f64> = (0..2).map(|j| distortion_prob(2, Some(j), 4, 2, &c).unwrap()).collect();
        assert!(probs[1] > probs[0]);
    }

    #[test]
    fn tension_ratio_is_e_squared() {
        let c = cfg(4.0, 0.0);
        let p0 = distortion_prob(0, Some(0), 2, 2, &c).unwrap();
        let p1 = distortion_prob(0, Some(1), 2, 2, &c).unwrap();
        assert!((p0 / p1 - (2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn distortion_errors() {
        let c = AlignerConfig::default();
        assert!(distortion_prob(0, Some(0), 0, 2, &c).is_err());
        assert!(distortion_prob(0, Some(0), 2, 0, &c).is_err());
        assert!(distortion_prob(2, Some(0), 2, 2, &c).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(AlignerConfig { lambda: -1.0, ..Default::default() }.validate().is_err());
        assert!(AlignerConfig { p_null: 1.0, ..Default::default() }.validate().is_err());
        assert!(AlignerConfig { em_iterations: 0, ..Default::default() }.validate().is_err());
        assert!(AlignerConfig::default().validate().is_ok());
    }

    #[test]
    fn identity_corpus_concentrates_mass() {
        let pairs: Vec<_> = ["a b c", "b c", "c a", "a"]
            .iter()
            .map(|s| (toks(s), toks(s)))
            .collect();
        let c = AlignerConfig { smoothing_alpha: 1e-9, p_null: 0.0, em_iterations: 30, ..Default::default() };
        let m = train_aligner(&pairs, &c).unwrap();
        for w in ["a", "b", "c"] {
            assert!(m.translation_prob(w, Some(w)) > 0.99, "{w}");
        }
    }

    /// Brute-force EM for the two-line corpus, written out without maps.
    fn brute_force_two_line(iters: usize, c: &AlignerConfig) -> [[f64; 2]; 3] {
        // sources a, b, NULL(2); targets x(0), y(1)
        let lines: [(&[usize], &[usize]); 2] = [(&[0, 1], &[0, 1]), (&[0], &[0])];
        let mut t = [[0.5; 2]; 3];
        for _ in 0..iters {
            let mut cnt = [[0.0; 2]; 3];
            for (f, e) in lines {
                let (m, n) = (e.len(), f.len());
                for (i, &ei) in e.iter().enumerate() {
                    let mut w: Vec<(usize, f64)> = Vec::new();
                    w.push((2, t[2][ei] * c.p_null));
                    for (j, &fj) in f.iter().enumerate() {
                        let d = distortion_prob(i, Some(j), m, n, c).unwrap();
                        w.push((fj, t[fj][ei] * d));
                    }
                    let z: f64 = w.iter().map(|x| x.1).sum();
                    for (s, v) in w {
                        cnt[s][ei] += v / z;
                    }
                }
            }
            for s in 0..3 {
                let tot: f64 = cnt[s].iter().sum::<f64>() + 2.0 * c.smoothing_alpha;
                for e in 0..2 {
                    t[s][e] = (cnt[s][e] + c.smoothing_alpha) / tot;
                }
            }
        }
        t
    }

    #[test]
    fn two_line_corpus_matches_brute_force() {
        let pairs = vec![(toks("a b"), toks("x y")), (toks("a"), toks("x"))];
        let c = AlignerConfig::default();
        let m = train_aligner(&pairs, &c).unwrap();
        let oracle = brute_force_two_line(5, &c);
        assert!(m.translation_prob("x", Some("a")) > m.translation_prob("y", Some("a")));
        for (s, src) in [(0, Some("a")), (1, Some("b")), (2, None)] {
            for (e, tgt) in [(0, "x"), (1, "y")] {
                let got = m.translation_prob(tgt, src);
                assert!((got - oracle[s][e]).abs() < 1e-12, "{src:?}->{tgt}: {got} vs {}", oracle[s][e]);
            }
        }
    }

    #[test]
    fn rows_are_distributions() {
        let pairs = vec![
            (toks("kan jo nåo"), toks("kan ju nog")),
            (toks("såhäna"), toks("sådana här")),
            (toks("jo nåo"), toks("ju nog")),
        ];
        let m = train_aligner(&pairs, &AlignerConfig::default()).unwrap();
        let v = m.target_vocab().len();
        for f in m.source_vocab() {
            assert!((m.row(f).unwrap().total_mass(v) - 1.0).abs() < 1e-6);
        }
        assert!((m.null_row().total_mass(v) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empty_input_is_error() {
        assert!(matches!(train_aligner(&[], &AlignerConfig::default()), Err(AlignError::EmptyCorpus)));
    }

    #[test]
    fn viterbi_identity() {
        let pairs = vec![(toks("a b"), toks("a b")), (toks("b a"), toks("b a")), (toks("a"), toks("a"))];
        let m = train_aligner(&pairs, &AlignerConfig { em_iterations: 10, ..Default::default() }).unwrap();
        let links = viterbi_align(&m, &toks("a b"), &toks("a b")).unwrap();
        assert_eq!(links, vec![AlignmentLink::new(0, Some(0)), AlignmentLink::new(1, Some(1))]);
    }

    #[test]
    fn one_to_many_alignment() {
        let mut pairs = vec![(toks("såhäna"), toks("sådana här"))];
        pairs.push((toks("kan såhäna"), toks("kan sådana här")));
        let m = train_aligner(&pairs, &AlignerConfig::default()).unwrap();
        let d = toks("såhäna");
        let n = toks("sådana här");
        let links = viterbi_align(&m, &d, &n).unwrap();
        assert_eq!(links, vec![AlignmentLink::new(0, Some(0)), AlignmentLink::new(1, Some(0))]);
        assert_eq!(project_token_pairs(&d, &n, &links), vec![TokenPair::new("såhäna", "sådana här")]);
    }

    #[test]
    fn unseen_target_follows_distortion() {
        let pairs = vec![(toks("a b c"), toks("a b c"))];
        let c = AlignerConfig { p_null: 0.0, ..Default::default() };
        let m = train_aligner(&pairs, &c).unwrap();
        // target position 2 of 3 is closest to source 2 of 3
        let links = viterbi_align(&m, &toks("a b c"), &toks("a b zzz")).unwrap();
        assert_eq!(links[2].source_index, Some(2));
        let links = viterbi_align(&m, &toks("q r"), &toks("zzz yyy")).unwrap();
        assert_eq!(links[0].source_index, Some(0));
        assert_eq!(links[1].source_index, Some(1));
    }

    #[test]
    fn projection_leaves_unlinked_empty() {
        let d = toks("a b");
        let n = toks("x");
        let pairs = project_token_pairs(&d, &n, &[AlignmentLink::new(0, Some(1))]);
        assert_eq!(pairs, vec![TokenPair::new("a", ""), TokenPair::new("b", "x")]);
    }

    #[test]
    fn projection_attaches_null_links() {
        let d = toks("a b");
        let n = toks("x y z w");
        let links = vec![
            AlignmentLink::new(0, None),
            AlignmentLink::new(1, Some(1)),
            AlignmentLink::new(2, None),
            AlignmentLink::new(3, Some(0)),
        ];
        let pairs = project_token_pairs(&d, &n, &links);
        assert_eq!(pairs, vec![TokenPair::new("a", "x w"), TokenPair::new("b", "y z")]);
    }

    #[test]
    fn pair_line_zips_equal_lengths() {
        let m = train_aligner(&[(toks("q"), toks("r"))], &AlignerConfig::default()).unwrap();
        let p = TokenizedPair::new(&["kan", "jo", "nåo"], &["kan", "ju", "nog"], None);
        assert_eq!(
            pair_line(&p, &m),
            vec![TokenPair::new("kan", "kan"), TokenPair::new("jo", "ju"), TokenPair::new("nåo", "nog")]
        );
        let single = TokenizedPair::new(&["a"], &["b"], None);
        assert_eq!(pair_line(&single, &m), vec![TokenPair::new("a", "b")]);
    }

    #[test]
    fn pair_line_routes_unequal_lengths_through_aligner() {
        let pairs = vec![(toks("såhäna"), toks("sådana här"))];
        let m = train_aligner(&pairs, &AlignerConfig::default()).unwrap();
        let p = TokenizedPair::new(&["såhäna"], &["sådana", "här"], None);
        assert_eq!(pair_line(&p, &m), vec![TokenPair::new("såhäna", "sådana här")]);
    }

    #[test]
    fn aligned_lines_format_round_trips() {
        let lines = vec![
            vec![TokenPair::new("kan", "kan"), TokenPair::new("såhäna", "sådana här")],
            vec![TokenPair::new("a", "")],
        ];
        assert_eq!(parse_aligned_lines(&format_aligned_lines(&lines)).unwrap(), lines);
    }

    fn arb_links() -> impl Strategy<Value = (usize, usize, Vec<Option<usize>>)> {
        (1usize..6, 1usize..7).prop_flat_map(|(n, m)| {
            (Just(n), Just(m), proptest::collection::vec(proptest::option::of(0..n), m))
        })
    }

    proptest! {
        #[test]
        fn projection_preserves_target_multiset((n, m, parents) in arb_links()) {
            let d: Vec<String> = (0..n).map(|j| format!("d{j}")).collect();
            let e: Vec<String> = (0..m).map(|i| format!("e{i}")).collect();
            let links: Vec<_> = parents.iter().enumerate().map(|(i, p)| AlignmentLink::new(i, *p)).collect();
            let pairs = project_token_pairs(&d, &e, &links);
            prop_assert_eq!(pairs.len(), n);
            let mut got: Vec<String> = pairs.iter().flat_map(|p| p.normalized_words().map(str::to_string)).collect();
            got.sort();
            let mut want = e.clone();
            want.sort();
            prop_assert_eq!(got, want);
        }

        #[test]
        fn em_without_smoothing_is_monotone(seed in 0u64..50) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let vocab = ["a", "b", "c", "d"];
            let pairs: Vec<_> = (0..6).map(|_| {
                let n = rng.gen_range(1..4);
                let m = rng.gen_range(1..4);
                let f: Vec<String> = (0..n).map(|_| vocab[rng.gen_range(0..4)].to_string()).collect();
                let e: Vec<String> = (0..m).map(|_| vocab[rng.gen_range(0..4)].to_uppercase()).collect();
                (f, e)
            }).collect();
            let c = AlignerConfig { smoothing_alpha: 0.0, em_iterations: 6, ..Default::default() };
            let (_, trace) = train_aligner_traced(&pairs, &c).unwrap();
            for w in trace.log_likelihood.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9, "{:?}", trace.log_likelihood);
            }
        }
    }
}
