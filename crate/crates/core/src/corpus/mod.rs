//! Corpus ingestion, cleaning, tokenization and train/test splitting.
//!
//! The on-disk corpus is a tab-separated UTF-8 file with the header
//! `region<TAB>dialect<TAB>normalized`. An optional fourth `line_id` column
//! may be present; otherwise the 1-based data row number is used.

mod clean;
mod split;
mod synth;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

pub use clean::{clean_text, is_clean_char, RewriteTable};
pub use split::{split_train_test, split_train_test_with, SplitCorpus, SplitOptions};
pub use synth::{default_lexicon, generate_synthetic_corpus, RewriteRule};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown region label {label:?}")]
    UnknownRegion { line: usize, label: String },
    #[error("duplicate line_id {0:?}")]
    DuplicateLineId(String),
    #[error("residual non-alphabetic characters after rewriting: {}", format_chars(.chars))]
    Unclean { chars: Vec<char> },
    #[error("invalid rewrite table entry {surface:?}: {message}")]
    InvalidRewrite { surface: String, message: String },
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    InvalidRatio(f64),
    #[error("cannot split an empty corpus")]
    EmptyCorpus,
    #[error("lexicon is empty")]
    EmptyLexicon,
}

fn format_chars(chars: &[char]) -> String {
    chars
        .iter()
        .map(|c| format!("{c:?} (U+{:04X})", *c as u32))
        .collect::<Vec<_>>()
        .join(", ")
}

/// The six Swedish-speaking regions of Finland covered by the recordings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    Nyland,
    Aland,
    Aboland,
    Osterbotten,
    Birkaland,
    Kymmenedalen,
}

impl Region {
    pub const ALL: [Region; 6] = [
        Region::Nyland,
        Region::Aland,
        Region::Aboland,
        Region::Osterbotten,
        Region::Birkaland,
        Region::Kymmenedalen,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Region::Nyland => "Nyland",
            Region::Aland => "Åland",
            Region::Aboland => "Åboland",
            Region::Osterbotten => "Österbotten",
            Region::Birkaland => "Birkaland",
            Region::Kymmenedalen => "Kymmenedalen",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownRegion(pub String);

impl FromStr for Region {
    type Err = UnknownRegion;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_lowercase();
        Region::ALL
            .into_iter()
            .find(|r| r.label().to_lowercase() == wanted)
            .ok_or_else(|| UnknownRegion(s.to_string()))
    }
}

/// One transcript line as read from the corpus file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceRecord {
    pub region: Region,
    pub dialect: String,
    pub normalized: String,
    pub line_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub records: Vec<UtteranceRecord>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Line counts per region, in [`Region::ALL`] order.
    pub fn lines_per_region(&self) -> Vec<(Region, usize)> {
        Region::ALL
            .into_iter()
            .map(|r| (r, self.records.iter().filter(|x| x.region == r).count()))
            .collect()
    }
}

/// A cleaned and tokenized line pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedPair {
    pub dialect_tokens: Vec<String>,
    pub normalized_tokens: Vec<String>,
    /// Absent for corpora that carry no region information (e.g. synthetic data).
    pub region: Option<Region>,
}

impl TokenizedPair {
    pub fn new(dialect: &[&str], normalized: &[&str], region: Option<Region>) -> Self {
        TokenizedPair {
            dialect_tokens: dialect.iter().map(|s| s.to_string()).collect(),
            normalized_tokens: normalized.iter().map(|s| s.to_string()).collect(),
            region,
        }
    }
}

pub const CORPUS_HEADER: &str = "region\tdialect\tnormalized";

pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&text)
}

pub fn parse_corpus(text: &str) -> Result<Corpus, CorpusError> {
    let mut lines = text.lines().enumerate();
    let has_id_column = match lines.next() {
        None => return Ok(Corpus::default()),
        Some((_, header)) => {
            let header = header.trim_start_matches('\u{feff}').trim_end_matches('\r');
            if header == CORPUS_HEADER {
                false
            } else if header == format!("{CORPUS_HEADER}\tline_id") {
                true
            } else {
                return Err(CorpusError::Parse {
                    line: 1,
                    message: format!("expected header {CORPUS_HEADER:?}, found {header:?}"),
                });
            }
        }
    };
    let expected_fields = if has_id_column { 4 } else { 3 };

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut data_row = 0usize;
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() {
            continue;
        }
        data_row += 1;
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != expected_fields {
            return Err(CorpusError::Parse {
                line: line_no,
                message: format!(
                    "expected {expected_fields} tab-separated fields, found {}",
                    fields.len()
                ),
            });
        }
        let region = fields[0]
            .parse::<Region>()
            .map_err(|UnknownRegion(label)| CorpusError::UnknownRegion {
                line: line_no,
                label,
            })?;
        let line_id = if has_id_column {
            fields[3].trim().to_string()
        } else {
            data_row.to_string()
        };
        if !seen.insert(line_id.clone()) {
            return Err(CorpusError::DuplicateLineId(line_id));
        }
        records.push(UtteranceRecord {
            region,
            dialect: fields[1].to_string(),
            normalized: fields[2].to_string(),
            line_id,
        });
    }
    Ok(Corpus { records })
}

/// Splits cleaned text on runs of whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Outcome of cleaning a whole corpus.
#[derive(Debug, Clone, Default)]
pub struct PreprocessReport {
    pub pairs: Vec<TokenizedPair>,
    /// `(line_id, side, before, after)` for every field the rewrite table changed.
    pub rewritten: Vec<(String, &'static str, String, String)>,
    /// `(line_id, reason)` for every row that failed cleaning or came out empty.
    pub rejected: Vec<(String, String)>,
}

/// Cleans and tokenizes every record. Rows that fail cleaning are reported,
/// never silently kept.
pub fn preprocess_corpus(corpus: &Corpus, table: &RewriteTable) -> PreprocessReport {
    let mut report = PreprocessReport::default();
    for rec in &corpus.records {
        let mut sides = Vec::with_capacity(2);
        let mut failure = None;
        for (side, text) in [("dialect", &rec.dialect), ("normalized", &rec.normalized)] {
            match clean_text(text, table) {
                Ok(cleaned) => {
                    if table.rewrites(text) {
                        report.rewritten.push((
                            rec.line_id.clone(),
                            side,
                            text.clone(),
                            cleaned.clone(),
                        ));
                    }
                    if cleaned.is_empty() {
                        failure = Some(format!("{side} side is empty after cleaning"));
                        break;
                    }
                    sides.push(cleaned);
                }
                Err(e) => {
                    failure = Some(format!("{side}: {e}"));
                    break;
                }
            }
        }
        match failure {
            Some(reason) => report.rejected.push((rec.line_id.clone(), reason)),
            None => report.pairs.push(TokenizedPair {
                dialect_tokens: tokenize(&sides[0]),
                normalized_tokens: tokenize(&sides[1]),
                region: Some(rec.region),
            }),
        }
    }
    report
}

/// Writes tokenized pairs as `dialect tokens<TAB>normalized tokens<TAB>region`.
pub fn format_tokenized_pairs(pairs: &[TokenizedPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&p.dialect_tokens.join(" "));
        out.push('\t');
        out.push_str(&p.normalized_tokens.join(" "));
        if let Some(r) = p.region {
            out.push('\t');
            out.push_str(r.label());
        }
        out.push('\n');
    }
    out
}

/// Reads the tokenized-pairs format. The region column is optional.
pub fn parse_tokenized_pairs(text: &str) -> Result<Vec<TokenizedPair>, CorpusError> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(CorpusError::Parse {
                line,
                message: format!("expected 2 or 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let region = match fields.get(2) {
            Some(label) => Some(label.parse::<Region>().map_err(|UnknownRegion(label)| {
                CorpusError::UnknownRegion { line, label }
            })?),
            None => None,
        };
        pairs.push(TokenizedPair {
            dialect_tokens: tokenize(fields[0]),
            normalized_tokens: tokenize(fields[1]),
            region,
        });
    }
    Ok(pairs)
}
