//! Character-symbol encoding of word chunks.
//!
//! A chunk of words is spelled out one character per symbol with `_`
//! between words, e.g. `kan jo nåo` → `k a n _ j o _ n å o`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::aligner::TokenPair;

/// Reserved word-boundary symbol.
pub const BOUNDARY: char = '_';
pub const MAX_CHUNK: usize = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChunkError {
    #[error("word {0:?} contains the reserved boundary symbol")]
    ReservedSymbol(String),
    #[error("word {0:?} is empty or contains whitespace")]
    InvalidWord(String),
    #[error("chunk size must be in 1..={MAX_CHUNK}, got {0}")]
    ChunkSize(usize),
    #[error("stride must be >= 1")]
    Stride,
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkExample {
    pub source: Vec<char>,
    pub target: Vec<char>,
    pub k: usize,
}

/// Window layout for [`make_examples_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkConfig {
    pub k: usize,
    /// Distance between window starts; `stride == k` gives non-overlapping windows.
    pub stride: usize,
}

impl ChunkConfig {
    pub fn new(k: usize) -> Self {
        ChunkConfig { k, stride: k }
    }

    pub fn validate(&self) -> Result<(), ChunkError> {
        if !(1..=MAX_CHUNK).contains(&self.k) {
            return Err(ChunkError::ChunkSize(self.k));
        }
        if self.stride == 0 {
            return Err(ChunkError::Stride);
        }
        Ok(())
    }
}

pub fn to_char_sequence<S: AsRef<str>>(words: &[S]) -> Result<Vec<char>, ChunkError> {
    let mut out = Vec::new();
    for (i, w) in words.iter().enumerate() {
        let w = w.as_ref();
        if w.contains(BOUNDARY) {
            return Err(ChunkError::ReservedSymbol(w.to_string()));
        }
        if w.is_empty() || w.chars().any(char::is_whitespace) {
            return Err(ChunkError::InvalidWord(w.to_string()));
        }
        if i > 0 {
            out.push(BOUNDARY);
        }
        out.extend(w.chars());
    }
    Ok(out)
}

/// Splits on `_`. Leading, trailing and repeated boundaries are tolerated,
/// so any decoder output maps to a word list.
pub fn from_char_sequence(symbols: &[char]) -> Vec<String> {
    symbols
        .split(|&c| c == BOUNDARY)
        .filter(|w| !w.is_empty())
        .map(|w| w.iter().filter(|c| !c.is_whitespace()).collect::<String>())
        .filter(|w| !w.is_empty())
        .collect()
}

/// The windows of `n` items under `config`: `(start, end)` pairs.
pub fn windows(n: usize, config: ChunkConfig) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + config.k).min(n);
        out.push((start, end));
        if end == n {
            break;
        }
        start += config.stride;
    }
    out
}

pub fn make_examples(line: &[TokenPair], k: usize) -> Result<Vec<ChunkExample>, ChunkError> {
    make_examples_with(line, ChunkConfig::new(k))
}

/// One example per window. For `k == 1`, pairs whose normalized side is
/// empty are skipped since nothing could be learned from them.
pub fn make_examples_with(
    line: &[TokenPair],
    config: ChunkConfig,
) -> Result<Vec<ChunkExample>, ChunkError> {
    config.validate()?;
    let mut out = Vec::new();
    for (start, end) in windows(line.len(), config) {
        let window = &line[start..end];
        let target_words: Vec<&str> = window.iter().flat_map(|p| p.normalized_words()).collect();
        if config.k == 1 && target_words.is_empty() {
            continue;
        }
        let dialect_words: Vec<&str> = window.iter().map(|p| p.dialect.as_str()).collect();
        out.push(ChunkExample {
            source: to_char_sequence(&dialect_words)?,
            target: to_char_sequence(&target_words)?,
            k: config.k,
        });
    }
    Ok(out)
}

fn format_symbols(symbols: &[char]) -> String {
    let mut s = String::with_capacity(symbols.len() * 2);
    for (i, c) in symbols.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push(*c);
    }
    s
}

/// Parallel source/target text, one example per line, symbols space-separated.
pub fn format_examples(examples: &[ChunkExample]) -> (String, String) {
    let mut src = String::new();
    let mut tgt = String::new();
    for ex in examples {
        let _ = writeln!(src, "{}", format_symbols(&ex.source));
        let _ = writeln!(tgt, "{}", format_symbols(&ex.target));
    }
    (src, tgt)
}

pub fn parse_examples(source: &str, target: &str, k: usize) -> Result<Vec<ChunkExample>, ChunkError> {
    let parse_line = |line_no: usize, l: &str| -> Result<Vec<char>, ChunkError> {
        l.split(' ')
            .filter(|s| !s.is_empty())
            .map(|s| {
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(ChunkError::Format {
                        line: line_no,
                        message: format!("symbol {s:?} is not a single character"),
                    }),
                }
            })
            .collect()
    };
    let src_lines: Vec<&str> = source.lines().collect();
    let tgt_lines: Vec<&str> = target.lines().collect();
    if src_lines.len() != tgt_lines.len() {
        return Err(ChunkError::Format {
            line: src_lines.len().min(tgt_lines.len()) + 1,
            message: format!(
                "source has {} lines but target has {}",
                src_lines.len(),
                tgt_lines.len()
            ),
        });
    }
    src_lines
        .iter()
        .zip(&tgt_lines)
        .enumerate()
        .map(|(i, (s, t))| {
            Ok(ChunkExample {
                source: parse_line(i + 1, s)?,
                target: parse_line(i + 1, t)?,
                k,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chars(s: &str) -> Vec<char> {
        s.split(' ').map(|c| c.chars().next().unwrap()).collect()
    }

    #[test]
    fn spells_single_word() {
        assert_eq!(to_char_sequence(&["huuvuintresse"]).unwrap(), chars("h u u v u i n t r e s s e"));
        let ex = make_examples(&[TokenPair::new("huuvuintresse", "huvudintressen")], 1).unwrap();
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].source, chars("h u u v u i n t r e s s e"));
        assert_eq!(ex[0].target, chars("h u v u d i n t r e s s e n"));
    }

    #[test]
    fn spells_three_word_chunk() {
        assert_eq!(to_char_sequence(&["kan", "jo", "nåo"]).unwrap(), chars("k a n _ j o _ n å o"));
        let line = [TokenPair::new("kan", "kan"), TokenPair::new("jo", "ju"), TokenPair::new("nåo", "nog")];
        let ex = make_examples(&line, 3).unwrap();
        assert_eq!(ex.len(), 1);
        let (src, tgt) = format_examples(&ex);
        assert_eq!(src, "k a n _ j o _ n å o\n");
        assert_eq!(tgt, "k a n _ j u _ n o g\n");
    }

    #[test]
    fn multi_word_target() {
        let ex = make_examples(&[TokenPair::new("såhäna", "sådana här")], 1).unwrap();
        assert_eq!(ex[0].source, chars("s å h ä n a"));
        assert_eq!(ex[0].target, chars("s å d a n a _ h ä r"));
    }

    #[test]
    fn empty_and_reserved() {
        assert!(to_char_sequence::<&str>(&[]).unwrap().is_empty());
        assert_eq!(to_char_sequence(&["a_b"]), Err(ChunkError::ReservedSymbol("a_b".into())));
        assert!(to_char_sequence(&[""]).is_err());
    }

    #[test]
    fn repair_mode() {
        assert_eq!(from_char_sequence(&chars("_ a _ _ b _")), vec!["a", "b"]);
        assert_eq!(from_char_sequence(&chars("h u v u d i n t r e s s e n")), vec!["huvudintressen"]);
        assert!(from_char_sequence(&[]).is_empty());
    }

    #[test]
    fn empty_targets_skipped_only_for_k1() {
        let line = [TokenPair::new("a", ""), TokenPair::new("b", "x")];
        assert_eq!(make_examples(&line, 1).unwrap().len(), 1);
        let ex = make_examples(&line, 2).unwrap();
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].source, chars("a _ b"));
        assert_eq!(ex[0].target, chars("x"));
    }

    #[test]
    fn chunk_size_bounds() {
        let line = [TokenPair::new("a", "a")];
        assert_eq!(make_examples(&line, 0), Err(ChunkError::ChunkSize(0)));
        assert_eq!(make_examples(&line, 6), Err(ChunkError::ChunkSize(6)));
    }

    #[test]
    fn overlapping_stride() {
        let w = windows(5, ChunkConfig { k: 3, stride: 1 });
        assert_eq!(w, vec![(0, 3), (1, 4), (2, 5)]);
        assert_eq!(windows(5, ChunkConfig::new(2)), vec![(0, 2), (2, 4), (4, 5)]);
        assert!(windows(0, ChunkConfig::new(2)).is_empty());
    }

    #[test]
    fn example_text_round_trips() {
        let line = [TokenPair::new("kan", "kan"), TokenPair::new("jo", "ju"), TokenPair::new("nåo", "nog")];
        let ex = make_examples(&line, 2).unwrap();
        let (s, t) = format_examples(&ex);
        assert_eq!(parse_examples(&s, &t, 2).unwrap(), ex);
        assert!(parse_examples("a b\n", "", 1).is_err());
    }

    fn word() -> impl Strategy<Value = String> {
        "[a-zåäö]{1,8}"
    }

    proptest! {
        #[test]
        fn codec_round_trip(words in proptest::collection::vec(word(), 0..8)) {
            let seq = to_char_sequence(&words).unwrap();
            prop_assert!(seq.first() != Some(&BOUNDARY) && seq.last() != Some(&BOUNDARY));
            prop_assert!(!seq.windows(2).any(|w| w[0] == BOUNDARY && w[1] == BOUNDARY));
            prop_assert_eq!(from_char_sequence(&seq), words);
        }

        #[test]
        fn windows_cover_line(
            words in proptest::collection::vec((word(), word()), 1..15),
            k in 1usize..=5,
        ) {
            let line: Vec<TokenPair> = words.iter().map(|(d, n)| TokenPair::new(d, n)).collect();
            let ex = make_examples(&line, k).unwrap();
            prop_assert_eq!(ex.len(), line.len().div_ceil(k));
            let covered: Vec<String> = ex.iter().flat_map(|e| from_char_sequence(&e.source)).collect();
            let dialect: Vec<String> = line.iter().map(|p| p.dialect.clone()).collect();
            prop_assert_eq!(covered, dialect);
            for e in &ex {
                let n = from_char_sequence(&e.source).len();
                prop_assert!((1..=k).contains(&n));
            }
        }
    }
}
