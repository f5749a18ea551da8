use std::fs;
use std::path::Path;

use super::CorpusError;

/// Ordered surface→replacement pairs for non-alphabetic spans (numbers, `€`).
///
/// Entries are matched longest-first. A surface that starts or ends with a
/// digit only matches a whole digit run, so `1932` is never rewritten as
/// `19` + `32` by accident.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RewriteTable {
    entries: Vec<(Vec<char>, String)>,
}

impl RewriteTable {
    pub fn new<S: AsRef<str>, R: AsRef<str>>(
        pairs: impl IntoIterator<Item = (S, R)>,
    ) -> Result<Self, CorpusError> {
        let mut entries = Vec::new();
        for (surface, replacement) in pairs {
            let surface = surface.as_ref().to_lowercase();
            let replacement = replacement.as_ref().to_lowercase();
            if surface.is_empty() {
                return Err(CorpusError::InvalidRewrite {
                    surface,
                    message: "empty surface".into(),
                });
            }
            if surface.chars().all(|c| c.is_alphabetic() || c.is_whitespace()) {
                return Err(CorpusError::InvalidRewrite {
                    surface,
                    message: "surface must contain a non-alphabetic character".into(),
                });
            }
            if let Some(bad) = replacement.chars().find(|&c| !(c.is_alphabetic() || c == ' ')) {
                return Err(CorpusError::InvalidRewrite {
                    surface,
                    message: format!("replacement contains {bad:?}"),
                });
            }
            entries.push((surface.chars().collect::<Vec<_>>(), replacement));
        }
        // stable sort keeps file order among equal lengths
        entries.sort_by_key(|e| std::cmp::Reverse(e.0.len()));
        Ok(RewriteTable { entries })
    }

    /// Parses the two-column `surface<TAB>replacement` format. A
    /// `surface<TAB>replacement` header row is skipped if present.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let raw = raw.trim_end_matches('\r');
            if raw.is_empty() || (idx == 0 && raw == "surface\treplacement") {
                continue;
            }
            let (surface, replacement) = raw.split_once('\t').ok_or_else(|| CorpusError::Parse {
                line: idx + 1,
                message: "expected surface<TAB>replacement".into(),
            })?;
            pairs.push((surface.to_string(), replacement.to_string()));
        }
        Self::new(pairs)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True if any entry would fire on `text`.
    pub fn rewrites(&self, text: &str) -> bool {
        let chars: Vec<char> = text.to_lowercase().chars().collect();
        (0..chars.len()).any(|p| self.match_at(&chars, p).is_some())
    }

    fn match_at(&self, chars: &[char], pos: usize) -> Option<(usize, &str)> {
        self.entries.iter().find_map(|(surface, replacement)| {
            let end = pos + surface.len();
            if end > chars.len() || chars[pos..end] != surface[..] {
                return None;
            }
            let splits_run_left = surface[0].is_ascii_digit()
                && pos > 0
                && chars[pos - 1].is_ascii_digit();
            let splits_run_right = surface[surface.len() - 1].is_ascii_digit()
                && end < chars.len()
                && chars[end].is_ascii_digit();
            (!splits_run_left && !splits_run_right).then_some((surface.len(), replacement.as_str()))
        })
    }

    fn apply(&self, chars: &[char]) -> Vec<char> {
        let mut out = Vec::with_capacity(chars.len());
        let mut pos = 0;
        while pos < chars.len() {
            match self.match_at(chars, pos) {
                Some((len, replacement)) => {
                    out.extend(replacement.chars());
                    pos += len;
                }
                None => {
                    out.push(chars[pos]);
                    pos += 1;
                }
            }
        }
        out
    }
}

/// Characters allowed in cleaned text.
pub fn is_clean_char(c: char) -> bool {
    c.is_alphabetic() || c == ' ' || c == '\''
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}')
}

fn is_strippable_punctuation(c: char) -> bool {
    matches!(
        c,
        '.' | ','
            | ';'
            | ':'
            | '!'
            | '?'
            | '"'
            | '('
            | ')'
            | '['
            | ']'
            | '{'
            | '}'
            | '-'
            | '/'
            | '\\'
            | '*'
            | '`'
            | '_'
            | '~'
            | '\u{2010}'..='\u{2015}'
            | '\u{2018}'
            | '\u{201A}'..='\u{201F}'
            | '\u{2026}'
            | '\u{00AB}'
            | '\u{00BB}'
            | '\u{2039}'
            | '\u{203A}'
            | '\u{00A1}'
            | '\u{00BF}'
            | '\u{00B7}'
            | '\u{2022}'
            | '\u{00B4}'
    )
}

/// Lowercases, applies the rewrite table, strips punctuation and collapses
/// whitespace. Fails if anything other than letters, spaces and
/// word-internal apostrophes survives.
pub fn clean_text(text: &str, table: &RewriteTable) -> Result<String, CorpusError> {
    let lowered: Vec<char> = text.to_lowercase().chars().collect();
    let chars = table.apply(&lowered);

    let mut out = String::with_capacity(chars.len());
    let mut offending: Vec<char> = Vec::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphabetic() {
            out.push(c);
        } else if c.is_whitespace() {
            out.push(' ');
        } else if is_apostrophe(c) {
            let inside_word = i > 0
                && chars[i - 1].is_alphabetic()
                && chars.get(i + 1).is_some_and(|n| n.is_alphabetic());
            if inside_word {
                out.push('\'');
            }
        } else if is_strippable_punctuation(c) {
            // dropped without a placeholder
        } else if !offending.contains(&c) {
            offending.push(c);
        }
    }
    if !offending.is_empty() {
        return Err(CorpusError::Unclean { chars: offending });
    }
    Ok(out.split_whitespace().collect::<Vec<_>>().join(" "))
}
