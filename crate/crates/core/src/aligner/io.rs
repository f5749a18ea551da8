//! Flat-file aligner serialization: a header line, then one TAB-separated
//! `source target value` row per entry.
//!
//! ```text
//! dialekt-aligner v1
//! <config>   lambda   4
//! <config>   p_null   0.08
//! ...
//! <target>   huvudintressen   1
//! <floor>   såhäna   1.2e-5
//! såhäna   sådana   4.9e-1
//! ```
//!
//! Reserved source names are wrapped in angle brackets, which cleaned tokens
//! can never contain. `<floor>` rows carry the probability shared by all
//! targets not listed for that source.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{AlignError, AlignerConfig, AlignmentModel, TranslationRow};

pub const ALIGNER_HEADER: &str = "dialekt-aligner v1";
const NULL_SOURCE: &str = "<NULL>";

pub fn write_aligner(model: &AlignmentModel) -> String {
    let mut out = String::new();
    out.push_str(ALIGNER_HEADER);
    out.push('\n');
    let c = &model.config;
    let _ = writeln!(out, "<config>\tlambda\t{:.16e}", c.lambda);
    let _ = writeln!(out, "<config>\tp_null\t{:.16e}", c.p_null);
    let _ = writeln!(out, "<config>\tsmoothing_alpha\t{:.16e}", c.smoothing_alpha);
    let _ = writeln!(out, "<config>\tem_iterations\t{}", c.em_iterations);
    for t in &model.target_vocab {
        let _ = writeln!(out, "<target>\t{t}\t1");
    }
    let mut write_row = |name: &str, row: &TranslationRow| {
        let _ = writeln!(out, "<floor>\t{name}\t{:.16e}", row.floor);
        let mut entries: Vec<_> = row.probs.iter().collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        for (t, p) in entries {
            let _ = writeln!(out, "{name}\t{t}\t{p:.16e}");
        }
    };
    write_row(NULL_SOURCE, &model.null_row);
    for f in &model.source_vocab {
        write_row(f, &model.table[f]);
    }
    out
}

pub fn save_aligner(model: &AlignmentModel, path: &Path) -> Result<(), AlignError> {
    fs::write(path, write_aligner(model)).map_err(|source| AlignError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_aligner(path: &Path) -> Result<AlignmentModel, AlignError> {
    let text = fs::read_to_string(path).map_err(|source| AlignError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_aligner(&text)
}

pub fn parse_aligner(text: &str) -> Result<AlignmentModel, AlignError> {
    let fmt_err = |line: usize, message: String| AlignError::Format { line, message };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == ALIGNER_HEADER => {}
        Some((_, h)) => return Err(fmt_err(1, format!("unsupported header {h:?}"))),
        None => return Err(fmt_err(1, "empty file".into())),
    }

    let mut config = AlignerConfig::default();
    let mut seen_keys = BTreeSet::new();
    let mut target_vocab = BTreeSet::new();
    let mut rows: HashMap<String, TranslationRow> = HashMap::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        let [source, key, value] = fields[..] else {
            return Err(fmt_err(line, format!("expected 3 fields, found {}", fields.len())));
        };
        let number = || -> Result<f64, AlignError> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| fmt_err(line, format!("bad number {value:?}")))
        };
        match source {
            "<config>" => {
                match key {
                    "lambda" => config.lambda = number()?,
                    "p_null" => config.p_null = number()?,
                    "smoothing_alpha" => config.smoothing_alpha = number()?,
                    "em_iterations" => {
                        config.em_iterations = value
                            .parse()
                            .map_err(|_| fmt_err(line, format!("bad integer {value:?}")))?
                    }
                    other => return Err(fmt_err(line, format!("unknown config key {other:?}"))),
                }
                seen_keys.insert(key.to_string());
            }
            "<target>" => {
                target_vocab.insert(key.to_string());
            }
            "<floor>" => {
                rows.entry(key.to_string())
                    .or_insert_with(|| TranslationRow { probs: HashMap::new(), floor: 0.0 })
                    .floor = number()?;
            }
            _ => {
                let p = number()?;
                rows.entry(source.to_string())
                    .or_insert_with(|| TranslationRow { probs: HashMap::new(), floor: 0.0 })
                    .probs
                    .insert(key.to_string(), p);
            }
        }
    }
    if seen_keys.len() != 4 {
        return Err(fmt_err(0, "missing config rows".into()));
    }
    config.validate()?;
    if target_vocab.is_empty() {
        return Err(fmt_err(0, "missing target vocabulary".into()));
    }
    let null_row = rows
        .remove(NULL_SOURCE)
        .ok_or_else(|| fmt_err(0, "missing NULL row".into()))?;
    let source_vocab: BTreeSet<String> = rows.keys().cloned().collect();
    Ok(AlignmentModel {
        table: rows,
        null_row,
        config,
        source_vocab,
        target_vocab,
    })
}
