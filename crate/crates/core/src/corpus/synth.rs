//! Synthetic parallel corpora: standard words perturbed into "dialect" forms
//! by a list of rewrite rules. Used as a learnable stand-in for real data.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, TokenizedPair};

/// A standard→dialect rewrite.
#[derive(Debug, Clone, PartialEq)]
pub enum RewriteRule {
    /// Replace every occurrence of `from` with `to`.
    Substitute { from: String, to: String },
    /// Drop the last letter if it is one of `letters` (words of length 1 are kept).
    DropFinal { letters: String },
    /// Double the first vowel from `vowels` found in the word.
    DoubleVowel { vowels: String },
    /// Apply `rule` with the given probability.
    Sometimes { rule: Box<RewriteRule>, probability: f64 },
    /// With the given probability per line, insert the multi-word standard
    /// phrase, realised as a single dialect token. This is the only rule that
    /// makes token counts differ between the two sides.
    JoinPhrase {
        standard: Vec<String>,
        dialect: String,
        probability: f64,
    },
}

impl RewriteRule {
    pub fn substitute(from: &str, to: &str) -> Self {
        RewriteRule::Substitute { from: from.into(), to: to.into() }
    }

    pub fn drop_final(letters: &str) -> Self {
        RewriteRule::DropFinal { letters: letters.into() }
    }

    pub fn double_vowel(vowels: &str) -> Self {
        RewriteRule::DoubleVowel { vowels: vowels.into() }
    }

    /// Five deterministic rules loosely modelled on Finland Swedish
    /// pronunciation spelling.
    pub fn default_set() -> Vec<RewriteRule> {
        vec![
            RewriteRule::substitute("o", "å"),
            RewriteRule::drop_final("g"),
            RewriteRule::substitute("ä", "ee"),
            RewriteRule::double_vowel("u"),
            RewriteRule::drop_final("t"),
        ]
    }

    fn apply_word(&self, word: &str, rng: &mut ChaCha8Rng) -> String {
        match self {
            RewriteRule::Substitute { from, to } if !from.is_empty() => word.replace(from, to),
            RewriteRule::Substitute { .. } => word.to_string(),
            RewriteRule::DropFinal { letters } => {
                let mut chars: Vec<char> = word.chars().collect();
                if chars.len() > 1 && chars.last().is_some_and(|c| letters.contains(*c)) {
                    chars.pop();
                }
                chars.into_iter().collect()
            }
            RewriteRule::DoubleVowel { vowels } => {
                let mut out = String::with_capacity(word.len() + 2);
                let mut done = false;
                for c in word.chars() {
                    out.push(c);
                    if !done && vowels.contains(c) {
                        out.push(c);
                        done = true;
                    }
                }
                out
            }
            RewriteRule::Sometimes { rule, probability } => {
                if rng.gen::<f64>() < *probability {
                    rule.apply_word(word, rng)
                } else {
                    word.to_string()
                }
            }
            RewriteRule::JoinPhrase { .. } => word.to_string(),
        }
    }
}

/// Generates `n_lines` pairs of 2..=8 lexicon words each, deterministic per seed.
pub fn generate_synthetic_corpus(
    rules: &[RewriteRule],
    lexicon: &[String],
    n_lines: usize,
    seed: u64,
) -> Result<Vec<TokenizedPair>, CorpusError> {
    if lexicon.is_empty() {
        return Err(CorpusError::EmptyLexicon);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_lines);
    for _ in 0..n_lines {
        let n_words = rng.gen_range(2..=8);
        let mut dialect = Vec::with_capacity(n_words + 1);
        let mut normalized = Vec::with_capacity(n_words + 2);
        for _ in 0..n_words {
            let std_word = &lexicon[rng.gen_range(0..lexicon.len())];
            let mut dia = std_word.clone();
            for rule in rules {
                dia = rule.apply_word(&dia, &mut rng);
            }
            dialect.push(dia);
            normalized.push(vec![std_word.clone()]);
        }
        for rule in rules {
            if let RewriteRule::JoinPhrase { standard, dialect: joined, probability } = rule {
                if rng.gen::<f64>() < *probability {
                    let at = rng.gen_range(0..=dialect.len());
                    dialect.insert(at, joined.clone());
                    normalized.insert(at, standard.clone());
                }
            }
        }
        out.push(TokenizedPair {
            dialect_tokens: dialect,
            normalized_tokens: normalized.into_iter().flatten().collect(),
            region: None,
        });
    }
    Ok(out)
}

/// A small lexicon of common standard Swedish words.
pub fn default_lexicon() -> Vec<String> {
    const WORDS: &str = "och att det som en på är av för med till den har de inte om ett \
        han men var jag vi så från kan nog ju du hon eller skulle sig efter också när \
        vid under bara där mot sedan år dag hus barn skola lärare gård båt sjö skog \
        fisk mjölk bröd kaffe socker hund katt ko häst väg stad by kyrka tävlingar \
        lågstadiet sommararbetare huvudintressen arbete morgon kväll vinter sommar \
        höst vår mor far bror syster gammal ung stor liten god dålig snabb långsam \
        varm kall mycket lite alltid aldrig ofta kanske hem borta uppe nere ute inne \
        fiske jakt potatis vatten regn snö sol måne stjärna natt ljus mörk grön blå \
        röd gul vit svart tung lätt hög låg lång kort ny tom full rolig tråkig \
        vacker ful glad ledsen trött hungrig rund spring gå kom sitt ligg stå sjung \
        läs skriv räkna tänk tro veta förstå minnas glömma hjälpa göra säga fråga";
    WORDS.split_whitespace().map(str::to_string).collect()
}
