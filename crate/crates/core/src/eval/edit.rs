use std::ops::{Add, AddAssign};

use super::EvalError;

/// Word-level edit operation counts from one minimal-cost alignment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct EditCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub correct: usize,
}

impl EditCounts {
    pub fn new(substitutions: usize, deletions: usize, insertions: usize, correct: usize) -> Self {
        EditCounts { substitutions, deletions, insertions, correct }
    }

    pub fn reference_len(&self) -> usize {
        self.substitutions + self.deletions + self.correct
    }

    pub fn hypothesis_len(&self) -> usize {
        self.substitutions + self.insertions + self.correct
    }

    /// Total edit cost, i.e. the word-level Levenshtein distance.
    pub fn cost(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

impl Add for EditCounts {
    type Output = EditCounts;

    fn add(self, o: EditCounts) -> EditCounts {
        EditCounts {
            substitutions: self.substitutions + o.substitutions,
            deletions: self.deletions + o.deletions,
            insertions: self.insertions + o.insertions,
            correct: self.correct + o.correct,
        }
    }
}

impl AddAssign for EditCounts {
    fn add_assign(&mut self, o: EditCounts) {
        *self = *self + o;
    }
}

impl std::iter::Sum for EditCounts {
    fn sum<I: Iterator<Item = EditCounts>>(iter: I) -> Self {
        iter.fold(EditCounts::default(), Add::add)
    }
}

/// Aligns `hypothesis` against `reference` with unit edit costs and reads
/// the operation counts off the backtrace. On ties the backtrace prefers
/// match, then substitution, then deletion, then insertion.
pub fn word_edit_counts<R: AsRef<str>, H: AsRef<str>>(reference: &[R], hypothesis: &[H]) -> EditCounts {
    let (n, m) = (reference.len(), hypothesis.len());
    let width = m + 1;
    let mut dist = vec![0usize; (n + 1) * width];
    for i in 0..=n {
        dist[i * width] = i;
    }
    for j in 0..=m {
        dist[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let same = reference[i - 1].as_ref() == hypothesis[j - 1].as_ref();
            let diag = dist[(i - 1) * width + j - 1] + usize::from(!same);
            let del = dist[(i - 1) * width + j] + 1;
            let ins = dist[i * width + j - 1] + 1;
            dist[i * width + j] = diag.min(del).min(ins);
        }
    }

    let mut counts = EditCounts::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dist[i * width + j];
        if i > 0 && j > 0 {
            let diag = dist[(i - 1) * width + j - 1];
            let same = reference[i - 1].as_ref() == hypothesis[j - 1].as_ref();
            if same && here == diag {
                counts.correct += 1;
                i -= 1;
                j -= 1;
                continue;
            }
            if !same && here == diag + 1 {
                counts.substitutions += 1;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && here == dist[(i - 1) * width + j] + 1 {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

/// `(S + D + I) / (S + D + C)`, as a fraction (multiply by 100 for display).
pub fn wer(counts: &EditCounts) -> Result<f64, EvalError> {
    let denom = counts.reference_len();
    if denom == 0 {
        return Err(EvalError::EmptyReference);
    }
    Ok(counts.cost() as f64 / denom as f64)
}

/// `C / (S + D + C)`.
pub fn accuracy(counts: &EditCounts) -> Result<f64, EvalError> {
    let denom = counts.reference_len();
    if denom == 0 {
        return Err(EvalError::EmptyReference);
    }
    Ok(counts.correct as f64 / denom as f64)
}
