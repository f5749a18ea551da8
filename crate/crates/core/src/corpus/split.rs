use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, Region, TokenizedPair};

#[derive(Debug, Clone, PartialEq)]
pub struct SplitCorpus {
    pub train: Vec<TokenizedPair>,
    pub test: Vec<TokenizedPair>,
    pub seed: u64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitOptions {
    pub ratio: f64,
    pub seed: u64,
    /// Split each region separately so both sides keep the region mix.
    pub stratify_by_region: bool,
}

/// Number of lines that go to the training side: `ceil(ratio * n)`.
fn train_size(ratio: f64, n: usize) -> usize {
    // guard against 0.7 * 10 = 7.000000000000001
    let exact = ratio * n as f64;
    let rounded = exact.round();
    let size = if (exact - rounded).abs() < 1e-9 { rounded } else { exact.ceil() };
    (size as usize).min(n)
}

/// Seeded line-level shuffle; the first `ceil(ratio * N)` lines train.
pub fn split_train_test(
    pairs: &[TokenizedPair],
    ratio: f64,
    seed: u64,
) -> Result<SplitCorpus, CorpusError> {
    split_train_test_with(
        pairs,
        SplitOptions {
            ratio,
            seed,
            stratify_by_region: false,
        },
    )
}

pub fn split_train_test_with(
    pairs: &[TokenizedPair],
    opts: SplitOptions,
) -> Result<SplitCorpus, CorpusError> {
    if !(opts.ratio > 0.0 && opts.ratio < 1.0) {
        return Err(CorpusError::InvalidRatio(opts.ratio));
    }
    if pairs.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let groups: Vec<Vec<usize>> = if opts.stratify_by_region {
        let mut keys: Vec<Option<Region>> = pairs.iter().map(|p| p.region).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|k| (0..pairs.len()).filter(|&i| pairs[i].region == k).collect())
            .collect()
    } else {
        vec![(0..pairs.len()).collect()]
    };

    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut idx in groups {
        idx.shuffle(&mut rng);
        let cut = train_size(opts.ratio, idx.len());
        train.extend(idx[..cut].iter().map(|&i| pairs[i].clone()));
        test.extend(idx[cut..].iter().map(|&i| pairs[i].clone()));
    }
    Ok(SplitCorpus {
        train,
        test,
        seed: opts.seed,
        ratio: opts.ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(n: usize) -> Vec<TokenizedPair> {
        (0..n)
            .map(|i| {
                let w = format!("w{i}");
                TokenizedPair::new(&[&w], &[&w], None)
            })
            .collect()
    }

    #[test]
    fn seventy_thirty() {
        let s = split_train_test(&lines(10), 0.7, 3435).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (7, 3));
    }

    #[test]
    fn half_of_two() {
        let s = split_train_test(&lines(2), 0.5, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (1, 1));
    }

    #[test]
    fn ceiling_applies() {
        let s = split_train_test(&lines(11), 0.7, 1).unwrap();
        assert_eq!(s.train.len(), 8);
    }

    #[test]
    fn deterministic_partition() {
        let data = lines(50);
        let a = split_train_test(&data, 0.7, 3435).unwrap();
        let b = split_train_test(&data, 0.7, 3435).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<_> = a.train.iter().chain(&a.test).cloned().collect();
        all.sort_by(|x, y| x.dialect_tokens.cmp(&y.dialect_tokens));
        let mut orig = data.clone();
        orig.sort_by(|x, y| x.dialect_tokens.cmp(&y.dialect_tokens));
        assert_eq!(all, orig);
    }

    #[test]
    fn errors() {
        assert!(matches!(split_train_test(&[], 0.7, 1), Err(CorpusError::EmptyCorpus)));
        assert!(matches!(split_train_test(&lines(3), 1.0, 1), Err(CorpusError::InvalidRatio(_))));
        assert!(matches!(split_train_test(&lines(3), 0.0, 1), Err(CorpusError::InvalidRatio(_))));
    }

    #[test]
    fn stratified_split_keeps_each_region_on_both_sides() {
        let mut data = Vec::new();
        for (r, n) in [(Region::Nyland, 10), (Region::Birkaland, 4)] {
            for i in 0..n {
                let w = format!("{r}{i}");
                data.push(TokenizedPair::new(&[&w], &[&w], Some(r)));
            }
        }
        let s = split_train_test_with(
            &data,
            SplitOptions { ratio: 0.7, seed: 9, stratify_by_region: true },
        )
        .unwrap();
        let count = |v: &[TokenizedPair], r| v.iter().filter(|p| p.region == Some(r)).count();
        assert_eq!(count(&s.train, Region::Nyland), 7);
        assert_eq!(count(&s.train, Region::Birkaland), 3);
        assert_eq!(count(&s.test, Region::Birkaland), 1);
    }
}
