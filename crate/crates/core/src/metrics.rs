//! Levenshtein-based error rates and relative error reduction.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ErrorCounts {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub reference_length: usize,
}

impl ErrorCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    /// `(S + I + D) / N`; `None` for an empty reference.
    pub fn rate(&self) -> Option<f64> {
        (self.reference_length > 0).then(|| self.errors() as f64 / self.reference_length as f64)
    }

    fn add(&mut self, other: &ErrorCounts) {
        self.substitutions += other.substitutions;
        self.insertions += other.insertions;
        self.deletions += other.deletions;
        self.reference_length += other.reference_length;
    }
}

/// Minimal-cost alignment with unit costs. When several alignments reach the
/// minimum, the backtrace takes the diagonal (match or substitution) first.
pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> ErrorCounts {
    let (n, m) = (reference.len(), hypothesis.len());
    let width = m + 1;
    let mut cost = vec![0usize; (n + 1) * width];
    for i in 0..=n {
        cost[i * width] = i;
    }
    for j in 0..=m {
        cost[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = cost[(i - 1) * width + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let del = cost[(i - 1) * width + j] + 1;
            let ins = cost[i * width + j - 1] + 1;
            cost[i * width + j] = diag.min(del).min(ins);
        }
    }
    let mut counts = ErrorCounts {
        reference_length: n,
        ..Default::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[i * width + j];
        if i > 0 && j > 0 {
            let mismatch = reference[i - 1] != hypothesis[j - 1];
            if cost[(i - 1) * width + j - 1] + usize::from(mismatch) == here {
                counts.substitutions += usize::from(mismatch);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && cost[(i - 1) * width + j] + 1 == here {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    /// Words are the label runs between space symbols.
    Word,
    Token,
}

/// Splits a label sequence into words on `space`, dropping empty words.
pub fn words(labels: &[usize], space: usize) -> Vec<&[usize]> {
    labels
        .split(|&l| l == space)
        .filter(|w| !w.is_empty())
        .collect()
}

/// Corpus-pooled error counts.
pub fn pooled_counts(
    refs: &[Vec<usize>],
    hyps: &[Vec<usize>],
    level: Level,
    space: usize,
) -> Result<ErrorCounts> {
    if refs.len() != hyps.len() {
        return Err(Error::Usage(format!(
            "{} references but {} hypotheses",
            refs.len(),
            hyps.len()
        )));
    }
    let mut total = ErrorCounts::default();
    for (r, h) in refs.iter().zip(hyps) {
        let counts = match level {
            Level::Token => edit_distance(r, h),
            Level::Word => edit_distance(&words(r, space), &words(h, space)),
        };
        total.add(&counts);
    }
    Ok(total)
}

/// Pooled error rate: total edits over total reference length.
pub fn wer(refs: &[Vec<usize>], hyps: &[Vec<usize>], level: Level, space: usize) -> Result<f64> {
    pooled_counts(refs, hyps, level, space)?
        .rate()
        .ok_or_else(|| Error::Usage("error rate undefined for an empty reference corpus".into()))
}

/// Relative error rate reduction in percent.
pub fn rerr(baseline: f64, new: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::Usage(format!(
            "relative reduction needs a positive baseline, got {baseline}"
        )));
    }
    Ok((baseline - new) / baseline * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    /// Exhaustive search over all alignments; independent of the DP.
    fn brute_cost(a: &[u8], b: &[u8]) -> usize {
        match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((x, ra)), Some((y, rb))) => {
                let sub = brute_cost(ra, rb) + usize::from(x != y);
                let del = brute_cost(ra, b) + 1;
                let ins = brute_cost(a, rb) + 1;
                sub.min(del).min(ins)
            }
        }
    }

    #[test]
    fn single_deletion() {
        let c = edit_distance(&toks("the cat sat"), &toks("the cat"));
        assert_eq!((c.substitutions, c.insertions, c.deletions), (0, 0, 1));
        assert!((c.rate().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_is_zero() {
        let c = edit_distance(&toks("a b c"), &toks("a b c"));
        assert_eq!(c.errors(), 0);
    }

    #[test]
    fn prefers_substitution_over_ins_del_pair() {
        let c = edit_distance(&[1, 2, 3], &[1, 9, 3]);
        assert_eq!((c.substitutions, c.insertions, c.deletions), (1, 0, 0));
    }

    #[test]
    fn empty_sequences() {
        assert_eq!(edit_distance::<u8>(&[], &[]).errors(), 0);
        assert_eq!(edit_distance(&[1, 2], &[]).deletions, 2);
        assert_eq!(edit_distance(&[], &[1, 2]).insertions, 2);
    }

    #[test]
    fn matches_exhaustive_alignment_on_short_sequences() {
        let mut rng = crate::numcore::Rng::new(12);
        for _ in 0..500 {
            let a: Vec<u8> = (0..rng.below(6)).map(|_| rng.below(3) as u8).collect();
            let b: Vec<u8> = (0..rng.below(6)).map(|_| rng.below(3) as u8).collect();
            assert_eq!(edit_distance(&a, &b).errors(), brute_cost(&a, &b), "{a:?} {b:?}");
        }
    }

    #[test]
    fn perfect_and_empty_hypotheses() {
        let refs = vec![vec![1, 0, 2], vec![3]];
        assert_eq!(wer(&refs, &refs, Level::Token, 0).unwrap(), 0.0);
        let empty = vec![vec![], vec![]];
        assert_eq!(wer(&refs, &empty, Level::Token, 0).unwrap(), 1.0);
        assert_eq!(wer(&refs, &empty, Level::Word, 0).unwrap(), 1.0);
    }

    #[test]
    fn pooled_differs_from_per_utterance_average() {
        // one long utterance with one error, one short utterance fully wrong
        let refs = vec![vec![1, 1, 1, 1, 1, 1, 1, 1, 1, 1], vec![2]];
        let hyps = vec![vec![1, 1, 1, 1, 1, 1, 1, 1, 1, 3], vec![3]];
        let pooled = wer(&refs, &hyps, Level::Token, 0).unwrap();
        let averaged = (0.1 + 1.0) / 2.0;
        assert!((pooled - 2.0 / 11.0).abs() < 1e-15);
        assert!((pooled - averaged).abs() > 0.3);
    }

    #[test]
    fn word_level_splits_on_space() {
        // space = 0: "12 3" vs "12 4"
        let refs = vec![vec![1, 2, 0, 3]];
        let hyps = vec![vec![1, 2, 0, 4]];
        assert_eq!(wer(&refs, &hyps, Level::Word, 0).unwrap(), 0.5);
        assert_eq!(words(&[0, 0, 1, 0], 0), vec![&[1][..]]);
    }

    #[test]
    fn empty_reference_corpus_is_an_error() {
        assert!(wer(&[vec![]], &[vec![1]], Level::Token, 0).is_err());
        assert!(wer(&[], &[], Level::Token, 0).is_err());
    }

    #[test]
    fn relative_reduction() {
        let round2 = |x: f64| (x * 100.0).round() / 100.0;
        assert_eq!(round2(rerr(8.66, 6.12).unwrap()), 29.33);
        assert_eq!(round2(rerr(7.64, 6.64).unwrap()), 13.09);
        assert_eq!(rerr(3.5, 3.5).unwrap(), 0.0);
        assert!(rerr(0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_with_insertions_and_deletions_swapped(
            a in proptest::collection::vec(0u8..4, 0..8),
            b in proptest::collection::vec(0u8..4, 0..8),
        ) {
            let ab = edit_distance(&a, &b);
            let ba = edit_distance(&b, &a);
            prop_assert_eq!(ab.errors(), ba.errors());
            // the optimal alignment of a→b reversed is an alignment of b→a
            prop_assert_eq!(ab.insertions + ab.substitutions + ab.deletions, ba.deletions + ba.substitutions + ba.insertions);
            prop_assert_eq!(ab.insertions as isize - ab.deletions as isize, ba.deletions as isize - ba.insertions as isize);
        }

        #[test]
        fn triangle_inequality(
            a in proptest::collection::vec(0u8..3, 0..7),
            b in proptest::collection::vec(0u8..3, 0..7),
            c in proptest::collection::vec(0u8..3, 0..7),
        ) {
            let ac = edit_distance(&a, &c).errors();
            let ab = edit_distance(&a, &b).errors();
            let bc = edit_distance(&b, &c).errors();
            prop_assert!(ac <= ab + bc);
        }

        #[test]
        fn zero_iff_identical(
            a in proptest::collection::vec(0u8..3, 1..7),
            b in proptest::collection::vec(0u8..3, 1..7),
        ) {
            let zero = edit_distance(&a, &b).errors() == 0;
            prop_assert_eq!(zero, a == b);
        }
    }
}
