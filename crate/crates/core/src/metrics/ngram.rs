use std::collections::BTreeMap;

/// n-gram counts for n = 1..=max_n of one token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramProfile<T: Ord> {
    /// `counts[n - 1]` maps each n-gram to its count.
    counts: Vec<BTreeMap<Vec<T>, usize>>,
    len: usize,
}

impl<T: Ord + Clone> NGramProfile<T> {
    pub fn new(tokens: &[T], max_n: usize) -> Self {
        let counts = (1..=max_n)
            .map(|n| {
                let mut m = BTreeMap::new();
                for w in tokens.windows(n) {
                    *m.entry(w.to_vec()).or_insert(0) += 1;
                }
                m
            })
            .collect();
        Self {
            counts,
            len: tokens.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn max_n(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self, n: usize) -> &BTreeMap<Vec<T>, usize> {
        &self.counts[n - 1]
    }

    pub fn count(&self, gram: &[T]) -> usize {
        self.counts
            .get(gram.len().wrapping_sub(1))
            .and_then(|m| m.get(gram))
            .copied()
            .unwrap_or(0)
    }

    /// Total number of n-grams of order `n`.
    pub fn total(&self, n: usize) -> usize {
        (self.len + 1).saturating_sub(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_overlapping_grams() {
        let p = NGramProfile::new(&["a", "b", "a", "b"], 3);
        assert_eq!(p.count(&["a", "b"]), 2);
        assert_eq!(p.count(&["b", "a", "b"]), 1);
        assert_eq!(p.count(&["a", "b", "a", "b"]), 0);
    }

    proptest! {
        #[test]
        fn mass_matches_length(tokens in prop::collection::vec(0u8..4, 0..30)) {
            let p = NGramProfile::new(&tokens, 4);
            for n in 1..=4 {
                let mass: usize = p.counts(n).values().sum();
                prop_assert_eq!(mass, tokens.len().saturating_sub(n - 1));
                prop_assert_eq!(mass, p.total(n));
                prop_assert!(p.counts(n).values().all(|&c| c > 0));
            }
        }
    }
}
