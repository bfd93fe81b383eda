use super::ngram::NGramProfile;
use std::collections::{BTreeMap, BTreeSet};

const CIDER_N: usize = 4;

/// Inverse document frequencies `ln(N / df)` over a reference corpus, where
/// one document is the union of one sample's references.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable<T: Ord> {
    idf: BTreeMap<Vec<T>, f64>,
    docs: usize,
    /// Weight of n-grams never seen in the corpus (`df` floored at 1).
    unseen: f64,
}

impl<T: Ord + Clone> IdfTable<T> {
    pub fn docs(&self) -> usize {
        self.docs
    }

    pub fn get(&self, gram: &[T]) -> f64 {
        self.idf.get(gram).copied().unwrap_or(self.unseen)
    }

    pub fn len(&self) -> usize {
        self.idf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idf.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<T>, &f64)> {
        self.idf.iter()
    }

    /// Every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            idf: self.idf.iter().map(|(k, v)| (k.clone(), v * factor)).collect(),
            docs: self.docs,
            unseen: self.unseen * factor,
        }
    }
}

pub fn build_idf<T: Ord + Clone>(corpus: &[Vec<Vec<T>>]) -> IdfTable<T> {
    let mut df: BTreeMap<Vec<T>, usize> = BTreeMap::new();
    for refs in corpus {
        let mut doc: BTreeSet<Vec<T>> = BTreeSet::new();
        for r in refs {
            let p = NGramProfile::new(r, CIDER_N);
            for n in 1..=CIDER_N {
                doc.extend(p.counts(n).keys().cloned());
            }
        }
        for g in doc {
            *df.entry(g).or_insert(0) += 1;
        }
    }
    let n = corpus.len().max(1) as f64;
    IdfTable {
        idf: df.into_iter().map(|(g, d)| (g, (n / d as f64).ln())).collect(),
        docs: corpus.len(),
        unseen: n.ln(),
    }
}

fn tfidf<'a, T: Ord + Clone>(counts: &'a BTreeMap<Vec<T>, usize>, idf: &IdfTable<T>) -> BTreeMap<&'a [T], f64> {
    counts.iter().map(|(g, &c)| (g.as_slice(), c as f64 * idf.get(g))).collect()
}

fn cosine<T: Ord>(a: &BTreeMap<&[T], f64>, b: &BTreeMap<&[T], f64>) -> f64 {
    let na: f64 = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().filter_map(|(k, va)| b.get(k).map(|vb| va * vb)).sum();
    dot / (na * nb)
}

/// CIDEr of one candidate against its references.
pub fn cider_sentence<T: Ord + Clone>(candidate: &[T], references: &[Vec<T>], idf: &IdfTable<T>) -> f64 {
    if references.is_empty() {
        return 0.0;
    }
    let cand = NGramProfile::new(candidate, CIDER_N);
    let refs: Vec<NGramProfile<T>> = references.iter().map(|r| NGramProfile::new(r, CIDER_N)).collect();
    let mut score = 0.0;
    for n in 1..=CIDER_N {
        let vc = tfidf(cand.counts(n), idf);
        let sim: f64 = refs.iter().map(|r| cosine(&vc, &tfidf(r.counts(n), idf))).sum();
        score += sim / refs.len() as f64;
    }
    score / CIDER_N as f64
}

/// Per-sample CIDEr (uniform n-gram weights, no length penalty, no x10).
pub fn cider_per_sample<T: Ord + Clone>(
    candidates: &[Vec<T>],
    references: &[Vec<Vec<T>>],
    idf: &IdfTable<T>,
) -> Vec<f64> {
    assert_eq!(candidates.len(), references.len(), "one reference set per candidate");
    candidates
        .iter()
        .zip(references)
        .map(|(c, r)| cider_sentence(c, r, idf))
        .collect()
}

/// Mean CIDEr over the sample set.
pub fn cider<T: Ord + Clone>(candidates: &[Vec<T>], references: &[Vec<Vec<T>>], idf: &IdfTable<T>) -> f64 {
    if candidates.is_empty() {
        return 0.0;
    }
    cider_per_sample(candidates, references, idf).iter().sum::<f64>() / candidates.len() as f64
}
