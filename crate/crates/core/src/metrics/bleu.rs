use super::ngram::NGramProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BleuMode {
    /// Clipped counts and lengths pooled over all samples.
    Corpus,
    /// Per-sample score with add-one smoothing for n >= 2, then averaged.
    SentenceSmoothed,
}

/// Sufficient statistics for one candidate.
struct Stats {
    matches: Vec<usize>,
    totals: Vec<usize>,
    cand_len: usize,
    ref_len: usize,
}

fn stats<T: Ord + Clone>(candidate: &[T], references: &[Vec<T>], max_n: usize) -> Stats {
    let cand = NGramProfile::new(candidate, max_n);
    let refs: Vec<NGramProfile<T>> = references.iter().map(|r| NGramProfile::new(r, max_n)).collect();
    let mut matches = vec![0; max_n];
    let mut totals = vec![0; max_n];
    for n in 1..=max_n {
        totals[n - 1] = cand.total(n);
        matches[n - 1] = cand
            .counts(n)
            .iter()
            .map(|(gram, &c)| {
                let max_ref = refs.iter().map(|r| r.count(gram)).max().unwrap_or(0);
                c.min(max_ref)
            })
            .sum();
    }
    // closest reference length, ties toward the shorter one
    let c = candidate.len();
    let ref_len = references
        .iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0);
    Stats {
        matches,
        totals,
        cand_len: c,
        ref_len,
    }
}

fn combine(matches: &[usize], totals: &[usize], c: usize, r: usize, smooth: bool) -> f64 {
    if c == 0 {
        return 0.0;
    }
    let n = matches.len();
    let mut log_sum = 0.0;
    for (k, (&m, &t)) in matches.iter().zip(totals).enumerate() {
        let (m, t) = if smooth && k >= 1 {
            (m as f64 + 1.0, t as f64 + 1.0)
        } else {
            (m as f64, t as f64)
        };
        if m == 0.0 || t == 0.0 {
            return 0.0;
        }
        log_sum += (m / t).ln();
    }
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    bp * (log_sum / n as f64).exp()
}

/// Sentence-level BLEU-`max_n` with add-one smoothing for n >= 2.
pub fn sentence_bleu<T: Ord + Clone>(candidate: &[T], references: &[Vec<T>], max_n: usize) -> f64 {
    let s = stats(candidate, references, max_n);
    combine(&s.matches, &s.totals, s.cand_len, s.ref_len, true)
}

/// BLEU-`max_n` over a sample set. `references[i]` belongs to `candidates[i]`.
pub fn bleu<T: Ord + Clone>(
    candidates: &[Vec<T>],
    references: &[Vec<Vec<T>>],
    max_n: usize,
    mode: BleuMode,
) -> f64 {
    assert_eq!(candidates.len(), references.len(), "one reference set per candidate");
    if candidates.is_empty() || max_n == 0 {
        return 0.0;
    }
    match mode {
        BleuMode::SentenceSmoothed => {
            let sum: f64 = candidates
                .iter()
                .zip(references)
                .map(|(c, r)| sentence_bleu(c, r, max_n))
                .sum();
            sum / candidates.len() as f64
        }
        BleuMode::Corpus => {
            let mut matches = vec![0; max_n];
            let mut totals = vec![0; max_n];
            let (mut c, mut r) = (0, 0);
            for (cand, refs) in candidates.iter().zip(references) {
                let s = stats(cand, refs, max_n);
                for k in 0..max_n {
                    matches[k] += s.matches[k];
                    totals[k] += s.totals[k];
                }
                c += s.cand_len;
                r += s.ref_len;
            }
            combine(&matches, &totals, c, r, false)
        }
    }
}

/// Corpus BLEU-1 through BLEU-`max_n`.
pub fn bleu_upto<T: Ord + Clone>(candidates: &[Vec<T>], references: &[Vec<Vec<T>>], max_n: usize) -> Vec<f64> {
    (1..=max_n)
        .map(|n| bleu(candidates, references, n, BleuMode::Corpus))
        .collect()
}
