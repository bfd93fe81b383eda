use std::cmp::Ordering;

/// Anything that yields next-token log-probabilities from a recurrent state.
pub trait StepModel {
    type State: Clone;

    fn vocab_size(&self) -> usize;

    fn initial(&self) -> Self::State;

    /// Consumes `prev` in `state`; returns `ln p(. | prefix)` and the new state.
    fn next(&self, state: &Self::State, prev: usize) -> (Vec<f64>, Self::State);
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    pub log_prob: f64,
}

/// Higher score first, then lexicographically smaller tokens.
fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.log_prob.total_cmp(&a.log_prob).then_with(|| a.tokens.cmp(&b.tokens))
}

/// Argmax at each step, lowest index on ties. Stops after `eos` or `t_max` tokens.
pub fn greedy<M: StepModel>(model: &M, t_max: usize, bos: usize, eos: usize) -> Hypothesis {
    let mut state = model.initial();
    let mut prev = bos;
    let mut out = Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
    };
    for _ in 0..t_max {
        let (lp, next) = model.next(&state, prev);
        let mut best = 0;
        for (i, &v) in lp.iter().enumerate() {
            if v > lp[best] {
                best = i;
            }
        }
        out.tokens.push(best);
        out.log_prob += lp[best];
        state = next;
        prev = best;
        if best == eos {
            break;
        }
    }
    out
}

/// Width-`width` beam search over sequences of at most `t_max` tokens.
///
/// All live beams are expanded each step and the `width` best expansions
/// survive; those ending in `eos` move to the finished pool. Beams still
/// open at `t_max` count as finished. Returns the best finished hypothesis.
pub fn beam_search<M: StepModel>(model: &M, width: usize, t_max: usize, bos: usize, eos: usize) -> Hypothesis {
    assert!(width >= 1, "beam width must be positive");
    struct Beam<S> {
        hyp: Hypothesis,
        state: S,
        last: usize,
    }
    let mut live = vec![Beam {
        hyp: Hypothesis {
            tokens: Vec::new(),
            log_prob: 0.0,
        },
        state: model.initial(),
        last: bos,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();

    for _ in 0..t_max {
        if live.is_empty() {
            break;
        }
        let mut cands: Vec<(Hypothesis, usize)> = Vec::new();
        let mut states = Vec::with_capacity(live.len());
        for (bi, beam) in live.iter().enumerate() {
            let (lp, next) = model.next(&beam.state, beam.last);
            states.push(next);
            for (y, &v) in lp.iter().enumerate() {
                let mut tokens = beam.hyp.tokens.clone();
                tokens.push(y);
                cands.push((
                    Hypothesis {
                        tokens,
                        log_prob: beam.hyp.log_prob + v,
                    },
                    bi,
                ));
            }
        }
        cands.sort_by(|a, b| rank(&a.0, &b.0));
        cands.truncate(width);
        live = Vec::new();
        for (hyp, bi) in cands {
            let last = *hyp.tokens.last().expect("non-empty");
            if last == eos {
                finished.push(hyp);
            } else {
                live.push(Beam {
                    hyp,
                    state: states[bi].clone(),
                    last,
                });
            }
        }
    }
    finished.extend(live.into_iter().map(|b| b.hyp));
    finished.sort_by(rank);
    finished.into_iter().next().unwrap_or(Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{BOS, EOS};
    use crate::policy::{PolicyDecoder, PolicyNet};
    use crate::rng;
    use rand::Rng as _;
    use std::collections::BTreeMap;

    /// Next-token distributions looked up by prefix.
    struct Table {
        vocab: usize,
        rows: BTreeMap<Vec<usize>, Vec<f64>>,
    }

    impl StepModel for Table {
        type State = Vec<usize>;

        fn vocab_size(&self) -> usize {
            self.vocab
        }

        fn initial(&self) -> Vec<usize> {
            Vec::new()
        }

        fn next(&self, state: &Vec<usize>, prev: usize) -> (Vec<f64>, Vec<usize>) {
            let mut prefix = state.clone();
            if !(prefix.is_empty() && prev == 99) {
                prefix.push(prev);
            }
            let probs = self.rows.get(&prefix).cloned().unwrap_or_else(|| vec![1.0 / self.vocab as f64; self.vocab]);
            (probs.iter().map(|p| p.ln()).collect(), prefix)
        }
    }

    // Tokens: 0 = a, 1 = b, 2 = eos. Greedy takes "a" (0.6) and then ends
    // with 0.6 * 0.5; "b eos" is 0.4 * 0.9 = 0.36 and only a wider beam sees it.
    fn two_step() -> Table {
        let mut rows = BTreeMap::new();
        rows.insert(vec![], vec![0.6, 0.4, 0.0]);
        rows.insert(vec![0], vec![0.25, 0.25, 0.5]);
        rows.insert(vec![1], vec![0.05, 0.05, 0.9]);
        for p in [vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]] {
            rows.insert(p, vec![0.0, 0.0, 1.0]);
        }
        Table { vocab: 3, rows }
    }

    #[test]
    fn two_step_table() {
        let t = two_step();
        let g = greedy(&t, 3, 99, 2);
        assert_eq!(g.tokens, vec![0, 2]);
        assert!((g.log_prob - 0.3f64.ln()).abs() < 1e-12);
        let b1 = beam_search(&t, 1, 3, 99, 2);
        assert_eq!(b1, g);
        let b2 = beam_search(&t, 2, 3, 99, 2);
        assert_eq!(b2.tokens, vec![1, 2]);
        assert!((b2.log_prob - 0.36f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ties_prefer_lexicographic() {
        let mut rows = BTreeMap::new();
        rows.insert(vec![], vec![0.5, 0.0, 0.5]);
        let t = Table { vocab: 3, rows };
        // "0 ..." and "2" tie only if the continuation is certain.
        let mut t2 = t;
        t2.rows.insert(vec![0], vec![0.0, 0.0, 1.0]);
        let g = greedy(&t2, 3, 99, 2);
        assert_eq!(g.tokens, vec![0, 2]);
        let b = beam_search(&t2, 3, 3, 99, 2);
        assert_eq!(b.tokens, vec![0, 2]);
    }

    #[test]
    fn open_beams_finish_at_t_max() {
        let mut rows = BTreeMap::new();
        rows.insert(vec![], vec![0.9, 0.05, 0.05]);
        rows.insert(vec![0], vec![0.9, 0.05, 0.05]);
        let t = Table { vocab: 3, rows };
        let b = beam_search(&t, 2, 2, 99, 2);
        assert_eq!(b.tokens, vec![0, 0]);
        assert_eq!(greedy(&t, 2, 99, 2).tokens, vec![0, 0]);
    }

    /// Every distinct sequence of length <= t_max, truncated at the first eos.
    fn enumerate(vocab: usize, t_max: usize, eos: usize) -> Vec<Vec<usize>> {
        let mut out = std::collections::BTreeSet::new();
        let total = vocab.pow(t_max as u32);
        for mut code in 0..total {
            let mut s = Vec::new();
            for _ in 0..t_max {
                let y = code % vocab;
                code /= vocab;
                s.push(y);
                if y == eos {
                    break;
                }
            }
            out.insert(s);
        }
        out.into_iter().collect()
    }

    fn small_policy(seed: u64) -> (PolicyNet, Vec<Vec<f64>>) {
        // D = 3 with eos at index 2.
        assert_eq!(EOS, 2);
        let net = PolicyNet::new(3, 4, 3, &mut rng::stream(seed, 1));
        let mut r = rng::stream(seed, 2);
        let f = (0..2).map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        (net, f)
    }

    #[test]
    fn exhaustive_beam_matches_enumeration() {
        for seed in 0..5 {
            let (net, f) = small_policy(seed);
            let seqs = enumerate(3, 3, EOS);
            let mut best: Option<Hypothesis> = None;
            for s in seqs {
                let lp = net.sequence_log_prob(&f, &s).unwrap();
                let h = Hypothesis { tokens: s, log_prob: lp };
                if best.as_ref().is_none_or(|b| rank(&h, b) == Ordering::Less) {
                    best = Some(h);
                }
            }
            let best = best.unwrap();
            let dec = PolicyDecoder::new(&net, &f).unwrap();
            let got = beam_search(&dec, 27, 3, BOS, EOS);
            assert_eq!(got.tokens, best.tokens, "seed {seed}");
            assert!((got.log_prob - best.log_prob).abs() < 1e-9);
        }
    }

    #[test]
    fn width_one_is_greedy() {
        for seed in 0..5 {
            let net = PolicyNet::new(12, 6, 5, &mut rng::stream(seed, 1));
            let mut r = rng::stream(seed, 3);
            let f: Vec<Vec<f64>> = (0..3).map(|_| (0..5).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
            let dec = PolicyDecoder::new(&net, &f).unwrap();
            let g = greedy(&dec, 10, BOS, EOS);
            let b = beam_search(&dec, 1, 10, BOS, EOS);
            assert_eq!(g.tokens, b.tokens);
            let lp = net.sequence_log_prob(&f, &g.tokens).unwrap();
            assert!((lp - g.log_prob).abs() < 1e-9);
        }
    }
}
