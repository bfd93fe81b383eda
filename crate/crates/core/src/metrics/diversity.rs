use crate::corpus::RESERVED;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet};

const SENTENCE_BREAK: &str = ".";

/// Token co-occurrence graph of a paragraph set.
///
/// Nodes are unique tokens; an undirected edge joins tokens that appear next
/// to each other inside a sentence. Sentences are split on `.`; reserved
/// tokens are dropped and break adjacency.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiversityGraph {
    /// Token -> occurrence count.
    pub nodes: BTreeMap<String, usize>,
    /// Unordered pair (lexicographically smaller first) -> co-occurrence count.
    pub edges: BTreeMap<(String, String), usize>,
    total_tokens: usize,
    bigrams: BTreeMap<(String, String), usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityStats {
    pub nodes: usize,
    pub edges: usize,
    /// degree -> number of nodes with that degree
    pub degree_histogram: BTreeMap<usize, usize>,
    pub distinct_1: f64,
    pub distinct_2: f64,
    pub tokens: usize,
    pub bigrams: usize,
}

fn is_break(tok: &str) -> bool {
    tok == SENTENCE_BREAK || RESERVED.contains(&tok)
}

pub fn diversity_graph<S: AsRef<str>>(paragraphs: &[Vec<S>]) -> DiversityGraph {
    let mut g = DiversityGraph::default();
    for para in paragraphs {
        let mut prev: Option<&str> = None;
        for tok in para.iter().map(AsRef::as_ref) {
            if is_break(tok) {
                prev = None;
                continue;
            }
            *g.nodes.entry(tok.to_string()).or_insert(0) += 1;
            g.total_tokens += 1;
            if let Some(p) = prev {
                *g.bigrams.entry((p.to_string(), tok.to_string())).or_insert(0) += 1;
                let key = if p <= tok {
                    (p.to_string(), tok.to_string())
                } else {
                    (tok.to_string(), p.to_string())
                };
                *g.edges.entry(key).or_insert(0) += 1;
            }
            prev = Some(tok);
        }
    }
    g
}

impl DiversityGraph {
    pub fn degree(&self, token: &str) -> usize {
        self.edges.keys().filter(|(a, b)| a == token || b == token).count()
    }

    fn degrees(&self) -> BTreeMap<&str, usize> {
        let mut d: BTreeMap<&str, usize> = self.nodes.keys().map(|k| (k.as_str(), 0)).collect();
        for (a, b) in self.edges.keys() {
            *d.get_mut(a.as_str()).unwrap() += 1;
            if a != b {
                *d.get_mut(b.as_str()).unwrap() += 1;
            }
        }
        d
    }

    pub fn stats(&self) -> DiversityStats {
        let mut degree_histogram = BTreeMap::new();
        for d in self.degrees().values() {
            *degree_histogram.entry(*d).or_insert(0) += 1;
        }
        let total_bigrams: usize = self.bigrams.values().sum();
        let ratio = |u: usize, t: usize| if t == 0 { 0.0 } else { u as f64 / t as f64 };
        DiversityStats {
            nodes: self.nodes.len(),
            edges: self.edges.len(),
            degree_histogram,
            distinct_1: ratio(self.nodes.len(), self.total_tokens),
            distinct_2: ratio(self.bigrams.len(), total_bigrams),
            tokens: self.total_tokens,
            bigrams: total_bigrams,
        }
    }

    /// Node-link JSON (`nodes`, `links`, `stats`) as consumed by force-layout
    /// graph viewers.
    pub fn to_json(&self) -> serde_json::Value {
        let degrees = self.degrees();
        let nodes: Vec<_> = self
            .nodes
            .iter()
            .map(|(t, c)| json!({"id": t, "count": c, "degree": degrees[t.as_str()]}))
            .collect();
        let links: Vec<_> = self
            .edges
            .iter()
            .map(|((a, b), c)| json!({"source": a, "target": b, "count": c}))
            .collect();
        json!({"nodes": nodes, "links": links, "stats": self.stats()})
    }

    pub fn unique_tokens(&self) -> BTreeSet<&str> {
        self.nodes.keys().map(String::as_str).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn aba_graph() {
        let g = diversity_graph(&[vec!["a", "b", "a"]]);
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[&("a".to_string(), "b".to_string())], 2);
        let s = g.stats();
        assert_eq!(s.degree_histogram, BTreeMap::from([(1, 2)]));
        assert_eq!(s.distinct_2, 1.0); // "a b" and "b a" are different bigrams
    }

    #[test]
    fn empty_set() {
        let g = diversity_graph::<&str>(&[]);
        assert!(g.nodes.is_empty() && g.edges.is_empty());
        assert_eq!(g.stats().distinct_1, 0.0);
    }

    #[test]
    fn sentences_and_control_tokens_break_edges() {
        let g = diversity_graph(&[vec!["a", "b", ".", "c", "<eos>"], vec!["<bos>", "c", "<unk>", "a"]]);
        assert_eq!(g.unique_tokens(), BTreeSet::from(["a", "b", "c"]));
        assert_eq!(g.edges.len(), 1);
        let json = g.to_json();
        assert_eq!(json["links"].as_array().unwrap().len(), 1);
        assert_eq!(json["stats"]["nodes"], 3);
    }

    fn para() -> impl Strategy<Value = Vec<Vec<String>>> {
        prop::collection::vec(
            prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", ".", "<eos>"]).prop_map(String::from), 0..15),
            0..5,
        )
    }

    proptest! {
        #[test]
        fn matches_brute_force_scan(paras in para()) {
            let g = diversity_graph(&paras);
            let s = g.stats();
            // brute force: split into sentences, count directly
            let mut tokens = Vec::new();
            let mut pairs = Vec::new();
            for p in &paras {
                for sentence in p.split(|t| t == "." || t == "<eos>") {
                    tokens.extend(sentence.iter().cloned());
                    for w in sentence.windows(2) {
                        pairs.push((w[0].clone(), w[1].clone()));
                    }
                }
            }
            let unique: BTreeSet<_> = tokens.iter().collect();
            let unique_pairs: BTreeSet<_> = pairs.iter().collect();
            let undirected: BTreeSet<_> = pairs.iter().map(|(a, b)| if a <= b { (a, b) } else { (b, a) }).collect();
            prop_assert_eq!(s.nodes, unique.len());
            prop_assert_eq!(s.edges, undirected.len());
            let d2 = if pairs.is_empty() { 0.0 } else { unique_pairs.len() as f64 / pairs.len() as f64 };
            prop_assert!((s.distinct_2 - d2).abs() < 1e-15);
            for (a, b) in g.edges.keys() {
                prop_assert!(g.nodes.contains_key(a) && g.nodes.contains_key(b));
            }
        }
    }
}
