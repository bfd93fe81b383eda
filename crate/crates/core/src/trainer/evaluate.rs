use crate::corpus::{strip_control, Scene, Vocabulary, BOS, EOS};
use crate::metrics::{bleu, build_idf, cider, diversity_graph, BleuMode, DiversityGraph};
use crate::policy::{beam_search, greedy, Hypothesis, PolicyDecoder, PolicyNet};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Greedy,
    Beam(usize),
}

impl DecodeMode {
    /// Width 1 is greedy.
    pub fn from_width(width: usize) -> Self {
        if width <= 1 {
            Self::Greedy
        } else {
            Self::Beam(width)
        }
    }
}

/// Decodes one scene. The result ends in `<eos>` or has `t_max` tokens.
pub fn decode(policy: &PolicyNet, features: &[Vec<f64>], mode: DecodeMode, t_max: usize) -> Result<Hypothesis> {
    let dec = PolicyDecoder::new(policy, features)?;
    Ok(match mode {
        DecodeMode::Greedy => greedy(&dec, t_max, BOS, EOS),
        DecodeMode::Beam(0) => return Err(Error::InvalidArgument("beam width must be positive".into())),
        DecodeMode::Beam(w) => beam_search(&dec, w, t_max, BOS, EOS),
    })
}

/// Split-level scores. BLEU is corpus level; CIDEr document frequencies
/// come from the references of the scored split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub cider: f64,
    pub distinct_1: f64,
    pub distinct_2: f64,
    pub graph_nodes: usize,
    pub graph_edges: usize,
    pub samples: usize,
}

impl EvalReport {
    pub fn values(&self) -> [(&'static str, f64); 7] {
        [
            ("bleu1", self.bleu1),
            ("bleu2", self.bleu2),
            ("bleu3", self.bleu3),
            ("bleu4", self.bleu4),
            ("cider", self.cider),
            ("distinct_1", self.distinct_1),
            ("distinct_2", self.distinct_2),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    /// Decoded token sequences, one per scene, control tokens included.
    pub candidates: Vec<Vec<usize>>,
    pub graph: DiversityGraph,
}

/// Scores candidate token sequences against the scenes' references.
pub fn score_candidates(candidates: &[Vec<usize>], scenes: &[Scene], vocab: &Vocabulary) -> Result<(EvalReport, DiversityGraph)> {
    if candidates.len() != scenes.len() {
        return Err(Error::dim("score_candidates", scenes.len(), candidates.len()));
    }
    let bodies: Vec<Vec<usize>> = candidates.iter().map(|c| strip_control(c)).collect();
    let refs: Vec<Vec<Vec<usize>>> = scenes.iter().map(Scene::reference_bodies).collect();
    let b: Vec<f64> = (1..=4).map(|n| bleu(&bodies, &refs, n, BleuMode::Corpus)).collect();
    let idf = build_idf(&refs);
    let c = cider(&bodies, &refs, &idf);
    let words: Vec<Vec<String>> = bodies.iter().map(|t| vocab.decode(t)).collect::<Result<_>>()?;
    let graph = diversity_graph(&words);
    let stats = graph.stats();
    let report = EvalReport {
        bleu1: b[0],
        bleu2: b[1],
        bleu3: b[2],
        bleu4: b[3],
        cider: c,
        distinct_1: stats.distinct_1,
        distinct_2: stats.distinct_2,
        graph_nodes: stats.nodes,
        graph_edges: stats.edges,
        samples: scenes.len(),
    };
    Ok((report, graph))
}

/// Decodes every scene and scores the split.
pub fn evaluate(
    policy: &PolicyNet,
    scenes: &[Scene],
    vocab: &Vocabulary,
    mode: DecodeMode,
    t_max: usize,
) -> Result<Evaluation> {
    let candidates: Vec<Vec<usize>> = scenes
        .iter()
        .map(|s| decode(policy, &s.features, mode, t_max).map(|h| h.tokens))
        .collect::<Result<_>>()?;
    let (report, graph) = score_candidates(&candidates, scenes, vocab)?;
    Ok(Evaluation {
        report,
        candidates,
        graph,
    })
}
