//! Evaluation metrics: BLEU, CIDEr and diversity-graph statistics.
//!
//! All n-gram maps are ordered (`BTreeMap`) so that floating-point sums are
//! accumulated in a fixed order and scores are bit-reproducible.

mod bleu;
mod cider;
mod diversity;
mod ngram;

pub use bleu::{bleu, bleu_upto, sentence_bleu, BleuMode};
pub use cider::{build_idf, cider, cider_per_sample, cider_sentence, IdfTable};
pub use diversity::{diversity_graph, DiversityGraph, DiversityStats};
pub use ngram::NGramProfile;

use serde::{Deserialize, Serialize};

/// One line of a metric report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub metric: String,
    pub value: f64,
    pub samples: usize,
}
