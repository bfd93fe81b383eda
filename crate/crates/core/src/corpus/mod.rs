//! Vocabulary, tokenization, dataset files and the synthetic scene grammar.

mod dataset;
mod synth;
mod vocab;

pub use dataset::{
    load_dataset, read_features, read_manifest, save_dataset, write_features, Manifest,
    ManifestScene, RawScene, MANIFEST_VERSION,
};
pub use synth::{synth_generate, synth_split, GrammarSpec, SynthCorpus, SynthScene};
pub use vocab::{tokenize, Vocabulary, BOS, EOS, PAD, RESERVED, UNK};

/// One sample: region features plus reference token sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub id: String,
    /// `m` region vectors, each of dimension `E`.
    pub features: Vec<Vec<f64>>,
    /// Token-index sequences, each terminated by `<eos>`.
    pub references: Vec<Vec<usize>>,
}

impl Scene {
    pub fn regions(&self) -> usize {
        self.features.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// References without the trailing `<eos>`, for metric scoring.
    pub fn reference_bodies(&self) -> Vec<Vec<usize>> {
        self.references.iter().map(|r| strip_control(r)).collect()
    }
}

/// Drops `<pad>`/`<bos>` and everything from the first `<eos>` on.
pub fn strip_control(tokens: &[usize]) -> Vec<usize> {
    tokens
        .iter()
        .copied()
        .take_while(|&t| t != EOS)
        .filter(|&t| t != PAD && t != BOS)
        .collect()
}
