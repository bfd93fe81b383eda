//! Synthetic scene grammar.
//!
//! Each scene has a latent set of distinct objects, each a `(noun, attribute)`
//! pair. Region `j < k` carries the signature of the `j`-th object (objects
//! sorted by noun then attribute); the remaining regions carry a background
//! signature. A signature is one-hot at the noun slot plus one-hot at the
//! attribute slot (or one-hot at the background slot), plus Gaussian noise.
//! References are template realizations mentioning exactly the latent nouns.

use super::dataset::RawScene;
use super::{tokenize, Scene, Vocabulary};
use crate::rng::{self, streams, Rng};
use crate::{Error, Result};
use rand::seq::{index::sample, IndexedRandom};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

const PLACEHOLDERS: [&str; 5] = ["{noun}", "{attr}", "{noun2}", "{attr2}", "{verb}"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrammarSpec {
    pub seed: u64,
    pub nouns: Vec<String>,
    pub attributes: Vec<String>,
    pub verbs: Vec<String>,
    /// Sentences with `{noun}`, `{attr}`, `{verb}` slots for the first object
    /// and optional `{noun2}`, `{attr2}` slots for a second one.
    pub templates: Vec<String>,
    pub objects_per_scene: usize,
    /// Number of feature regions `m`.
    pub regions: usize,
    /// Feature dimension `E`.
    pub feature_dim: usize,
    /// Standard deviation of the additive feature noise.
    pub noise: f64,
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub references_per_scene: usize,
    /// Longest allowed reference, `<eos>` included.
    pub max_tokens: usize,
    /// Vocabulary frequency cutoff.
    pub min_count: usize,
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

impl Default for GrammarSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            nouns: strings(&[
                "dog", "cat", "ball", "tree", "car", "man", "woman", "bird", "table", "chair",
                "boat", "kite",
            ]),
            attributes: strings(&["red", "blue", "green", "small", "large", "white"]),
            verbs: strings(&["sitting", "standing", "lying", "resting", "waiting"]),
            templates: strings(&[
                "there is a {attr} {noun} .",
                "the {noun} is {attr} .",
                "a {attr} {noun} is {verb} .",
                "a {attr} {noun} is {verb} near a {attr2} {noun2} .",
                "the {noun} and the {noun2} are close together .",
                "we can see a {noun} next to a {attr2} {noun2} .",
            ]),
            objects_per_scene: 3,
            regions: 8,
            feature_dim: 64,
            noise: 0.1,
            min_sentences: 2,
            max_sentences: 4,
            references_per_scene: 3,
            max_tokens: 80,
            min_count: 5,
        }
    }
}

/// Line (1-based) of the first occurrence of `needle` in `text`.
fn line_of(text: &str, needle: &str) -> Option<usize> {
    text.lines().position(|l| l.contains(needle)).map(|i| i + 1)
}

impl GrammarSpec {
    /// Parses and validates a TOML grammar. Errors carry line context.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: GrammarSpec =
            toml::from_str(text).map_err(|e| Error::Grammar(e.to_string().trim_end().to_string()))?;
        spec.validate().map_err(|e| match e {
            Error::Grammar(msg) => {
                let at = spec
                    .templates
                    .iter()
                    .find(|t| msg.contains(t.as_str()))
                    .and_then(|t| line_of(text, t));
                match at {
                    Some(line) => Error::Grammar(format!("line {line}: {msg}")),
                    None => Error::Grammar(msg),
                }
            }
            other => other,
        })?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("grammar serializes")
    }

    fn arity(template: &str) -> usize {
        if template.contains("{noun2}") || template.contains("{attr2}") {
            2
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = |m: String| Err(Error::Grammar(m));
        if self.nouns.is_empty() || self.attributes.is_empty() || self.verbs.is_empty() {
            return g("nouns, attributes and verbs must all be non-empty".into());
        }
        for list in [&self.nouns, &self.attributes, &self.verbs] {
            for w in list {
                if tokenize(w) != [w.clone()] {
                    return g(format!("word {w:?} is not a single lowercase token"));
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        if !self.nouns.iter().all(|n| seen.insert(n)) {
            return g("nouns must be distinct".into());
        }
        if self.objects_per_scene == 0 || self.objects_per_scene > self.nouns.len() {
            return g(format!(
                "objects_per_scene must be in 1..={}, got {}",
                self.nouns.len(),
                self.objects_per_scene
            ));
        }
        if self.regions < self.objects_per_scene {
            return g(format!(
                "regions ({}) must be at least objects_per_scene ({})",
                self.regions, self.objects_per_scene
            ));
        }
        let needed = self.nouns.len() + self.attributes.len() + 1;
        if self.feature_dim < needed {
            return g(format!("feature_dim must be at least {needed}, got {}", self.feature_dim));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return g(format!("noise must be a finite non-negative number, got {}", self.noise));
        }
        if self.min_sentences == 0 || self.min_sentences > self.max_sentences {
            return g("need 1 <= min_sentences <= max_sentences".into());
        }
        if self.references_per_scene == 0 {
            return g("references_per_scene must be at least 1".into());
        }
        if self.min_count == 0 {
            return g("min_count must be at least 1".into());
        }
        if self.templates.is_empty() {
            return g("at least one template is required".into());
        }
        for t in &self.templates {
            let mut rest = t.as_str();
            while let Some(start) = rest.find('{') {
                let end = rest[start..]
                    .find('}')
                    .ok_or_else(|| Error::Grammar(format!("unclosed placeholder in template {t:?}")))?;
                let ph = &rest[start..start + end + 1];
                if !PLACEHOLDERS.contains(&ph) {
                    return g(format!("unknown placeholder {ph} in template {t:?}"));
                }
                rest = &rest[start + end + 1..];
            }
            if !t.contains("{noun}") {
                return g(format!("template {t:?} must mention {{noun}}"));
            }
            if t.contains("{attr2}") && !t.contains("{noun2}") {
                return g(format!("template {t:?} uses {{attr2}} without {{noun2}}"));
            }
        }
        let singles = self.templates.iter().filter(|t| Self::arity(t) == 1).count();
        let pairs = self.templates.len() - singles;
        if singles == 0 {
            return g("at least one single-object template is required".into());
        }
        if self.objects_per_scene > self.min_sentences && (pairs == 0 || self.objects_per_scene > 2 * self.min_sentences) {
            return g(format!(
                "{} objects cannot be covered by {} sentences with these templates",
                self.objects_per_scene, self.min_sentences
            ));
        }
        Ok(())
    }
}

/// A generated scene with its latent objects `(noun index, attribute index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub raw: RawScene,
    pub objects: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub vocab: Vocabulary,
    pub train: Vec<SynthScene>,
    pub val: Vec<SynthScene>,
}

impl SynthCorpus {
    pub fn train_scenes(&self) -> Vec<Scene> {
        self.train.iter().map(|s| s.raw.encode(&self.vocab)).collect()
    }

    pub fn val_scenes(&self) -> Vec<Scene> {
        self.val.iter().map(|s| s.raw.encode(&self.vocab)).collect()
    }
}

struct Generator<'a> {
    spec: &'a GrammarSpec,
    rng: Rng,
    noise: Option<Normal<f64>>,
    single: Vec<&'a str>,
    pair: Vec<&'a str>,
}

impl<'a> Generator<'a> {
    fn new(spec: &'a GrammarSpec, stream: u64) -> Self {
        let (pair, single) = spec
            .templates
            .iter()
            .map(String::as_str)
            .partition(|t| GrammarSpec::arity(t) == 2);
        Self {
            spec,
            rng: rng::stream(spec.seed, stream),
            noise: (spec.noise > 0.0).then(|| Normal::new(0.0, spec.noise).unwrap()),
            single,
            pair,
        }
    }

    fn scene(&mut self, id: String) -> Result<SynthScene> {
        let spec = self.spec;
        let k = spec.objects_per_scene;
        let mut objects: Vec<(usize, usize)> = sample(&mut self.rng, spec.nouns.len(), k)
            .into_iter()
            .map(|n| (n, self.rng.random_range(0..spec.attributes.len())))
            .collect();
        objects.sort_unstable();

        let n_nouns = spec.nouns.len();
        let background = n_nouns + spec.attributes.len();
        let mut features = Vec::with_capacity(spec.regions);
        for j in 0..spec.regions {
            let mut v = vec![0.0; spec.feature_dim];
            match objects.get(j) {
                Some(&(noun, attr)) => {
                    v[noun] = 1.0;
                    v[n_nouns + attr] = 1.0;
                }
                None => v[background] = 1.0,
            }
            if let Some(noise) = &self.noise {
                for x in v.iter_mut() {
                    *x += noise.sample(&mut self.rng);
                }
            }
            features.push(v);
        }

        let references = (0..spec.references_per_scene)
            .map(|_| self.paragraph(&objects))
            .collect::<Result<Vec<_>>>()?;
        Ok(SynthScene {
            raw: RawScene {
                id,
                features,
                references,
            },
            objects,
        })
    }

    fn paragraph(&mut self, objects: &[(usize, usize)]) -> Result<String> {
        let spec = self.spec;
        let n_sent = self.rng.random_range(spec.min_sentences..=spec.max_sentences);
        let mut uncovered: Vec<usize> = (0..objects.len()).collect();
        let mut sentences = Vec::with_capacity(n_sent);
        for s in 0..n_sent {
            let remaining = n_sent - s;
            let must_pair = uncovered.len() > remaining;
            let can_pair = objects.len() >= 2 && !self.pair.is_empty();
            let use_pair = must_pair || (can_pair && self.rng.random_bool(0.5));
            let first = self.take_object(&mut uncovered, objects.len(), None);
            let template = if use_pair && can_pair {
                *self.pair.choose(&mut self.rng).unwrap()
            } else {
                *self.single.choose(&mut self.rng).unwrap()
            };
            let second = (GrammarSpec::arity(template) == 2)
                .then(|| self.take_object(&mut uncovered, objects.len(), Some(first)));
            let verb = spec.verbs.choose(&mut self.rng).unwrap();
            let (n1, a1) = objects[first];
            let mut text = template
                .replace("{noun}", &spec.nouns[n1])
                .replace("{attr}", &spec.attributes[a1])
                .replace("{verb}", verb);
            if let Some(second) = second {
                let (n2, a2) = objects[second];
                text = text
                    .replace("{noun2}", &spec.nouns[n2])
                    .replace("{attr2}", &spec.attributes[a2]);
            }
            sentences.push(text);
        }
        if !uncovered.is_empty() {
            return Err(Error::Grammar("templates could not cover every object".into()));
        }
        let text = sentences.join(" ");
        let len = tokenize(&text).len() + 1;
        if len > spec.max_tokens {
            return Err(Error::Grammar(format!(
                "generated paragraph has {len} tokens, above max_tokens {}",
                spec.max_tokens
            )));
        }
        Ok(text)
    }

    /// Prefers an uncovered object; otherwise any object other than `exclude`.
    fn take_object(&mut self, uncovered: &mut Vec<usize>, n: usize, exclude: Option<usize>) -> usize {
        let candidates: Vec<usize> = uncovered.iter().copied().filter(|&o| Some(o) != exclude).collect();
        let pick = if candidates.is_empty() {
            let others: Vec<usize> = (0..n).filter(|&o| Some(o) != exclude).collect();
            *others.choose(&mut self.rng).unwrap()
        } else {
            *candidates.choose(&mut self.rng).unwrap()
        };
        uncovered.retain(|&o| o != pick);
        pick
    }
}

fn generate(spec: &GrammarSpec, n: usize, stream: u64, prefix: &str) -> Result<Vec<SynthScene>> {
    let mut gen = Generator::new(spec, stream);
    (0..n).map(|i| gen.scene(format!("{prefix}-{i:04}"))).collect()
}

/// Training and held-out scenes from disjoint random streams, plus the
/// vocabulary built from the training references.
pub fn synth_split(spec: &GrammarSpec, n_train: usize, n_val: usize) -> Result<SynthCorpus> {
    spec.validate()?;
    if n_train == 0 {
        return Err(Error::InvalidArgument("need at least one training scene".into()));
    }
    let train = generate(spec, n_train, streams::SYNTH_TRAIN, "train")?;
    let val = generate(spec, n_val, streams::SYNTH_VAL, "val")?;
    let token_seqs: Vec<Vec<String>> = train
        .iter()
        .flat_map(|s| s.raw.references.iter().map(|r| tokenize(r)))
        .collect();
    let vocab = Vocabulary::build(&token_seqs, spec.min_count)?;
    Ok(SynthCorpus { vocab, train, val })
}

/// Training scenes only.
pub fn synth_generate(spec: &GrammarSpec, n_scenes: usize) -> Result<(Vec<Scene>, Vocabulary)> {
    let corpus = synth_split(spec, n_scenes, 0)?;
    Ok((corpus.train_scenes(), corpus.vocab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EOS, PAD};

    #[test]
    fn same_seed_same_corpus() {
        let spec = GrammarSpec::default();
        assert_eq!(synth_split(&spec, 20, 5).unwrap(), synth_split(&spec, 20, 5).unwrap());
        let other = GrammarSpec { seed: 8, ..spec.clone() };
        assert_ne!(synth_split(&spec, 20, 0).unwrap().train, synth_split(&other, 20, 0).unwrap().train);
    }

    #[test]
    fn zero_noise_same_objects_same_features() {
        let spec = GrammarSpec {
            noise: 0.0,
            nouns: strings(&["dog", "cat", "ball", "tree"]),
            attributes: strings(&["red", "blue"]),
            ..GrammarSpec::default()
        };
        let corpus = synth_split(&spec, 200, 0).unwrap();
        let mut pairs = 0;
        for a in &corpus.train {
            for b in &corpus.train {
                if a.objects == b.objects {
                    assert_eq!(a.raw.features, b.raw.features);
                    pairs += 1;
                }
            }
        }
        assert!(pairs > corpus.train.len(), "expected repeated object sets");
    }

    #[test]
    fn references_mention_exactly_the_latent_nouns() {
        let spec = GrammarSpec::default();
        let corpus = synth_split(&spec, 200, 0).unwrap();
        for s in &corpus.train {
            let latent: std::collections::BTreeSet<&str> =
                s.objects.iter().map(|&(n, _)| spec.nouns[n].as_str()).collect();
            assert_eq!(latent.len(), 3);
            for r in &s.raw.references {
                let mentioned: std::collections::BTreeSet<&str> = r
                    .split_whitespace()
                    .filter(|w| spec.nouns.iter().any(|n| n == w))
                    .collect();
                assert_eq!(mentioned, latent, "{r}");
                let n_sent = r.matches(" .").count();
                assert!((2..=4).contains(&n_sent), "{r}");
            }
        }
    }

    #[test]
    fn encoded_references_end_with_eos_without_pad() {
        let corpus = synth_split(&GrammarSpec::default(), 30, 10).unwrap();
        for s in corpus.train_scenes().iter().chain(&corpus.val_scenes()) {
            assert_eq!(s.regions(), 8);
            assert_eq!(s.feature_dim(), 64);
            for r in &s.references {
                assert_eq!(r.last(), Some(&EOS));
                assert!(!r.contains(&PAD));
                assert!(r.len() <= 80);
            }
        }
    }

    #[test]
    fn held_out_split_differs() {
        let corpus = synth_split(&GrammarSpec::default(), 10, 10).unwrap();
        assert!(corpus.train.iter().zip(&corpus.val).all(|(a, b)| a.raw.features != b.raw.features));
    }

    #[test]
    fn invalid_placeholder_reports_line() {
        let text = "seed = 1\ntemplates = [\n  \"there is a {noun} .\",\n  \"a {colour} {noun} .\",\n]\n";
        let err = GrammarSpec::from_toml_str(text).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
        assert!(err.contains("{colour}"), "{err}");
    }

    #[test]
    fn toml_syntax_error_reports_line() {
        let err = GrammarSpec::from_toml_str("seed = 1\nnouns = [\"a\",\n  oops\n").unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = GrammarSpec::from_toml_str("colours = 3\n").unwrap_err().to_string();
        assert!(err.contains("colours"), "{err}");
    }

    #[test]
    fn toml_round_trip() {
        let spec = GrammarSpec::default();
        assert_eq!(GrammarSpec::from_toml_str(&spec.to_toml_string()).unwrap(), spec);
    }
}
