use crate::{Error, Result};
use std::collections::HashMap;
use std::fs;
use std::path::Path;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Lowercases and splits on whitespace and ASCII punctuation; punctuation
/// characters become tokens of their own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_whitespace() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else if ch.is_ascii_punctuation() && ch != '<' && ch != '>' {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            out.push(ch.to_string());
        } else {
            cur.push(ch);
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Bidirectional token/index map. Indices 0..4 are the reserved tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Dataset(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    /// Tokens seen fewer than `min_count` times map to `<unk>`. Kept tokens
    /// are ordered by descending frequency, then lexicographically.
    pub fn build<S: AsRef<str>>(sequences: &[Vec<S>], min_count: usize) -> Result<Self> {
        if min_count == 0 {
            return Err(Error::InvalidArgument("min_count must be at least 1".into()));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for tok in sequences.iter().flatten() {
            *counts.entry(tok.as_ref()).or_default() += 1;
        }
        if counts.is_empty() {
            return Err(Error::Dataset("cannot build a vocabulary from an empty corpus".into()));
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_count && !RESERVED.contains(t))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let tokens = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(kept.into_iter().map(|(t, _)| t.to_string()))
            .collect();
        Self::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, index: usize) -> Result<&str> {
        self.tokens
            .get(index)
            .map(String::as_str)
            .ok_or(Error::IndexOutOfRange {
                index,
                size: self.tokens.len(),
            })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.index_of(t.as_ref())).collect()
    }

    pub fn decode(&self, indices: &[usize]) -> Result<Vec<String>> {
        indices.iter().map(|&i| self.token(i).map(str::to_string)).collect()
    }

    /// Tokenizes `text` and appends `<eos>`.
    pub fn encode_reference(&self, text: &str) -> Vec<usize> {
        let mut seq = self.encode(&tokenize(text));
        seq.push(EOS);
        seq
    }

    /// Space-joined text of the body of a sequence (control tokens dropped).
    pub fn render(&self, indices: &[usize]) -> Result<String> {
        let body = super::strip_control(indices);
        Ok(self.decode(&body)?.join(" "))
    }

    /// One token per line; the line number is the index.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.tokens.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let tokens: Vec<String> = text.lines().map(str::to_string).collect();
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(Error::Dataset(format!(
                "{}: vocabulary must start with {RESERVED:?}",
                path.display()
            )));
        }
        Self::from_tokens(tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn tokenizer_keeps_punctuation() {
        assert_eq!(tokenize("A Dog, sitting."), vec!["a", "dog", ",", "sitting", "."]);
        assert_eq!(tokenize("  \t "), Vec::<String>::new());
    }

    #[test]
    fn min_count_boundary() {
        let mut seqs = vec![words("five"); 5];
        seqs.extend(vec![words("four"); 4]);
        let v = Vocabulary::build(&seqs, 5).unwrap();
        assert_ne!(v.index_of("five"), UNK);
        assert_eq!(v.index_of("four"), UNK);
        assert_eq!(v.len(), 5);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let empty: Vec<Vec<String>> = vec![];
        assert!(Vocabulary::build(&empty, 1).is_err());
        assert!(Vocabulary::build(&[Vec::<String>::new()], 1).is_err());
    }

    #[test]
    fn ordering_is_frequency_then_lexicographic() {
        let v = Vocabulary::build(&[words("b a c a b d")], 1).unwrap();
        assert_eq!(&v.tokens()[4..], &["a", "b", "c", "d"]);
    }

    #[test]
    fn encode_decode() {
        let v = Vocabulary::build(&[words("the cat sat on the mat .")], 1).unwrap();
        let s = words("the mat sat .");
        assert_eq!(v.decode(&v.encode(&s)).unwrap(), s);
        assert_eq!(v.encode(&["zebra"]), vec![UNK]);
        assert!(v.decode(&[v.len()]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let v = Vocabulary::build(&[words("x y z y")], 1).unwrap();
        let p = dir.path().join("vocab.txt");
        v.save(&p).unwrap();
        assert_eq!(Vocabulary::load(&p).unwrap(), v);
    }

    proptest! {
        #[test]
        fn round_trip_property(corpus in prop::collection::vec("[a-e]{1,3}", 1..40),
                               probe in prop::collection::vec("[a-g]{1,3}", 0..20)) {
            let seqs = vec![corpus.clone()];
            let v = Vocabulary::build(&seqs, 1).unwrap();
            let decoded = v.decode(&v.encode(&probe)).unwrap();
            for (orig, back) in probe.iter().zip(&decoded) {
                if corpus.contains(orig) {
                    prop_assert_eq!(orig, back);
                } else {
                    prop_assert_eq!(back.as_str(), "<unk>");
                }
            }
        }
    }
}
