//! Dataset manifests and binary feature files.
//!
//! A manifest is JSON:
//!
//! ```json
//! {"version": 1, "scenes": [
//!   {"id": "train-0000", "features": "features/train-0000.bin",
//!    "references": ["a red dog is sitting .", "..."]}
//! ]}
//! ```
//!
//! Feature paths are relative to the manifest's directory. A feature file is
//! `u32 m`, `u32 E` (little-endian) followed by `m * E` little-endian `f64`
//! values in row-major order.

use super::{vocab::EOS, Scene, Vocabulary};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const MANIFEST_VERSION: u32 = 1;

/// A scene with untokenized reference texts, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawScene {
    pub id: String,
    pub features: Vec<Vec<f64>>,
    pub references: Vec<String>,
}

impl RawScene {
    pub fn encode(&self, vocab: &Vocabulary) -> Scene {
        Scene {
            id: self.id.clone(),
            features: self.features.clone(),
            references: self.references.iter().map(|r| vocab.encode_reference(r)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub scenes: Vec<ManifestScene>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestScene {
    pub id: String,
    pub features: PathBuf,
    pub references: Vec<String>,
}

pub fn write_features(path: &Path, features: &[Vec<f64>]) -> Result<()> {
    let m = features.len();
    let e = features.first().map_or(0, Vec::len);
    if m == 0 || e == 0 || features.iter().any(|r| r.len() != e) {
        return Err(Error::dim("write_features", "non-empty rectangular m x E", format!("{m} rows")));
    }
    let mut buf = Vec::with_capacity(8 + m * e * 8);
    buf.extend_from_slice(&(m as u32).to_le_bytes());
    buf.extend_from_slice(&(e as u32).to_le_bytes());
    for v in features.iter().flatten() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|err| Error::io(path, err))
}

pub fn read_features(path: &Path) -> Result<Vec<Vec<f64>>> {
    let bytes = fs::read(path).map_err(|err| Error::io(path, err))?;
    if bytes.len() < 8 {
        return Err(Error::Dataset(format!("{}: truncated header", path.display())));
    }
    let m = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let e = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if m == 0 || e == 0 {
        return Err(Error::Dataset(format!("{}: empty feature matrix {m}x{e}", path.display())));
    }
    let body = &bytes[8..];
    if body.len() != m * e * 8 {
        return Err(Error::Dataset(format!(
            "{}: header says {m}x{e} but holds {} bytes",
            path.display(),
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Dataset(format!("{}: non-finite feature value", path.display())));
    }
    Ok(values.chunks_exact(e).map(<[f64]>::to_vec).collect())
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::Dataset(format!(
            "{}: unsupported manifest version {}",
            path.display(),
            manifest.version
        )));
    }
    Ok(manifest)
}

/// Loads, validates and encodes every scene of a manifest.
///
/// References longer than `t_max` tokens (including `<eos>`) are truncated.
pub fn load_dataset(manifest_path: &Path, vocab: &Vocabulary, t_max: usize) -> Result<Vec<Scene>> {
    if t_max == 0 {
        return Err(Error::InvalidArgument("t_max must be at least 1".into()));
    }
    let manifest = read_manifest(manifest_path)?;
    if manifest.scenes.is_empty() {
        return Err(Error::Dataset(format!("{}: manifest has no scenes", manifest_path.display())));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut dim: Option<(usize, String)> = None;
    let mut scenes = Vec::with_capacity(manifest.scenes.len());
    for entry in manifest.scenes {
        let features = read_features(&base.join(&entry.features))
            .map_err(|e| Error::Dataset(format!("scene {}: {e}", entry.id)))?;
        let e = features[0].len();
        match &dim {
            None => dim = Some((e, entry.id.clone())),
            Some((expected, first)) if *expected != e => {
                return Err(Error::Dataset(format!(
                    "scene {}: feature dimension {e} differs from {expected} (scene {first})",
                    entry.id
                )));
            }
            _ => {}
        }
        if entry.references.is_empty() {
            return Err(Error::Dataset(format!("scene {}: no references", entry.id)));
        }
        let mut references = Vec::with_capacity(entry.references.len());
        for text in &entry.references {
            let mut seq = vocab.encode_reference(text);
            if seq.len() == 1 {
                return Err(Error::Dataset(format!("scene {}: empty reference", entry.id)));
            }
            if seq.len() > t_max {
                seq.truncate(t_max - 1);
                seq.push(EOS);
            }
            references.push(seq);
        }
        scenes.push(Scene {
            id: entry.id,
            features,
            references,
        });
    }
    Ok(scenes)
}

/// Writes `<dir>/<split>.json` plus one feature file per scene under
/// `<dir>/features/`.
pub fn save_dataset(dir: &Path, split: &str, scenes: &[RawScene]) -> Result<PathBuf> {
    let feat_dir = dir.join("features");
    fs::create_dir_all(&feat_dir).map_err(|e| Error::io(&feat_dir, e))?;
    let mut entries = Vec::with_capacity(scenes.len());
    for scene in scenes {
        let rel = PathBuf::from("features").join(format!("{}.bin", scene.id));
        write_features(&dir.join(&rel), &scene.features)?;
        entries.push(ManifestScene {
            id: scene.id.clone(),
            features: rel,
            references: scene.references.clone(),
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        scenes: entries,
    };
    let path = dir.join(format!("{split}.json"));
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn vocab() -> Vocabulary {
        Vocabulary::build(&[tokenize("a red dog . a blue cat .")], 1).unwrap()
    }

    fn scene(id: &str, m: usize, e: usize) -> RawScene {
        let features = (0..m).map(|i| (0..e).map(|j| (i * e + j) as f64 * 0.5).collect()).collect();
        RawScene {
            id: id.to_string(),
            features,
            references: vec!["a red dog .".into(), "a blue cat .".into()],
        }
    }

    #[test]
    fn two_scene_manifest_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_dataset(dir.path(), "train", &[scene("s0", 3, 4), scene("s1", 2, 4)]).unwrap();
        let scenes = load_dataset(&path, &vocab(), 80).unwrap();
        assert_eq!(scenes.len(), 2);
        assert_eq!(scenes[0].regions(), 3);
        assert_eq!(scenes[1].feature_dim(), 4);
        assert_eq!(scenes[0].features[1][2], 3.0);
        assert!(scenes.iter().flat_map(|s| &s.references).all(|r| r.last() == Some(&EOS)));
    }

    #[test]
    fn inconsistent_dimension_names_scene() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_dataset(dir.path(), "train", &[scene("s0", 3, 4), scene("odd-one", 3, 5)]).unwrap();
        let err = load_dataset(&path, &vocab(), 80).unwrap_err().to_string();
        assert!(err.contains("odd-one"), "{err}");
    }

    #[test]
    fn zero_scenes_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_dataset(dir.path(), "train", &[]).unwrap();
        assert!(load_dataset(&path, &vocab(), 80).is_err());
    }

    #[test]
    fn missing_feature_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_dataset(dir.path(), "train", &[scene("s0", 2, 2)]).unwrap();
        fs::remove_file(dir.path().join("features/s0.bin")).unwrap();
        let err = load_dataset(&path, &vocab(), 80).unwrap_err().to_string();
        assert!(err.contains("s0"), "{err}");
    }

    #[test]
    fn empty_reference_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = scene("s0", 2, 2);
        s.references = vec!["   ".into()];
        let path = save_dataset(dir.path(), "train", &[s]).unwrap();
        assert!(load_dataset(&path, &vocab(), 80).is_err());
    }

    #[test]
    fn long_references_are_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_dataset(dir.path(), "train", &[scene("s0", 2, 2)]).unwrap();
        let scenes = load_dataset(&path, &vocab(), 3).unwrap();
        for r in &scenes[0].references {
            assert_eq!(r.len(), 3);
            assert_eq!(r[2], EOS);
        }
    }
}
