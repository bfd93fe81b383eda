//! Checkpoint container: a directory holding `manifest.txt` and `tensors.bin`.
//!
//! ```text
//! crl-checkpoint 1
//! meta epoch 3
//! tensor policy.w_e 40,64 0 2560
//! sha256 <hex digest of tensors.bin>
//! ```
//!
//! `tensors.bin` is the concatenation of every tensor's values as
//! little-endian `f64`, in manifest order. Offsets and counts are in values.

use super::tensor::{Parameter, Tensor};
use crate::{Error, Result};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "crl-checkpoint";
const MANIFEST: &str = "manifest.txt";
const DATA: &str = "tensors.bin";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(String::as_str)
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.push((name.into(), t));
    }

    pub fn push_params<'a>(&mut self, params: impl IntoIterator<Item = &'a Parameter>) {
        for p in params {
            self.push(p.name.clone(), p.value.clone());
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Copies stored values into `params`, matching by name and shape.
    pub fn load_params(&self, params: Vec<&mut Parameter>) -> Result<()> {
        for p in params {
            let t = self
                .tensor(&p.name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {}", p.name)))?;
            if t.shape() != p.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "shape mismatch for {}: stored {:?}, expected {:?}",
                    p.name,
                    t.shape(),
                    p.value.shape()
                )));
            }
            p.value = t.clone();
            p.zero_grad();
        }
        Ok(())
    }
}

pub fn write_checkpoint(dir: &Path, ckpt: &Checkpoint) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = format!("{MAGIC} {CHECKPOINT_VERSION}\n");
    for (k, v) in &ckpt.meta {
        if k.contains(char::is_whitespace) || v.contains('\n') {
            return Err(Error::Checkpoint(format!("meta entry {k:?} is not serializable")));
        }
        writeln!(manifest, "meta {k} {v}").unwrap();
    }
    let mut data = Vec::new();
    let mut offset = 0usize;
    for (name, t) in &ckpt.tensors {
        if name.contains(char::is_whitespace) {
            return Err(Error::Checkpoint(format!("tensor name {name:?} contains whitespace")));
        }
        let shape: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        writeln!(manifest, "tensor {name} {} {offset} {}", shape.join(","), t.len()).unwrap();
        for v in t.data() {
            data.extend_from_slice(&v.to_le_bytes());
        }
        offset += t.len();
    }
    writeln!(manifest, "sha256 {}", hex::encode(Sha256::digest(&data))).unwrap();
    let data_path = dir.join(DATA);
    fs::write(&data_path, &data).map_err(|e| Error::io(&data_path, e))?;
    let manifest_path = dir.join(MANIFEST);
    fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(())
}

pub fn read_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let manifest_path = dir.join(MANIFEST);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let data_path = dir.join(DATA);
    let data = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let bad = |line: usize, msg: &str| Error::Checkpoint(format!("{}:{line}: {msg}", manifest_path.display()));

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) => {
            let version = header
                .strip_prefix(MAGIC)
                .map(str::trim)
                .ok_or_else(|| bad(1, "not a checkpoint manifest"))?;
            if version != CHECKPOINT_VERSION.to_string() {
                return Err(bad(1, &format!("unsupported version {version}")));
            }
        }
        None => return Err(bad(1, "empty manifest")),
    }
    if data.len() % 8 != 0 {
        return Err(Error::Checkpoint("tensor data is not a whole number of f64 values".into()));
    }
    let values: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    let mut ckpt = Checkpoint::new();
    let mut digest = None;
    for (i, line) in lines {
        let ln = i + 1;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("meta") => {
                let key = parts.next().ok_or_else(|| bad(ln, "meta without key"))?;
                let rest = line.splitn(3, ' ').nth(2).unwrap_or("");
                ckpt.set_meta(key, rest);
            }
            Some("tensor") => {
                let fields: Vec<&str> = parts.collect();
                let [name, shape, offset, count] = fields[..] else {
                    return Err(bad(ln, "expected: tensor <name> <shape> <offset> <count>"));
                };
                let shape: Vec<usize> = shape
                    .split(',')
                    .map(|d| d.parse().map_err(|_| bad(ln, "bad shape")))
                    .collect::<Result<_>>()?;
                let offset: usize = offset.parse().map_err(|_| bad(ln, "bad offset"))?;
                let count: usize = count.parse().map_err(|_| bad(ln, "bad count"))?;
                let slice = values
                    .get(offset..offset + count)
                    .ok_or_else(|| bad(ln, "tensor extends past end of data"))?;
                let t = Tensor::new(shape, slice.to_vec()).map_err(|e| bad(ln, &e.to_string()))?;
                ckpt.push(name, t);
            }
            Some("sha256") => digest = parts.next().map(str::to_string),
            Some(other) => return Err(bad(ln, &format!("unknown record {other:?}"))),
            None => {}
        }
    }
    let expected = digest.ok_or_else(|| Error::Checkpoint("manifest has no sha256 line".into()))?;
    if hex::encode(Sha256::digest(&data)) != expected {
        return Err(Error::Checkpoint(format!("{} failed its checksum", data_path.display())));
    }
    Ok(ckpt)
}
