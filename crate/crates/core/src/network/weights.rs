//! Named parameter tensors and their on-disk format.
//!
//! A store directory holds `manifest.json`, an array of
//! `{name, shape, dtype, file, byte_offset, checksum}` records, and the
//! binary file(s) they point into. Tensors are raw little-endian `f32`;
//! `checksum` is the SHA-256 of a tensor's bytes in hex.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unimatte_tensor::{SplitMix64, Tensor};

use super::spec::{NetworkSpec, ParamKind};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATA_FILE: &str = "weights.bin";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Loaded(PathBuf),
    Seeded(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub file: String,
    pub byte_offset: u64,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightStore {
    tensors: BTreeMap<String, Tensor>,
    provenance: Provenance,
}

/// FNV-1a, used to give every tensor its own generator stream.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn tensor_bytes(t: &Tensor) -> Vec<u8> {
    t.data().iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl WeightStore {
    pub fn from_tensors(tensors: BTreeMap<String, Tensor>, provenance: Provenance) -> Self {
        WeightStore {
            tensors,
            provenance,
        }
    }

    /// Deterministic initialisation: He-uniform weights in
    /// `±sqrt(6 / fan_in)`, zero biases, identity batch norm. Each tensor
    /// draws from its own generator seeded by `seed ^ fnv1a(name)`, so the
    /// values of a tensor do not depend on the others.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Self {
        let mut tensors = BTreeMap::new();
        for p in spec.params() {
            let numel: usize = p.shape.iter().product();
            let data = match p.kind {
                ParamKind::Weight { fan_in } => {
                    let bound = (6.0 / fan_in as f64).sqrt();
                    let mut rng = SplitMix64::new(seed ^ fnv1a(&p.name));
                    (0..numel).map(|_| rng.uniform(-bound, bound) as f32).collect()
                }
                ParamKind::Bias | ParamKind::BnBias | ParamKind::BnMean => vec![0.0; numel],
                ParamKind::BnWeight | ParamKind::BnVar => vec![1.0; numel],
            };
            let t = Tensor::new(p.shape, data).expect("spec shapes are nonzero");
            tensors.insert(p.name, t);
        }
        WeightStore {
            tensors,
            provenance: Provenance::Seeded(seed),
        }
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) -> Option<Tensor> {
        self.tensors.insert(name.into(), t)
    }

    pub fn tensors(&self) -> &BTreeMap<String, Tensor> {
        &self.tensors
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Checks that every spec parameter is present with the right shape and
    /// that nothing else is stored.
    pub fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        let params = spec.params();
        for p in &params {
            let t = self.get(&p.name)?;
            if t.shape().dims() != p.shape {
                return Err(Error::WeightShape {
                    name: p.name.clone(),
                    expected: p.shape.to_vec(),
                    found: t.shape().dims().to_vec(),
                });
            }
        }
        if self.tensors.len() != params.len() {
            let known: std::collections::HashSet<&str> = params.iter().map(|p| p.name.as_str()).collect();
            let extra = self.names().find(|n| !known.contains(n)).unwrap_or_default();
            return Err(Error::WeightFormat(format!("unexpected tensor `{extra}`")));
        }
        Ok(())
    }

    /// Learnable parameters held by the store, using the spec to tell
    /// learned tensors from batch-norm running statistics.
    pub fn count_parameters(&self, spec: &NetworkSpec) -> usize {
        spec.params()
            .iter()
            .filter(|p| p.kind.is_learnable())
            .filter_map(|p| self.tensors.get(&p.name))
            .map(|t| t.len())
            .sum()
    }

    /// Writes the manifest and a single data file into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut blob = Vec::new();
        let mut records = Vec::with_capacity(self.tensors.len());
        for (name, t) in &self.tensors {
            let bytes = tensor_bytes(t);
            records.push(TensorRecord {
                name: name.clone(),
                shape: t.shape().dims().to_vec(),
                dtype: "f32".into(),
                file: DATA_FILE.into(),
                byte_offset: blob.len() as u64,
                checksum: sha256_hex(&bytes),
            });
            blob.extend_from_slice(&bytes);
        }
        let data_path = dir.join(DATA_FILE);
        fs::write(&data_path, &blob).map_err(|e| Error::io(&data_path, e))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&records).map_err(|source| Error::Json {
            path: manifest_path.clone(),
            source,
        })?;
        fs::write(&manifest_path, json + "\n").map_err(|e| Error::io(&manifest_path, e))
    }

    fn read_manifest(dir: &Path) -> Result<Vec<TensorRecord>> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json { path, source })
    }

    /// Loads every tensor listed in the manifest, verifying bounds and
    /// checksums.
    pub fn load(dir: &Path) -> Result<Self> {
        let records = Self::read_manifest(dir)?;
        Self::load_records(dir, records)
    }

    /// Loads a store for `spec`: manifest shapes are checked against the spec
    /// before any data is read, then the store is validated.
    pub fn load_for(dir: &Path, spec: &NetworkSpec) -> Result<Self> {
        let records = Self::read_manifest(dir)?;
        let by_name: BTreeMap<&str, &TensorRecord> = records.iter().map(|r| (r.name.as_str(), r)).collect();
        for p in spec.params() {
            let r = by_name
                .get(p.name.as_str())
                .ok_or_else(|| Error::MissingTensor(p.name.clone()))?;
            if r.shape != p.shape {
                return Err(Error::WeightShape {
                    name: p.name.clone(),
                    expected: p.shape.to_vec(),
                    found: r.shape.clone(),
                });
            }
        }
        let store = Self::load_records(dir, records)?;
        store.validate(spec)?;
        Ok(store)
    }

    fn load_records(dir: &Path, records: Vec<TensorRecord>) -> Result<Self> {
        let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();
        let mut tensors = BTreeMap::new();
        for r in records {
            if r.dtype != "f32" {
                return Err(Error::WeightFormat(format!("`{}`: unsupported dtype {}", r.name, r.dtype)));
            }
            if r.shape.len() != 4 || r.shape.contains(&0) {
                return Err(Error::WeightFormat(format!(
                    "`{}`: shape {:?} is not a nonzero rank-4 shape",
                    r.name, r.shape
                )));
            }
            if r.file.contains("..") || Path::new(&r.file).is_absolute() {
                return Err(Error::WeightFormat(format!("`{}`: file `{}` escapes the store", r.name, r.file)));
            }
            if !files.contains_key(&r.file) {
                let p = dir.join(&r.file);
                let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
                files.insert(r.file.clone(), bytes);
            }
            let blob = &files[&r.file];
            let numel: usize = r.shape.iter().product();
            let start = r.byte_offset as usize;
            let end = start.checked_add(numel * 4);
            let bytes = match end {
                Some(end) if end <= blob.len() => &blob[start..end],
                _ => {
                    return Err(Error::Truncated {
                        name: r.name,
                        path: dir.join(&r.file),
                    })
                }
            };
            if sha256_hex(bytes) != r.checksum.to_ascii_lowercase() {
                return Err(Error::Checksum(r.name));
            }
            let data = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            let shape = [r.shape[0], r.shape[1], r.shape[2], r.shape[3]];
            if tensors.insert(r.name.clone(), Tensor::new(shape, data)?).is_some() {
                return Err(Error::WeightFormat(format!("duplicate tensor `{}`", r.name)));
            }
        }
        Ok(WeightStore {
            tensors,
            provenance: Provenance::Loaded(dir.to_path_buf()),
        })
    }
}

pub fn init_weights(spec: &NetworkSpec, seed: u64) -> WeightStore {
    WeightStore::init(spec, seed)
}

pub fn save_weights(store: &WeightStore, dir: &Path) -> Result<()> {
    store.save(dir)
}

pub fn load_weights(dir: &Path) -> Result<WeightStore> {
    WeightStore::load(dir)
}
