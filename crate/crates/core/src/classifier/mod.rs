//! Toy-scale attention classifier over spatial breathing profiles.
//!
//! A profile is rasterized onto a fixed `tokens x patch` grid: columns are
//! mapped onto `patch` spatial bins by point order (largest-magnitude entry
//! per bin), rows are kept whole as tokens, truncated to the `tokens`
//! highest-energy rows or padded with zero rows.
//!
//! Checkpoint layout (`.mmcm`):
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `MMCM\0\x01\0\0` |
//! | 4     | header length `L`, little-endian u32 |
//! | L     | UTF-8 JSON [`CheckpointHeader`]: model config and tensor list |
//! | ...   | each tensor in header order, row-major little-endian f32 |

pub mod model;
pub mod train;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::counting::{augmentation_seeds, majority_vote, CountEstimate, CountMethod};
use crate::error::{Error, Result};
use crate::profile::{augment_profile, SpatialBreathingProfile};

pub use model::{Model, ModelConfig, TensorSpec};
pub use train::{
    load_manifest, read_manifest, train_classifier, EpochStats, LabeledProfile, ManifestEntry, TrainConfig, TrainReport,
};

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"MMCM\x00\x01\x00\x00";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Fixed-size input grid for a profile, row-major `tokens x patch`.
pub fn rasterize(p: &SpatialBreathingProfile, tokens: usize, patch: usize) -> Vec<f64> {
    let k = p.n_cols();
    let mut rows: Vec<(f64, Vec<f64>)> = p
        .rows
        .iter()
        .map(|row| {
            let mut out = vec![0.0f64; patch];
            for (j, &w) in row.iter().enumerate() {
                let b = j * patch / k.max(1);
                if w.abs() > out[b].abs() {
                    out[b] = w;
                }
            }
            (out.iter().map(|v| v * v).sum(), out)
        })
        .collect();
    if rows.len() > tokens {
        let mut idx: Vec<usize> = (0..rows.len()).collect();
        // Stable: equal energies keep their original order.
        idx.sort_by(|&a, &b| rows[b].0.total_cmp(&rows[a].0));
        let mut keep = idx[..tokens].to_vec();
        keep.sort_unstable();
        rows = keep.into_iter().map(|i| std::mem::take(&mut rows[i])).collect();
    }
    let mut grid = vec![0.0; tokens * patch];
    for (t, (_, row)) in rows.iter().enumerate() {
        grid[t * patch..(t + 1) * patch].copy_from_slice(row);
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub config: ModelConfig,
    pub tensors: Vec<TensorSpec>,
    /// Validation macro F1 of the saved weights, when known.
    #[serde(default)]
    pub validation_macro_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionClassifier {
    pub model: Model,
    pub validation_macro_f1: Option<f64>,
}

impl AttentionClassifier {
    pub fn new(model: Model) -> Self {
        AttentionClassifier {
            model,
            validation_macro_f1: None,
        }
    }

    pub fn classes(&self) -> &[usize] {
        &self.model.config.classes
    }

    pub fn input(&self, p: &SpatialBreathingProfile) -> Vec<f64> {
        rasterize(p, self.model.config.tokens, self.model.config.patch)
    }

    /// Class probabilities for one profile, in [`Self::classes`] order.
    pub fn probabilities(&self, p: &SpatialBreathingProfile) -> Vec<f64> {
        model::softmax(&self.model.logits(&self.input(p)))
    }

    /// Most likely count (smaller count on exact ties).
    pub fn predict(&self, p: &SpatialBreathingProfile) -> usize {
        let probs = self.probabilities(p);
        let mut best = 0;
        for (i, &v) in probs.iter().enumerate() {
            if v > probs[best] {
                best = i;
            }
        }
        self.classes()[best]
    }

    /// Majority vote over the row-shuffled augmentations of the profile.
    /// Empty profiles count as nobody without consulting the model.
    pub fn count(&self, p: &SpatialBreathingProfile, seed: u64) -> Result<CountEstimate> {
        if p.is_empty() {
            return Ok(CountEstimate::nobody(CountMethod::AttentionClassifier));
        }
        let predictions: Vec<usize> = augmentation_seeds(seed)
            .iter()
            .map(|&s| self.predict(&augment_profile(p, s)))
            .collect();
        let (count, votes, confidence) = majority_vote(&predictions);
        Ok(CountEstimate {
            count,
            method: CountMethod::AttentionClassifier,
            votes,
            confidence,
        })
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<W> {
        let header = CheckpointHeader {
            version: CHECKPOINT_VERSION,
            config: self.model.config.clone(),
            tensors: model::tensor_specs(&self.model.config),
            validation_macro_f1: self.validation_macro_f1,
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Invariant(e.to_string()))?;
        out.write_all(&CHECKPOINT_MAGIC)?;
        out.write_all(&(json.len() as u32).to_le_bytes())?;
        out.write_all(&json)?;
        let mut bytes = Vec::with_capacity(self.model.params.len() * 4);
        for &p in &self.model.params {
            bytes.extend_from_slice(&(p as f32).to_le_bytes());
        }
        out.write_all(&bytes)?;
        out.flush()?;
        Ok(out)
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let corrupt = |what: &str| Error::Corrupt(format!("model checkpoint: {what}"));
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(|_| corrupt("truncated magic"))?;
        if magic != CHECKPOINT_MAGIC {
            return Err(corrupt("bad magic bytes"));
        }
        let mut len = [0u8; 4];
        input.read_exact(&mut len).map_err(|_| corrupt("truncated header length"))?;
        let len = u32::from_le_bytes(len);
        if len > 1 << 20 {
            return Err(corrupt("implausible header length"));
        }
        let mut json = vec![0u8; len as usize];
        input.read_exact(&mut json).map_err(|_| corrupt("truncated header"))?;
        let header: CheckpointHeader =
            serde_json::from_slice(&json).map_err(|e| corrupt(&format!("bad header: {e}")))?;
        if header.version != CHECKPOINT_VERSION {
            return Err(corrupt(&format!("unsupported version {}", header.version)));
        }
        if header.tensors != model::tensor_specs(&header.config) {
            return Err(corrupt("tensor list does not match the model configuration"));
        }
        let n = model::parameter_count(&header.config);
        let mut bytes = vec![0u8; n * 4];
        input.read_exact(&mut bytes).map_err(|_| corrupt("truncated weights"))?;
        let mut trailing = [0u8; 1];
        if input.read(&mut trailing)? != 0 {
            return Err(corrupt("trailing bytes after weights"));
        }
        let params: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        if params.iter().any(|p| !p.is_finite()) {
            return Err(corrupt("non-finite weight"));
        }
        let model = Model::from_params(header.config, params).ok_or_else(|| corrupt("size mismatch"))?;
        Ok(AttentionClassifier {
            model,
            validation_macro_f1: header.validation_macro_f1,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Missing(vec![path.to_path_buf()]),
            _ => Error::Io(e),
        })?;
        AttentionClassifier::read(BufReader::new(file))
    }

    /// Rounds the weights to the checkpoint precision so a saved and
    /// reloaded model behaves exactly like this one.
    pub fn round_to_checkpoint_precision(&mut self) {
        for p in &mut self.model.params {
            *p = f64::from(*p as f32);
        }
    }
}
