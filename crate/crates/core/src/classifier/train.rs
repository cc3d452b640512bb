//! Mini-batch SGD training with cross-entropy loss.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{cross_entropy, Model, ModelConfig};
use super::{rasterize, AttentionClassifier};
use crate::error::{Error, Result};
use crate::metrics::evaluate;
use crate::profile::SpatialBreathingProfile;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledProfile {
    pub profile: SpatialBreathingProfile,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    pub seed: u64,
    /// Training is refused when any class has fewer examples.
    pub min_per_class: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            epochs: 60,
            batch_size: 16,
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 1e-4,
            clip_norm: 5.0,
            seed: 0,
            min_per_class: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean loss of the first mini-batch before any update.
    pub first_batch_loss: f64,
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_validation_macro_f1: f64,
}

fn class_index(classes: &[usize], label: usize) -> Result<usize> {
    classes
        .iter()
        .position(|&c| c == label)
        .ok_or_else(|| Error::Training(format!("label {label} is not one of the classes {classes:?}")))
}

/// Macro F1 of the classifier on a labeled set.
pub fn macro_f1(clf: &AttentionClassifier, data: &[LabeledProfile]) -> Result<f64> {
    let pred: Vec<usize> = data.iter().map(|d| clf.predict(&d.profile)).collect();
    let truth: Vec<usize> = data.iter().map(|d| d.label).collect();
    Ok(evaluate(&pred, &truth, clf.classes())?.macro_avg.f1)
}

/// Trains a fresh model and returns the weights with the best validation
/// macro F1 (earliest epoch on ties).
pub fn train_classifier(
    train: &[LabeledProfile],
    valid: &[LabeledProfile],
    cfg: &TrainConfig,
) -> Result<(AttentionClassifier, TrainReport)> {
    let classes = cfg.model.classes.clone();
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::Config("epochs and batch size must be positive".into()));
    }
    for &c in &classes {
        let n = train.iter().filter(|d| d.label == c).count();
        if n == 0 {
            return Err(Error::Training(format!("class {c} is absent from the training set")));
        }
        if n < cfg.min_per_class {
            return Err(Error::Training(format!(
                "class {c} has {n} training profiles, at least {} required",
                cfg.min_per_class
            )));
        }
    }
    if valid.is_empty() {
        return Err(Error::Training("validation set is empty".into()));
    }
    let (t, p) = (cfg.model.tokens, cfg.model.patch);
    let inputs: Vec<(Vec<f64>, usize)> = train
        .iter()
        .map(|d| Ok((rasterize(&d.profile, t, p), class_index(&classes, d.label)?)))
        .collect::<Result<_>>()?;
    for d in valid {
        class_index(&classes, d.label)?;
    }

    let mut model = Model::new(cfg.model.clone(), &mut rng::substream(cfg.seed, "classifier-init", 0));
    let n_params = model.params.len();
    let mut velocity = vec![0.0; n_params];
    let mut grad = vec![0.0; n_params];
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut first_batch_loss = None;
    let mut best: Option<(usize, f64, AttentionClassifier)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::substream(cfg.seed, "classifier-order", epoch as u64));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                let (x, y) = &inputs[i];
                let fw = model.forward(x);
                let (loss, dl) = cross_entropy(&fw.logits, *y);
                batch_loss += loss;
                model.backward(&fw, &dl, &mut grad);
            }
            let inv = 1.0 / batch.len() as f64;
            first_batch_loss.get_or_insert(batch_loss * inv);
            epoch_loss += batch_loss;
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt() * inv;
            let clip = if norm > cfg.clip_norm { cfg.clip_norm / norm } else { 1.0 };
            for ((w, v), g) in model.params.iter_mut().zip(&mut velocity).zip(&grad) {
                let g = g * inv * clip + cfg.weight_decay * *w;
                *v = cfg.momentum * *v + g;
                *w -= cfg.learning_rate * *v;
            }
        }
        let mut snapshot = AttentionClassifier::new(model.clone());
        snapshot.round_to_checkpoint_precision();
        let f1 = macro_f1(&snapshot, valid)?;
        log::info!(
            "epoch {epoch}: loss {:.4}, validation macro F1 {f1:.3}",
            epoch_loss / inputs.len() as f64
        );
        history.push(EpochStats {
            epoch,
            train_loss: epoch_loss / inputs.len() as f64,
            validation_macro_f1: f1,
        });
        if best.as_ref().map_or(true, |(_, b, _)| f1 > *b) {
            snapshot.validation_macro_f1 = Some(f1);
            best = Some((epoch, f1, snapshot));
        }
    }
    let (best_epoch, best_f1, clf) = best.expect("at least one epoch ran");
    Ok((
        clf,
        TrainReport {
            first_batch_loss: first_batch_loss.unwrap_or(f64::NAN),
            epochs: history,
            best_epoch,
            best_validation_macro_f1: best_f1,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub profile_path: PathBuf,
    pub label: usize,
}

/// Reads a JSON-lines manifest of `{profile_path, label}` records.
/// Relative paths are resolved against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let file = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Missing(vec![path.to_path_buf()]),
        _ => Error::Io(e),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut entry: ManifestEntry = serde_json::from_str(&line)
            .map_err(|e| Error::parse(format!("{}:{}", path.display(), i + 1), e.to_string()))?;
        if entry.profile_path.is_relative() {
            entry.profile_path = base.join(entry.profile_path);
        }
        out.push(entry);
    }
    Ok(out)
}

/// Loads every profile of a manifest. Missing files are reported together.
pub fn load_manifest(path: &Path) -> Result<Vec<LabeledProfile>> {
    let entries = read_manifest(path)?;
    let missing: Vec<PathBuf> = entries
        .iter()
        .filter(|e| !e.profile_path.is_file())
        .map(|e| e.profile_path.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Missing(missing));
    }
    entries
        .into_iter()
        .map(|e| {
            Ok(LabeledProfile {
                profile: SpatialBreathingProfile::load(&e.profile_path)?,
                label: e.label,
            })
        })
        .collect()
}
