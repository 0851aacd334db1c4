//! Frame-level weighted cross-entropy training with Adam.

mod adam;
mod data;
mod loss;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use data::{load_train_set, remap_labels, TrainItem, TrainSet};
pub use loss::weighted_ce;

use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::encoder::{save_checkpoint, Model};
use crate::error::{Error, Result};
use crate::frontend::{features, mix_at_snr, speed_perturb, FeatureMatrix, SnrDistribution, Waveform};
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::tensor::Tape;
use crate::vocab::default_class_weights;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    /// One weight per class: SIL, FILLER, then the subwords.
    pub class_weights: Vec<f64>,
    pub seed: u64,
    /// Probability of mixing an utterance with the noise bank each epoch.
    pub noise_prob: f64,
    /// Probability of speed-perturbing an utterance (factor in [0.9, 1.1]).
    pub speed_prob: f64,
    pub snr: SnrDistribution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            batch_size: 16,
            epochs: 10,
            class_weights: default_class_weights().to_vec(),
            seed: 0,
            noise_prob: 0.0,
            speed_prob: 0.0,
            snr: SnrDistribution::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if self.batch_size == 0 {
            return Err(Error::contract("batch size must be at least 1"));
        }
        if let Some(w) = self.class_weights.iter().find(|w| !(**w > 0.0)) {
            return Err(Error::contract(format!("class weights must be positive, got {w}")));
        }
        for (name, p) in [("noise_prob", self.noise_prob), ("speed_prob", self.speed_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::contract(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    fn augments(&self) -> bool {
        self.noise_prob > 0.0 || self.speed_prob > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub split: &'static str,
    pub loss: f64,
    pub frame_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
}

impl TrainReport {
    pub fn last(&self, split: &str) -> Option<&EpochMetrics> {
        self.epochs.iter().rev().find(|m| m.split == split)
    }
}

/// Weighted loss sum, correct frames, total frames.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    loss: f64,
    correct: usize,
    frames: usize,
}

impl Tally {
    fn add(&mut self, o: Tally) {
        self.loss += o.loss;
        self.correct += o.correct;
        self.frames += o.frames;
    }

    fn metrics(&self, epoch: usize, split: &'static str) -> EpochMetrics {
        let n = self.frames.max(1) as f64;
        EpochMetrics {
            epoch,
            split,
            loss: self.loss / n,
            frame_accuracy: self.correct as f64 / n,
        }
    }
}

fn correct_frames<T: Scalar>(logits: &[T], labels: &[usize], classes: usize) -> usize {
    let len = labels.len();
    (0..len)
        .filter(|&t| {
            let best = (0..classes)
                .max_by(|&a, &b| logits[a * len + t].as_f64().total_cmp(&logits[b * len + t].as_f64()))
                .expect("at least one class");
            best == labels[t]
        })
        .count()
}

/// Loss and gradients for one utterance; the loss is divided by `norm`.
fn utterance_step<T: Scalar>(
    model: &Model<T>,
    feats: &FeatureMatrix,
    labels: &[usize],
    weights: &[f64],
    norm: f64,
) -> Result<(Vec<Vec<T>>, Tally)> {
    let tape = Tape::new();
    let logits = model.forward(&tape, tape.leaf(feats.to_tensor()))?;
    let loss = weighted_ce(logits, labels, weights, Some(norm))?;
    tape.backward(loss)?;
    let value = loss.value().data()[0].as_f64() * norm;
    let correct = correct_frames(logits.value().data(), labels, model.config().n_classes);
    Ok((
        model.grads_from(&tape),
        Tally {
            loss: value,
            correct,
            frames: labels.len(),
        },
    ))
}

fn augmented(
    set: &TrainSet,
    i: usize,
    epoch: usize,
    cfg: &TrainConfig,
) -> Result<(FeatureMatrix, Vec<usize>)> {
    let item = &set.items[i];
    if !cfg.augments() {
        return Ok((item.features.clone(), item.labels.clone()));
    }
    let wave = item.wave.as_ref().ok_or_else(|| Error::Data {
        utterance: item.id.clone(),
        msg: "augmentation requested but audio was not kept".into(),
    })?;
    let mut rng = stream_rng(cfg.seed, &format!("augment/{epoch}"), i as u64);
    let mut w: Waveform = wave.clone();
    let mut labels = item.labels.clone();
    if rng.random_bool(cfg.speed_prob) {
        let factor = rng.random_range(0.9..=1.1);
        w = speed_perturb(&w, factor)?;
        labels = remap_labels(&labels, factor, w.len(), set.frontend.config());
    }
    if !set.noise.is_empty() && rng.random_bool(cfg.noise_prob) && w.power() > 0.0 {
        let noise = &set.noise[rng.random_range(0..set.noise.len())];
        let mut rotated = noise.samples().to_vec();
        let shift = rng.random_range(0..rotated.len());
        rotated.rotate_left(shift);
        let noise = Waveform::new(rotated, noise.sample_rate())?;
        w = mix_at_snr(&w, &noise, cfg.snr.sample(&mut rng))?;
    }
    Ok((features(&set.frontend, &w)?, labels))
}

/// Loss and frame accuracy over a set without updating the model.
pub fn frame_metrics<T: Scalar>(model: &Model<T>, set: &TrainSet, weights: &[f64]) -> Result<(f64, f64)> {
    let tallies = set
        .items
        .par_iter()
        .map(|item| {
            let tape = Tape::new();
            let logits = model.forward(&tape, tape.leaf(item.features.to_tensor()))?;
            let loss = weighted_ce(logits, &item.labels, weights, Some(1.0))?;
            let v = loss.value().data()[0].as_f64();
            let correct = correct_frames(logits.value().data(), &item.labels, model.config().n_classes);
            Ok(Tally {
                loss: v,
                correct,
                frames: item.labels.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Tally::default();
    tallies.into_iter().for_each(|t| total.add(t));
    let m = total.metrics(0, "");
    Ok((m.loss, m.frame_accuracy))
}

/// Trains `model` in place. With `out_dir`, writes `metrics.jsonl`,
/// `epoch_NN.ckpt` after every epoch and `model.ckpt` at the end.
///
/// Per-utterance gradients may be computed on parallel workers; they are
/// summed in batch order, so results do not depend on the worker count.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    set: &TrainSet,
    valid: Option<&TrainSet>,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if set.items.is_empty() {
        return Err(Error::contract("training set is empty"));
    }
    if cfg.class_weights.len() != model.config().n_classes {
        return Err(Error::contract(format!(
            "{} class weights for {} classes",
            cfg.class_weights.len(),
            model.config().n_classes
        )));
    }
    let mut log = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let p = dir.join("metrics.jsonl");
            Some((std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?, p))
        }
        None => None,
    };
    let mut state = AdamState::new(&model.params());
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..set.items.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut stream_rng(cfg.seed, "shuffle", epoch as u64));
        let mut total = Tally::default();
        for batch in order.chunks(cfg.batch_size) {
            let inputs = batch
                .par_iter()
                .map(|&i| augmented(set, i, epoch, cfg))
                .collect::<Result<Vec<_>>>()?;
            let norm = inputs.iter().map(|(_, l)| l.len()).sum::<usize>().max(1) as f64;
            let snapshot: &Model<T> = model;
            let results = inputs
                .par_iter()
                .map(|(f, l)| utterance_step(snapshot, f, l, &cfg.class_weights, norm))
                .collect::<Result<Vec<_>>>()?;
            let mut grads: Option<Vec<Vec<T>>> = None;
            for (g, tally) in results {
                total.add(tally);
                match &mut grads {
                    None => grads = Some(g),
                    Some(acc) => {
                        for (a, b) in acc.iter_mut().zip(g) {
                            for (x, y) in a.iter_mut().zip(b) {
                                *x = *x + y;
                            }
                        }
                    }
                }
            }
            let grads = grads.expect("non-empty batch");
            adam_step(&mut model.params_mut(), &grads, &mut state, &cfg.adam)?;
        }
        let mut lines = vec![total.metrics(epoch, "train")];
        if let Some(v) = valid {
            let (loss, acc) = frame_metrics(model, v, &cfg.class_weights)?;
            lines.push(EpochMetrics {
                epoch,
                split: "valid",
                loss,
                frame_accuracy: acc,
            });
        }
        if let Some((file, path)) = &mut log {
            for m in &lines {
                let json = serde_json::to_string(m).expect("metrics serialise");
                writeln!(file, "{json}").map_err(|e| Error::io(path.as_path(), e))?;
            }
        }
        if let Some(dir) = out_dir {
            save_checkpoint(model, &dir.join(format!("epoch_{epoch:02}.ckpt")))?;
        }
        report.epochs.extend(lines);
    }
    if let Some(dir) = out_dir {
        save_checkpoint(model, &dir.join("model.ckpt"))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests;
