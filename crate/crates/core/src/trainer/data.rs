use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frontend::{features, read_labels, read_wav, FeatureMatrix, FrontendConfig, LogMel, Manifest, Waveform};

#[derive(Debug, Clone)]
pub struct TrainItem {
    pub id: String,
    pub labels: Vec<usize>,
    pub features: FeatureMatrix,
    /// Kept only when on-the-fly augmentation needs the audio.
    pub wave: Option<Waveform>,
}

#[derive(Debug, Clone)]
pub struct TrainSet {
    pub items: Vec<TrainItem>,
    /// Recordings used for noise augmentation.
    pub noise: Vec<Waveform>,
    pub frontend: LogMel,
}

impl TrainItem {
    /// Computes features and checks that `labels` has one entry per frame.
    pub fn new(id: impl Into<String>, wave: Waveform, labels: Vec<usize>, mel: &LogMel, keep_audio: bool) -> Result<Self> {
        let id = id.into();
        let feats = features(mel, &wave).map_err(|e| Error::Data {
            utterance: id.clone(),
            msg: e.to_string(),
        })?;
        if feats.n_frames != labels.len() {
            return Err(Error::Data {
                utterance: id,
                msg: format!("{} labels for {} feature frames", labels.len(), feats.n_frames),
            });
        }
        Ok(TrainItem {
            id,
            labels,
            features: feats,
            wave: keep_audio.then_some(wave),
        })
    }
}

/// Reads every labelled utterance of `manifest` (in parallel, order kept).
pub fn load_train_set(
    manifest: &Manifest,
    frontend: &FrontendConfig,
    keep_audio: bool,
    noise: Vec<Waveform>,
) -> Result<TrainSet> {
    let mel = LogMel::new(frontend.clone())?;
    let items = manifest
        .entries
        .par_iter()
        .map(|e| {
            let lab = e.labels.as_ref().ok_or_else(|| Error::Data {
                utterance: e.id(),
                msg: "no frame labels".into(),
            })?;
            let wave = read_wav(&manifest.resolve(&e.audio))?;
            let labels = read_labels(&manifest.resolve(lab))?;
            TrainItem::new(e.id(), wave, labels, &mel, keep_audio)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainSet {
        items,
        noise,
        frontend: mel,
    })
}

/// Frame labels after resampling the audio by `factor` to `new_len` samples:
/// each new frame takes the label of the original frame nearest its centre.
pub fn remap_labels(labels: &[usize], factor: f64, new_len: usize, cfg: &FrontendConfig) -> Vec<usize> {
    let Some(n) = cfg.frame_count(new_len) else {
        return Vec::new();
    };
    if labels.is_empty() {
        return vec![0; n];
    }
    let half = (cfg.window / 2) as f64;
    (0..n)
        .map(|i| {
            let orig = cfg.frame_center(i) as f64 * factor;
            let j = ((orig - half) / cfg.hop as f64).round().max(0.0) as usize;
            labels[j.min(labels.len() - 1)]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::SAMPLE_RATE;

    #[test]
    fn identity_remap() {
        let cfg = FrontendConfig::default();
        let labels: Vec<usize> = (0..98).map(|i| i % 13).collect();
        assert_eq!(remap_labels(&labels, 1.0, 16000, &cfg), labels);
    }

    #[test]
    fn remap_follows_boundaries() {
        let cfg = FrontendConfig::default();
        let mut labels = vec![0; 50];
        labels.extend(vec![5; 48]);
        let out = remap_labels(&labels, 0.8, 20000, &cfg);
        assert_eq!(out.len(), cfg.frame_count(20000).unwrap());
        let first = out.iter().position(|&c| c == 5).unwrap();
        // boundary at frame 50 moves to about 50 / 0.8
        assert!((first as i64 - 62).abs() <= 1, "{first}");
    }

    #[test]
    fn mismatched_labels_name_the_utterance() {
        let mel = LogMel::new(FrontendConfig::default()).unwrap();
        let w = Waveform::new(vec![0.1; 16000], SAMPLE_RATE).unwrap();
        let err = TrainItem::new("utt_7", w, vec![0; 97], &mel, false).unwrap_err();
        assert!(matches!(&err, Error::Data { utterance, .. } if utterance == "utt_7"));
    }
}
