//! End-to-end measurement: audio → features → encoder → decoder → FRR at
//! fixed FA/h, DET curves, clean and noisy conditions, variant sweeps.

mod report;
mod sweep;

pub use report::{parse_det, write_det, DetBlocks, EvalMeta, EvalReport, KeywordResult};
pub use sweep::{variant_sweep, SweepConfig, SweepRow, SweepTable};

use std::fmt;

use rand::Rng;
use rayon::prelude::*;

use crate::decoder::{
    decode_stream, det_curve, posteriors_from_logits, sweep_threshold, utterance_max, DecoderParams,
    DetectionEvent, KeywordSpec,
};
use crate::encoder::Model;
use crate::error::{Error, Result};
use crate::frontend::{
    features, mix_at_snr, read_wav, FrontendConfig, LogMel, Manifest, ManifestEntry, SnrDistribution, Waveform,
};
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::vocab::default_keywords;

pub const FA_TARGETS: [f64; 4] = [0.1, 0.2, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SnrSetting {
    Fixed(f64),
    Drawn(SnrDistribution),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Condition {
    Clean,
    /// Every utterance is mixed with a noise-bank recording first.
    Noisy(SnrSetting),
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Clean => f.write_str("clean"),
            Condition::Noisy(SnrSetting::Fixed(db)) => write!(f, "noisy(snr={db}dB)"),
            Condition::Noisy(SnrSetting::Drawn(d)) => {
                write!(f, "noisy(snr~N({},{})[{},{}])", d.mean, d.std, d.lo, d.hi)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub keywords: Vec<KeywordSpec>,
    pub decoder: DecoderParams,
    pub frontend: FrontendConfig,
    pub condition: Condition,
    pub seed: u64,
    pub targets: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            keywords: default_keywords(),
            decoder: DecoderParams::default(),
            frontend: FrontendConfig::default(),
            condition: Condition::Clean,
            seed: 0,
            targets: FA_TARGETS.to_vec(),
        }
    }
}

/// Decoder events for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceResult {
    pub id: String,
    pub keyword: Option<String>,
    pub seconds: f64,
    pub events: Vec<DetectionEvent>,
}

fn data_err(e: &ManifestEntry, err: Error) -> Error {
    match err {
        Error::Data { .. } => err,
        other => Error::Data {
            utterance: e.id(),
            msg: other.to_string(),
        },
    }
}

/// Mixes `w` with a bank recording chosen, offset and scaled by a stream
/// derived from `(seed, utterance id)`.
pub fn apply_condition(w: &Waveform, id: &str, cond: &Condition, seed: u64, noise: &[Waveform]) -> Result<Waveform> {
    let setting = match cond {
        Condition::Clean => return Ok(w.clone()),
        Condition::Noisy(s) => s,
    };
    if noise.is_empty() {
        return Err(Error::contract("noisy condition needs a non-empty noise bank"));
    }
    let mut rng = stream_rng(seed, &format!("eval-noise/{id}"), 0);
    let rec = &noise[rng.random_range(0..noise.len())];
    let mut samples = rec.samples().to_vec();
    let shift = rng.random_range(0..samples.len());
    samples.rotate_left(shift);
    let snr = match setting {
        SnrSetting::Fixed(db) => *db,
        SnrSetting::Drawn(d) => d.sample(&mut rng),
    };
    if w.power() <= 0.0 {
        return Ok(w.clone());
    }
    mix_at_snr(w, &Waveform::new(samples, rec.sample_rate())?, snr)
}

/// Posteriors (`T × n_classes`, frame-major) for a waveform.
pub fn model_posteriors<T: Scalar>(model: &Model<T>, mel: &LogMel, w: &Waveform) -> Result<Vec<f64>> {
    let f = features(mel, w)?;
    let logits = model.logits(&f.to_tensor())?;
    let data: Vec<f64> = logits.data().iter().map(|v| v.as_f64()).collect();
    Ok(posteriors_from_logits(&data, model.config().n_classes))
}

/// Runs the model and decoder over every entry, in parallel, keeping order.
pub fn run_utterances<T: Scalar>(
    model: &Model<T>,
    manifest: &Manifest,
    cfg: &EvalConfig,
    noise: &[Waveform],
) -> Result<Vec<UtteranceResult>> {
    let mel = LogMel::new(cfg.frontend.clone())?;
    manifest
        .entries
        .par_iter()
        .map(|e| {
            let w = read_wav(&manifest.resolve(&e.audio)).map_err(|err| data_err(e, err))?;
            let w = apply_condition(&w, &e.id(), &cfg.condition, cfg.seed, noise)?;
            let post = model_posteriors(model, &mel, &w).map_err(|err| data_err(e, err))?;
            Ok(UtteranceResult {
                id: e.id(),
                keyword: e.keyword.clone(),
                seconds: w.duration_secs(),
                events: decode_stream(&post, &cfg.keywords, &cfg.decoder)?,
            })
        })
        .collect()
}

/// Builds a report from decoded utterances. Positives must name one of the
/// configured keywords; negatives supply the FA/h denominator.
pub fn report_from_results(
    pos: &[UtteranceResult],
    neg: &[UtteranceResult],
    cfg: &EvalConfig,
    mut meta: EvalMeta,
) -> Result<EvalReport> {
    let neg_seconds: f64 = neg.iter().map(|u| u.seconds).sum();
    if !(neg_seconds > 0.0) {
        return Err(Error::contract("negative set has zero total duration"));
    }
    let hours = neg_seconds / 3600.0;
    if let Some(u) = pos
        .iter()
        .find(|u| !cfg.keywords.iter().any(|k| Some(&k.name) == u.keyword.as_ref()))
    {
        return Err(Error::Data {
            utterance: u.id.clone(),
            msg: format!("positive keyword {:?} is not being evaluated", u.keyword),
        });
    }
    let neg_events: Vec<Vec<DetectionEvent>> = neg.iter().map(|u| u.events.clone()).collect();
    let mut per_keyword = Vec::new();
    for k in &cfg.keywords {
        let pos_events: Vec<Vec<DetectionEvent>> = pos
            .iter()
            .filter(|u| u.keyword.as_deref() == Some(k.name.as_str()))
            .map(|u| u.events.clone())
            .collect();
        let ps = utterance_max(&pos_events, &k.name);
        let ns = utterance_max(&neg_events, &k.name);
        per_keyword.push(KeywordResult {
            keyword: k.name.clone(),
            positives: ps.len(),
            points: sweep_threshold(&ps, &ns, hours, &cfg.targets)?,
            det: det_curve(&ps, &ns, hours)?,
        });
    }
    meta.condition = cfg.condition.to_string();
    meta.seed = cfg.seed;
    meta.positives = pos.len();
    meta.negatives = neg.len();
    meta.negative_hours = hours;
    Ok(EvalReport {
        meta,
        targets: cfg.targets.clone(),
        per_keyword,
    })
}

/// Full evaluation of `model` on positive and negative manifests.
pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    pos: &Manifest,
    neg: &Manifest,
    cfg: &EvalConfig,
    noise: &[Waveform],
) -> Result<EvalReport> {
    let p = run_utterances(model, pos, cfg, noise)?;
    let n = run_utterances(model, neg, cfg, noise)?;
    let c = model.config();
    let meta = EvalMeta {
        variant: c.variant.to_string(),
        width: c.width,
        param_count: model.param_count(),
        ..EvalMeta::default()
    };
    report_from_results(&p, &n, cfg, meta)
}

/// Evaluation with externally supplied posteriors in place of the model.
/// Each utterance is `(keyword or None, seconds, T × n_classes posteriors)`.
pub fn evaluate_posteriors(
    utterances: &[(Option<String>, f64, Vec<f64>)],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let results = utterances
        .iter()
        .enumerate()
        .map(|(i, (kw, secs, post))| {
            Ok(UtteranceResult {
                id: format!("utt{i}"),
                keyword: kw.clone(),
                seconds: *secs,
                events: decode_stream(post, &cfg.keywords, &cfg.decoder)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (pos, neg): (Vec<_>, Vec<_>) = results.into_iter().partition(|u| u.keyword.is_some());
    let meta = EvalMeta {
        variant: "injected".into(),
        ..EvalMeta::default()
    };
    report_from_results(&pos, &neg, cfg, meta)
}
