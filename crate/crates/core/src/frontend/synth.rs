//! Deterministic synthetic keyword corpus with exact frame labels.
//!
//! Each subword class has a two-tone signature (plus a harmonic) jittered
//! per utterance and per segment; filler is shaped noise or a frequency
//! sweep; silence is low-level white noise present throughout.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::manifest::{write_labels, Manifest, ManifestEntry};
use super::{read_wav, write_wav, FrontendConfig, Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::vocab::{default_keywords, KeywordSpec, FILLER, N_CLASSES, SIL};

/// (f1, f2) in Hz per subword class, indexed by `class − 2`.
const SIGNATURES: [(f64, f64); N_CLASSES - 2] = [
    (400.0, 1800.0),
    (700.0, 1200.0),
    (300.0, 2300.0),
    (500.0, 1500.0),
    (450.0, 900.0),
    (350.0, 2000.0),
    (650.0, 1100.0),
    (550.0, 1700.0),
    (380.0, 2600.0),
    (280.0, 1000.0),
    (600.0, 2800.0),
];

const FRAME: usize = 160;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub keywords: Vec<KeywordSpec>,
    pub train_positives: usize,
    pub train_negative_hours: f64,
    pub eval_positives: usize,
    pub eval_negative_hours: f64,
    /// Length of each negative utterance.
    pub negative_seconds: f64,
    /// Length of each noise-bank recording.
    pub noise_seconds: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            keywords: default_keywords(),
            train_positives: 240,
            train_negative_hours: 0.5,
            eval_positives: 200,
            eval_negative_hours: 1.0,
            negative_seconds: 3.0,
            noise_seconds: 5.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.keywords.is_empty() {
            return Err(Error::contract("at least one keyword is required"));
        }
        if !(self.negative_seconds >= 0.5) || !(self.noise_seconds >= 0.5) {
            return Err(Error::contract("utterance and noise lengths must be at least 0.5 s"));
        }
        if !(self.train_negative_hours >= 0.0) || !(self.eval_negative_hours >= 0.0) {
            return Err(Error::contract("negative hours must be non-negative"));
        }
        Ok(())
    }

    fn negative_count(&self, hours: f64) -> usize {
        (hours * 3600.0 / self.negative_seconds).ceil() as usize
    }
}

/// Paths written by [`synth_dataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthOutput {
    pub train_manifest: PathBuf,
    pub eval_manifest: PathBuf,
    pub noise_list: PathBuf,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    class: usize,
    len: usize,
}

fn frames(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> usize {
    rng.random_range(lo..=hi) * FRAME
}

fn positive_layout(kw: &KeywordSpec, rng: &mut ChaCha8Rng) -> Vec<Segment> {
    let mut segs = vec![Segment {
        class: SIL,
        len: frames(rng, 15, 35),
    }];
    if rng.random_bool(0.3) {
        segs.push(Segment {
            class: FILLER,
            len: frames(rng, 20, 50),
        });
        segs.push(Segment {
            class: SIL,
            len: frames(rng, 5, 15),
        });
    }
    for &c in &kw.subword_ids {
        segs.push(Segment {
            class: c,
            len: frames(rng, 12, 22),
        });
    }
    segs.push(Segment {
        class: SIL,
        len: frames(rng, 15, 35),
    });
    segs
}

fn negative_layout(total: usize, rng: &mut ChaCha8Rng) -> Vec<Segment> {
    let mut segs = Vec::new();
    let mut used = 0;
    let mut silence = true;
    while used < total {
        let seg = if silence {
            Segment {
                class: SIL,
                len: frames(rng, 8, 40),
            }
        } else if rng.random_bool(0.12) {
            Segment {
                class: rng.random_range(2..N_CLASSES),
                len: frames(rng, 12, 22),
            }
        } else {
            Segment {
                class: FILLER,
                len: frames(rng, 20, 60),
            }
        };
        let len = seg.len.min(total - used);
        segs.push(Segment { len, ..seg });
        used += len;
        silence = !silence;
    }
    segs
}

fn fade(i: usize, n: usize) -> f64 {
    const RAMP: usize = 80;
    let edge = i.min(n - 1 - i);
    if edge >= RAMP {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge as f64 / RAMP as f64).cos()
    }
}

fn render_subword(class: usize, n: usize, speaker: f64, rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let (b1, b2) = SIGNATURES[class - 2];
    let f1 = b1 * speaker * rng.random_range(0.97..1.03);
    let f2 = b2 * speaker * rng.random_range(0.97..1.03);
    let amp = rng.random_range(0.15..0.3);
    let phases: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI));
    let sr = SAMPLE_RATE as f64;
    for (i, o) in out.iter_mut().enumerate().take(n) {
        let t = i as f64 / sr;
        let s = (2.0 * PI * f1 * t + phases[0]).sin()
            + 0.6 * (2.0 * PI * f2 * t + phases[1]).sin()
            + 0.25 * (2.0 * PI * 2.0 * f1 * t + phases[2]).sin();
        *o += amp * fade(i, n) * s;
    }
}

fn render_filler(n: usize, rng: &mut ChaCha8Rng, out: &mut [f64]) {
    if rng.random_bool(0.5) {
        let a: f64 = rng.random_range(0.2..0.95);
        let rms: f64 = rng.random_range(0.03..0.1);
        let mut y = 0.0;
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                y = a * y + (1.0 - a) * rng.random_range(-1.0..1.0);
                y
            })
            .collect();
        let p = (raw.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt().max(1e-12);
        for (i, (o, r)) in out.iter_mut().zip(&raw).enumerate() {
            *o += rms / p * fade(i, n) * r;
        }
    } else {
        let (fa, fb): (f64, f64) = (rng.random_range(200.0..3500.0), rng.random_range(200.0..3500.0));
        let amp = rng.random_range(0.1..0.25);
        let mut phase = rng.random_range(0.0..2.0 * PI);
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let f = fa + (fb - fa) * i as f64 / n as f64;
            phase += 2.0 * PI * f / SAMPLE_RATE as f64;
            *o += amp * fade(i, n) * phase.sin();
        }
    }
}

/// Renders the layout and returns samples plus one label per frame.
fn render(segs: &[Segment], rng: &mut ChaCha8Rng) -> (Waveform, Vec<usize>) {
    let total: usize = segs.iter().map(|s| s.len).sum();
    let speaker = rng.random_range(0.95..1.05);
    let mut x: Vec<f64> = (0..total).map(|_| rng.random_range(-0.0035..0.0035)).collect();
    let mut start = 0;
    for s in segs {
        let out = &mut x[start..start + s.len];
        match s.class {
            SIL => {}
            FILLER => render_filler(s.len, rng, out),
            c => render_subword(c, s.len, speaker, rng, out),
        }
        start += s.len;
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.95 {
        x.iter_mut().for_each(|v| *v *= 0.95 / peak);
    }
    let cfg = FrontendConfig::default();
    let n_frames = cfg.frame_count(total).unwrap_or(0);
    let mut ends = Vec::with_capacity(segs.len());
    let mut acc = 0;
    for s in segs {
        acc += s.len;
        ends.push((acc, s.class));
    }
    let labels = (0..n_frames)
        .map(|i| {
            let c = cfg.frame_center(i);
            ends.iter().find(|(end, _)| c < *end).map_or(SIL, |&(_, cl)| cl)
        })
        .collect();
    (Waveform::new(x, SAMPLE_RATE).expect("finite synthetic audio"), labels)
}

fn noise_recording(kind: usize, n: usize, rng: &mut ChaCha8Rng) -> Waveform {
    let mut white = || rng.random_range(-1.0..1.0);
    let raw: Vec<f64> = match kind {
        0 => (0..n).map(|_| white()).collect(),
        1 => {
            let mut y = 0.0;
            (0..n)
                .map(|_| {
                    y = 0.995 * y + white();
                    y
                })
                .collect()
        }
        2 => {
            let mut st = [0.0f64; 3];
            (0..n)
                .map(|_| {
                    let w = white();
                    for (s, a) in st.iter_mut().zip([0.5, 0.9, 0.99]) {
                        *s = a * *s + (1.0 - a) * w;
                    }
                    st.iter().sum::<f64>() + 0.1 * w
                })
                .collect()
        }
        _ => (0..n)
            .map(|i| {
                let t = i as f64 / SAMPLE_RATE as f64;
                (1..=6).map(|h| (2.0 * PI * 50.0 * h as f64 * t).sin() / h as f64).sum::<f64>()
                    + 0.3 * white()
            })
            .collect(),
    };
    let rms = (raw.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt().max(1e-12);
    Waveform::new(raw.iter().map(|v| 0.1 * v / rms).collect(), SAMPLE_RATE).expect("finite noise")
}

const NOISE_KINDS: [&str; 4] = ["white", "brown", "pink", "hum"];

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write_split(
    spec: &SynthSpec,
    out_dir: &Path,
    split: &str,
    n_pos: usize,
    neg_hours: f64,
) -> Result<PathBuf> {
    create_dir(&out_dir.join(split))?;
    let n_neg = spec.negative_count(neg_hours);
    let neg_len = (spec.negative_seconds * SAMPLE_RATE as f64).round() as usize;
    let jobs: Vec<(bool, usize)> = (0..n_pos).map(|i| (true, i)).chain((0..n_neg).map(|i| (false, i))).collect();
    let entries = jobs
        .par_iter()
        .map(|&(positive, i)| {
            let tag = format!("{split}/{}", if positive { "pos" } else { "neg" });
            let mut rng = stream_rng(spec.seed, &tag, i as u64);
            let (segs, keyword) = if positive {
                let kw = &spec.keywords[i % spec.keywords.len()];
                (positive_layout(kw, &mut rng), Some(kw.name.clone()))
            } else {
                (negative_layout(neg_len, &mut rng), None)
            };
            let (wave, labels) = render(&segs, &mut rng);
            let stem = format!("{split}/{}_{i:05}", if positive { "pos" } else { "neg" });
            let audio = PathBuf::from(format!("{stem}.wav"));
            let lab = PathBuf::from(format!("{stem}.lab"));
            write_wav(&out_dir.join(&audio), &wave)?;
            write_labels(&out_dir.join(&lab), &labels)?;
            Ok(ManifestEntry {
                audio,
                keyword,
                labels: Some(lab),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let path = out_dir.join(format!("{split}.manifest"));
    Manifest::new(out_dir, entries).save(&path)?;
    Ok(path)
}

/// Writes `train/`, `eval/` and `noise/` under `out_dir` plus
/// `train.manifest`, `eval.manifest` and `noise.list`.
pub fn synth_dataset(spec: &SynthSpec, out_dir: &Path) -> Result<SynthOutput> {
    spec.validate()?;
    create_dir(out_dir)?;
    let train_manifest = write_split(spec, out_dir, "train", spec.train_positives, spec.train_negative_hours)?;
    let eval_manifest = write_split(spec, out_dir, "eval", spec.eval_positives, spec.eval_negative_hours)?;

    create_dir(&out_dir.join("noise"))?;
    let n = (spec.noise_seconds * SAMPLE_RATE as f64).round() as usize;
    let mut list = String::new();
    for (k, name) in NOISE_KINDS.iter().enumerate() {
        let rel = format!("noise/{name}.wav");
        let w = noise_recording(k, n, &mut stream_rng(spec.seed, "noise", k as u64));
        write_wav(&out_dir.join(&rel), &w)?;
        list.push_str(&rel);
        list.push('\n');
    }
    let noise_list = out_dir.join("noise.list");
    std::fs::write(&noise_list, list).map_err(|e| Error::io(&noise_list, e))?;
    Ok(SynthOutput {
        train_manifest,
        eval_manifest,
        noise_list,
    })
}

/// Loads every recording named in a noise list (paths relative to the list).
pub fn load_noise_bank(list: &Path) -> Result<Vec<Waveform>> {
    let text = std::fs::read_to_string(list).map_err(|e| Error::io(list, e))?;
    let base = list.parent().unwrap_or(Path::new(""));
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let p = Path::new(l);
            read_wav(&if p.is_absolute() { p.to_path_buf() } else { base.join(p) })
        })
        .collect()
}
