//! Keyword scoring over per-frame posteriors: a left-to-right automaton per
//! keyword with a free background state, Viterbi updates in log space, and
//! debounced peak events.

mod metrics;

pub use metrics::{det_curve, sweep_threshold, utterance_max, DetCurve, DetPoint, OperatingPoint};

use std::io::Write;

use crate::error::{Error, Result};
pub use crate::vocab::{default_keywords, KeywordSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    /// Minimum frames spent in each subword state.
    pub min_frames: usize,
    /// Frames after a peak during which no further event is emitted.
    pub debounce_frames: usize,
    /// Scores below this never become events.
    pub floor: f64,
    /// Allowed deviation of each frame's posterior sum from 1.
    pub tolerance: f64,
    pub n_classes: usize,
}

impl Default for DecoderParams {
    fn default() -> Self {
        DecoderParams {
            min_frames: 3,
            debounce_frames: 30,
            floor: 0.01,
            tolerance: 1e-6,
            n_classes: crate::vocab::N_CLASSES,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEvent {
    pub keyword: String,
    pub frame_index: usize,
    /// Path-length-normalised probability in [0, 1].
    pub score: f64,
}

/// Best complete path ending at the current frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathScore {
    /// Sum of log posteriors along the keyword part of the path.
    pub raw: f64,
    /// Number of frames in the keyword part of the path.
    pub len: usize,
}

impl PathScore {
    /// `exp(raw / len)`.
    pub fn score(&self) -> f64 {
        (self.raw / self.len as f64).exp()
    }
}

#[derive(Debug, Clone)]
struct Automaton {
    subwords: Vec<usize>,
    /// `(subword, duration slot)` flattened; the last slot self-loops.
    raw: Vec<f64>,
    len: Vec<usize>,
    next_raw: Vec<f64>,
    next_len: Vec<usize>,
    candidate: Option<(usize, f64)>,
}

impl Automaton {
    fn new(spec: &KeywordSpec, m: usize) -> Self {
        let n = spec.subword_ids.len() * m;
        Automaton {
            subwords: spec.subword_ids.clone(),
            raw: vec![f64::NEG_INFINITY; n],
            len: vec![0; n],
            next_raw: vec![f64::NEG_INFINITY; n],
            next_len: vec![0; n],
            candidate: None,
        }
    }

    fn step(&mut self, logp: &[f64], m: usize) {
        for (i, &c) in self.subwords.iter().enumerate() {
            let lp = logp[c];
            let base = i * m;
            let entry = if i == 0 {
                (0.0, 0)
            } else {
                (self.raw[base - 1], self.len[base - 1])
            };
            // slot 0: entered this frame (or self-loop when m == 1)
            let mut first = entry;
            if m == 1 && self.raw[base] > first.0 {
                first = (self.raw[base], self.len[base]);
            }
            self.next_raw[base] = first.0 + lp;
            self.next_len[base] = first.1 + 1;
            for d in 1..m {
                let mut from = (self.raw[base + d - 1], self.len[base + d - 1]);
                if d == m - 1 && self.raw[base + d] > from.0 {
                    from = (self.raw[base + d], self.len[base + d]);
                }
                self.next_raw[base + d] = from.0 + lp;
                self.next_len[base + d] = from.1 + 1;
            }
        }
        std::mem::swap(&mut self.raw, &mut self.next_raw);
        std::mem::swap(&mut self.len, &mut self.next_len);
    }

    fn final_path(&self) -> Option<PathScore> {
        let last = self.raw.len() - 1;
        (self.raw[last] > f64::NEG_INFINITY).then(|| PathScore {
            raw: self.raw[last],
            len: self.len[last],
        })
    }
}

/// Streaming decoder for a fixed keyword set. State is `O(Σ subwords)`.
#[derive(Debug, Clone)]
pub struct KeywordDecoder {
    keywords: Vec<KeywordSpec>,
    params: DecoderParams,
    automata: Vec<Automaton>,
    frame: usize,
    logp: Vec<f64>,
}

impl KeywordDecoder {
    pub fn new(keywords: &[KeywordSpec], params: DecoderParams) -> Result<Self> {
        if params.min_frames == 0 {
            return Err(Error::contract("min_frames must be at least 1"));
        }
        if let Some(k) = keywords
            .iter()
            .find(|k| k.subword_ids.iter().any(|&c| c >= params.n_classes))
        {
            return Err(Error::contract(format!(
                "keyword `{}` uses a class outside 0..{}",
                k.name, params.n_classes
            )));
        }
        let automata = keywords
            .iter()
            .map(|k| Automaton::new(k, params.min_frames))
            .collect();
        Ok(KeywordDecoder {
            keywords: keywords.to_vec(),
            automata,
            frame: 0,
            logp: vec![0.0; params.n_classes],
            params,
        })
    }

    pub fn keywords(&self) -> &[KeywordSpec] {
        &self.keywords
    }

    /// Frames consumed so far.
    pub fn frames_seen(&self) -> usize {
        self.frame
    }

    /// Consumes one posterior frame; returns events that became final.
    pub fn push(&mut self, posterior: &[f64]) -> Result<Vec<DetectionEvent>> {
        if posterior.len() != self.params.n_classes {
            return Err(Error::Dimension {
                op: "decoder frame",
                left: vec![posterior.len()],
                right: vec![self.params.n_classes],
            });
        }
        let sum: f64 = posterior.iter().sum();
        if !((sum - 1.0).abs() <= self.params.tolerance) || posterior.iter().any(|&p| p < 0.0) {
            return Err(Error::contract(format!(
                "posterior frame {} is not normalised (sum {sum})",
                self.frame
            )));
        }
        Ok(self.push_unnormalized(posterior))
    }

    /// As [`KeywordDecoder::push`] without the normalisation check.
    pub fn push_unnormalized(&mut self, posterior: &[f64]) -> Vec<DetectionEvent> {
        for (l, &p) in self.logp.iter_mut().zip(posterior) {
            *l = p.max(f64::MIN_POSITIVE).ln();
        }
        let t = self.frame;
        let (m, debounce, floor) = (self.params.min_frames, self.params.debounce_frames, self.params.floor);
        let mut events = Vec::new();
        for (k, a) in self.automata.iter_mut().enumerate() {
            a.step(&self.logp, m);
            let s = a.final_path().map_or(0.0, |p| p.score());
            match a.candidate {
                Some((_, best)) if s > best => a.candidate = Some((t, s)),
                None if s >= floor => a.candidate = Some((t, s)),
                _ => {}
            }
            if let Some((f, score)) = a.candidate {
                if t - f >= debounce {
                    events.push(DetectionEvent {
                        keyword: self.keywords[k].name.clone(),
                        frame_index: f,
                        score,
                    });
                    a.candidate = None;
                }
            }
        }
        self.frame += 1;
        events
    }

    /// Row-major `T × n_classes` block of frames.
    pub fn push_chunk(&mut self, frames: &[f64]) -> Result<Vec<DetectionEvent>> {
        if !frames.len().is_multiple_of(self.params.n_classes) {
            return Err(Error::contract(format!(
                "chunk of {} values is not a multiple of {} classes",
                frames.len(),
                self.params.n_classes
            )));
        }
        let mut out = Vec::new();
        for f in frames.chunks(self.params.n_classes) {
            out.extend(self.push(f)?);
        }
        Ok(out)
    }

    /// Flushes pending peaks at end of stream.
    pub fn finish(&mut self) -> Vec<DetectionEvent> {
        let mut out: Vec<DetectionEvent> = self
            .automata
            .iter_mut()
            .zip(&self.keywords)
            .filter_map(|(a, k)| {
                a.candidate.take().map(|(f, score)| DetectionEvent {
                    keyword: k.name.clone(),
                    frame_index: f,
                    score,
                })
            })
            .collect();
        out.sort_by_key(|e| e.frame_index);
        out
    }

    /// Best complete path for each keyword ending at the last frame.
    pub fn path_scores(&self) -> Vec<Option<PathScore>> {
        self.automata.iter().map(Automaton::final_path).collect()
    }
}

/// Decodes a whole `T × n_classes` posterior matrix.
pub fn decode_stream(
    posteriors: &[f64],
    keywords: &[KeywordSpec],
    params: &DecoderParams,
) -> Result<Vec<DetectionEvent>> {
    let mut dec = KeywordDecoder::new(keywords, params.clone())?;
    let mut events = dec.push_chunk(posteriors)?;
    events.extend(dec.finish());
    Ok(events)
}

/// Softmax over classes of `n_classes × n_frames` logits (class-major),
/// returned frame-major as `n_frames × n_classes`.
pub fn posteriors_from_logits(logits: &[f64], n_classes: usize) -> Vec<f64> {
    let n_frames = logits.len() / n_classes;
    let mut out = vec![0.0; logits.len()];
    for t in 0..n_frames {
        let row = &mut out[t * n_classes..(t + 1) * n_classes];
        for (c, r) in row.iter_mut().enumerate() {
            *r = logits[c * n_frames + t];
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for r in row.iter_mut() {
            *r = (*r - max).exp();
            z += *r;
        }
        row.iter_mut().for_each(|r| *r /= z);
    }
    out
}

/// `keyword<TAB>frame<TAB>time_s<TAB>score` lines with a header.
pub fn write_events(mut sink: impl Write, events: &[DetectionEvent]) -> std::io::Result<()> {
    writeln!(sink, "keyword\tframe\ttime_s\tscore")?;
    for e in events {
        writeln!(
            sink,
            "{}\t{}\t{:.2}\t{:.6}",
            e.keyword,
            e.frame_index,
            e.frame_index as f64 * 0.01,
            e.score
        )?;
    }
    Ok(())
}
