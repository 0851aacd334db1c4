use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{FrontendConfig, Waveform};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// `n_mels × n_frames`, Mel-major (row `m` holds channel `m` over time).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub n_mels: usize,
    pub n_frames: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn get(&self, mel: usize, frame: usize) -> f64 {
        self.data[mel * self.n_frames + frame]
    }

    /// As a `1 × n_mels × n_frames` tensor.
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        Tensor::new(
            &[1, self.n_mels, self.n_frames],
            self.data.iter().map(|&v| T::of(v)).collect(),
        )
        .expect("feature matrix shape is consistent")
    }
}

/// Precomputed window, FFT plan and triangular filterbank.
#[derive(Clone)]
pub struct LogMel {
    cfg: FrontendConfig,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    /// Per filter: first FFT bin and its weights.
    filters: Vec<(usize, Vec<f64>)>,
    centers_hz: Vec<f64>,
}

impl std::fmt::Debug for LogMel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogMel").field("cfg", &self.cfg).finish()
    }
}

impl LogMel {
    pub fn new(cfg: FrontendConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.window;
        // periodic Hann
        let window = (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(cfg.n_fft);

        let (lo, hi) = (hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max));
        let edges: Vec<f64> = (0..cfg.n_mels + 2)
            .map(|j| mel_to_hz(lo + (hi - lo) * j as f64 / (cfg.n_mels + 1) as f64))
            .collect();
        let bin_hz = cfg.sample_rate as f64 / cfg.n_fft as f64;
        let n_bins = cfg.n_fft / 2 + 1;
        let filters = (0..cfg.n_mels)
            .map(|m| {
                let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
                let weights: Vec<(usize, f64)> = (0..n_bins)
                    .filter_map(|k| {
                        let f = k as f64 * bin_hz;
                        let w = if f > l && f <= c {
                            (f - l) / (c - l)
                        } else if f > c && f < r {
                            (r - f) / (r - c)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect();
                let start = weights.first().map_or(0, |&(k, _)| k);
                (start, weights.into_iter().map(|(_, w)| w).collect())
            })
            .collect();
        let centers_hz = edges[1..=cfg.n_mels].to_vec();
        Ok(LogMel {
            cfg,
            window,
            fft,
            filters,
            centers_hz,
        })
    }

    pub fn config(&self) -> &FrontendConfig {
        &self.cfg
    }

    /// Centre frequency of every filter, ascending.
    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn compute(&self, w: &Waveform) -> Result<FeatureMatrix> {
        let cfg = &self.cfg;
        if w.sample_rate() != cfg.sample_rate {
            return Err(Error::SampleRate {
                got: w.sample_rate(),
                expected: cfg.sample_rate,
            });
        }
        let x = w.samples();
        let n_frames = cfg.frame_count(x.len()).ok_or(Error::Length {
            needed: cfg.window,
            got: x.len(),
        })?;
        let mut data = vec![0.0; cfg.n_mels * n_frames];
        let mut buf = vec![Complex::new(0.0, 0.0); cfg.n_fft];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut power = vec![0.0; cfg.n_fft / 2 + 1];
        for t in 0..n_frames {
            let frame = &x[t * cfg.hop..t * cfg.hop + cfg.window];
            for (b, (s, h)) in buf.iter_mut().zip(frame.iter().zip(&self.window)) {
                *b = Complex::new(s * h, 0.0);
            }
            buf[cfg.window..].fill(Complex::new(0.0, 0.0));
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            for (m, (start, weights)) in self.filters.iter().enumerate() {
                let e: f64 = weights.iter().zip(&power[*start..]).map(|(w, p)| w * p).sum();
                data[m * n_frames + t] = e.max(cfg.log_floor).ln();
            }
        }
        Ok(FeatureMatrix {
            n_mels: cfg.n_mels,
            n_frames,
            data,
        })
    }
}

/// Log-Mel features with the default configuration (no normalisation).
pub fn logmel(w: &Waveform) -> Result<FeatureMatrix> {
    LogMel::new(FrontendConfig::default())?.compute(w)
}

/// Per-channel zero mean, unit variance over the utterance. Constant
/// channels become zero.
pub fn mvn_normalize(f: &mut FeatureMatrix) {
    let n = f.n_frames as f64;
    for row in f.data.chunks_mut(f.n_frames) {
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt().max(1e-5);
        for v in row.iter_mut() {
            *v = (*v - mean) / std;
        }
    }
}
