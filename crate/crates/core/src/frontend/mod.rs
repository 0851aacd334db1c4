//! 16 kHz audio to 40-dim log-Mel frames, plus augmentation, WAV I/O,
//! manifests and the synthetic corpus generator.

mod augment;
mod manifest;
mod mel;
mod synth;
mod wav;

pub use augment::{mix_at_snr, noise_gain, speed_perturb, SnrDistribution};
pub use manifest::{read_labels, write_labels, Manifest, ManifestEntry, NEGATIVE};
pub use mel::{logmel, mvn_normalize, FeatureMatrix, LogMel};
pub use synth::{load_noise_bank, synth_dataset, SynthOutput, SynthSpec};
pub use wav::{read_wav, wav_duration_secs, write_wav};

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate != SAMPLE_RATE {
            return Err(Error::SampleRate {
                got: sample_rate,
                expected: SAMPLE_RATE,
            });
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::contract(format!("non-finite sample at index {i}")));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn power(&self) -> f64 {
        mean_power(&self.samples)
    }
}

pub(crate) fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Front-end parameters. Defaults: 25 ms Hann window, 10 ms hop,
/// 512-point FFT, 40 Mel filters over 20–7600 Hz, log floor 1e-10,
/// per-utterance mean/variance normalisation on.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontendConfig {
    pub sample_rate: u32,
    pub window: usize,
    pub hop: usize,
    pub n_fft: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub log_floor: f64,
    pub mvn: bool,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        FrontendConfig {
            sample_rate: SAMPLE_RATE,
            window: 400,
            hop: 160,
            n_fft: 512,
            n_mels: 40,
            f_min: 20.0,
            f_max: 7600.0,
            log_floor: 1e-10,
            mvn: true,
        }
    }
}

impl FrontendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.hop == 0 || self.n_mels == 0 {
            return Err(Error::contract("window, hop and n_mels must be positive"));
        }
        if self.n_fft < self.window {
            return Err(Error::contract(format!(
                "n_fft {} is shorter than the window {}",
                self.n_fft, self.window
            )));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(0.0 <= self.f_min && self.f_min < self.f_max && self.f_max <= nyquist) {
            return Err(Error::contract(format!(
                "Mel range {}..{} Hz is invalid for {} Hz audio",
                self.f_min, self.f_max, self.sample_rate
            )));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::contract("log floor must be positive"));
        }
        Ok(())
    }

    /// `floor((n − window)/hop) + 1`, or `None` when `n < window`.
    pub fn frame_count(&self, n_samples: usize) -> Option<usize> {
        (n_samples >= self.window).then(|| (n_samples - self.window) / self.hop + 1)
    }

    /// Sample index at the centre of frame `i`.
    pub fn frame_center(&self, i: usize) -> usize {
        i * self.hop + self.window / 2
    }
}

/// Log-Mel features followed by optional mean/variance normalisation.
pub fn features(mel: &LogMel, w: &Waveform) -> Result<FeatureMatrix> {
    let mut f = mel.compute(w)?;
    if mel.config().mvn {
        mvn_normalize(&mut f);
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waveform_validation() {
        assert!(matches!(
            Waveform::new(vec![0.0; 10], 8000),
            Err(Error::SampleRate { got: 8000, .. })
        ));
        assert!(Waveform::new(vec![0.0, f64::NAN], SAMPLE_RATE).is_err());
        let w = Waveform::new(vec![0.5; 16000], SAMPLE_RATE).unwrap();
        assert_eq!(w.duration_secs(), 1.0);
        assert_eq!(w.power(), 0.25);
    }

    #[test]
    fn config_validation() {
        assert!(FrontendConfig::default().validate().is_ok());
        let bad = FrontendConfig {
            f_max: 9000.0,
            ..FrontendConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FrontendConfig {
            n_fft: 256,
            ..FrontendConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn frame_count_arithmetic() {
        let cfg = FrontendConfig::default();
        assert_eq!(cfg.frame_count(16000), Some(98));
        assert_eq!(cfg.frame_count(400), Some(1));
        assert_eq!(cfg.frame_count(399), None);
        assert_eq!(cfg.frame_center(0), 200);
    }
}
