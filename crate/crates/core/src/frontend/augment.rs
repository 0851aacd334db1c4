use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{mean_power, Waveform};
use crate::error::{Error, Result};

/// Gain applied to `noise` so that `clean` sits `snr_db` above it.
pub fn noise_gain(clean_power: f64, noise_power: f64, snr_db: f64) -> f64 {
    (clean_power / (noise_power * 10f64.powf(snr_db / 10.0))).sqrt()
}

/// Adds `noise` (tiled to the length of `clean`) at the requested SNR,
/// then peak-normalises if any sample would leave [−1, 1].
pub fn mix_at_snr(clean: &Waveform, noise: &Waveform, snr_db: f64) -> Result<Waveform> {
    if !snr_db.is_finite() {
        return Err(Error::contract(format!("SNR must be finite, got {snr_db}")));
    }
    let pc = clean.power();
    if pc <= 0.0 {
        return Err(Error::contract("clean signal has zero power"));
    }
    if noise.is_empty() {
        return Err(Error::contract("noise signal is empty"));
    }
    let seg: Vec<f64> = noise.samples().iter().cycle().take(clean.len()).copied().collect();
    let pn = mean_power(&seg);
    if pn <= 0.0 {
        return Err(Error::contract("noise segment has zero power"));
    }
    let g = noise_gain(pc, pn, snr_db);
    let mut out: Vec<f64> = clean.samples().iter().zip(&seg).map(|(c, n)| c + g * n).collect();
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 1.0 {
        out.iter_mut().for_each(|v| *v /= peak);
    }
    Waveform::new(out, clean.sample_rate())
}

/// Resamples by linear interpolation; `factor > 1` speeds up (shorter output).
pub fn speed_perturb(w: &Waveform, factor: f64) -> Result<Waveform> {
    if !(0.8..=1.2).contains(&factor) {
        return Err(Error::contract(format!("speed factor {factor} outside [0.8, 1.2]")));
    }
    let x = w.samples();
    let n_out = (x.len() as f64 / factor).round() as usize;
    let out = (0..n_out)
        .map(|i| {
            let pos = i as f64 * factor;
            let j = pos.floor() as usize;
            if j + 1 >= x.len() {
                return x[x.len() - 1];
            }
            let frac = pos - j as f64;
            x[j] + frac * (x[j + 1] - x[j])
        })
        .collect();
    Waveform::new(out, w.sample_rate())
}

/// `N(mean, std)` clamped to `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrDistribution {
    pub mean: f64,
    pub std: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Default for SnrDistribution {
    /// Centred at 12.5 dB, clipped to [0, 25] dB; the bounds sit at ±2σ.
    fn default() -> Self {
        SnrDistribution {
            mean: 12.5,
            std: 6.25,
            lo: 0.0,
            hi: 25.0,
        }
    }
}

impl SnrDistribution {
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let normal = Normal::new(self.mean, self.std).expect("finite positive std");
        normal.sample(rng).clamp(self.lo, self.hi)
    }
}
