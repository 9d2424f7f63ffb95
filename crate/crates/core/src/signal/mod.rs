//! Mono waveforms, the interpolation primitive used to build candidate
//! inputs, and the small amount of vector algebra the rest of the crate
//! relies on.

mod mel;
mod stft;
mod wav;

pub use mel::MelFilterbank;
pub use stft::{hann_window, stft, Spectrogram, StftPlan, DEFAULT_HOP, DEFAULT_WINDOW};
pub use wav::{load_wav, save_wav};

use crate::error::{Error, Result};

/// Default processing rate for every run.
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// A mono sampled signal. Samples are finite and the buffer is never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidWaveform("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidWaveform("no samples".into()));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidWaveform(format!("non-finite sample at index {pos}")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn from_f32(samples: &[f32], sample_rate: u32) -> Result<Self> {
        Self::new(samples.iter().map(|&v| f64::from(v)).collect(), sample_rate)
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

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn energy(&self) -> f64 {
        dot(&self.samples, &self.samples)
    }

    /// Rounds every sample to the nearest `f32`, i.e. onto the grid that
    /// survives a float WAV round trip.
    pub fn quantize_f32(&self) -> Self {
        Self {
            samples: self.samples.iter().map(|&v| f64::from(v as f32)).collect(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.samples.iter().map(|&v| v as f32).collect()
    }

    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, self.sample_rate)
    }

    pub fn ensure_compatible(&self, other: &Waveform, what: &str) -> Result<()> {
        if self.sample_rate != other.sample_rate {
            return Err(Error::shape(format!(
                "{what}: sample rates differ ({} vs {} Hz)",
                self.sample_rate, other.sample_rate
            )));
        }
        if self.len() != other.len() {
            return Err(Error::shape(format!(
                "{what}: lengths differ ({} vs {})",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }
}

/// Candidate input `r * x0 + (1 - r) * prev`.
///
/// The endpoints are copied rather than computed, so `r = 1` reproduces the
/// mixture and `r = 0` the previous estimate bit for bit.
pub fn interpolate(x0: &Waveform, prev: &Waveform, r: f64) -> Result<Waveform> {
    x0.ensure_compatible(prev, "interpolate")?;
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!("interpolation coefficient {r} outside [0, 1]")));
    }
    if r == 1.0 {
        return Ok(x0.clone());
    }
    if r == 0.0 {
        return Ok(prev.clone());
    }
    let keep = 1.0 - r;
    let samples = x0
        .samples
        .iter()
        .zip(&prev.samples)
        .map(|(&a, &b)| r * a + keep * b)
        .collect();
    Ok(Waveform {
        samples,
        sample_rate: x0.sample_rate,
    })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Euclidean distance between two equal-length buffers.
pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn mean(a: &[f64]) -> f64 {
    if a.is_empty() {
        0.0
    } else {
        a.iter().sum::<f64>() / a.len() as f64
    }
}
