//! Evaluation and scoring quantities: SI-SDR / SI-SDRi, a spectral speaker
//! embedding with cosine similarity, and a flatness-based quality proxy.
//!
//! The embedding and the quality proxy are deterministic stand-ins for a
//! neural speaker encoder and a neural MOS predictor. Real models attach
//! through the external worker protocol instead.

use crate::error::{Error, Result};
use crate::signal::{dot, mean, MelFilterbank, StftPlan, Waveform, DEFAULT_HOP, DEFAULT_WINDOW};

/// Relative floor added to both energies in the SI-SDR ratio, in units of
/// the centered estimate energy.
pub const SI_SDR_EPS: f64 = 1e-8;
/// References with less (centered) energy than this are rejected.
pub const REFERENCE_ENERGY_FLOOR: f64 = 1e-12;

/// Scale-invariant signal-to-distortion ratio in dB.
///
/// Both energies get a floor of `SI_SDR_EPS * ||estimate||^2` (centered), so
/// the value is exactly invariant to positive scaling of the estimate and a
/// perfect estimate reads just above 80 dB. A silent estimate falls back to
/// an absolute floor of `SI_SDR_EPS`.
pub fn si_sdr(estimate: &Waveform, reference: &Waveform) -> Result<f64> {
    estimate.ensure_compatible(reference, "si_sdr")?;
    let est_mean = mean(estimate.samples());
    let ref_mean = mean(reference.samples());
    let est: Vec<f64> = estimate.samples().iter().map(|v| v - est_mean).collect();
    let reference: Vec<f64> = reference.samples().iter().map(|v| v - ref_mean).collect();

    let ref_energy = dot(&reference, &reference);
    if ref_energy < REFERENCE_ENERGY_FLOOR {
        return Err(Error::DegenerateReference(ref_energy));
    }
    let alpha = dot(&est, &reference) / ref_energy;
    let mut target_energy = 0.0;
    let mut noise_energy = 0.0;
    for (e, r) in est.iter().zip(&reference) {
        let t = alpha * r;
        target_energy += t * t;
        noise_energy += (e - t) * (e - t);
    }
    let est_energy = dot(&est, &est);
    let floor = if est_energy > 0.0 {
        SI_SDR_EPS * est_energy
    } else {
        SI_SDR_EPS
    };
    Ok(10.0 * ((target_energy + floor) / (noise_energy + floor)).log10())
}

/// SI-SDR improvement of `estimate` over `mixture` against `reference`.
pub fn si_sdri(estimate: &Waveform, mixture: &Waveform, reference: &Waveform) -> Result<f64> {
    Ok(si_sdr(estimate, reference)? - si_sdr(mixture, reference)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingConfig {
    pub num_bands: usize,
    pub window_ms: f64,
    pub hop_ms: f64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            num_bands: 40,
            window_ms: 25.0,
            hop_ms: 10.0,
        }
    }
}

impl EmbeddingConfig {
    pub fn dims(&self) -> usize {
        2 * self.num_bands
    }

    fn frame_lengths(&self, sample_rate: u32) -> (usize, usize) {
        let sr = f64::from(sample_rate);
        let win = (sr * self.window_ms / 1000.0).round().max(2.0) as usize;
        let hop = ((sr * self.hop_ms / 1000.0).round() as usize).clamp(1, win);
        (win, hop)
    }
}

/// L2-normalized summary of a log-mel spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerEmbedding {
    vector: Vec<f64>,
}

impl SpeakerEmbedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.vector
    }

    pub fn cosine(&self, other: &SpeakerEmbedding) -> f64 {
        // Both are unit vectors; clamp guards against rounding just past 1.
        dot(&self.vector, &other.vector).clamp(-1.0, 1.0)
    }
}

/// Log-mel band powers for every frame, plus the plan used.
pub(crate) fn log_mel_frames(w: &Waveform, num_bands: usize, window: usize, hop: usize) -> Result<Vec<Vec<f64>>> {
    if w.len() < window {
        return Err(Error::shape(format!(
            "signal of {} samples is shorter than one analysis window ({window})",
            w.len()
        )));
    }
    let fft = window.next_power_of_two();
    let plan = StftPlan::shared(window, hop, fft)?;
    let bank = MelFilterbank::shared(num_bands, fft, w.sample_rate());
    let mut power = Vec::new();
    let mut frames = Vec::with_capacity(plan.num_frames(w.len()));
    plan.for_each_frame(w.samples(), |spectrum| {
        power.clear();
        power.extend(spectrum.iter().map(|c| c.norm_sqr()));
        frames.push(bank.apply(&power).iter().map(|&p| (p + 1e-10).ln()).collect());
    });
    Ok(frames)
}

/// Per-band mean (level-normalized across bands) and standard deviation of
/// the log-mel spectrogram, concatenated and scaled to unit length.
///
/// Silence, or any input whose statistics vanish, maps to a fixed unit
/// vector so near-silent candidates remain scoreable.
pub fn embed_speaker(w: &Waveform, config: &EmbeddingConfig) -> Result<SpeakerEmbedding> {
    let (window, hop) = config.frame_lengths(w.sample_rate());
    let frames = log_mel_frames(w, config.num_bands, window, hop)?;
    let bands = config.num_bands;
    let n = frames.len() as f64;

    let mut means = vec![0.0; bands];
    for frame in &frames {
        for (m, v) in means.iter_mut().zip(frame) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut stds = vec![0.0; bands];
    for frame in &frames {
        for ((s, v), m) in stds.iter_mut().zip(frame).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    stds.iter_mut().for_each(|s| *s = (*s / n).sqrt());

    let level = mean(&means);
    let mut vector: Vec<f64> = means.iter().map(|m| m - level).chain(stds).collect();
    let norm = dot(&vector, &vector).sqrt();
    if norm < 1e-9 {
        let v = 1.0 / (vector.len() as f64).sqrt();
        vector.iter_mut().for_each(|x| *x = v);
    } else {
        vector.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(SpeakerEmbedding { vector })
}

/// Cosine similarity of the two speaker embeddings.
pub fn spk_sim(a: &Waveform, b: &Waveform, config: &EmbeddingConfig) -> Result<f64> {
    Ok(embed_speaker(a, config)?.cosine(&embed_speaker(b, config)?))
}

/// Mean amplitude-spectrum flatness over Hann frames, in `[0, 1]`.
pub fn spectral_flatness(w: &Waveform) -> Result<f64> {
    if w.len() < DEFAULT_WINDOW {
        return Err(Error::shape(format!(
            "signal of {} samples is shorter than one STFT window ({DEFAULT_WINDOW})",
            w.len()
        )));
    }
    let plan = StftPlan::shared(DEFAULT_WINDOW, DEFAULT_HOP, DEFAULT_WINDOW)?;
    let mut mags = Vec::new();
    let mut total = 0.0;
    plan.for_each_frame(w.samples(), |spectrum| {
        mags.clear();
        mags.extend(spectrum.iter().map(|c| c.norm_sqr().sqrt()));
        total += frame_flatness(&mags);
    });
    Ok(total / plan.num_frames(w.len()) as f64)
}

/// Bins multiplied together before taking one logarithm. Normalized
/// magnitudes are at least 1e-10, so a product of this many stays far
/// above the smallest positive f64.
const LOG_CHUNK: usize = 16;

fn frame_flatness(mags: &[f64]) -> f64 {
    let peak = mags.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return 1.0;
    }
    // Magnitudes relative to the peak, with a relative floor, keep the
    // measure scale-free.
    let n = mags.len() as f64;
    let mut log_sum = 0.0;
    let mut sum = 0.0;
    for chunk in mags.chunks(LOG_CHUNK) {
        let mut prod = 1.0;
        for m in chunk {
            let x = m / peak + 1e-10;
            prod *= x;
            sum += x;
        }
        log_sum += prod.ln();
    }
    ((log_sum / n).exp() / (sum / n)).clamp(0.0, 1.0)
}

/// Quality score on a MOS-like `[1, 5]` scale: `5 - 4 * flatness`.
pub fn quality_proxy(w: &Waveform) -> Result<f64> {
    Ok((5.0 - 4.0 * spectral_flatness(w)?).clamp(1.0, 5.0))
}
