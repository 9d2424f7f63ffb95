use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;

use super::Waveform;
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 512;
pub const DEFAULT_HOP: usize = 128;

/// Periodic Hann window.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// One-sided short-time spectrum. `frames[t][k]` is bin `k` of frame `t`.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub frames: Vec<Vec<Complex64>>,
    pub window_size: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Power `|X|^2` of every bin, frame-major.
    pub fn power(&self) -> Vec<Vec<f64>> {
        self.frames
            .iter()
            .map(|f| f.iter().map(|c| c.norm_sqr()).collect())
            .collect()
    }
}

/// Precomputed FFT plans and window for a fixed framing.
#[derive(Clone)]
pub struct StftPlan {
    window: Vec<f64>,
    hop: usize,
    fft_size: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

type PlanKey = (usize, usize, usize);

fn plan_cache() -> &'static Mutex<HashMap<PlanKey, Arc<StftPlan>>> {
    static CACHE: OnceLock<Mutex<HashMap<PlanKey, Arc<StftPlan>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

impl std::fmt::Debug for StftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StftPlan")
            .field("window_size", &self.window.len())
            .field("hop", &self.hop)
            .field("fft_size", &self.fft_size)
            .finish()
    }
}

impl StftPlan {
    pub fn new(window_size: usize, hop: usize, fft_size: usize) -> Result<Self> {
        if hop == 0 || hop > window_size {
            return Err(Error::shape(format!(
                "hop {hop} must satisfy 0 < hop <= window {window_size}"
            )));
        }
        if fft_size < window_size {
            return Err(Error::shape(format!(
                "fft size {fft_size} smaller than window {window_size}"
            )));
        }
        let mut planner = RealFftPlanner::new();
        Ok(Self {
            window: hann_window(window_size),
            hop,
            fft_size,
            forward: planner.plan_fft_forward(fft_size),
            inverse: planner.plan_fft_inverse(fft_size),
        })
    }

    /// Process-wide plan for this framing, built on first use.
    pub fn shared(window_size: usize, hop: usize, fft_size: usize) -> Result<Arc<Self>> {
        let key = (window_size, hop, fft_size);
        let mut cache = plan_cache().lock().unwrap_or_else(|p| p.into_inner());
        if let Some(plan) = cache.get(&key) {
            return Ok(Arc::clone(plan));
        }
        let plan = Arc::new(Self::new(window_size, hop, fft_size)?);
        cache.insert(key, Arc::clone(&plan));
        Ok(plan)
    }

    pub fn window_size(&self) -> usize {
        self.window.len()
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn num_frames(&self, len: usize) -> usize {
        if len < self.window.len() {
            0
        } else {
            (len - self.window.len()) / self.hop + 1
        }
    }

    /// Frames fully contained in `samples`; the tail that does not fill a
    /// whole frame is dropped.
    pub fn analyze(&self, samples: &[f64]) -> Vec<Vec<Complex64>> {
        let mut frames = Vec::with_capacity(self.num_frames(samples.len()));
        self.for_each_frame(samples, |spectrum| frames.push(spectrum.to_vec()));
        frames
    }

    /// Like [`analyze`](Self::analyze), but lends each one-sided spectrum to
    /// `f` instead of collecting them.
    pub fn for_each_frame<F: FnMut(&[Complex64])>(&self, samples: &[f64], mut f: F) {
        let win = self.window.len();
        let mut input = self.forward.make_input_vec();
        let mut output = self.forward.make_output_vec();
        let mut scratch = self.forward.make_scratch_vec();
        for t in 0..self.num_frames(samples.len()) {
            let start = t * self.hop;
            input.iter_mut().for_each(|v| *v = 0.0);
            for ((v, &x), &w) in input.iter_mut().zip(&samples[start..start + win]).zip(&self.window) {
                *v = x * w;
            }
            self.forward
                .process_with_scratch(&mut input, &mut output, &mut scratch)
                .expect("buffers come from the plan");
            f(&output);
        }
    }

    /// Zero-pads `samples` so every sample is covered by the same number of
    /// frames, then analyzes. Returns the frames and the front padding.
    pub fn analyze_padded(&self, samples: &[f64]) -> (Vec<Vec<Complex64>>, usize) {
        let win = self.window.len();
        let front = win - self.hop;
        let body = front + samples.len();
        let tail = if body <= win {
            win - body
        } else {
            (self.hop - (body - win) % self.hop) % self.hop
        } + front;
        let mut padded = vec![0.0; front];
        padded.extend_from_slice(samples);
        padded.resize(body + tail, 0.0);
        (self.analyze(&padded), front)
    }

    /// Weighted overlap-add inverse of [`analyze_padded`](Self::analyze_padded),
    /// cropped to `out_len` samples.
    pub fn synthesize(&self, frames: &[Vec<Complex64>], front: usize, out_len: usize) -> Vec<f64> {
        assert_eq!(self.fft_size, self.window.len(), "synthesis needs fft_size == window");
        let win = self.window.len();
        let total = (frames.len().saturating_sub(1)) * self.hop + win;
        let mut acc = vec![0.0; total];
        let mut norm = vec![0.0; total];
        let mut spectrum = self.inverse.make_input_vec();
        let mut output = self.inverse.make_output_vec();
        let mut scratch = self.inverse.make_scratch_vec();
        let bins = spectrum.len();
        let scale = 1.0 / self.fft_size as f64;
        for (t, frame) in frames.iter().enumerate() {
            spectrum.copy_from_slice(frame);
            // A real signal has purely real DC and Nyquist bins.
            spectrum[0].im = 0.0;
            if self.fft_size.is_multiple_of(2) {
                spectrum[bins - 1].im = 0.0;
            }
            self.inverse
                .process_with_scratch(&mut spectrum, &mut output, &mut scratch)
                .expect("buffers come from the plan");
            let start = t * self.hop;
            for n in 0..win {
                let w = self.window[n];
                acc[start + n] += output[n] * scale * w;
                norm[start + n] += w * w;
            }
        }
        (0..out_len)
            .map(|n| {
                let idx = front + n;
                if idx < total && norm[idx] > 1e-12 {
                    acc[idx] / norm[idx]
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Hann-windowed STFT with FFT size equal to the window size.
pub fn stft(w: &Waveform, window_size: usize, hop: usize) -> Result<Spectrogram> {
    if window_size > w.len() {
        return Err(Error::shape(format!(
            "window {window_size} longer than signal ({} samples)",
            w.len()
        )));
    }
    let plan = StftPlan::shared(window_size, hop, window_size)?;
    Ok(Spectrogram {
        frames: plan.analyze(w.samples()),
        window_size,
        hop,
        fft_size: window_size,
        sample_rate: w.sample_rate(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count() {
        let w = Waveform::new(vec![0.0; 400], 16_000).unwrap();
        let s = stft(&w, 256, 128).unwrap();
        assert_eq!(s.num_frames(), 2);
        assert_eq!(s.num_bins(), 129);
    }

    #[test]
    fn silence_gives_zero_frames() {
        let w = Waveform::new(vec![0.0; 2048], 16_000).unwrap();
        let s = stft(&w, 512, 128).unwrap();
        assert!(s.frames.iter().flatten().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn window_longer_than_signal() {
        let w = Waveform::new(vec![0.0; 100], 16_000).unwrap();
        assert!(matches!(stft(&w, 256, 128), Err(Error::Shape(_))));
    }

    #[test]
    fn bad_hop() {
        assert!(StftPlan::new(256, 0, 256).is_err());
        assert!(StftPlan::new(256, 300, 256).is_err());
        assert!(StftPlan::new(256, 64, 128).is_err());
    }

    #[test]
    fn bin_centered_sinusoid() {
        // Periodic Hann: the DFT of a bin-centred tone is 1/2 at the bin and
        // 1/4 at each neighbour, so the peak holds 2/3 of the energy and the
        // three-bin main lobe holds all of it.
        let n = 512;
        let k0 = 40;
        let samples: Vec<f64> = (0..4096)
            .map(|i| (2.0 * PI * k0 as f64 * i as f64 / n as f64).cos())
            .collect();
        let w = Waveform::new(samples, 16_000).unwrap();
        let spec = stft(&w, n, 128).unwrap();
        for frame in spec.power() {
            let total: f64 = frame.iter().sum();
            let (peak, _) = frame
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap();
            assert_eq!(peak, k0);
            let lobe = frame[k0 - 1] + frame[k0] + frame[k0 + 1];
            assert!(lobe / total > 0.9999);
            assert!((frame[k0] / total - 2.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn overlap_add_reconstructs() {
        let plan = StftPlan::new(512, 128, 512).unwrap();
        let samples: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 50.0 - 1.0).collect();
        for len in [1usize, 100, 511, 512, 513, 1000] {
            let x = &samples[..len];
            let (frames, front) = plan.analyze_padded(x);
            let y = plan.synthesize(&frames, front, len);
            assert_eq!(y.len(), len);
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).abs() < 1e-9, "len {len}: {a} vs {b}");
            }
        }
    }
}
