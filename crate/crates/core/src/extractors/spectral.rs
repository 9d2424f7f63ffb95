use std::sync::{Arc, Mutex};

use super::{check_rates, Extractor};
use crate::error::{Error, Result};
use crate::signal::{MelFilterbank, StftPlan, Waveform, DEFAULT_HOP, DEFAULT_WINDOW};

const MEL_BANDS: usize = 40;
/// Half-width, in mel bands, of the neighbourhood compared per band.
const BAND_CONTEXT: usize = 3;

/// Enrollment-informed soft mask in the STFT domain.
///
/// For every frame and mel band, the gain is the (non-negative) cosine
/// similarity between the frame's local mel envelope around that band and
/// the enrollment's mean envelope over the same bands, floored at `floor`.
/// Envelopes are compared as band magnitudes (square roots of mel power).
#[derive(Debug)]
pub struct SpectralSubtraction {
    floor: f64,
    /// Last enrollment seen and its mean envelope; a search calls the
    /// extractor many times with the same enrollment.
    reference: Mutex<Option<(Waveform, Arc<Vec<f64>>)>>,
}

impl Clone for SpectralSubtraction {
    fn clone(&self) -> Self {
        Self {
            floor: self.floor,
            reference: Mutex::new(None),
        }
    }
}

pub fn make_spectral_subtraction(floor: f64) -> Result<SpectralSubtraction> {
    if !(0.0..1.0).contains(&floor) {
        return Err(Error::Domain(format!("floor {floor} must lie in [0, 1)")));
    }
    Ok(SpectralSubtraction {
        floor,
        reference: Mutex::new(None),
    })
}

impl SpectralSubtraction {
    pub fn floor(&self) -> f64 {
        self.floor
    }

    fn mean_envelope(plan: &StftPlan, bank: &MelFilterbank, enrollment: &Waveform) -> Vec<f64> {
        let frames = if enrollment.len() >= plan.window_size() {
            plan.analyze(enrollment.samples())
        } else {
            plan.analyze_padded(enrollment.samples()).0
        };
        let mut acc = vec![0.0; bank.num_bands()];
        for frame in &frames {
            let power: Vec<f64> = frame.iter().map(|c| c.norm_sqr()).collect();
            for (a, p) in acc.iter_mut().zip(bank.apply(&power)) {
                *a += p;
            }
        }
        let n = frames.len().max(1) as f64;
        acc.into_iter().map(|p| (p / n).sqrt()).collect()
    }

    fn reference(&self, plan: &StftPlan, bank: &MelFilterbank, enrollment: &Waveform) -> Arc<Vec<f64>> {
        let mut cached = self.reference.lock().unwrap_or_else(|p| p.into_inner());
        if let Some((w, env)) = cached.as_ref() {
            if w == enrollment {
                return Arc::clone(env);
            }
        }
        let env = Arc::new(Self::mean_envelope(plan, bank, enrollment));
        *cached = Some((enrollment.clone(), Arc::clone(&env)));
        env
    }

    fn band_gains(&self, envelope: &[f64], reference: &[f64]) -> Vec<f64> {
        let bands = envelope.len();
        (0..bands)
            .map(|b| {
                let lo = b.saturating_sub(BAND_CONTEXT);
                let hi = (b + BAND_CONTEXT + 1).min(bands);
                let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
                for j in lo..hi {
                    xy += envelope[j] * reference[j];
                    xx += envelope[j] * envelope[j];
                    yy += reference[j] * reference[j];
                }
                let cos = if xx > 0.0 && yy > 0.0 {
                    (xy / (xx * yy).sqrt()).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                cos.max(self.floor)
            })
            .collect()
    }
}

impl Extractor for SpectralSubtraction {
    fn name(&self) -> &str {
        "spectral_subtraction"
    }

    fn extract(&self, input: &Waveform, enrollment: &Waveform) -> Result<Waveform> {
        check_rates(input, enrollment)?;
        let plan = StftPlan::shared(DEFAULT_WINDOW, DEFAULT_HOP, DEFAULT_WINDOW)?;
        let bank = MelFilterbank::shared(MEL_BANDS, DEFAULT_WINDOW, input.sample_rate());
        let reference = self.reference(&plan, &bank, enrollment);

        let (mut frames, front) = plan.analyze_padded(input.samples());
        for frame in frames.iter_mut() {
            let power: Vec<f64> = frame.iter().map(|c| c.norm_sqr()).collect();
            let envelope: Vec<f64> = bank.apply(&power).into_iter().map(f64::sqrt).collect();
            let gains = self.band_gains(&envelope, &reference);
            let fill = gains.iter().cloned().fold(f64::INFINITY, f64::min);
            let bin_gains = bank.expand(&gains, fill);
            for (c, g) in frame.iter_mut().zip(bin_gains) {
                *c *= g;
            }
        }
        input.with_samples(plan.synthesize(&frames, front, input.len()))
    }
}
