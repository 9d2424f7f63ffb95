//! Two-talker scenes with a known decomposition.
//!
//! Each synthetic "speaker" is a harmonic source with its own pitch contour
//! and formant envelope, amplitude-modulated at a syllabic rate. A scene
//! mixes one utterance of the target with one of an interferer at a
//! requested SNR and adds a separate enrollment utterance of the target.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signal::{dot, load_wav, mean, Waveform};

/// Mixture plus its ground-truth parts.
#[derive(Debug, Clone)]
pub struct MixtureScene {
    pub mixture: Waveform,
    pub target: Waveform,
    pub interference: Option<Waveform>,
    pub enrollment: Waveform,
    pub snr_db: Option<f64>,
}

impl MixtureScene {
    pub fn new(
        mixture: Waveform,
        target: Waveform,
        interference: Option<Waveform>,
        enrollment: Waveform,
        snr_db: Option<f64>,
    ) -> Result<Self> {
        mixture.ensure_compatible(&target, "scene target")?;
        if let Some(i) = &interference {
            mixture.ensure_compatible(i, "scene interference")?;
        }
        if enrollment.sample_rate() != mixture.sample_rate() {
            return Err(Error::shape(format!(
                "enrollment rate {} differs from mixture rate {}",
                enrollment.sample_rate(),
                mixture.sample_rate()
            )));
        }
        Ok(Self {
            mixture,
            target,
            interference,
            enrollment,
            snr_db,
        })
    }

    pub fn load(
        mixture: impl AsRef<Path>,
        target: impl AsRef<Path>,
        interference: Option<&Path>,
        enrollment: impl AsRef<Path>,
    ) -> Result<Self> {
        let interference = interference.map(load_wav).transpose()?;
        Self::new(
            load_wav(mixture)?,
            load_wav(target)?,
            interference,
            load_wav(enrollment)?,
            None,
        )
    }

    pub fn sample_rate(&self) -> u32 {
        self.mixture.sample_rate()
    }

    /// `|<s, i>| / (|s| |i|)`, or `None` without an interference signal.
    pub fn orthogonality(&self) -> Option<f64> {
        let i = self.interference.as_ref()?;
        let s = self.target.samples();
        let i = i.samples();
        let denom = (dot(s, s) * dot(i, i)).sqrt();
        Some(if denom == 0.0 { 0.0 } else { dot(s, i).abs() / denom })
    }
}

/// Parameters for [`synthesize_scene`].
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub duration_secs: f64,
    pub sample_rate: u32,
    pub snr_db: f64,
    /// Remove the target component from the interference (Gram-Schmidt),
    /// as the leaky-linear oracle requires.
    pub orthogonalize: bool,
}

impl SceneSpec {
    pub fn new(seed: u64, duration_secs: f64, snr_db: f64) -> Self {
        Self {
            seed,
            duration_secs,
            sample_rate: crate::signal::DEFAULT_SAMPLE_RATE,
            snr_db,
            orthogonalize: true,
        }
    }
}

const TARGET_RMS: f64 = 0.1;

#[derive(Debug, Clone)]
struct SpeakerTemplate {
    f0: f64,
    vibrato_depth: f64,
    vibrato_rate: f64,
    formants: [(f64, f64); 3],
    tilt: f64,
    syllable_rate: f64,
    breath: f64,
}

impl SpeakerTemplate {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        Self {
            f0: rng.random_range(85.0..260.0),
            vibrato_depth: rng.random_range(0.03..0.12),
            vibrato_rate: rng.random_range(2.0..5.0),
            formants: [
                (rng.random_range(300.0..900.0), rng.random_range(60.0..140.0)),
                (rng.random_range(900.0..2400.0), rng.random_range(80.0..200.0)),
                (rng.random_range(2300.0..3600.0), rng.random_range(120.0..300.0)),
            ],
            tilt: rng.random_range(0.6..1.4),
            syllable_rate: rng.random_range(3.0..6.0),
            breath: rng.random_range(0.005..0.02),
        }
    }

    /// Log-domain distance used to keep the two talkers of a scene apart.
    fn distance(&self, other: &Self) -> (f64, f64) {
        let pitch = (self.f0 / other.f0).ln().abs();
        let formant = self
            .formants
            .iter()
            .zip(&other.formants)
            .map(|(a, b)| (a.0 / b.0).ln().abs())
            .sum::<f64>()
            / 3.0;
        (pitch, formant)
    }

    fn envelope(&self, freq: f64) -> f64 {
        let resonances: f64 = self
            .formants
            .iter()
            .enumerate()
            .map(|(n, &(center, bw))| {
                let x = (freq - center) / bw;
                (1.0 / (1.0 + n as f64)) / (1.0 + x * x)
            })
            .sum();
        (0.02 + resonances) * (1.0 + freq / 500.0).powf(-self.tilt)
    }

    fn utterance(&self, rng: &mut ChaCha8Rng, len: usize, sample_rate: u32) -> Vec<f64> {
        let sr = f64::from(sample_rate);
        let top = (0.45 * sr).min(5000.0);
        let vib_phase = rng.random_range(0.0..2.0 * PI);
        let syl_phase = rng.random_range(0.0..2.0 * PI);
        let drift = rng.random_range(-0.08..0.08);
        let syl_rate = self.syllable_rate * rng.random_range(0.85..1.15);
        let harmonics = (top / (self.f0 * 0.8)).floor() as usize;
        let phases: Vec<f64> = (0..harmonics).map(|_| rng.random_range(0.0..2.0 * PI)).collect();

        let mut base_phase = 0.0;
        let mut out = Vec::with_capacity(len);
        for n in 0..len {
            let t = n as f64 / sr;
            let progress = n as f64 / len as f64;
            let f0 = self.f0
                * (1.0 + drift * progress)
                * (1.0 + self.vibrato_depth * (2.0 * PI * self.vibrato_rate * t + vib_phase).sin());
            base_phase += 2.0 * PI * f0 / sr;
            let mut v = 0.0;
            for (h, ph) in phases.iter().enumerate() {
                let fh = f0 * (h + 1) as f64;
                if fh >= top {
                    break;
                }
                v += self.envelope(fh) * ((h + 1) as f64 * base_phase + ph).sin();
            }
            let syllable = 0.5 - 0.5 * (2.0 * PI * syl_rate * t + syl_phase).cos();
            let gain = 0.1 + 0.9 * syllable;
            let breath = self.breath * rng.random_range(-1.0..1.0);
            out.push(gain * (v + breath));
        }
        out
    }
}

fn draw_distinct_pair(rng: &mut ChaCha8Rng) -> (SpeakerTemplate, SpeakerTemplate) {
    let target = SpeakerTemplate::draw(rng);
    loop {
        let other = SpeakerTemplate::draw(rng);
        let (pitch, formant) = target.distance(&other);
        if pitch > 0.2 && formant > 0.12 {
            return (target, other);
        }
    }
}

fn center_and_scale(mut v: Vec<f64>, rms: f64) -> Vec<f64> {
    let m = mean(&v);
    v.iter_mut().for_each(|x| *x -= m);
    let current = (dot(&v, &v) / v.len() as f64).sqrt();
    if current > 0.0 {
        v.iter_mut().for_each(|x| *x *= rms / current);
    }
    v
}

/// Deterministic two-talker scene. All four signals are rounded to the
/// `f32` grid so that writing them to float WAV files is lossless.
pub fn synthesize_scene(spec: &SceneSpec) -> Result<MixtureScene> {
    if !(spec.duration_secs >= 0.5) {
        return Err(Error::Domain(format!(
            "scene duration {} s is below the 0.5 s minimum",
            spec.duration_secs
        )));
    }
    if !spec.snr_db.is_finite() {
        return Err(Error::Domain(format!("snr {} dB is not finite", spec.snr_db)));
    }
    let sr = spec.sample_rate;
    let len = (spec.duration_secs * f64::from(sr)).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (target_tpl, interf_tpl) = draw_distinct_pair(&mut rng);

    let target = center_and_scale(target_tpl.utterance(&mut rng, len, sr), TARGET_RMS);
    let mut interference = center_and_scale(interf_tpl.utterance(&mut rng, len, sr), TARGET_RMS);
    let enrollment = center_and_scale(target_tpl.utterance(&mut rng, len, sr), TARGET_RMS);

    if spec.orthogonalize {
        let coef = dot(&interference, &target) / dot(&target, &target);
        interference.iter_mut().zip(&target).for_each(|(i, s)| *i -= coef * s);
    }
    let gain = (dot(&target, &target) / dot(&interference, &interference) / 10f64.powf(spec.snr_db / 10.0)).sqrt();
    interference.iter_mut().for_each(|x| *x *= gain);

    let mixture: Vec<f64> = target.iter().zip(&interference).map(|(a, b)| a + b).collect();
    let wf = |v: Vec<f64>| Waveform::new(v, sr).map(|w| w.quantize_f32());
    MixtureScene::new(
        wf(mixture)?,
        wf(target)?,
        Some(wf(interference)?),
        wf(enrollment)?,
        Some(spec.snr_db),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_scene() {
        let spec = SceneSpec::new(11, 0.5, 2.0);
        let a = synthesize_scene(&spec).unwrap();
        let b = synthesize_scene(&spec).unwrap();
        assert_eq!(a.mixture, b.mixture);
        assert_eq!(a.target, b.target);
        assert_eq!(a.interference, b.interference);
        assert_eq!(a.enrollment, b.enrollment);
    }

    #[test]
    fn snr_scaling_and_mixture_sum() {
        for (seed, snr) in [(1, 0.0), (2, -5.0), (3, 7.5)] {
            let scene = synthesize_scene(&SceneSpec::new(seed, 0.5, snr)).unwrap();
            let i = scene.interference.as_ref().unwrap();
            let ratio = scene.target.energy() / i.energy();
            let expected = 10f64.powf(snr / 10.0);
            assert!((ratio / expected - 1.0).abs() < 1e-6, "seed {seed}: {ratio}");
            for ((m, s), x) in scene
                .mixture
                .samples()
                .iter()
                .zip(scene.target.samples())
                .zip(i.samples())
            {
                assert!((m - (s + x)).abs() < 1e-6);
            }
            assert!(scene.orthogonality().unwrap() < 1e-6);
        }
    }

    #[test]
    fn rejects_short_duration() {
        assert!(matches!(
            synthesize_scene(&SceneSpec::new(1, 0.4, 0.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn scene_rejects_mismatched_parts() {
        let a = Waveform::new(vec![0.1; 10], 16_000).unwrap();
        let b = Waveform::new(vec![0.1; 11], 16_000).unwrap();
        let e = Waveform::new(vec![0.1; 10], 8_000).unwrap();
        assert!(MixtureScene::new(a.clone(), b, None, a.clone(), None).is_err());
        assert!(MixtureScene::new(a.clone(), a.clone(), None, e, None).is_err());
    }
}
