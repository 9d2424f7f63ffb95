use std::fs;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::manifest::{Manifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::scene::{synthesize_scene, SceneSpec};
use crate::signal::save_wav;

pub const MANIFEST_NAME: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub num_scenes: usize,
    pub seed: u64,
    pub duration_secs: f64,
    pub sample_rate: u32,
    pub snr_mean_db: f64,
    pub snr_std_db: f64,
    pub out_dir: PathBuf,
}

impl SynthOptions {
    pub fn new(num_scenes: usize, seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            num_scenes,
            seed,
            duration_secs: 1.0,
            sample_rate: crate::signal::DEFAULT_SAMPLE_RATE,
            snr_mean_db: 0.0,
            snr_std_db: 3.6,
            out_dir: out_dir.into(),
        }
    }
}

/// Per-scene `(scene seed, snr_db)` pairs. Depends only on the arguments.
pub fn draw_scene_params(seed: u64, n: usize, snr_mean_db: f64, snr_std_db: f64) -> Result<Vec<(u64, f64)>> {
    if !(snr_std_db >= 0.0) {
        return Err(Error::config(format!(
            "SNR standard deviation {snr_std_db} must be non-negative"
        )));
    }
    let normal = Normal::new(snr_mean_db, snr_std_db)
        .map_err(|e| Error::config(format!("invalid SNR distribution ({snr_mean_db}, {snr_std_db}): {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| (rng.random::<u64>(), normal.sample(&mut rng))).collect())
}

/// Writes `num_scenes` synthetic scenes as WAV files plus a manifest whose
/// paths are relative to `out_dir`.
pub fn cmd_synth(opts: &SynthOptions) -> Result<Manifest> {
    if !(opts.duration_secs > 0.0 && opts.duration_secs.is_finite()) {
        return Err(Error::config(format!(
            "duration {} must be positive",
            opts.duration_secs
        )));
    }
    if opts.sample_rate == 0 {
        return Err(Error::config("sample rate must be positive"));
    }
    let params = draw_scene_params(opts.seed, opts.num_scenes, opts.snr_mean_db, opts.snr_std_db)?;
    fs::create_dir_all(&opts.out_dir)?;
    let width = opts.num_scenes.saturating_sub(1).to_string().len().max(4);
    let mut entries = Vec::with_capacity(opts.num_scenes);
    for (i, (scene_seed, snr_db)) in params.into_iter().enumerate() {
        let spec = SceneSpec {
            seed: scene_seed,
            duration_secs: opts.duration_secs,
            sample_rate: opts.sample_rate,
            snr_db,
            orthogonalize: true,
        };
        let scene = synthesize_scene(&spec)?;
        let id = format!("scene_{i:0width$}");
        let name = |part: &str| PathBuf::from(format!("{id}_{part}.wav"));
        let interference = scene
            .interference
            .as_ref()
            .expect("synthesized scenes carry interference");
        for (part, w) in [
            ("mix", &scene.mixture),
            ("target", &scene.target),
            ("interf", interference),
            ("enroll", &scene.enrollment),
        ] {
            save_wav(w, opts.out_dir.join(name(part)))?;
        }
        entries.push(ManifestEntry {
            mixture_path: name("mix"),
            enrollment_path: name("enroll"),
            target_path: Some(name("target")),
            interference_path: Some(name("interf")),
            snr_db: Some(snr_db),
            id,
        });
    }
    let manifest = Manifest::new(entries, &opts.out_dir)?;
    manifest.save(opts.out_dir.join(MANIFEST_NAME))?;
    Ok(manifest)
}
