#![allow(dead_code)]

use tse_search::extractors::{make_leaky_linear, make_spectral_subtraction, Extractor, Identity};
use tse_search::scene::{synthesize_scene, SceneSpec};
use tse_search::scorers::{build_scorer, Scorer, ScorerWorkers, Selector};
use tse_search::MixtureScene;

/// Half-second scenes keep the suites fast on a single core.
pub const SCENE_SECS: f64 = 0.5;

pub fn scene(seed: u64) -> MixtureScene {
    synthesize_scene(&SceneSpec::new(seed, SCENE_SECS, 0.0)).unwrap()
}

pub fn scene_at(seed: u64, snr_db: f64) -> MixtureScene {
    synthesize_scene(&SceneSpec::new(seed, SCENE_SECS, snr_db)).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backbone {
    Identity,
    Leaky(f64),
    Spectral(f64),
}

impl Backbone {
    pub const BUILTIN: [Backbone; 3] = [Backbone::Identity, Backbone::Leaky(0.5), Backbone::Spectral(0.1)];

    pub fn build(self, scene: &MixtureScene) -> Box<dyn Extractor> {
        match self {
            Backbone::Identity => Box::new(Identity),
            Backbone::Leaky(k) => Box::new(make_leaky_linear(scene, k).unwrap()),
            Backbone::Spectral(floor) => Box::new(make_spectral_subtraction(floor).unwrap()),
        }
    }
}

pub fn scorer(selector: Selector) -> Box<dyn Scorer> {
    build_scorer(selector, 2.5, 4.0, &ScorerWorkers::default()).unwrap()
}

pub fn worker_command(mode: &str) -> Vec<String> {
    vec![
        env!("CARGO_BIN_EXE_tse-search").to_string(),
        "worker".into(),
        "--mode".into(),
        mode.into(),
    ]
}

/// SI-SDR written out directly from its definition, sharing no code with the
/// library.
pub fn reference_si_sdr(estimate: &[f64], reference: &[f64]) -> f64 {
    let n = estimate.len() as f64;
    let me = estimate.iter().sum::<f64>() / n;
    let mr = reference.iter().sum::<f64>() / n;
    let (mut er, mut rr, mut ee) = (0.0, 0.0, 0.0);
    for (e, r) in estimate.iter().zip(reference) {
        let (e, r) = (e - me, r - mr);
        er += e * r;
        rr += r * r;
        ee += e * e;
    }
    let alpha = er / rr;
    let (mut t, mut d) = (0.0, 0.0);
    for (e, r) in estimate.iter().zip(reference) {
        let proj = alpha * (r - mr);
        t += proj * proj;
        d += (e - me - proj) * (e - me - proj);
    }
    let floor = if ee > 0.0 { 1e-8 * ee } else { 1e-8 };
    10.0 * ((t + floor) / (d + floor)).log10()
}
