//! Inference-time scoring functions `R(s; e)` used for candidate selection.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{BackendError, Error, Result};
use crate::metrics::{embed_speaker, quality_proxy, si_sdri, EmbeddingConfig, SpeakerEmbedding};
use crate::protocol::WorkerClient;
use crate::scene::MixtureScene;
use crate::signal::Waveform;

/// Default weight of the speaker-similarity term in the joint selector.
pub const DEFAULT_LAMBDA: f64 = 2.5;
/// Default saturation rate of the speaker-similarity term.
pub const DEFAULT_ALPHA: f64 = 4.0;

pub trait Scorer: Send + Sync {
    fn name(&self) -> &str;

    /// Higher is better. `scene` is only consulted by intrusive scorers.
    fn score(&self, estimate: &Waveform, enrollment: &Waveform, scene: Option<&MixtureScene>) -> Result<f64>;

    fn concurrent_safe(&self) -> bool {
        true
    }

    /// True for scorers that read ground truth.
    fn needs_scene(&self) -> bool {
        false
    }
}

/// `quality + lambda * (1 - exp(-alpha * spksim))`, with `spksim` clamped to
/// `[0, 1]` first.
pub fn joint_score(quality: f64, spksim: f64, lambda: f64, alpha: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(alpha > 0.0) {
        return Err(Error::config(format!(
            "joint selector needs lambda > 0 and alpha > 0 (got {lambda}, {alpha})"
        )));
    }
    let sim = spksim.clamp(0.0, 1.0);
    Ok(quality + lambda * (1.0 - (-alpha * sim).exp()))
}

/// SI-SDRi against the scene's ground-truth target. Not deployable.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleSiSdri;

impl Scorer for OracleSiSdri {
    fn name(&self) -> &str {
        "oracle"
    }

    fn score(&self, estimate: &Waveform, _enrollment: &Waveform, scene: Option<&MixtureScene>) -> Result<f64> {
        let scene = scene.ok_or_else(|| Error::config("oracle scorer requires a scene with a target"))?;
        si_sdri(estimate, &scene.mixture, &scene.target)
    }

    fn needs_scene(&self) -> bool {
        true
    }
}

/// Built-in non-intrusive quality proxy on a `[1, 5]` scale.
#[derive(Debug, Clone, Copy, Default)]
pub struct QualityScorer;

impl Scorer for QualityScorer {
    fn name(&self) -> &str {
        "quality"
    }

    fn score(&self, estimate: &Waveform, _enrollment: &Waveform, _scene: Option<&MixtureScene>) -> Result<f64> {
        quality_proxy(estimate)
    }
}

/// Cosine similarity between estimate and enrollment embeddings.
///
/// The enrollment embedding is cached, since every candidate of a search is
/// compared against the same utterance.
#[derive(Debug, Default)]
pub struct SpkSimScorer {
    config: EmbeddingConfig,
    cache: Mutex<Option<(Waveform, Arc<SpeakerEmbedding>)>>,
}

impl SpkSimScorer {
    pub fn new(config: EmbeddingConfig) -> Self {
        Self {
            config,
            cache: Mutex::new(None),
        }
    }

    fn enrollment_embedding(&self, enrollment: &Waveform) -> Result<Arc<SpeakerEmbedding>> {
        let mut cache = self.cache.lock().unwrap_or_else(|p| p.into_inner());
        if let Some((w, emb)) = cache.as_ref() {
            if w == enrollment {
                return Ok(Arc::clone(emb));
            }
        }
        let emb = Arc::new(embed_speaker(enrollment, &self.config)?);
        *cache = Some((enrollment.clone(), Arc::clone(&emb)));
        Ok(emb)
    }
}

impl Scorer for SpkSimScorer {
    fn name(&self) -> &str {
        "spksim"
    }

    fn score(&self, estimate: &Waveform, enrollment: &Waveform, _scene: Option<&MixtureScene>) -> Result<f64> {
        let reference = self.enrollment_embedding(enrollment)?;
        Ok(embed_speaker(estimate, &self.config)?.cosine(&reference))
    }
}

/// Quality term plus saturated speaker-similarity term. Either term may be
/// built in or served by a worker.
pub struct JointScorer {
    quality: Box<dyn Scorer>,
    spksim: Box<dyn Scorer>,
    lambda: f64,
    alpha: f64,
}

impl JointScorer {
    pub fn new(quality: Box<dyn Scorer>, spksim: Box<dyn Scorer>, lambda: f64, alpha: f64) -> Result<Self> {
        joint_score(0.0, 0.0, lambda, alpha)?;
        Ok(Self {
            quality,
            spksim,
            lambda,
            alpha,
        })
    }

    pub fn builtin(lambda: f64, alpha: f64) -> Result<Self> {
        Self::new(Box::new(QualityScorer), Box::<SpkSimScorer>::default(), lambda, alpha)
    }
}

impl Scorer for JointScorer {
    fn name(&self) -> &str {
        "joint"
    }

    fn score(&self, estimate: &Waveform, enrollment: &Waveform, scene: Option<&MixtureScene>) -> Result<f64> {
        let q = self.quality.score(estimate, enrollment, scene)?;
        let s = self.spksim.score(estimate, enrollment, scene)?;
        joint_score(q, s, self.lambda, self.alpha)
    }

    fn concurrent_safe(&self) -> bool {
        self.quality.concurrent_safe() && self.spksim.concurrent_safe()
    }
}

/// Scorer served by a worker's `score` op.
#[derive(Debug)]
pub struct ExternalScorer {
    client: Mutex<WorkerClient>,
}

impl ExternalScorer {
    pub fn spawn(command: &[String], timeout: Duration) -> Result<Self> {
        let client = WorkerClient::spawn(command, timeout)?;
        if !client.supports("score") {
            return Err(BackendError::UnsupportedOp("score".into()).into());
        }
        Ok(Self {
            client: Mutex::new(client),
        })
    }
}

impl Scorer for ExternalScorer {
    fn name(&self) -> &str {
        "external"
    }

    fn score(&self, estimate: &Waveform, enrollment: &Waveform, _scene: Option<&MixtureScene>) -> Result<f64> {
        let mut client = self.client.lock().unwrap_or_else(|p| p.into_inner());
        let s = client.score(&estimate.to_f32(), &enrollment.to_f32(), estimate.sample_rate())?;
        if !s.is_finite() {
            return Err(BackendError::Protocol(format!("non-finite score {s}")).into());
        }
        Ok(s)
    }

    fn concurrent_safe(&self) -> bool {
        false
    }
}

/// Selector names accepted by run configs and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    Oracle,
    Quality,
    Spksim,
    Joint,
    External,
}

impl Selector {
    pub const ALL_BUILTIN: [Selector; 4] = [Selector::Oracle, Selector::Quality, Selector::Spksim, Selector::Joint];

    pub fn as_str(&self) -> &'static str {
        match self {
            Selector::Oracle => "oracle",
            Selector::Quality => "quality",
            Selector::Spksim => "spksim",
            Selector::Joint => "joint",
            Selector::External => "external",
        }
    }
}

impl std::str::FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Selector::Oracle),
            "quality" => Ok(Selector::Quality),
            "spksim" => Ok(Selector::Spksim),
            "joint" => Ok(Selector::Joint),
            "external" => Ok(Selector::External),
            other => Err(Error::config(format!("unknown selector {other:?}"))),
        }
    }
}

impl std::fmt::Display for Selector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Worker commands that replace built-in scoring terms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerWorkers {
    #[serde(default)]
    pub quality: Option<Vec<String>>,
    #[serde(default)]
    pub spksim: Option<Vec<String>>,
    #[serde(default)]
    pub external: Option<Vec<String>>,
    #[serde(default)]
    pub timeout_secs: Option<f64>,
}

impl ScorerWorkers {
    fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs.unwrap_or(60.0))
    }

    fn quality(&self) -> Result<Box<dyn Scorer>> {
        Ok(match &self.quality {
            Some(cmd) => Box::new(ExternalScorer::spawn(cmd, self.timeout())?),
            None => Box::new(QualityScorer),
        })
    }

    fn spksim(&self) -> Result<Box<dyn Scorer>> {
        Ok(match &self.spksim {
            Some(cmd) => Box::new(ExternalScorer::spawn(cmd, self.timeout())?),
            None => Box::<SpkSimScorer>::default(),
        })
    }
}

/// Builds the scorer for `selector`, spawning workers where configured.
pub fn build_scorer(selector: Selector, lambda: f64, alpha: f64, workers: &ScorerWorkers) -> Result<Box<dyn Scorer>> {
    Ok(match selector {
        Selector::Oracle => Box::new(OracleSiSdri),
        Selector::Quality => workers.quality()?,
        Selector::Spksim => workers.spksim()?,
        Selector::Joint => Box::new(JointScorer::new(workers.quality()?, workers.spksim()?, lambda, alpha)?),
        Selector::External => {
            let cmd = workers
                .external
                .as_ref()
                .ok_or_else(|| Error::config("selector 'external' needs scorer_workers.external"))?;
            Box::new(ExternalScorer::spawn(cmd, workers.timeout())?)
        }
    })
}
