//! Frozen extractors `f(x, e)`: a deterministic map from an input mixture
//! (or candidate input) and an enrollment utterance to a target estimate of
//! the same length.

mod external;
mod leaky;
mod spectral;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use external::ExternalExtractor;
pub use leaky::{make_leaky_linear, LeakyLinear};
pub use spectral::{make_spectral_subtraction, SpectralSubtraction};

use crate::error::{Error, Result};
use crate::scene::MixtureScene;
use crate::signal::Waveform;

pub trait Extractor: Send + Sync {
    fn name(&self) -> &str;

    /// Estimate of the target in `input`; same length and rate as `input`.
    fn extract(&self, input: &Waveform, enrollment: &Waveform) -> Result<Waveform>;

    /// Whether calls may run concurrently on this handle.
    fn concurrent_safe(&self) -> bool {
        true
    }
}

/// Passes the input through untouched.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Extractor for Identity {
    fn name(&self) -> &str {
        "identity"
    }

    fn extract(&self, input: &Waveform, enrollment: &Waveform) -> Result<Waveform> {
        check_rates(input, enrollment)?;
        Ok(input.clone())
    }
}

pub(crate) fn check_rates(input: &Waveform, enrollment: &Waveform) -> Result<()> {
    if input.sample_rate() != enrollment.sample_rate() {
        return Err(Error::shape(format!(
            "input rate {} Hz differs from enrollment rate {} Hz",
            input.sample_rate(),
            enrollment.sample_rate()
        )));
    }
    Ok(())
}

/// Serializable description of an extractor, as found in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExtractorSpec {
    Identity,
    LeakyLinear {
        kappa: f64,
    },
    SpectralSubtraction {
        #[serde(default = "default_floor")]
        floor: f64,
    },
    External {
        command: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
    },
}

fn default_floor() -> f64 {
    0.1
}

fn default_timeout() -> f64 {
    60.0
}

impl ExtractorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ExtractorSpec::Identity => "identity",
            ExtractorSpec::LeakyLinear { .. } => "leaky_linear",
            ExtractorSpec::SpectralSubtraction { .. } => "spectral_subtraction",
            ExtractorSpec::External { .. } => "external",
        }
    }

    /// The leaky-linear oracle is built per scene from its decomposition.
    pub fn needs_scene(&self) -> bool {
        matches!(self, ExtractorSpec::LeakyLinear { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ExtractorSpec::LeakyLinear { kappa } if !(*kappa > 0.0 && *kappa <= 1.0) => {
                Err(Error::config(format!("kappa {kappa} must lie in (0, 1]")))
            }
            ExtractorSpec::SpectralSubtraction { floor } if !(0.0..1.0).contains(floor) => {
                Err(Error::config(format!("floor {floor} must lie in [0, 1)")))
            }
            ExtractorSpec::External { command, .. } if command.is_empty() => {
                Err(Error::config("external extractor needs a command"))
            }
            ExtractorSpec::External { timeout_secs, .. } if !(*timeout_secs > 0.0) => {
                Err(Error::config("external timeout must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self, scene: Option<&MixtureScene>) -> Result<Box<dyn Extractor>> {
        self.validate()?;
        Ok(match self {
            ExtractorSpec::Identity => Box::new(Identity),
            ExtractorSpec::LeakyLinear { kappa } => {
                let scene =
                    scene.ok_or_else(|| Error::config("leaky_linear extractor requires a scene with ground truth"))?;
                Box::new(make_leaky_linear(scene, *kappa)?)
            }
            ExtractorSpec::SpectralSubtraction { floor } => Box::new(make_spectral_subtraction(*floor)?),
            ExtractorSpec::External { command, timeout_secs } => Box::new(ExternalExtractor::spawn(
                command,
                Duration::from_secs_f64(*timeout_secs),
            )?),
        })
    }
}
