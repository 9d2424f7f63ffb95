use super::{check_rates, Extractor};
use crate::error::{Error, Result};
use crate::scene::MixtureScene;
use crate::signal::{dot, Waveform};

/// Largest tolerated `|<s, i>| / (|s| |i|)` for the oracle.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-6;

/// Analytic oracle that knows the scene decomposition.
///
/// An input `u` is projected onto `span{s, i}` by least squares,
/// `u ~ a s + b i`, and the output is `a s + kappa b i`. Feeding an output
/// back in with `r = 0` therefore multiplies the interference coefficient by
/// `kappa` each step.
#[derive(Debug, Clone)]
pub struct LeakyLinear {
    target: Vec<f64>,
    interference: Vec<f64>,
    kappa: f64,
    sample_rate: u32,
    // Entries of the 2x2 Gram matrix and its determinant.
    ss: f64,
    si: f64,
    ii: f64,
    det: f64,
}

pub fn make_leaky_linear(scene: &MixtureScene, kappa: f64) -> Result<LeakyLinear> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::Domain(format!("kappa {kappa} must lie in (0, 1]")));
    }
    let interference = scene
        .interference
        .as_ref()
        .ok_or_else(|| Error::Precondition("leaky-linear oracle needs the interference signal".into()))?;
    let s = scene.target.samples();
    let i = interference.samples();
    let ss = dot(s, s);
    let ii = dot(i, i);
    if ss == 0.0 || ii == 0.0 {
        return Err(Error::Precondition("target and interference must be non-silent".into()));
    }
    let si = dot(s, i);
    let cos = si.abs() / (ss * ii).sqrt();
    if cos >= ORTHOGONALITY_TOLERANCE {
        return Err(Error::Precondition(format!(
            "target and interference are not orthogonal (normalized inner product {cos:e})"
        )));
    }
    Ok(LeakyLinear {
        target: s.to_vec(),
        interference: i.to_vec(),
        kappa,
        sample_rate: scene.sample_rate(),
        ss,
        si,
        ii,
        det: ss * ii - si * si,
    })
}

impl LeakyLinear {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Least-squares coefficients `(a, b)` of `u` on `(s, i)`.
    pub fn coefficients(&self, u: &[f64]) -> (f64, f64) {
        let us = dot(u, &self.target);
        let ui = dot(u, &self.interference);
        let a = (self.ii * us - self.si * ui) / self.det;
        let b = (self.ss * ui - self.si * us) / self.det;
        (a, b)
    }
}

impl Extractor for LeakyLinear {
    fn name(&self) -> &str {
        "leaky_linear"
    }

    fn extract(&self, input: &Waveform, enrollment: &Waveform) -> Result<Waveform> {
        check_rates(input, enrollment)?;
        if input.sample_rate() != self.sample_rate || input.len() != self.target.len() {
            return Err(Error::shape(format!(
                "leaky-linear oracle built for {} samples at {} Hz, got {} at {} Hz",
                self.target.len(),
                self.sample_rate,
                input.len(),
                input.sample_rate()
            )));
        }
        let (a, b) = self.coefficients(input.samples());
        let kb = self.kappa * b;
        let out = self
            .target
            .iter()
            .zip(&self.interference)
            .map(|(s, i)| a * s + kb * i)
            .collect();
        input.with_samples(out)
    }
}
