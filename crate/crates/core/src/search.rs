//! Greedy multi-step inference-time search.
//!
//! ```text
//! s_0 = f(x0, e)
//! for t in 1..=T:
//!     x_t^k = r_t^k * x0 + (1 - r_t^k) * s_{t-1}      k = 1..K, r_t^1 = 1
//!     s_t^k = f(x_t^k, e)
//!     s_t   = s_t^{k*},  k* = argmax_k R(s_t^k; e)     (ties -> smallest k)
//! ```
//!
//! Because `r_t^1 = 1` rebuilds `x0` exactly and extractors are
//! deterministic, `s_t^1 = s_0` and so `R(s_t) >= R(s_0)` at every step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BackendError, Error, Result};
use crate::extractors::Extractor;
use crate::scene::MixtureScene;
use crate::scorers::Scorer;
use crate::signal::{interpolate, Waveform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Refinement steps `T`.
    pub steps: usize,
    /// Candidates per step `K`, endpoints included.
    pub candidates: usize,
    /// Force the last coefficient of every step to `r = 0`.
    pub include_zero_endpoint: bool,
    pub seed: u64,
    /// Minimum score gain that counts as progress when `early_stop` is set.
    pub tolerance: f64,
    pub early_stop: bool,
    /// Evaluate candidates of a step in parallel when both backends allow it.
    pub parallel: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            steps: 5,
            candidates: 20,
            include_zero_endpoint: true,
            seed: 0,
            tolerance: 1e-7,
            early_stop: false,
            parallel: true,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("steps must be at least 1"));
        }
        let min = if self.include_zero_endpoint { 2 } else { 1 };
        if self.candidates < min {
            return Err(Error::config(format!(
                "candidates must be at least {min} (include_zero_endpoint = {})",
                self.include_zero_endpoint
            )));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::config("tolerance must be non-negative"));
        }
        Ok(())
    }
}

/// Interpolation coefficients for one step. Index 0 is always `r = 1`; the
/// last index is `r = 0` when the zero endpoint is enabled. The order is the
/// tie-break order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSchedule {
    pub step: usize,
    pub coefficients: Vec<f64>,
}

/// Coefficients for step `t` (1-based). A pure function of `(seed, t)`:
/// each step draws from its own ChaCha stream.
pub fn make_schedule(config: &SearchConfig, t: usize) -> Result<CandidateSchedule> {
    config.validate()?;
    if t == 0 || t > config.steps {
        return Err(Error::config(format!("step {t} outside 1..={}", config.steps)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(t as u64);
    let free = config.candidates - 1 - usize::from(config.include_zero_endpoint);
    let mut coefficients = Vec::with_capacity(config.candidates);
    coefficients.push(1.0);
    coefficients.extend((0..free).map(|_| rng.random::<f64>()));
    if config.include_zero_endpoint {
        coefficients.push(0.0);
    }
    Ok(CandidateSchedule { step: t, coefficients })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub schedule: CandidateSchedule,
    pub candidate_scores: Vec<f64>,
    /// 0-based index into the schedule.
    pub selected_index: usize,
    pub selected_r: f64,
    pub selected_estimate: Waveform,
    pub selected_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// One-step output `s_0`.
    pub initial: Waveform,
    pub initial_score: f64,
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    /// `s_T`, or `s_0` when no step ran.
    pub fn final_estimate(&self) -> &Waveform {
        self.steps.last().map(|s| &s.selected_estimate).unwrap_or(&self.initial)
    }

    /// Estimate entering step `t` (1-based), i.e. `s_{t-1}`.
    pub fn previous_estimate(&self, t: usize) -> &Waveform {
        if t <= 1 {
            &self.initial
        } else {
            &self.steps[t - 2].selected_estimate
        }
    }

    /// `s_t` for `t = 0..=steps`.
    pub fn estimate(&self, t: usize) -> &Waveform {
        if t == 0 {
            &self.initial
        } else {
            &self.steps[t - 1].selected_estimate
        }
    }

    pub fn score(&self, t: usize) -> f64 {
        if t == 0 {
            self.initial_score
        } else {
            self.steps[t - 1].selected_score
        }
    }
}

/// `s_0 = f(x0, e)`.
pub fn one_step(extractor: &dyn Extractor, mixture: &Waveform, enrollment: &Waveform) -> Result<Waveform> {
    let out = extractor.extract(mixture, enrollment)?;
    mixture.ensure_compatible(&out, "extractor output")?;
    Ok(out)
}

fn finite_score(score: f64, scorer: &dyn Scorer) -> Result<f64> {
    if score.is_finite() {
        Ok(score)
    } else {
        Err(BackendError::Protocol(format!("scorer {} returned {score}", scorer.name())).into())
    }
}

/// Everything a step needs besides the schedule.
#[derive(Clone, Copy)]
pub struct StepContext<'a> {
    pub extractor: &'a dyn Extractor,
    pub scorer: &'a dyn Scorer,
    pub mixture: &'a Waveform,
    pub enrollment: &'a Waveform,
    pub scene: Option<&'a MixtureScene>,
}

impl StepContext<'_> {
    /// Candidate input, output and score for one coefficient.
    pub fn evaluate(&self, prev: &Waveform, r: f64) -> Result<(Waveform, f64)> {
        let input = interpolate(self.mixture, prev, r)?;
        let output = self.extractor.extract(&input, self.enrollment)?;
        input.ensure_compatible(&output, "extractor output")?;
        let score = self.scorer.score(&output, self.enrollment, self.scene)?;
        Ok((output, finite_score(score, self.scorer)?))
    }

    fn can_parallelize(&self) -> bool {
        self.extractor.concurrent_safe() && self.scorer.concurrent_safe()
    }
}

/// Index of the first maximum.
pub fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    best
}

/// Builds, extracts and scores every candidate, then keeps the best.
pub fn search_step(
    ctx: StepContext<'_>,
    prev: &Waveform,
    schedule: &CandidateSchedule,
    parallel: bool,
) -> Result<StepRecord> {
    let eval = |(k, &r): (usize, &f64)| {
        ctx.evaluate(prev, r).map_err(|e| Error::Step {
            step: schedule.step,
            candidate: k + 1,
            source: Box::new(e),
        })
    };
    let results: Vec<(Waveform, f64)> = if parallel && ctx.can_parallelize() {
        schedule
            .coefficients
            .par_iter()
            .enumerate()
            .map(eval)
            .collect::<Result<_>>()?
    } else {
        schedule
            .coefficients
            .iter()
            .enumerate()
            .map(eval)
            .collect::<Result<_>>()?
    };
    let candidate_scores: Vec<f64> = results.iter().map(|(_, s)| *s).collect();
    let selected_index = argmax_first(&candidate_scores);
    let (selected_estimate, selected_score) = results.into_iter().nth(selected_index).expect("K >= 1");
    Ok(StepRecord {
        selected_r: schedule.coefficients[selected_index],
        schedule: schedule.clone(),
        candidate_scores,
        selected_index,
        selected_estimate,
        selected_score,
    })
}

/// Full search: one-step inference followed by `config.steps` greedy
/// refinement steps (fewer if early stopping triggers).
pub fn run_search(
    extractor: &dyn Extractor,
    scorer: &dyn Scorer,
    mixture: &Waveform,
    enrollment: &Waveform,
    scene: Option<&MixtureScene>,
    config: &SearchConfig,
) -> Result<Trajectory> {
    config.validate()?;
    let ctx = StepContext {
        extractor,
        scorer,
        mixture,
        enrollment,
        scene,
    };
    let initial = one_step(extractor, mixture, enrollment)?;
    let initial_score = finite_score(scorer.score(&initial, enrollment, scene)?, scorer)?;
    let mut traj = Trajectory {
        initial,
        initial_score,
        steps: Vec::with_capacity(config.steps),
    };
    for t in 1..=config.steps {
        let schedule = make_schedule(config, t)?;
        let record = search_step(ctx, traj.previous_estimate(t), &schedule, config.parallel)?;
        let gain = record.selected_score - traj.score(t - 1);
        let stalled = record.selected_r == 1.0 && gain < config.tolerance;
        traj.steps.push(record);
        if config.early_stop && stalled {
            break;
        }
    }
    Ok(traj)
}

/// [`run_search`] on a scene's own mixture and enrollment.
pub fn run_scene_search(
    extractor: &dyn Extractor,
    scorer: &dyn Scorer,
    scene: &MixtureScene,
    config: &SearchConfig,
) -> Result<Trajectory> {
    run_search(
        extractor,
        scorer,
        &scene.mixture,
        &scene.enrollment,
        Some(scene),
        config,
    )
}
