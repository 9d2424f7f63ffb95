//! Local Lipschitz estimates and score-deviation bound checks along the
//! interpolation segment of a search.
//!
//! For two coefficients `r~, r*` of one step the candidate inputs differ by
//! exactly `|r~ - r*| * ||x0 - s_{t-1}||`. If `f` and `R` are Lipschitz on the
//! segment with constants `L_f` and `L_R`, then
//!
//! ```text
//! |R(s~) - R(s*)|  <=  L_R * L_f * |r~ - r*| * ||x0 - s_{t-1}||
//! Var R(s(r* + dr))  <=  (L_R * L_f)^2 * ||x0 - s_{t-1}||^2 * eps_r^2
//! ```
//!
//! Constants are estimated from adjacent pairs of a sorted probe set. When
//! the probe set contains every candidate coefficient of the step, chaining
//! the adjacent-pair inequalities makes the first bound hold for every
//! candidate pair up to rounding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractors::Extractor;
use crate::scene::MixtureScene;
use crate::scorers::Scorer;
use crate::search::{run_scene_search, SearchConfig, StepContext, Trajectory};
use crate::signal::{interpolate, l2_distance, Waveform};

/// Input distances below this are treated as the same probe.
pub const MIN_PAIR_DISTANCE: f64 = 1e-12;

/// Number of probe points used when nothing else is configured.
pub const DEFAULT_GRID_SIZE: usize = 101;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    #[serde(rename = "L_f")]
    pub l_f: f64,
    #[serde(rename = "L_R")]
    pub l_r: f64,
    pub probe_count: usize,
    pub probe_spec: String,
}

impl LipschitzEstimate {
    /// Estimate for a zero-length segment, where every probe coincides.
    pub fn degenerate() -> Self {
        Self {
            l_f: 0.0,
            l_r: 0.0,
            probe_count: 0,
            probe_spec: "degenerate segment".into(),
        }
    }

    pub fn product(&self) -> f64 {
        self.l_f * self.l_r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub step: usize,
    pub delta_r: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `None` when `rhs` is zero.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckReport {
    pub pairs: Vec<PairRecord>,
    /// `None` when no pair has a defined ratio.
    pub max_ratio: Option<f64>,
    pub variance_lhs: Option<f64>,
    pub variance_rhs: Option<f64>,
}

/// `n` evenly spaced points on `[0, 1]`, endpoints exact.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

fn probe_points(grid_size: usize, extra: &[f64]) -> Result<Vec<f64>> {
    if grid_size < 3 {
        return Err(Error::config(format!("grid_size {grid_size} must be at least 3")));
    }
    if let Some(r) = extra.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::Domain(format!("probe coefficient {r} outside [0, 1]")));
    }
    let mut points = uniform_grid(grid_size);
    points.extend_from_slice(extra);
    points.sort_by(f64::total_cmp);
    points.dedup();
    Ok(points)
}

/// Lipschitz constants of `f` and `R` on the segment between `x0` and `prev`.
///
/// Probes are a uniform grid of `grid_size` coefficients plus any `extra`
/// coefficients (typically the candidate schedule being checked).
pub fn estimate_lipschitz(
    ctx: StepContext<'_>,
    prev: &Waveform,
    grid_size: usize,
    extra: &[f64],
) -> Result<LipschitzEstimate> {
    let points = probe_points(grid_size, extra)?;
    ctx.mixture.ensure_compatible(prev, "previous estimate")?;
    if l2_distance(ctx.mixture.samples(), prev.samples()) < MIN_PAIR_DISTANCE {
        return Err(Error::DegenerateSegment);
    }
    let eval = |&r: &f64| -> Result<(Waveform, Waveform, f64)> {
        let input = interpolate(ctx.mixture, prev, r)?;
        let (output, score) = ctx.evaluate(prev, r)?;
        Ok((input, output, score))
    };
    let probes: Vec<_> = if ctx.extractor.concurrent_safe() && ctx.scorer.concurrent_safe() {
        points.par_iter().map(eval).collect::<Result<_>>()?
    } else {
        points.iter().map(eval).collect::<Result<_>>()?
    };

    let (mut l_f, mut l_r, mut used) = (0.0f64, 0.0f64, 0usize);
    for pair in probes.windows(2) {
        let (u, a, ra) = &pair[0];
        let (v, b, rb) = &pair[1];
        let du = l2_distance(u.samples(), v.samples());
        if du < MIN_PAIR_DISTANCE {
            continue;
        }
        used += 1;
        let da = l2_distance(a.samples(), b.samples());
        l_f = l_f.max(da / du);
        if da >= MIN_PAIR_DISTANCE {
            l_r = l_r.max((ra - rb).abs() / da);
        }
    }
    if used == 0 {
        return Err(Error::DegenerateSegment);
    }
    Ok(LipschitzEstimate {
        l_f,
        l_r,
        probe_count: points.len(),
        probe_spec: format!(
            "uniform r-grid of {grid_size} points plus {} extra coefficients, adjacent pairs",
            extra.len()
        ),
    })
}

/// One estimate per recorded step, each on that step's own segment with the
/// step's candidate coefficients added to the grid. Zero-length segments
/// yield [`LipschitzEstimate::degenerate`].
pub fn estimate_along_trajectory(
    extractor: &dyn Extractor,
    scorer: &dyn Scorer,
    trajectory: &Trajectory,
    x0: &Waveform,
    enrollment: &Waveform,
    scene: Option<&MixtureScene>,
    grid_size: usize,
) -> Result<Vec<LipschitzEstimate>> {
    let ctx = StepContext {
        extractor,
        scorer,
        mixture: x0,
        enrollment,
        scene,
    };
    (1..=trajectory.steps.len())
        .map(|t| {
            let coeffs = &trajectory.steps[t - 1].schedule.coefficients;
            match estimate_lipschitz(ctx, trajectory.previous_estimate(t), grid_size, coeffs) {
                Err(Error::DegenerateSegment) => Ok(LipschitzEstimate::degenerate()),
                other => other,
            }
        })
        .collect()
}

/// `||x0 - s_{t-1}||` for every recorded step.
pub fn segment_length_series(trajectory: &Trajectory, x0: &Waveform) -> Vec<f64> {
    (1..=trajectory.steps.len())
        .map(|t| l2_distance(x0.samples(), trajectory.previous_estimate(t).samples()))
        .collect()
}

/// Compares every non-selected candidate of every step against the selected
/// one. `estimates[t-1]` holds the constants for step `t`.
pub fn check_deterministic_bound(
    trajectory: &Trajectory,
    estimates: &[LipschitzEstimate],
    x0: &Waveform,
) -> Result<BoundCheckReport> {
    if estimates.len() != trajectory.steps.len() {
        return Err(Error::config(format!(
            "{} Lipschitz estimates for {} steps",
            estimates.len(),
            trajectory.steps.len()
        )));
    }
    let segments = segment_length_series(trajectory, x0);
    let mut report = BoundCheckReport::default();
    for (t, (step, est)) in trajectory.steps.iter().zip(estimates).enumerate() {
        let k = step.schedule.coefficients.len();
        if step.candidate_scores.len() != k || step.selected_index >= k {
            return Err(Error::config(format!(
                "step {} has incomplete candidate records",
                t + 1
            )));
        }
        let r_star = step.selected_r;
        for (j, (&r, &score)) in step
            .schedule
            .coefficients
            .iter()
            .zip(&step.candidate_scores)
            .enumerate()
        {
            if j == step.selected_index {
                continue;
            }
            let delta_r = r - r_star;
            let lhs = (score - step.selected_score).abs();
            let rhs = est.product() * delta_r.abs() * segments[t];
            let ratio = (rhs > 0.0).then(|| lhs / rhs);
            report.pairs.push(PairRecord {
                step: t + 1,
                delta_r,
                lhs,
                rhs,
                ratio,
            });
        }
    }
    report.max_ratio = report
        .pairs
        .iter()
        .filter_map(|p| p.ratio)
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
    Ok(report)
}

/// Largest relative error of the input-deviation identity over all candidate
/// pairs of every step.
pub fn verify_input_deviation(trajectory: &Trajectory, x0: &Waveform) -> Result<f64> {
    let mut worst = 0.0f64;
    for (t, step) in trajectory.steps.iter().enumerate() {
        let prev = trajectory.previous_estimate(t + 1);
        let seg = l2_distance(x0.samples(), prev.samples());
        let coeffs = &step.schedule.coefficients;
        let inputs: Vec<Waveform> = coeffs
            .iter()
            .map(|&r| interpolate(x0, prev, r))
            .collect::<Result<_>>()?;
        for i in 0..coeffs.len() {
            for j in i + 1..coeffs.len() {
                worst = worst.max(input_deviation_error(&inputs[i], &inputs[j], coeffs[i], coeffs[j], seg));
            }
        }
    }
    Ok(worst)
}

/// Relative error between `||u - v||` and `|ru - rv| * segment`.
pub fn input_deviation_error(u: &Waveform, v: &Waveform, ru: f64, rv: f64, segment: f64) -> f64 {
    let lhs = l2_distance(u.samples(), v.samples());
    let rhs = (ru - rv).abs() * segment;
    let scale = lhs.max(rhs);
    if scale < MIN_PAIR_DISTANCE {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

/// Settings for [`check_variance_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheck {
    pub epsilon_r: f64,
    pub trials: usize,
    pub grid_size: usize,
}

impl VarianceCheck {
    pub fn new(epsilon_r: f64, trials: usize) -> Self {
        Self {
            epsilon_r,
            trials,
            grid_size: DEFAULT_GRID_SIZE,
        }
    }
}

/// `(L_R * L_f)^2 * segment^2 * eps_r^2`.
pub fn variance_rhs(estimate: &LipschitzEstimate, segment: f64, epsilon_r: f64) -> f64 {
    let g = estimate.product() * segment;
    g * g * epsilon_r * epsilon_r
}

/// Perturbs the selected coefficient of the final search step by
/// `dr ~ U(-sqrt(3) eps_r, sqrt(3) eps_r)`, clamps to `[0, 1]`, and compares
/// the sample variance of the resulting scores with the bound.
pub fn check_variance_bound(
    extractor: &dyn Extractor,
    scorer: &dyn Scorer,
    scene: &MixtureScene,
    config: &SearchConfig,
    check: &VarianceCheck,
) -> Result<BoundCheckReport> {
    if !(check.epsilon_r >= 0.0) || !check.epsilon_r.is_finite() {
        return Err(Error::Domain(format!(
            "epsilon_r {} must be non-negative",
            check.epsilon_r
        )));
    }
    if check.trials < 100 {
        return Err(Error::config(format!("trials {} must be at least 100", check.trials)));
    }
    let trajectory = run_scene_search(extractor, scorer, scene, config)?;
    let t = trajectory.steps.len();
    let step = &trajectory.steps[t - 1];
    let prev = trajectory.previous_estimate(t);
    let ctx = StepContext {
        extractor,
        scorer,
        mixture: &scene.mixture,
        enrollment: &scene.enrollment,
        scene: Some(scene),
    };
    let estimate = match estimate_lipschitz(ctx, prev, check.grid_size, &step.schedule.coefficients) {
        Err(Error::DegenerateSegment) => LipschitzEstimate::degenerate(),
        other => other?,
    };
    let segment = l2_distance(scene.mixture.samples(), prev.samples());

    let half_width = 3f64.sqrt() * check.epsilon_r;
    let r_star = step.selected_r;
    let trial = |i: usize| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream((1u64 << 32) + i as u64);
        let u: f64 = rng.random();
        let r = (r_star + half_width * (2.0 * u - 1.0)).clamp(0.0, 1.0);
        Ok(ctx.evaluate(prev, r)?.1)
    };
    let scores: Vec<f64> = if config.parallel && extractor.concurrent_safe() && scorer.concurrent_safe() {
        (0..check.trials).into_par_iter().map(trial).collect::<Result<_>>()?
    } else {
        (0..check.trials).map(trial).collect::<Result<_>>()?
    };

    Ok(BoundCheckReport {
        pairs: Vec::new(),
        max_ratio: None,
        variance_lhs: Some(sample_variance(&scores)),
        variance_rhs: Some(variance_rhs(&estimate, segment, check.epsilon_r)),
    })
}

/// Unbiased sample variance (Welford); exactly zero for constant input.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &x) in xs.iter().enumerate() {
        let d = x - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (x - mean);
    }
    m2 / (xs.len() - 1) as f64
}
