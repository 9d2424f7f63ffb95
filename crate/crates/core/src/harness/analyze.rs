use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::manifest::Manifest;
use crate::error::{Error, Result};
use crate::lab::{
    check_deterministic_bound, check_variance_bound, estimate_along_trajectory, estimate_lipschitz,
    segment_length_series, verify_input_deviation, BoundCheckReport, LipschitzEstimate, VarianceCheck,
};
use crate::scorers::{build_scorer, Selector};
use crate::search::{one_step, run_scene_search, StepContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyzeMode {
    Lipschitz,
    DetBound,
    VarBound,
}

impl FromStr for AnalyzeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lipschitz" => Ok(Self::Lipschitz),
            "det_bound" => Ok(Self::DetBound),
            "var_bound" => Ok(Self::VarBound),
            other => Err(Error::config(format!("unknown analyze mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEntry {
    pub id: String,
    pub estimate: LipschitzEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetBoundEntry {
    pub id: String,
    pub segment_lengths: Vec<f64>,
    pub estimates: Vec<LipschitzEstimate>,
    pub input_deviation_max_rel_error: f64,
    pub report: BoundCheckReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarBoundEntry {
    pub id: String,
    pub epsilon_r: f64,
    pub trials: usize,
    /// `variance_lhs / variance_rhs`, absent when the bound is zero.
    pub ratio: Option<f64>,
    pub report: BoundCheckReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "entries", rename_all = "snake_case")]
pub enum AnalysisEntries {
    Lipschitz(Vec<LipschitzEntry>),
    DetBound(Vec<DetBoundEntry>),
    VarBound(Vec<VarBoundEntry>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub selector: Selector,
    pub extractor: String,
    pub grid_size: usize,
    #[serde(flatten)]
    pub entries: AnalysisEntries,
    /// Largest `L_f` (lipschitz), bound ratio (det_bound) or variance ratio
    /// (var_bound) over all entries.
    pub max_value: Option<f64>,
}

fn fold_max(values: impl Iterator<Item = f64>) -> Option<f64> {
    values.fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
}

/// Runs one reliability analysis over every manifest scene.
///
/// `lipschitz` probes the first refinement segment (mixture to one-step
/// estimate); `det_bound` runs the full search and checks every candidate
/// pair; `var_bound` perturbs the last step's selection for each configured
/// `epsilon_r`.
pub fn analyze_manifest(
    manifest: &Manifest,
    config: &RunConfig,
    selector: Selector,
    mode: AnalyzeMode,
) -> Result<AnalysisReport> {
    config.validate()?;
    if !manifest.entries_without_target().is_empty() {
        return Err(Error::config("analysis needs target_path on every entry"));
    }
    let scorer = build_scorer(selector, config.lambda, config.alpha, &config.scorer_workers)?;
    let search = config.search_config();
    let shared = if config.extractor.needs_scene() {
        None
    } else {
        Some(config.extractor.build(None)?)
    };

    let mut lip = Vec::new();
    let mut det = Vec::new();
    let mut var = Vec::new();
    for e in &manifest.entries {
        let entry = manifest.load_entry(e)?;
        let scene = entry.scene.as_ref().expect("targets checked above");
        let local = match &shared {
            Some(_) => None,
            None => Some(config.extractor.build(Some(scene))?),
        };
        let extractor = shared.as_deref().or(local.as_deref()).expect("one extractor is set");
        match mode {
            AnalyzeMode::Lipschitz => {
                let s0 = one_step(extractor, &scene.mixture, &scene.enrollment)?;
                let ctx = StepContext {
                    extractor,
                    scorer: scorer.as_ref(),
                    mixture: &scene.mixture,
                    enrollment: &scene.enrollment,
                    scene: Some(scene),
                };
                let estimate = match estimate_lipschitz(ctx, &s0, config.grid_size, &[]) {
                    Err(Error::DegenerateSegment) => estimate_lipschitz(ctx, &scene.target, config.grid_size, &[])?,
                    other => other?,
                };
                lip.push(LipschitzEntry {
                    id: e.id.clone(),
                    estimate,
                });
            }
            AnalyzeMode::DetBound => {
                let traj = run_scene_search(extractor, scorer.as_ref(), scene, &search)?;
                let estimates = estimate_along_trajectory(
                    extractor,
                    scorer.as_ref(),
                    &traj,
                    &scene.mixture,
                    &scene.enrollment,
                    Some(scene),
                    config.grid_size,
                )?;
                let report = check_deterministic_bound(&traj, &estimates, &scene.mixture)?;
                det.push(DetBoundEntry {
                    id: e.id.clone(),
                    segment_lengths: segment_length_series(&traj, &scene.mixture),
                    input_deviation_max_rel_error: verify_input_deviation(&traj, &scene.mixture)?,
                    estimates,
                    report,
                });
            }
            AnalyzeMode::VarBound => {
                for &eps in &config.epsilon_r {
                    let check = VarianceCheck {
                        epsilon_r: eps,
                        trials: config.trials,
                        grid_size: config.grid_size,
                    };
                    let report = check_variance_bound(extractor, scorer.as_ref(), scene, &search, &check)?;
                    let (lhs, rhs) = (report.variance_lhs.unwrap_or(0.0), report.variance_rhs.unwrap_or(0.0));
                    var.push(VarBoundEntry {
                        id: e.id.clone(),
                        epsilon_r: eps,
                        trials: config.trials,
                        ratio: (rhs > 0.0).then(|| lhs / rhs),
                        report,
                    });
                }
            }
        }
    }
    let (entries, max_value) = match mode {
        AnalyzeMode::Lipschitz => {
            let m = fold_max(lip.iter().map(|l| l.estimate.l_f));
            (AnalysisEntries::Lipschitz(lip), m)
        }
        AnalyzeMode::DetBound => {
            let m = fold_max(det.iter().filter_map(|d| d.report.max_ratio));
            (AnalysisEntries::DetBound(det), m)
        }
        AnalyzeMode::VarBound => {
            let m = fold_max(var.iter().filter_map(|v| v.ratio));
            (AnalysisEntries::VarBound(var), m)
        }
    };
    Ok(AnalysisReport {
        selector,
        extractor: config.extractor.name().to_string(),
        grid_size: config.grid_size,
        entries,
        max_value,
    })
}

pub fn cmd_analyze(
    manifest_path: &Path,
    config_path: &Path,
    selector: Selector,
    mode: AnalyzeMode,
    out_path: &Path,
) -> Result<AnalysisReport> {
    let config = RunConfig::load(config_path)?;
    let manifest = Manifest::load(manifest_path)?;
    let report = analyze_manifest(&manifest, &config, selector, mode)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    fs::write(out_path, json)?;
    Ok(report)
}
