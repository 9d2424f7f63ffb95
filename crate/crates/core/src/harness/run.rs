use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::manifest::{LoadedEntry, Manifest};
use crate::error::{Error, Result};
use crate::extractors::Extractor;
use crate::metrics::{quality_proxy, si_sdr, si_sdri, spk_sim, EmbeddingConfig};
use crate::scorers::{build_scorer, Scorer, Selector};
use crate::search::{run_search, Trajectory};
use crate::signal::Waveform;

pub const CSV_HEADER: &str = "id,selector,step,selected_r,score,si_sdr_db,si_sdri_db,spk_sim,quality";

/// One CSV row. `selected_r` is empty at step 0; the intrusive columns are
/// empty when the entry has no target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub id: String,
    pub selector: Selector,
    pub step: usize,
    pub selected_r: Option<f64>,
    pub score: f64,
    pub si_sdr_db: Option<f64>,
    pub si_sdri_db: Option<f64>,
    pub spk_sim: f64,
    pub quality: f64,
}

/// Per-selector, per-step means over all rows that carry the column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub selector: Selector,
    pub step: usize,
    pub count: usize,
    pub selected_r: Option<f64>,
    pub score: f64,
    pub si_sdr_db: Option<f64>,
    pub si_sdri_db: Option<f64>,
    pub spk_sim: f64,
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryFailure {
    pub id: String,
    pub selector: Selector,
    pub error: String,
}

/// JSON companion of the CSV rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub steps: usize,
    pub extractor: String,
    pub selectors: Vec<Selector>,
    pub aggregates: Vec<Aggregate>,
    pub failures: Vec<EntryFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub rows: Vec<RunRow>,
    pub summary: ReportSummary,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Groups rows by `(selector, step)` in that order.
pub fn aggregate(rows: &[RunRow]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(Selector, usize), Vec<&RunRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.selector, r.step)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((selector, step), g)| Aggregate {
            selector,
            step,
            count: g.len(),
            selected_r: mean_of(g.iter().filter_map(|r| r.selected_r)),
            score: mean_of(g.iter().map(|r| r.score)).unwrap_or(f64::NAN),
            si_sdr_db: mean_of(g.iter().filter_map(|r| r.si_sdr_db)),
            si_sdri_db: mean_of(g.iter().filter_map(|r| r.si_sdri_db)),
            spk_sim: mean_of(g.iter().map(|r| r.spk_sim)).unwrap_or(f64::NAN),
            quality: mean_of(g.iter().map(|r| r.quality)).unwrap_or(f64::NAN),
        })
        .collect()
}

/// Evaluation metrics of `estimate`, independent of the selector.
fn evaluate(estimate: &Waveform, entry: &LoadedEntry) -> Result<(Option<f64>, Option<f64>, f64, f64)> {
    let (sdr, sdri) = match &entry.scene {
        Some(scene) => (
            Some(si_sdr(estimate, &scene.target)?),
            Some(si_sdri(estimate, &scene.mixture, &scene.target)?),
        ),
        None => (None, None),
    };
    let sim = spk_sim(estimate, &entry.enrollment, &EmbeddingConfig::default())?;
    Ok((sdr, sdri, sim, quality_proxy(estimate)?))
}

/// `T + 1` rows for one trajectory. After an early stop the remaining steps
/// repeat the final estimate.
pub fn trajectory_rows(
    id: &str,
    selector: Selector,
    steps: usize,
    traj: &Trajectory,
    entry: &LoadedEntry,
) -> Result<Vec<RunRow>> {
    let mut rows = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        let recorded = t.min(traj.steps.len());
        let estimate = traj.estimate(recorded);
        let (si_sdr_db, si_sdri_db, spk_sim, quality) = evaluate(estimate, entry)?;
        rows.push(RunRow {
            id: id.to_string(),
            selector,
            step: t,
            selected_r: (recorded > 0).then(|| traj.steps[recorded - 1].selected_r),
            score: traj.score(recorded),
            si_sdr_db,
            si_sdri_db,
            spk_sim,
            quality,
        });
    }
    Ok(rows)
}

/// Runs every manifest entry under every selector.
///
/// Configuration problems abort before any entry is processed. Failures of
/// single entries are collected in the summary and the entry is skipped.
pub fn run_manifest(manifest: &Manifest, config: &RunConfig, selectors: &[Selector]) -> Result<RunReport> {
    config.validate()?;
    if selectors.is_empty() {
        return Err(Error::config("no selector given"));
    }
    let missing_target = manifest.entries_without_target();
    if !missing_target.is_empty() {
        if selectors.contains(&Selector::Oracle) {
            return Err(Error::config(format!(
                "oracle selector needs target_path; missing for {missing_target:?}"
            )));
        }
        if config.extractor.needs_scene() {
            return Err(Error::config(format!(
                "{} extractor needs target_path; missing for {missing_target:?}",
                config.extractor.name()
            )));
        }
    }
    if config.extractor.needs_scene() {
        let missing = manifest.entries_without_interference();
        if !missing.is_empty() {
            return Err(Error::config(format!(
                "{} extractor needs interference_path; missing for {missing:?}",
                config.extractor.name()
            )));
        }
    }

    let scorers: Vec<(Selector, Box<dyn Scorer>)> = selectors
        .iter()
        .map(|&s| Ok((s, build_scorer(s, config.lambda, config.alpha, &config.scorer_workers)?)))
        .collect::<Result<_>>()?;
    let shared: Option<Box<dyn Extractor>> = if config.extractor.needs_scene() {
        None
    } else {
        Some(config.extractor.build(None)?)
    };
    let search = config.search_config();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for e in &manifest.entries {
        let fail = |selector: Selector, err: &Error| EntryFailure {
            id: e.id.clone(),
            selector,
            error: err.to_string(),
        };
        let prepared = manifest.load_entry(e).and_then(|entry| {
            let local = match &shared {
                Some(_) => None,
                None => Some(config.extractor.build(entry.scene.as_ref())?),
            };
            Ok((entry, local))
        });
        let (entry, local) = match prepared {
            Ok(p) => p,
            Err(err) => {
                failures.extend(scorers.iter().map(|(s, _)| fail(*s, &err)));
                continue;
            }
        };
        let extractor = shared.as_deref().or(local.as_deref()).expect("one extractor is set");
        for (selector, scorer) in &scorers {
            let result = run_search(
                extractor,
                scorer.as_ref(),
                &entry.mixture,
                &entry.enrollment,
                entry.scene.as_ref(),
                &search,
            )
            .and_then(|traj| trajectory_rows(&e.id, *selector, config.steps, &traj, &entry));
            match result {
                Ok(r) => rows.extend(r),
                Err(err) => failures.push(fail(*selector, &err)),
            }
        }
    }
    rows.sort_by(|a, b| (&a.id, a.selector, a.step).cmp(&(&b.id, b.selector, b.step)));
    let mut selectors = selectors.to_vec();
    selectors.sort();
    selectors.dedup();
    Ok(RunReport {
        summary: ReportSummary {
            steps: config.steps,
            extractor: config.extractor.name().to_string(),
            selectors,
            aggregates: aggregate(&rows),
            failures,
        },
        rows,
    })
}

/// JSON path paired with a CSV report path.
pub fn summary_path(report_path: &Path) -> PathBuf {
    report_path.with_extension("json")
}

pub fn write_report(report: &RunReport, report_path: &Path) -> Result<()> {
    if let Some(dir) = report_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(report_path)?;
    if report.rows.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for r in &report.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut json = serde_json::to_string_pretty(&report.summary)?;
    json.push('\n');
    fs::write(summary_path(report_path), json)?;
    Ok(())
}

pub fn read_rows(report_path: &Path) -> Result<Vec<RunRow>> {
    let mut r = csv::Reader::from_path(report_path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Merge(format!(
            "{}: unexpected header {:?}",
            report_path.display(),
            header.join(",")
        )));
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Loads config and manifest, runs, writes `report_path` (CSV) and its JSON
/// companion.
pub fn cmd_run(
    manifest_path: &Path,
    config_path: &Path,
    selectors: &[Selector],
    report_path: &Path,
) -> Result<RunReport> {
    let config = RunConfig::load(config_path)?;
    let manifest = Manifest::load(manifest_path)?;
    let report = run_manifest(&manifest, &config, selectors)?;
    write_report(&report, report_path)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(selector: Selector, step: usize, score: f64, sdri: Option<f64>) -> RunRow {
        RunRow {
            id: "x".into(),
            selector,
            step,
            selected_r: (step > 0).then_some(0.5),
            score,
            si_sdr_db: sdri,
            si_sdri_db: sdri,
            spk_sim: 0.5,
            quality: 2.0,
        }
    }

    #[test]
    fn aggregates_group_and_skip_missing() {
        let rows = vec![
            row(Selector::Quality, 0, 1.0, Some(2.0)),
            row(Selector::Quality, 0, 3.0, None),
            row(Selector::Joint, 1, 5.0, Some(1.0)),
        ];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].selector, Selector::Quality);
        assert_eq!(agg[0].score, 2.0);
        assert_eq!(agg[0].si_sdri_db, Some(2.0));
        assert_eq!(agg[0].selected_r, None);
        assert_eq!(agg[1].count, 1);
    }

    #[test]
    fn csv_round_trip_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows = vec![
            row(Selector::Spksim, 0, 0.25, None),
            row(Selector::Spksim, 1, 0.5, Some(-1.5)),
        ];
        let report = RunReport {
            summary: ReportSummary {
                steps: 1,
                extractor: "identity".into(),
                selectors: vec![Selector::Spksim],
                aggregates: aggregate(&rows),
                failures: vec![],
            },
            rows: rows.clone(),
        };
        write_report(&report, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert!(text.lines().nth(1).unwrap().starts_with("x,spksim,0,,0.25,,,"));
        assert_eq!(read_rows(&path).unwrap(), rows);
    }
}
