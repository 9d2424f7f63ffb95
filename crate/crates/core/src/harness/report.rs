use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::run::{aggregate, read_rows, summary_path, Aggregate, ReportSummary};
use crate::error::{Error, Result};
use crate::scorers::Selector;

/// Aggregates of one or more run reports sharing `T` and the extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedReport {
    pub steps: usize,
    pub extractor: String,
    pub aggregates: Vec<Aggregate>,
}

const CONSISTENCY_TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= CONSISTENCY_TOL * a.abs().max(b.abs()).max(1.0) || (a.is_nan() && b.is_nan())
}

fn close_opt(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => close(a, b),
        (None, None) => true,
        _ => false,
    }
}

fn consistent(stored: &Aggregate, fresh: &Aggregate) -> bool {
    stored.selector == fresh.selector
        && stored.step == fresh.step
        && stored.count == fresh.count
        && close_opt(stored.selected_r, fresh.selected_r)
        && close(stored.score, fresh.score)
        && close_opt(stored.si_sdr_db, fresh.si_sdr_db)
        && close_opt(stored.si_sdri_db, fresh.si_sdri_db)
        && close(stored.spk_sim, fresh.spk_sim)
        && close(stored.quality, fresh.quality)
}

/// Reads a report given either its CSV or its JSON path, and checks that the
/// stored aggregates match the raw rows.
pub fn load_report(path: &Path) -> Result<ReportSummary> {
    let csv_path: PathBuf = if path.extension().is_some_and(|e| e == "json") {
        path.with_extension("csv")
    } else {
        path.to_path_buf()
    };
    let json_path = summary_path(&csv_path);
    let text = fs::read_to_string(&json_path)
        .map_err(|e| Error::Merge(format!("cannot read {}: {e}", json_path.display())))?;
    let summary: ReportSummary =
        serde_json::from_str(&text).map_err(|e| Error::Merge(format!("{}: {e}", json_path.display())))?;
    let fresh = aggregate(&read_rows(&csv_path)?);
    if fresh.len() != summary.aggregates.len() || !summary.aggregates.iter().zip(&fresh).all(|(s, f)| consistent(s, f))
    {
        return Err(Error::Merge(format!(
            "{}: stored aggregates disagree with the rows of {}",
            json_path.display(),
            csv_path.display()
        )));
    }
    Ok(summary)
}

pub fn merge(summaries: &[ReportSummary]) -> Result<MergedReport> {
    let first = summaries
        .first()
        .ok_or_else(|| Error::Merge("no reports given".into()))?;
    let mut seen: Vec<Selector> = Vec::new();
    let mut aggregates = Vec::new();
    for s in summaries {
        if s.steps != first.steps {
            return Err(Error::Merge(format!(
                "reports disagree on T ({} vs {})",
                first.steps, s.steps
            )));
        }
        if s.extractor != first.extractor {
            return Err(Error::Merge(format!(
                "reports use different extractors ({} vs {})",
                first.extractor, s.extractor
            )));
        }
        for a in &s.aggregates {
            if !s.selectors.contains(&a.selector) || a.step > s.steps {
                return Err(Error::Merge(format!(
                    "aggregate {} step {} is out of range",
                    a.selector, a.step
                )));
            }
        }
        for sel in &s.selectors {
            if seen.contains(sel) {
                return Err(Error::Merge(format!("selector {sel} appears in more than one report")));
            }
            seen.push(*sel);
        }
        aggregates.extend(s.aggregates.iter().cloned());
    }
    Ok(MergedReport {
        steps: first.steps,
        extractor: first.extractor.clone(),
        aggregates,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.3}"))
}

impl MergedReport {
    /// `(label, step, aggregate)` rows with step 0 shown once as the baseline.
    fn table_rows(&self) -> Vec<(String, usize, &Aggregate)> {
        let mut out = Vec::new();
        if let Some(base) = self.aggregates.iter().find(|a| a.step == 0) {
            out.push(("baseline".to_string(), 0, base));
        }
        out.extend(
            self.aggregates
                .iter()
                .filter(|a| a.step > 0)
                .map(|a| (a.selector.to_string(), a.step, a)),
        );
        out
    }

    /// Aligned plain-text table.
    pub fn render_text(&self) -> String {
        let rows = self.table_rows();
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max("selector".len());
        let mut s = String::new();
        let _ = writeln!(s, "extractor: {}, T = {}", self.extractor, self.steps);
        let _ = writeln!(
            s,
            "{:<width$}  {:>4}  {:>9}  {:>8}  {:>8}",
            "selector", "step", "SI-SDRi", "quality", "SpkSim"
        );
        for (label, step, a) in rows {
            let _ = writeln!(
                s,
                "{label:<width$}  {step:>4}  {:>9}  {:>8.3}  {:>8.3}",
                fmt_opt(a.si_sdri_db),
                a.quality,
                a.spk_sim
            );
        }
        s
    }

    pub fn render_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["selector", "step", "si_sdri_db", "quality", "spk_sim"])?;
        for (label, step, a) in self.table_rows() {
            w.write_record([
                label,
                step.to_string(),
                a.si_sdri_db.map(|v| v.to_string()).unwrap_or_default(),
                a.quality.to_string(),
                a.spk_sim.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Loads, validates and merges the given reports.
pub fn cmd_report(paths: &[PathBuf]) -> Result<MergedReport> {
    let summaries = paths.iter().map(|p| load_report(p)).collect::<Result<Vec<_>>>()?;
    merge(&summaries)
}
