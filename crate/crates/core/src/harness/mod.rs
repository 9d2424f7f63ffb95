//! Batch entry points behind the `tse-search` binary: dataset synthesis,
//! manifest runs, report merging and reliability analyses.

mod analyze;
mod config;
mod manifest;
mod report;
mod run;
mod synth;

pub use analyze::{
    analyze_manifest, cmd_analyze, AnalysisEntries, AnalysisReport, AnalyzeMode, DetBoundEntry, LipschitzEntry,
    VarBoundEntry,
};
pub use config::RunConfig;
pub use manifest::{LoadedEntry, Manifest, ManifestEntry};
pub use report::{cmd_report, load_report, merge, MergedReport};
pub use run::{
    aggregate, cmd_run, read_rows, run_manifest, summary_path, trajectory_rows, write_report, Aggregate, EntryFailure,
    ReportSummary, RunReport, RunRow, CSV_HEADER,
};
pub use synth::{cmd_synth, draw_scene_params, SynthOptions, MANIFEST_NAME};
