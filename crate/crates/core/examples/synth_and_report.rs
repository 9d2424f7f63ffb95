//! Library-level version of `tse-search synth` + `run` + `report`: writes a
//! small synthetic dataset, runs two selectors over it, and prints the
//! merged per-step table.

use tse_search::extractors::ExtractorSpec;
use tse_search::harness::{cmd_synth, merge, run_manifest, write_report, RunConfig, SynthOptions};
use tse_search::scorers::Selector;

fn main() -> tse_search::Result<()> {
    let dir = std::env::temp_dir().join(format!("tse-search-example-{}", std::process::id()));
    let manifest = cmd_synth(&SynthOptions::new(8, 1, dir.join("data")))?;
    println!("synthesized {} scenes under {}", manifest.entries.len(), dir.display());

    let config = RunConfig::with_extractor(ExtractorSpec::SpectralSubtraction { floor: 0.1 });
    let mut summaries = Vec::new();
    for selector in [Selector::Oracle, Selector::Joint] {
        let report = run_manifest(&manifest, &config, &[selector])?;
        write_report(&report, &dir.join(format!("{}.csv", selector.as_str())))?;
        summaries.push(report.summary);
    }
    print!("{}", merge(&summaries)?.render_text());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
