//! Drives the search with an extractor that lives in another process.
//!
//! Run without arguments: the example re-launches itself with `--serve` as
//! the worker, which answers `extract` requests over stdin/stdout with a
//! simple gain-and-smoothing "model". Any program speaking the same framing
//! (for example a Python wrapper around a neural extractor) can take its
//! place.

use std::time::Duration;

use tse_search::extractors::ExternalExtractor;
use tse_search::metrics::si_sdri;
use tse_search::protocol::{serve, WorkerHook};
use tse_search::scene::{synthesize_scene, SceneSpec};
use tse_search::scorers::OracleSiSdri;
use tse_search::search::{run_scene_search, SearchConfig};

struct Smoother;

impl WorkerHook for Smoother {
    fn ops(&self) -> Vec<&'static str> {
        vec!["extract"]
    }

    fn extract(&mut self, input: &[f32], _enrollment: &[f32], _sample_rate: u32) -> Result<Vec<f32>, String> {
        // Three-tap low-pass: attenuates the brighter talker a little.
        let n = input.len();
        Ok((0..n)
            .map(|i| {
                let a = input[i.saturating_sub(1)];
                let c = input[(i + 1).min(n - 1)];
                0.25 * a + 0.5 * input[i] + 0.25 * c
            })
            .collect())
    }
}

fn main() -> tse_search::Result<()> {
    if std::env::args().any(|a| a == "--serve") {
        serve(std::io::stdin().lock(), std::io::stdout().lock(), &mut Smoother)?;
        return Ok(());
    }

    let me = std::env::current_exe()?.to_string_lossy().into_owned();
    let extractor = ExternalExtractor::spawn(&[me, "--serve".into()], Duration::from_secs(30))?;
    let scene = synthesize_scene(&SceneSpec::new(8, 1.0, 0.0))?;
    let config = SearchConfig {
        steps: 3,
        candidates: 8,
        ..Default::default()
    };
    let traj = run_scene_search(&extractor, &OracleSiSdri, &scene, &config)?;
    for t in 0..=traj.steps.len() {
        println!(
            "step {t}: SI-SDRi {:.3} dB",
            si_sdri(traj.estimate(t), &scene.mixture, &scene.target)?
        );
    }
    Ok(())
}
