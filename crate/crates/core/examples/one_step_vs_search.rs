//! Runs the spectral-mask extractor once, then searches with every built-in
//! selector and prints how each metric moves step by step.

use tse_search::extractors::make_spectral_subtraction;
use tse_search::metrics::{quality_proxy, si_sdri, spk_sim, EmbeddingConfig};
use tse_search::scene::{synthesize_scene, SceneSpec};
use tse_search::scorers::{build_scorer, ScorerWorkers, Selector, DEFAULT_ALPHA, DEFAULT_LAMBDA};
use tse_search::search::{run_scene_search, SearchConfig};

fn main() -> tse_search::Result<()> {
    let scene = synthesize_scene(&SceneSpec::new(17, 1.0, 0.0))?;
    let extractor = make_spectral_subtraction(0.1)?;
    let config = SearchConfig::default();
    let emb = EmbeddingConfig::default();

    for selector in Selector::ALL_BUILTIN {
        let scorer = build_scorer(selector, DEFAULT_LAMBDA, DEFAULT_ALPHA, &ScorerWorkers::default())?;
        let traj = run_scene_search(&extractor, scorer.as_ref(), &scene, &config)?;
        println!("selector {}", selector.as_str());
        println!("  step     r   score  SI-SDRi  quality  SpkSim");
        for t in 0..=traj.steps.len() {
            let est = traj.estimate(t);
            let r = if t == 0 {
                "    -".to_string()
            } else {
                format!("{:5.3}", traj.steps[t - 1].selected_r)
            };
            println!(
                "  {t:>4} {r} {:7.3} {:8.3} {:8.3} {:7.4}",
                traj.score(t),
                si_sdri(est, &scene.mixture, &scene.target)?,
                quality_proxy(est)?,
                spk_sim(est, &scene.enrollment, &emb)?,
            );
        }
    }
    Ok(())
}
