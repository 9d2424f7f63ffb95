//! The leaky-linear extractor keeps a fixed fraction `kappa` of the
//! interference, so an oracle-guided search has a closed-form trajectory:
//! `s_t = s + kappa^(t+1) i`, i.e. about 6.02 dB more per step at
//! `kappa = 0.5`.

use tse_search::extractors::make_leaky_linear;
use tse_search::lab::segment_length_series;
use tse_search::metrics::si_sdri;
use tse_search::scene::{synthesize_scene, SceneSpec};
use tse_search::scorers::OracleSiSdri;
use tse_search::search::{run_scene_search, SearchConfig};

fn main() -> tse_search::Result<()> {
    let kappa: f64 = 0.5;
    let scene = synthesize_scene(&SceneSpec::new(3, 1.0, 0.0))?;
    println!(
        "target/interference cosine: {:.2e}",
        scene.orthogonality().unwrap_or(f64::NAN)
    );

    let extractor = make_leaky_linear(&scene, kappa)?;
    let traj = run_scene_search(&extractor, &OracleSiSdri, &scene, &SearchConfig::default())?;
    let closed_form_db = -20.0 * kappa.log10();
    println!("step  selected_r  SI-SDRi  expected");
    for t in 0..=traj.steps.len() {
        let r = if t == 0 { f64::NAN } else { traj.steps[t - 1].selected_r };
        println!(
            "{t:>4}  {r:>10.3}  {:7.3}  {:8.3}",
            si_sdri(traj.estimate(t), &scene.mixture, &scene.target)?,
            closed_form_db * (t + 1) as f64
        );
    }
    println!(
        "segment lengths ||x0 - s_(t-1)||: {:?}",
        segment_length_series(&traj, &scene.mixture)
    );
    Ok(())
}
