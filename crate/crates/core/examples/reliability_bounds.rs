//! Empirical Lipschitz constants along a search trajectory, the pairwise
//! score-deviation bound, and the Monte-Carlo variance bound.

use tse_search::extractors::make_spectral_subtraction;
use tse_search::lab::{
    check_deterministic_bound, check_variance_bound, estimate_along_trajectory, segment_length_series,
    verify_input_deviation, VarianceCheck, DEFAULT_GRID_SIZE,
};
use tse_search::scene::{synthesize_scene, SceneSpec};
use tse_search::scorers::OracleSiSdri;
use tse_search::search::{run_scene_search, SearchConfig};

fn main() -> tse_search::Result<()> {
    let scene = synthesize_scene(&SceneSpec::new(5, 1.0, 0.0))?;
    let f = make_spectral_subtraction(0.1)?;
    let config = SearchConfig::default();
    let traj = run_scene_search(&f, &OracleSiSdri, &scene, &config)?;

    println!(
        "input deviation identity, max relative error: {:.2e}",
        verify_input_deviation(&traj, &scene.mixture)?
    );
    let estimates = estimate_along_trajectory(
        &f,
        &OracleSiSdri,
        &traj,
        &scene.mixture,
        &scene.enrollment,
        Some(&scene),
        DEFAULT_GRID_SIZE,
    )?;
    let segments = segment_length_series(&traj, &scene.mixture);
    println!("step  segment    L_f     L_R");
    for (t, (est, seg)) in estimates.iter().zip(&segments).enumerate() {
        println!("{:>4}  {seg:7.3}  {:6.3}  {:6.3}", t + 1, est.l_f, est.l_r);
    }

    let report = check_deterministic_bound(&traj, &estimates, &scene.mixture)?;
    println!(
        "{} candidate pairs, max |dR| / bound = {:.4}",
        report.pairs.len(),
        report.max_ratio.unwrap_or(f64::NAN)
    );

    for eps in [0.01, 0.05] {
        let r = check_variance_bound(&f, &OracleSiSdri, &scene, &config, &VarianceCheck::new(eps, 1000))?;
        let (lhs, rhs) = (r.variance_lhs.unwrap_or(0.0), r.variance_rhs.unwrap_or(0.0));
        println!(
            "eps_r = {eps}: Var[R] = {lhs:.3e}, bound = {rhs:.3e}, ratio = {:.3}",
            lhs / rhs
        );
    }
    Ok(())
}
