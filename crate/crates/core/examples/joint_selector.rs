//! Shape of the joint selector `q + lambda (1 - exp(-alpha s))`: linear in
//! quality, saturating in speaker similarity, with negative similarity
//! clamped to zero.

use tse_search::scorers::{joint_score, DEFAULT_ALPHA, DEFAULT_LAMBDA};

fn main() -> tse_search::Result<()> {
    println!("lambda = {DEFAULT_LAMBDA}, alpha = {DEFAULT_ALPHA}");
    println!("spk_sim  bonus");
    for i in -2..=10 {
        let s = i as f64 / 10.0;
        let bonus = joint_score(0.0, s, DEFAULT_LAMBDA, DEFAULT_ALPHA)?;
        println!("{s:>7.1}  {bonus:.4} {}", "#".repeat((bonus * 20.0).round() as usize));
    }
    println!("upper limit of the bonus: {:.4}", DEFAULT_LAMBDA);

    // A quality gain of 0.3 is worth the same as raising similarity from
    // 0.2 to s where the bonuses differ by 0.3.
    let base = joint_score(3.0, 0.2, DEFAULT_LAMBDA, DEFAULT_ALPHA)?;
    let target = base + 0.3;
    let s = (1..=1000)
        .map(|i| i as f64 / 1000.0)
        .find(|&s| joint_score(3.0, s, DEFAULT_LAMBDA, DEFAULT_ALPHA).is_ok_and(|v| v >= target));
    match s {
        Some(s) => println!("+0.3 quality at spk_sim 0.2 equals raising spk_sim to {s:.3}"),
        None => println!("+0.3 quality at spk_sim 0.2 outweighs any similarity gain"),
    }
    Ok(())
}
