//! Soft potentials against hard obstacles: with `c_n r_n^2` large, the
//! occupation-clock time is squeezed between the entrance times of the balls
//! and of slightly shrunk balls; with `c_n r_n^2` small, the potential barely
//! kills and the laws separate.
//!
//! ```sh
//! cargo run --release --example schrodinger_sandwich
//! ```

use crushed_ice::harness::{preset_schrodinger, run_schrodinger};

fn run(cn_rn2: f64) {
    let mut cfg = preset_schrodinger(20260809, cn_rn2);
    cfg.paths_per_env = 15_000;
    cfg.env_reps = 1;
    cfg.model.kappas = vec![500, 2000];

    let result = run_schrodinger(&cfg, None).unwrap();
    println!("c_n r_n^2 = {cn_rn2}:");
    for (n, kappa) in cfg.model.kappas.iter().enumerate() {
        let soft_hard = result.metric(n as i64, 0, "ks_soft_vs_hard").unwrap();
        let soft_shrunk = result.metric(n as i64, 0, "ks_soft_vs_shrunk").unwrap();
        let violation = result.metric(n as i64, 0, "sandwich_violation").unwrap();
        println!(
            "  kappa {kappa:>5}: KS(soft, hard) = {:.4}, KS(soft, shrunk) = {:.4}, sandwich violation = {:.4}",
            soft_hard.value, soft_shrunk.value, violation.value
        );
    }
}

fn main() {
    run(100.0); // strong potential: soft time hugs the hard entrance time
    run(0.1); // weak potential: the soft clock barely fires
}
