//! The main event at desk scale: hard entrance times converge to the soft
//! exponential clock whose rate is the limiting capacity density.
//!
//! Runs a reduced sweep (the full acceptance configuration lives in
//! `configs/crushed_ice_std3d.toml`) and prints KS distances and the stable
//! metric per obstacle count.
//!
//! ```sh
//! cargo run --release --example crushed_ice_sweep
//! ```

use crushed_ice::harness::{preset_crushed_ice_3d, run_crushed_ice};

fn main() {
    let mut cfg = preset_crushed_ice_3d(20260809);
    cfg.paths_per_env = 20_000;
    cfg.env_reps = 1;

    let result = run_crushed_ice(&cfg, None).unwrap();
    for w in &result.warnings {
        println!("warning: {w}");
    }
    println!("kappa    hit-frac   KS(tau_n, tau)   rho(tau_n, tau)");
    for (n, kappa) in cfg.model.kappas.iter().enumerate() {
        let hit = result.metric(n as i64, 0, "hit_fraction").unwrap();
        let ks = result.metric(n as i64, 0, "ks_vs_limit").unwrap();
        let rho = result.metric(n as i64, 0, "stable_metric_vs_limit").unwrap();
        println!(
            "{kappa:>5}    {:.4}     {:.4} (noise {:.4})   {:.4} +- {:.4}",
            hit.value, ks.value, ks.stderr, rho.value, rho.stderr
        );
    }
    let n_last = (cfg.model.n_count() - 1) as i64;
    if let Some(margin) = result.metric(n_last, 0, "evenness_margin") {
        println!(
            "\nevenness margin at the largest n: {:.5} +- {:.5}",
            margin.value, margin.stderr
        );
    }
    println!("elapsed: {:.1}s", result.metadata.elapsed_secs);
}
