//! Dirichlet solutions: hard obstacles vs the relaxed limit vs the grid.
//!
//! Evaluates the hard-obstacle solution at interior points across a small
//! sweep and compares with the Feynman–Kac solution of the relaxed problem
//! and the finite-difference reference.
//!
//! ```sh
//! cargo run --release --example dirichlet_solutions
//! ```

use crushed_ice::harness::{preset_dirichlet, run_dirichlet};

fn main() {
    let mut cfg = preset_dirichlet(20260809);
    cfg.model.kappas = vec![125, 1000];
    if let Some(p) = cfg.problem.as_mut() {
        p.paths_per_point = Some(4000);
        p.fd_m = 33;
        p.fd_m_refined = 49;
    }

    let result = run_dirichlet(&cfg, None).unwrap();
    for w in &result.warnings {
        println!("warning: {w}");
    }
    println!("per-n mean |u_n - u| over the evaluation points:");
    for (n, kappa) in cfg.model.kappas.iter().enumerate() {
        let gap = result.metric(n as i64, 0, "solution_mean_abs_gap").unwrap();
        println!("  kappa {kappa:>5}: {:.4} +- {:.4}", gap.value, gap.stderr);
    }
    println!("\nFD refinement deltas and limit-solver agreement:");
    for pid in 0..5 {
        let delta = result
            .metric(-1, 0, &format!("fd_refinement_delta_p{pid}"))
            .unwrap();
        let agree = result.metric(-1, 0, &format!("fd_mc_agree_p{pid}")).unwrap();
        println!(
            "  point {pid}: delta = {:.5}, Feynman-Kac vs grid agree = {}",
            delta.value,
            agree.value == 1.0
        );
    }
    println!("elapsed: {:.1}s", result.metadata.elapsed_secs);
}
