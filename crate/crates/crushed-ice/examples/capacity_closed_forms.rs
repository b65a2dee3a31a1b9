//! Capacity toolbox: classical kernels, closed ball forms, the Monte Carlo
//! estimator, and the anisotropic frozen-coefficient transform.
//!
//! ```sh
//! cargo run --release --example capacity_closed_forms
//! ```

use crushed_ice::capacity::{
    anisotropic_capacity, ball_capacity_alpha_d3, estimate_capacity_mc, AnisotropicMcConfig,
    ClassicalKernelSpec, DiffusionMatrix,
};
use crushed_ice::model::{Ball, ObstacleSet};

fn main() {
    let pi = std::f64::consts::PI;
    let k3 = ClassicalKernelSpec::new(3).unwrap();
    let k2 = ClassicalKernelSpec::new(2).unwrap();

    println!("classical kernels:");
    println!(
        "  d=3, |y-z| = 0.5  ->  {:.7}   (1/(2 pi) = {:.7})",
        k3.kernel(&[0.0; 3], &[0.5, 0.0, 0.0]).unwrap(),
        1.0 / (2.0 * pi)
    );
    println!(
        "  d=2, |y-z| = 1    ->  {:.7}   (log kernel vanishes)",
        k2.kernel(&[0.0; 3], &[1.0, 0.0, 0.0]).unwrap()
    );

    println!("\nball capacities:");
    for r in [0.05, 0.1, 0.5, 1.0] {
        println!(
            "  d=3, r = {r:<4}  ->  {:.6}  (4 pi r);   alpha=1 capacity {:.6}",
            k3.ball_capacity(r).unwrap(),
            ball_capacity_alpha_d3(r, 1.0).unwrap()
        );
    }
    println!(
        "  d=2, r = 1/e   ->  {:.6}  (2 pi)",
        k2.ball_capacity((-1.0f64).exp()).unwrap()
    );

    println!("\nMonte Carlo vs closed form (walk on spheres):");
    for r in [0.05, 0.1, 0.5] {
        let set = ObstacleSet::new(
            3,
            vec![Ball {
                center: [0.0; 3],
                radius: r,
            }],
        )
        .unwrap();
        let launch = (2.0 * r).max(0.5);
        let est = estimate_capacity_mc(&set, launch, 100.0 * launch, 100_000, 7).unwrap();
        let exact = 4.0 * pi * r;
        println!(
            "  r = {r:<4}: MC {:.5} +- {:.5}, exact {exact:.5}  ({:+.2} sigma)",
            est.capacity.value,
            est.capacity.stderr,
            (est.capacity.value - exact) / est.capacity.stderr
        );
    }

    println!("\nanisotropic transform sqrt(det b) Qcl(b^(-1/2) ball):");
    let b = DiffusionMatrix::scaled_identity(3, 4.0).unwrap(); // c^2 = 4
    let got = anisotropic_capacity(&b, 0.1, &AnisotropicMcConfig::default()).unwrap();
    println!(
        "  b = 4 I, r = 0.1: {:.6}  (closed form 4 pi c^2 r = {:.6})",
        got.value,
        4.0 * pi * 4.0 * 0.1
    );
    let b = DiffusionMatrix::new(3, &[4.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
    let got = anisotropic_capacity(
        &b,
        0.1,
        &AnisotropicMcConfig {
            n_paths: 100_000,
            seed: 11,
        },
    )
    .unwrap();
    println!(
        "  b = diag(4,1,1), r = 0.1: {:.6} +- {:.6}  (ellipsoid Monte Carlo)",
        got.value, got.stderr
    );
}
