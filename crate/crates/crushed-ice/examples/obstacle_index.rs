//! Random center models and the uniform-grid obstacle index.
//!
//! Samples a capacity-balanced obstacle configuration, round-trips it through
//! JSON, checks the indexed nearest-distance query against brute force, and
//! reports the scaling diagnostic.
//!
//! ```sh
//! cargo run --release --example obstacle_index
//! ```

use std::time::Instant;

use crushed_ice::capacity::check_scaling;
use crushed_ice::model::{CenterLaw, ObstacleSet, RadiusRule, RandomCenterModel};
use rand::Rng;

fn main() {
    let c = 2.0;
    let model = RandomCenterModel {
        dim: 3,
        kappas: vec![125, 500, 2000, 8000],
        radius_rule: RadiusRule::KappaPower {
            coeff: c / (4.0 * std::f64::consts::PI),
            power: 1.0,
        },
        center_law: CenterLaw::unit_cube(3),
        seed: 42,
    };
    model.validate().unwrap();

    for n in 0..model.n_count() {
        let set = model.sample(n).unwrap();
        println!(
            "n = {n}: kappa = {:>5}, r_n = {:.3e}, capacity sum = {:.4}",
            set.len(),
            set.max_radius(),
            set.total_classical_capacity_d3()
        );
    }

    let set = model.sample(3).unwrap();
    let json = set.to_json();
    let back = ObstacleSet::from_json(&json).unwrap();
    println!(
        "\nJSON round trip: {} balls -> {} bytes -> {} balls",
        set.len(),
        json.len(),
        back.len()
    );

    let mut rng = crushed_ice::rng::substream(9, &[1]);
    let queries: Vec<[f64; 3]> = (0..10_000)
        .map(|_| {
            [
                rng.random_range(-0.2..1.2),
                rng.random_range(-0.2..1.2),
                rng.random_range(-0.2..1.2),
            ]
        })
        .collect();
    let t0 = Instant::now();
    let mut max_gap = 0.0f64;
    for q in &queries {
        let fast = set.nearest_distance(q);
        let slow = set.nearest_distance_brute(q);
        max_gap = max_gap.max((fast - slow).abs());
    }
    println!(
        "indexed vs brute force on {} queries: max gap {max_gap:.2e} ({:?} incl. brute force)",
        queries.len(),
        t0.elapsed()
    );

    let report = check_scaling(&model, 4.0);
    println!(
        "\nscaling kappa_n rho_n^(d-2): sup = {:.4}, bounded = {}",
        report.sup, report.bounded
    );
}
