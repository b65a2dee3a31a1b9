//! The capacity bound on hitting probabilities:
//! `P_pi(D_W <= b) <= e^(alpha b) ||G_alpha pi||_sup Cap_alpha(W)`.
//!
//! Estimates the left side by simulation and bounds the right side by the
//! closed-form alpha-capacities of the balls.
//!
//! ```sh
//! cargo run --release --example hitting_bound
//! ```

use crushed_ice::model::{Ball, ObstacleSet};
use crushed_ice::paths::{DiffusionSpec, StartLaw};
use crushed_ice::stopping::hitting_bound_check;
use rand::Rng;

fn main() {
    let spec = DiffusionSpec::new(3, 0.005, 1.0, 0.6).unwrap();
    let start = StartLaw::UniformBox {
        lower: vec![-1.0; 3],
        upper: vec![1.0; 3],
    };

    println!("balls    alpha   b      lhs (MC)          rhs (capacity)   ok");
    for (i, n_balls) in [1usize, 20, 100].iter().enumerate() {
        let mut rng = crushed_ice::rng::substream(33, &[i as u64]);
        let balls: Vec<Ball> = (0..*n_balls)
            .map(|_| Ball {
                center: [
                    rng.random_range(-0.8..0.8),
                    rng.random_range(-0.8..0.8),
                    rng.random_range(-0.8..0.8),
                ],
                radius: rng.random_range(0.02..0.06),
            })
            .collect();
        let set = ObstacleSet::new(3, balls).unwrap();
        let report = hitting_bound_check(&spec, &start, &set, 1.0, 1.0, 20_000, 5, i as u64)
            .unwrap();
        println!(
            "{n_balls:>5}    1.0     1.0    {:.4} +- {:.4}   {:>10.4}      {}",
            report.lhs.value, report.lhs.stderr, report.rhs, report.satisfied
        );
    }
}
