//! Randomized stopping times from exponential clocks.
//!
//! With a constant rate the sampled law is exactly exponential; the
//! survival-process inversion gives the same law; an indicator rate on the
//! unit cube kills only part of the mass because the diffusion is transient.
//!
//! ```sh
//! cargo run --release --example exponential_clock
//! ```

use crushed_ice::fields::ScalarField;
use crushed_ice::model::Domain;
use crushed_ice::paths::{DiffusionSpec, StartLaw};
use crushed_ice::stopping::{
    empirical_law, ks_one_sample, ks_two_sample, sample_ensemble, StableTestSuite, StopKind,
    StopRule,
};

fn main() {
    let domain = Domain::full_space(3).unwrap();
    let spec = DiffusionSpec::new(3, 0.01, 100.0, 0.6).unwrap();
    let suite = StableTestSuite::default_for_box(&[0.0; 3], &[1.0; 3]);
    let start = StartLaw::Point {
        point: vec![0.5; 3],
    };
    let n = 50_000;

    let c = 2.0;
    let h = ScalarField::constant(c);
    let ens = sample_ensemble(
        &spec,
        &domain,
        StopRule::RateClock(&h),
        &start,
        &suite,
        n,
        1,
        0,
    )
    .unwrap();
    let times: Vec<f64> = ens.iter().map(|s| s.time).collect();
    let ks = ks_one_sample(&times, |t| 1.0 - (-c * t).exp()).unwrap();
    let law = empirical_law(&times).unwrap();
    println!("h = {c} everywhere:");
    println!("  KS vs Exp({c})        = {:.4}", ks.statistic);
    println!(
        "  mean tau             = {:.4}  (1/c = {:.4})",
        times.iter().sum::<f64>() / n as f64,
        1.0 / c
    );
    let lf = law.laplace_functional(1.0);
    println!(
        "  E[exp(-tau)]         = {:.4} +- {:.4}  (c/(1+c) = {:.4})",
        lf.value,
        lf.stderr,
        c / (1.0 + c)
    );

    let inv = sample_ensemble(
        &spec,
        &domain,
        StopRule::RateClockInverse(&h),
        &start,
        &suite,
        n,
        2,
        0,
    )
    .unwrap();
    let inv_times: Vec<f64> = inv.iter().map(|s| s.time).collect();
    let ks2 = ks_two_sample(&times, &inv_times).unwrap();
    println!(
        "  survival inversion   : KS = {:.4}, p = {:.3}",
        ks2.statistic, ks2.p_value
    );

    // Indicator rate on the unit cube: transient escape leaves tau = inf mass.
    let h_cube = ScalarField::box_indicator(&[0.0; 3], &[1.0; 3], 2.0);
    let spec_short = DiffusionSpec::new(3, 0.005, 30.0, 0.6).unwrap();
    let ens = sample_ensemble(
        &spec_short,
        &domain,
        StopRule::RateClock(&h_cube),
        &start,
        &suite,
        20_000,
        3,
        0,
    )
    .unwrap();
    let killed = ens.iter().filter(|s| s.event == StopKind::Killed).count();
    println!("\nh = 2 on the unit cube, start at the center:");
    println!(
        "  killed fraction      = {:.3}  (strictly between 0 and 1)",
        killed as f64 / ens.len() as f64
    );
}
