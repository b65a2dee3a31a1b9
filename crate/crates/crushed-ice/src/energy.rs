//! Resolvent kernels and Monte Carlo energy functionals of measures.
//!
//! The free-space alpha-kernel of the Laplacian generator pairs measures into
//! energies `int int g_alpha(x, y) mu(dy) nu(dx)`. Those scalar pairings are
//! what the convergence theory constrains: the off-diagonal block sum of the
//! iid obstacle ensemble collapses algebraically to `(1 - 1/kappa)` times the
//! full energy, and the evenness condition compares it against the energy of
//! the limit rate measure.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capacity::PI;
use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::model::{CenterLaw, RadiusRule, RandomCenterModel};
use crate::rng::{ns, substream};
use crate::special::bessel_k0;
use crate::stats::{Estimate, Welford};

/// Free-space resolvent kernel `g_alpha(x, y) = int_0^inf e^{-alpha t} p_t(x, y) dt`
/// for the diffusion with generator `Delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenKernel {
    pub dim: usize,
    pub alpha: f64,
}

impl GreenKernel {
    pub fn new(dim: usize, alpha: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !(alpha > 0.0) {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self { dim, alpha })
    }

    /// Kernel value at separation `r > 0`:
    /// `exp(-sqrt(alpha) r) / (4 pi r)` in d = 3, `K0(sqrt(alpha) r) / (2 pi)` in d = 2.
    pub fn at_distance(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::SingularKernel);
        }
        let s = self.alpha.sqrt();
        Ok(match self.dim {
            2 => bessel_k0(s * r) / (2.0 * PI),
            _ => (-s * r).exp() / (4.0 * PI * r),
        })
    }

    pub fn eval(&self, x: &Point, y: &Point) -> Result<f64> {
        self.at_distance(geom::dist(x, y))
    }
}

/// Kernel value between two points; see [`GreenKernel::eval`].
pub fn green_kernel(kernel: &GreenKernel, x: &Point, y: &Point) -> Result<f64> {
    kernel.eval(x, y)
}

/// A finite measure represented by its total mass and a normalized sampler.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeasureSampler {
    pub total_mass: f64,
    pub law: MeasureLaw,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeasureLaw {
    PointMass { point: Vec<f64> },
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
    /// Density proportional to `offset + slope . x` on the box (rejection sampled).
    AffineTiltBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
        offset: f64,
        slope: Vec<f64>,
    },
}

impl MeasureSampler {
    pub fn point_mass(point: &[f64], mass: f64) -> Self {
        Self {
            total_mass: mass,
            law: MeasureLaw::PointMass {
                point: point.to_vec(),
            },
        }
    }

    pub fn uniform_box(lower: &[f64], upper: &[f64], mass: f64) -> Self {
        Self {
            total_mass: mass,
            law: MeasureLaw::UniformBox {
                lower: lower.to_vec(),
                upper: upper.to_vec(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_mass >= 0.0) || !self.total_mass.is_finite() {
            return Err(Error::invalid("measure mass must be finite and nonnegative"));
        }
        if let MeasureLaw::AffineTiltBox {
            lower,
            upper,
            offset,
            slope,
        } = &self.law
        {
            let corners = corner_range(lower, upper, *offset, slope);
            if corners.0 < 0.0 {
                return Err(Error::invalid("affine tilt density is negative on the box"));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        match &self.law {
            MeasureLaw::PointMass { point } => geom::from_slice(point),
            MeasureLaw::UniformBox { lower, upper } => sample_box(lower, upper, rng),
            MeasureLaw::AffineTiltBox {
                lower,
                upper,
                offset,
                slope,
            } => {
                let (_, sup) = corner_range(lower, upper, *offset, slope);
                loop {
                    let x = sample_box(lower, upper, rng);
                    let w = offset + slope.iter().enumerate().map(|(i, s)| s * x[i]).sum::<f64>();
                    if rng.random_range(0.0..sup) < w {
                        return x;
                    }
                }
            }
        }
    }
}

fn sample_box(lower: &[f64], upper: &[f64], rng: &mut ChaCha8Rng) -> Point {
    let mut p = geom::zero();
    for i in 0..lower.len() {
        p[i] = rng.random_range(lower[i]..upper[i]);
    }
    p
}

fn corner_range(lower: &[f64], upper: &[f64], offset: f64, slope: &[f64]) -> (f64, f64) {
    let mut min = offset;
    let mut max = offset;
    for (i, s) in slope.iter().enumerate() {
        let (a, b) = (s * lower[i], s * upper[i]);
        min += a.min(b);
        max += a.max(b);
    }
    (min, max)
}

/// Pair separations below this are resampled as numerically singular.
pub const SINGULAR_SEPARATION: f64 = 1e-9;
/// Resampled fraction above this aborts the estimate as divergent.
pub const DIVERGENCE_FRACTION: f64 = 0.01;
const RESAMPLE_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub energy: Estimate,
    pub resampled_fraction: f64,
    pub n_pairs: usize,
}

/// Monte Carlo estimate of `int int g_alpha(x, y) mu(dy) nu(dx)` from
/// independent pairs. Nearly-coincident pairs are resampled and counted; a
/// resample fraction above [`DIVERGENCE_FRACTION`] is reported as divergence
/// (atomic self-energy).
pub fn energy_mc(
    mu: &MeasureSampler,
    nu: &MeasureSampler,
    kernel: &GreenKernel,
    n_pairs: usize,
    seed: u64,
) -> Result<EnergyEstimate> {
    mu.validate()?;
    nu.validate()?;
    if n_pairs == 0 {
        return Err(Error::invalid("energy MC needs at least one pair"));
    }
    if mu.total_mass == 0.0 || nu.total_mass == 0.0 {
        return Ok(EnergyEstimate {
            energy: Estimate::exact(0.0),
            resampled_fraction: 0.0,
            n_pairs,
        });
    }

    let mut rng = substream(seed, &[ns::ENERGY]);
    let mut acc = Welford::new();
    let mut resampled = 0usize;
    for _ in 0..n_pairs {
        let mut value = None;
        for attempt in 0..RESAMPLE_ATTEMPTS {
            let x = mu.sample(&mut rng);
            let y = nu.sample(&mut rng);
            let r = geom::dist(&x, &y);
            if r >= SINGULAR_SEPARATION {
                if attempt > 0 {
                    resampled += 1;
                }
                value = Some(kernel.at_distance(r)?);
                break;
            }
        }
        match value {
            Some(v) => acc.push(v),
            None => resampled += 1,
        }
    }
    let resampled_fraction = resampled as f64 / n_pairs as f64;
    if resampled_fraction > DIVERGENCE_FRACTION {
        return Err(Error::Divergence(format!(
            "{:.1}% of kernel pairs were numerically singular; the pairing diverges",
            100.0 * resampled_fraction
        )));
    }
    let scale = mu.total_mass * nu.total_mass;
    Ok(EnergyEstimate {
        energy: acc.estimate().scaled(scale),
        resampled_fraction,
        n_pairs,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IidIdentityReport {
    /// `(1 - 1/kappa) ||G gamma||^2`, the algebraic route.
    pub lhs: Estimate,
    /// The same quantity recomputed as the block sum over ordered pairs
    /// `i != j` of iid blocks `gamma / kappa`, with fresh randomness.
    pub rhs: Estimate,
    pub gap: Estimate,
    pub within_3_stderr: bool,
}

/// Check the iid block identity
/// `sum_{i != j} int (G gamma_j) d gamma_i = (1 - 1/kappa) ||G gamma||^2`
/// with two independent Monte Carlo estimates.
pub fn iid_identity_check(
    gamma_bar: &MeasureSampler,
    kappa: u64,
    kernel: &GreenKernel,
    n_pairs: usize,
    seed: u64,
) -> Result<IidIdentityReport> {
    if kappa <= 1 {
        // The sum over i != j is empty.
        let zero = Estimate::exact(0.0);
        return Ok(IidIdentityReport {
            lhs: zero,
            rhs: zero,
            gap: zero,
            within_3_stderr: true,
        });
    }
    let full = energy_mc(gamma_bar, gamma_bar, kernel, n_pairs, seed)?;
    let lhs = full.energy.scaled(1.0 - 1.0 / kappa as f64);

    // Block route: each block is gamma/kappa, and there are kappa(kappa-1)
    // ordered pairs of distinct blocks.
    let block = MeasureSampler {
        total_mass: gamma_bar.total_mass / kappa as f64,
        law: gamma_bar.law.clone(),
    };
    let per_block = energy_mc(&block, &block, kernel, n_pairs, seed ^ 0x51ab_17ce)?;
    let rhs = per_block
        .energy
        .scaled(kappa as f64 * (kappa as f64 - 1.0));

    let gap = lhs.minus(&rhs);
    Ok(IidIdentityReport {
        lhs,
        rhs,
        within_3_stderr: gap.value.abs() <= 3.0 * gap.stderr,
        gap,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvennessReport {
    /// Estimate of `limsup sum_{i != j} int (G gamma_j) d gamma_i` at this `n`.
    pub off_diagonal_sum: Option<Estimate>,
    /// Energy of the limit rate measure, `int (G eta) d eta`.
    pub eta_energy: Estimate,
    /// `eta_energy - off_diagonal_sum` with propagated error.
    pub margin: Option<Estimate>,
    /// Condition flagged as violated (negative margin beyond noise, or a
    /// divergent obstacle-side energy from atomic clumping).
    pub violated: bool,
    pub lhs_divergent: bool,
}

/// Build the averaged obstacle measure `gamma_bar^n` of the random center
/// model at sweep index `n`: total mass `kappa_n * E_mu[cap_n(x)]`, sampling
/// law `mu` tilted by the per-obstacle capacity.
pub fn averaged_obstacle_measure(model: &RandomCenterModel, n_index: usize) -> Result<MeasureSampler> {
    let kappa = model.kappas[n_index];
    if kappa == 0 {
        return Ok(MeasureSampler {
            total_mass: 0.0,
            law: MeasureLaw::PointMass {
                point: vec![0.0; model.dim],
            },
        });
    }
    let spec = crate::capacity::ClassicalKernelSpec::new(model.dim)?;
    match (&model.radius_rule, &model.center_law) {
        (rule, law) if !rule.is_position_dependent() => {
            let r = rule.radius(n_index, kappa, &geom::zero());
            let cap = spec.ball_capacity(r)?;
            let measure_law = match law {
                CenterLaw::UniformBox { lower, upper } => MeasureLaw::UniformBox {
                    lower: lower.clone(),
                    upper: upper.clone(),
                },
                CenterLaw::PointMass { point } => MeasureLaw::PointMass {
                    point: point.clone(),
                },
            };
            Ok(MeasureSampler {
                total_mass: kappa as f64 * cap,
                law: measure_law,
            })
        }
        (
            RadiusRule::AffineField {
                coeff,
                power,
                axis,
                offset,
                slope,
            },
            CenterLaw::UniformBox { lower, upper },
        ) => {
            if model.dim != 3 {
                return Err(Error::invalid(
                    "position-dependent capacity tilt is only supported in d = 3",
                ));
            }
            // cap(x) = 4 pi r_n(x) is affine in x, so the tilted measure stays
            // in the affine family; the mean of an affine density over a box
            // is its value at the center.
            let base = coeff / (kappa as f64).powf(*power);
            let mut slope_vec = vec![0.0; model.dim];
            slope_vec[*axis] = 4.0 * PI * base * slope;
            let center = 0.5 * (lower[*axis] + upper[*axis]);
            let mean_cap = 4.0 * PI * base * (offset + slope * center);
            Ok(MeasureSampler {
                total_mass: kappa as f64 * mean_cap,
                law: MeasureLaw::AffineTiltBox {
                    lower: lower.clone(),
                    upper: upper.clone(),
                    offset: 4.0 * PI * base * offset,
                    slope: slope_vec,
                },
            })
        }
        _ => Err(Error::invalid(
            "averaged obstacle measure needs a box center law for tilted radii",
        )),
    }
}

/// Estimate both sides of the evenness condition
/// `limsup_n sum_{i != j} int (G gamma_j) d gamma_i <= int (G eta) d eta`
/// at sweep index `n`.
pub fn evenness_condition_estimate(
    model: &RandomCenterModel,
    n_index: usize,
    eta: &MeasureSampler,
    kernel: &GreenKernel,
    n_pairs: usize,
    seed: u64,
) -> Result<EvennessReport> {
    let gamma = averaged_obstacle_measure(model, n_index)?;
    let kappa = model.kappas[n_index];
    let eta_energy = energy_mc(eta, eta, kernel, n_pairs, seed ^ 0x77)?.energy;

    let lhs = if kappa <= 1 {
        Some(Estimate::exact(0.0))
    } else {
        match energy_mc(&gamma, &gamma, kernel, n_pairs, seed) {
            Ok(e) => Some(e.energy.scaled(1.0 - 1.0 / kappa as f64)),
            Err(Error::Divergence(_)) => None,
            Err(e) => return Err(e),
        }
    };

    match lhs {
        Some(lhs) => {
            let margin = eta_energy.minus(&lhs);
            Ok(EvennessReport {
                off_diagonal_sum: Some(lhs),
                eta_energy,
                violated: margin.value < -2.0 * margin.stderr,
                margin: Some(margin),
                lhs_divergent: false,
            })
        }
        None => Ok(EvennessReport {
            off_diagonal_sum: None,
            eta_energy,
            margin: None,
            violated: true,
            lhs_divergent: true,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Quadrature oracle for the heat-kernel Laplace transform in d = 3:
    /// `int_0^inf e^{-alpha t} (4 pi t)^{-3/2} e^{-r^2/(4t)} dt`, integrated in
    /// log time where the integrand decays at both ends.
    fn heat_kernel_laplace_d3(r: f64, alpha: f64) -> f64 {
        let (lo, hi, n) = (-40.0, 8.0, 4800);
        let h = (hi - lo) / n as f64;
        let mut sum = 0.0;
        for i in 0..=n {
            let u = lo + i as f64 * h;
            let t = u.exp();
            let val = (-alpha * t).exp() * (4.0 * PI * t).powf(-1.5) * (-r * r / (4.0 * t)).exp() * t;
            sum += if i == 0 || i == n { 0.5 * val } else { val };
        }
        sum * h
    }

    #[test]
    fn green_kernel_d3_matches_quadrature() {
        let k = GreenKernel::new(3, 1.0).unwrap();
        // 20 log-spaced separations.
        for i in 0..20 {
            let r = 0.05 * (100.0f64).powf(i as f64 / 19.0); // 0.05 .. 5
            let closed = k.at_distance(r).unwrap();
            let quad = heat_kernel_laplace_d3(r, 1.0);
            let rel = ((closed - quad) / quad).abs();
            assert!(rel < 1e-6, "r = {r}: closed {closed}, quad {quad}, rel {rel:.2e}");
        }
        // frozen spot value: e^{-1}/(4 pi)
        let v = k.at_distance(1.0).unwrap();
        assert!((v - 0.029_274_915_762_159_58).abs() < 1e-12);
    }

    #[test]
    fn green_kernel_d2_matches_quadrature() {
        // d = 2 transform: int e^{-t} (4 pi t)^{-1} e^{-r^2/4t} dt = K0(r)/(2 pi).
        let k = GreenKernel::new(2, 1.0).unwrap();
        for r in [0.1, 0.5, 1.0, 2.0] {
            let (lo, hi, n) = (-40.0, 8.0, 4800);
            let h = (hi - lo) / n as f64;
            let mut quad = 0.0;
            for i in 0..=n {
                let u = lo + i as f64 * h;
                let t: f64 = u.exp();
                let val = (-t).exp() / (4.0 * PI * t) * (-r * r / (4.0 * t)).exp() * t;
                quad += if i == 0 || i == n { 0.5 * val } else { val };
            }
            quad *= h;
            let closed = k.at_distance(r).unwrap();
            assert!(((closed - quad) / quad).abs() < 1e-8, "r = {r}");
        }
    }

    #[test]
    fn kernel_symmetry_and_decay() {
        let k = GreenKernel::new(3, 1.0).unwrap();
        let mut rng = substream(5, &[1]);
        for _ in 0..50 {
            let x = sample_box(&[-1.0; 3], &[1.0; 3], &mut rng);
            let y = sample_box(&[-1.0; 3], &[1.0; 3], &mut rng);
            if geom::dist(&x, &y) < 1e-6 {
                continue;
            }
            assert_eq!(k.eval(&x, &y).unwrap(), k.eval(&y, &x).unwrap());
        }
        assert!(k.at_distance(10.0).unwrap() < 1e-5);
        assert!(k.at_distance(0.0).is_err());
    }

    #[test]
    fn kernel_comparable_to_classical_near_zero() {
        // g_1 = e^{-r} * classical kernel exactly in d = 3, so on r <= 0.1 the
        // comparability constants are c' = e^{-0.1}, c'' = 1.
        let k = GreenKernel::new(3, 1.0).unwrap();
        let spec = crate::capacity::ClassicalKernelSpec::new(3).unwrap();
        for i in 1..=20 {
            let r = 0.1 * i as f64 / 20.0;
            let g = k.at_distance(r).unwrap();
            let p = spec.kernel(&[0.0; 3], &[r, 0.0, 0.0]).unwrap();
            assert!((-0.1f64).exp() * p <= g + 1e-15, "lower bound fails at r = {r}");
            assert!(g <= p * (1.0 + 1e-15), "upper bound fails at r = {r}");
        }
    }

    #[test]
    fn energy_point_masses_reduce_to_kernel() {
        let k = GreenKernel::new(3, 1.0).unwrap();
        let mu = MeasureSampler::point_mass(&[0.0, 0.0, 0.0], 1.0);
        let nu = MeasureSampler::point_mass(&[1.0, 0.0, 0.0], 1.0);
        let e = energy_mc(&mu, &nu, &k, 1000, 3).unwrap();
        assert!((e.energy.value - k.at_distance(1.0).unwrap()).abs() < 1e-15);
        assert_eq!(e.energy.stderr, 0.0);
    }

    #[test]
    fn coincident_point_masses_diverge() {
        let k = GreenKernel::new(3, 1.0).unwrap();
        let mu = MeasureSampler::point_mass(&[0.5, 0.5, 0.5], 1.0);
        assert!(matches!(
            energy_mc(&mu, &mu, &k, 1000, 3),
            Err(Error::Divergence(_))
        ));
    }

    #[test]
    fn cube_self_energy_matches_quadrature_oracle() {
        // Deterministic oracle: split g_1 = classical part + smooth part. The
        // classical part over the unit cube is the cube Coulomb constant
        // 1.88231264438966 / (4 pi); the smooth remainder (e^{-r} - 1)/(4 pi r)
        // is integrated by a tensor midpoint rule.
        const CUBE_COULOMB: f64 = 1.882_312_644_389_660_2;
        let m = 8usize;
        let h = 1.0 / m as f64;
        let mut smooth = 0.0;
        let cell = |i: usize| (i as f64 + 0.5) * h;
        for xi in 0..m {
            for xj in 0..m {
                for xk in 0..m {
                    for yi in 0..m {
                        for yj in 0..m {
                            for yk in 0..m {
                                let dx = cell(xi) - cell(yi);
                                let dy = cell(xj) - cell(yj);
                                let dz = cell(xk) - cell(yk);
                                let r = (dx * dx + dy * dy + dz * dz).sqrt();
                                let v = if r < 1e-12 {
                                    -1.0 / (4.0 * PI) // lim (e^{-r}-1)/(4 pi r)
                                } else {
                                    ((-r).exp() - 1.0) / (4.0 * PI * r)
                                };
                                smooth += v;
                            }
                        }
                    }
                }
            }
        }
        smooth *= h.powi(6);
        let oracle = CUBE_COULOMB / (4.0 * PI) + smooth;
        // High-precision reference for the same integral.
        assert!((oracle - 0.091_071_560_041_321_92).abs() < 3e-4, "oracle = {oracle}");

        let k = GreenKernel::new(3, 1.0).unwrap();
        let mu = MeasureSampler::uniform_box(&[0.0; 3], &[1.0; 3], 1.0);
        let e = energy_mc(&mu, &mu, &k, 400_000, 11).unwrap();
        assert!(
            (e.energy.value - oracle).abs() < 3.0 * e.energy.stderr + 3e-4,
            "mc {} +- {}, oracle {}",
            e.energy.value,
            e.energy.stderr,
            oracle
        );
        assert!(e.resampled_fraction < 1e-3);
    }

    #[test]
    fn energy_is_symmetric_within_stderr() {
        let k = GreenKernel::new(3, 1.0).unwrap();
        let mu = MeasureSampler::uniform_box(&[0.0; 3], &[1.0; 3], 2.0);
        let nu = MeasureSampler::uniform_box(&[0.5; 3], &[2.0, 1.5, 1.5], 1.0);
        let a = energy_mc(&mu, &nu, &k, 200_000, 4).unwrap().energy;
        let b = energy_mc(&nu, &mu, &k, 200_000, 5).unwrap().energy;
        assert!(a.agrees_with(&b, 3.0), "{a:?} vs {b:?}");
    }

    #[test]
    fn iid_identity_block_counting_on_atoms() {
        // Purely combinatorial form of the identity with a bounded stand-in
        // kernel: the i != j block sum equals (1 - 1/kappa) times the full
        // double sum, whatever the pair values are.
        let atoms = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let pair = |x: &Point, y: &Point| 1.0 / (1.0 + geom::dist(x, y));
        let kappa = 2usize;
        // gamma = sum of unit atoms; blocks gamma_j = gamma / kappa.
        let mut full = 0.0;
        for a in &atoms {
            for b in &atoms {
                full += pair(a, b);
            }
        }
        let mut blocks = 0.0;
        for i in 0..kappa {
            for j in 0..kappa {
                if i != j {
                    // int (G gamma_j) d gamma_i with gamma_j = gamma/kappa
                    let mut s = 0.0;
                    for a in &atoms {
                        for b in &atoms {
                            s += pair(a, b);
                        }
                    }
                    blocks += s / (kappa * kappa) as f64;
                }
            }
        }
        assert!((blocks - (1.0 - 1.0 / kappa as f64) * full).abs() < 1e-12);
    }

    #[test]
    fn iid_identity_mc_at_kappa_1000() {
        let k = GreenKernel::new(3, 1.0).unwrap();
        // Capacity-weighted uniform-cube measure with total mass 2.
        let gamma = MeasureSampler::uniform_box(&[0.0; 3], &[1.0; 3], 2.0);
        let rep = iid_identity_check(&gamma, 1000, &k, 300_000, 17).unwrap();
        assert!(
            rep.within_3_stderr,
            "lhs {:?} rhs {:?} gap {:?}",
            rep.lhs, rep.rhs, rep.gap
        );
    }

    #[test]
    fn iid_identity_degenerate_kappa_1() {
        let k = GreenKernel::new(3, 1.0).unwrap();
        let gamma = MeasureSampler::uniform_box(&[0.0; 3], &[1.0; 3], 2.0);
        let rep = iid_identity_check(&gamma, 1, &k, 1000, 17).unwrap();
        assert_eq!(rep.lhs.value, 0.0);
        assert_eq!(rep.rhs.value, 0.0);
    }

    #[test]
    fn affine_tilt_sampler_matches_density() {
        // Weight 1 + x0 on the unit cube: P(x0 <= 1/2) = (1/2 + 1/8) / (3/2) = 5/12.
        let m = MeasureSampler {
            total_mass: 1.0,
            law: MeasureLaw::AffineTiltBox {
                lower: vec![0.0; 3],
                upper: vec![1.0; 3],
                offset: 1.0,
                slope: vec![1.0, 0.0, 0.0],
            },
        };
        m.validate().unwrap();
        let mut rng = substream(1, &[2]);
        let n = 200_000;
        let mut count = 0;
        for _ in 0..n {
            if m.sample(&mut rng)[0] <= 0.5 {
                count += 1;
            }
        }
        let p = count as f64 / n as f64;
        assert!((p - 5.0 / 12.0).abs() < 0.005, "p = {p}");
    }
}
