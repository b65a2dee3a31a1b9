//! Capacities: closed forms, Monte Carlo estimation, and scaling diagnostics.
//!
//! Capacity is measured against the classical potential kernel of the
//! Laplacian generator, `1/(4 pi |y-z|)` in three dimensions and
//! `-ln|y-z| / (2 pi)` in two. Obstacles are balls, so the solid-ball
//! equilibrium charge gives `4 pi r` and `2 pi / (-ln r)` exactly; everything
//! else (ellipsoid images of anisotropic diffusions, unions) goes through a
//! walk-on-spheres hitting-probability estimator and the annulus conversion.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::model::{ObstacleSet, RandomCenterModel};
use crate::rng::{ns, substream};
use crate::stats::{proportion_stderr, Estimate};

pub const PI: f64 = std::f64::consts::PI;

/// Classical potential-kernel conventions for a given dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalKernelSpec {
    pub dim: usize,
}

impl ClassicalKernelSpec {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 2 || dim == 3 {
            Ok(Self { dim })
        } else {
            Err(Error::UnsupportedDimension(dim))
        }
    }

    /// Surface area of the unit hypersphere: `2 pi` in d = 2, `4 pi` in d = 3.
    pub fn omega(&self) -> f64 {
        match self.dim {
            2 => 2.0 * PI,
            _ => 4.0 * PI,
        }
    }

    /// Kernel value `1/(|z-y|^{d-2} (d-2) omega_d)` for d = 3,
    /// `-ln|z-y| / omega_2` for d = 2.
    pub fn kernel(&self, y: &Point, z: &Point) -> Result<f64> {
        let r = geom::dist(y, z);
        if r == 0.0 {
            return Err(Error::SingularKernel);
        }
        Ok(match self.dim {
            2 => -r.ln() / self.omega(),
            _ => 1.0 / (r * self.omega()),
        })
    }

    /// Classical capacity of a ball: `4 pi r` (d = 3), `2 pi / (-ln r)` (d = 2,
    /// requires `r < 1` so the kernel stays positive at the obstacle scale).
    pub fn ball_capacity(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::invalid(format!("radius must be positive, got {r}")));
        }
        match self.dim {
            2 => {
                if r >= 1.0 {
                    Err(Error::invalid(format!(
                        "d = 2 ball capacity requires r < 1, got {r}"
                    )))
                } else {
                    Ok(2.0 * PI / (-r.ln()))
                }
            }
            _ => Ok(4.0 * PI * r),
        }
    }
}

/// Classical kernel value; see [`ClassicalKernelSpec::kernel`].
pub fn classical_kernel(spec: &ClassicalKernelSpec, y: &Point, z: &Point) -> Result<f64> {
    spec.kernel(y, z)
}

/// Closed-form ball capacity; see [`ClassicalKernelSpec::ball_capacity`].
pub fn ball_capacity_classical(spec: &ClassicalKernelSpec, r: f64) -> Result<f64> {
    spec.ball_capacity(r)
}

/// Alpha-capacity of a ball in d = 3 for the resolvent kernel
/// `exp(-sqrt(alpha) |x-y|) / (4 pi |x-y|)`.
///
/// The equilibrium charge of the solid ball is `alpha * Lebesgue` inside plus
/// a surface layer; its total mass is
/// `4 pi r (1 + sqrt(alpha) r + alpha r^2 / 3)`, which reduces to the
/// classical `4 pi r` as `alpha -> 0`.
pub fn ball_capacity_alpha_d3(r: f64, alpha: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {r}")));
    }
    if !(alpha >= 0.0) {
        return Err(Error::invalid(format!(
            "alpha must be nonnegative, got {alpha}"
        )));
    }
    let s = alpha.sqrt();
    Ok(4.0 * PI * r * (1.0 + s * r + alpha * r * r / 3.0))
}

/// Constant symmetric positive-definite diffusion matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionMatrix {
    dim: usize,
    mat: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl DiffusionMatrix {
    pub fn new(dim: usize, entries: &[f64]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        let mat = DMatrix::from_row_slice(dim, dim, entries);
        let scale = mat.amax().max(1.0);
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (mat[(i, j)] - mat[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::invalid("diffusion matrix must be symmetric"));
                }
            }
        }
        let eig = mat.clone().symmetric_eigen();
        let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(|a, b| a.total_cmp(b));
        if eigenvalues[0] <= 0.0 {
            return Err(Error::invalid(format!(
                "diffusion matrix must be positive definite; min eigenvalue {}",
                eigenvalues[0]
            )));
        }
        Ok(Self {
            dim,
            mat,
            eigenvalues,
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self::new(dim, &entries)
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Result<Self> {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = c;
        }
        Self::new(dim, &entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Ellipticity constant: the smallest eigenvalue.
    pub fn ellipticity(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn sqrt_det(&self) -> f64 {
        self.eigenvalues.iter().product::<f64>().sqrt()
    }

    /// Is the matrix `c * I`? Returns the scale if so.
    pub fn as_scaled_identity(&self) -> Option<f64> {
        let c = self.mat[(0, 0)];
        for i in 0..self.dim {
            for j in 0..self.dim {
                let want = if i == j { c } else { 0.0 };
                if (self.mat[(i, j)] - want).abs() > 1e-12 * c.abs().max(1.0) {
                    return None;
                }
            }
        }
        Some(c)
    }

    /// Semi-axes of the image `b^{-1/2} B_r(0)`: `r / sqrt(lambda_i)`.
    pub fn image_semi_axes(&self, r: f64) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| r / l.sqrt()).collect()
    }
}

/// Compact target for the walk-on-spheres hitting estimator.
pub trait WosTarget: Sync {
    /// Conservative distance to the target: nonpositive means "on or inside",
    /// and any positive return must not exceed the true distance.
    fn distance(&self, x: &Point) -> f64;
    /// Radius of a ball around the origin containing the target.
    fn enclosing_radius(&self) -> f64;
    fn is_empty(&self) -> bool {
        false
    }
}

impl WosTarget for ObstacleSet {
    fn distance(&self, x: &Point) -> f64 {
        let lb = self.distance_lower_bound(x);
        if lb > 0.05 * (1.0 + geom::norm(x)) {
            lb
        } else {
            self.nearest_distance(x)
        }
    }

    fn enclosing_radius(&self) -> f64 {
        self.balls()
            .iter()
            .map(|b| geom::norm(&b.center) + b.radius)
            .fold(0.0, f64::max)
    }

    fn is_empty(&self) -> bool {
        self.balls().is_empty()
    }
}

/// Axis-aligned ellipsoid centered at the origin.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    pub semi_axes: [f64; 3],
}

impl WosTarget for Ellipsoid {
    fn distance(&self, x: &Point) -> f64 {
        let a_min = self.semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut q = 0.0;
        for i in 0..3 {
            let t = x[i] / self.semi_axes[i];
            q += t * t;
        }
        // level-set bound: dist >= a_min (sqrt(q) - 1) outside, <= 0 inside
        a_min * (q.sqrt() - 1.0)
    }

    fn enclosing_radius(&self) -> f64 {
        self.semi_axes.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapacityEstimate {
    pub capacity: Estimate,
    pub hit_probability: Estimate,
    pub n_paths: usize,
    pub launch_radius: f64,
    pub outer_radius: f64,
}

/// Estimate the classical capacity of a compact target in d = 3.
///
/// Paths start uniformly on the sphere of radius `launch_radius` (which must
/// enclose the target) and walk on spheres until they hit the target or the
/// absorbing sphere of radius `outer_radius`. By the mean value property the
/// averaged hit probability equals `C_cond (1/R - 1/R_out) / (4 pi)` with
/// `C_cond` the condenser capacity, and the annulus formula inverts this to a
/// capacity estimate that is exact for centered balls and carries an
/// `O(R/R_out)` truncation bias otherwise.
pub fn estimate_capacity_mc<T: WosTarget>(
    target: &T,
    launch_radius: f64,
    outer_radius: f64,
    n_paths: usize,
    seed: u64,
) -> Result<CapacityEstimate> {
    if target.is_empty() {
        return Ok(CapacityEstimate {
            capacity: Estimate::exact(0.0),
            hit_probability: Estimate::exact(0.0),
            n_paths,
            launch_radius,
            outer_radius,
        });
    }
    if n_paths < 100 {
        return Err(Error::invalid("capacity MC needs at least 100 paths"));
    }
    let enclosing = target.enclosing_radius();
    if !(enclosing < launch_radius && launch_radius < outer_radius) {
        return Err(Error::invalid(format!(
            "need target (radius {enclosing:.4}) inside launch sphere {launch_radius} inside outer sphere {outer_radius}"
        )));
    }

    let eps = 1e-7 * outer_radius;
    let hits: u64 = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, &[ns::CAPACITY, k as u64]);
            let mut x = random_sphere_point(&mut rng, launch_radius);
            for _ in 0..100_000 {
                let d_target = target.distance(&x);
                if d_target <= eps {
                    return 1u64;
                }
                let d_outer = outer_radius - geom::norm(&x);
                if d_outer <= eps {
                    return 0u64;
                }
                let step = d_target.min(d_outer);
                let dir = random_sphere_point(&mut rng, 1.0);
                for i in 0..3 {
                    x[i] += step * dir[i];
                }
            }
            0u64
        })
        .sum();

    let p = hits as f64 / n_paths as f64;
    let sigma_p = proportion_stderr(p, n_paths as u64);
    let g = 1.0 / launch_radius - 1.0 / outer_radius;
    let denom = g + p / outer_radius;
    let r_eff = p / denom;
    let dr_dp = g / (denom * denom);
    Ok(CapacityEstimate {
        capacity: Estimate::new(4.0 * PI * r_eff, 4.0 * PI * dr_dp * sigma_p),
        hit_probability: Estimate::new(p, sigma_p),
        n_paths,
        launch_radius,
        outer_radius,
    })
}

fn random_sphere_point(rng: &mut rand_chacha::ChaCha8Rng, radius: f64) -> Point {
    loop {
        let v: Point = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = geom::norm(&v);
        if n > 1e-12 {
            return [radius * v[0] / n, radius * v[1] / n, radius * v[2] / n];
        }
    }
}

/// Monte Carlo sizes for the ellipsoid fallback of [`anisotropic_capacity`].
#[derive(Debug, Clone, Copy)]
pub struct AnisotropicMcConfig {
    pub n_paths: usize,
    pub seed: u64,
}

impl Default for AnisotropicMcConfig {
    fn default() -> Self {
        Self {
            n_paths: 200_000,
            seed: 0x0a15_0c1e,
        }
    }
}

/// Capacity of one obstacle ball under a constant diffusion matrix:
/// `sqrt(det b) * Qcl(b^{-1/2} B_r)`.
///
/// Scalar matrices use the closed ball form; general SPD matrices map the ball
/// to an ellipsoid and estimate its classical capacity by Monte Carlo (d = 3).
pub fn anisotropic_capacity(
    b: &DiffusionMatrix,
    radius: f64,
    mc: &AnisotropicMcConfig,
) -> Result<Estimate> {
    let spec = ClassicalKernelSpec::new(b.dim())?;
    if let Some(c) = b.as_scaled_identity() {
        let image_r = radius / c.sqrt();
        return Ok(Estimate::exact(b.sqrt_det() * spec.ball_capacity(image_r)?));
    }
    if b.dim() != 3 {
        return Err(Error::invalid(
            "anisotropic capacity with non-scalar b needs d = 3 (Monte Carlo ellipsoid path)",
        ));
    }
    let axes = b.image_semi_axes(radius);
    let ellipsoid = Ellipsoid {
        semi_axes: [axes[0], axes[1], axes[2]],
    };
    let a_max = ellipsoid.enclosing_radius();
    let launch = 2.0 * a_max;
    let outer = 100.0 * launch;
    let est = estimate_capacity_mc(&ellipsoid, launch, outer, mc.n_paths, mc.seed)?;
    Ok(est.capacity.scaled(b.sqrt_det()))
}

/// Leading-order capacity of the obstacle planted at `x` for sweep index `n`:
/// the capacity density `q_n(x)` whose product with `kappa_n` and the center
/// density approximates the killing rate.
pub fn capacity_density(
    model: &RandomCenterModel,
    n_index: usize,
    x: &Point,
    b: &DiffusionMatrix,
) -> Result<Estimate> {
    let kappa = model.kappas[n_index].max(1);
    let r = model.radius_rule.radius(n_index, kappa, x);
    anisotropic_capacity(b, r, &AnisotropicMcConfig::default())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    /// `(n, kappa_n, rho_n, value)` with `value = kappa_n rho_n^{d-2}` for
    /// d = 3 or `kappa_n / |ln rho_n|` for d = 2.
    pub rows: Vec<(usize, u64, f64, f64)>,
    pub sup: f64,
    pub bounded: bool,
}

/// Check the size bound `sup_n kappa_n rho_n^{d-2} < inf` (d > 2), resp.
/// `sup_n kappa_n / |ln rho_n| < inf` (d = 2), over the model's sweep.
///
/// A finite sweep cannot certify a supremum, so growth is flagged when the
/// values increase monotonically by more than `growth_factor` overall.
pub fn check_scaling(model: &RandomCenterModel, growth_factor: f64) -> ScalingReport {
    let mut rows = Vec::with_capacity(model.n_count());
    for n in 0..model.n_count() {
        let kappa = model.kappas[n];
        let rho = model.rho(n);
        let value = if kappa == 0 {
            0.0
        } else if model.dim == 2 {
            kappa as f64 / rho.ln().abs()
        } else {
            kappa as f64 * rho.powi(model.dim as i32 - 2)
        };
        rows.push((n, kappa, rho, value));
    }
    let sup = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    let values: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let monotone_up = values.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let grew = values.len() >= 2
        && values[0] > 0.0
        && values[values.len() - 1] / values[0] > growth_factor;
    ScalingReport {
        rows,
        sup,
        bounded: !(monotone_up && grew),
    }
}
