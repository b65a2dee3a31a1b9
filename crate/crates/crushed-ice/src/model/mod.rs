//! Domains, obstacle realizations, and the random center model.

mod grid;

pub use grid::{Ball, UniformGrid};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::rng::{ns, substream};

/// Open region the diffusion lives in.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// All of `R^d`; the exit time is infinite.
    FullSpace { dim: usize },
    /// Axis-aligned open box.
    AxisBox {
        dim: usize,
        lower: Point,
        upper: Point,
    },
}

impl Domain {
    pub fn full_space(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Domain::FullSpace { dim })
    }

    pub fn axis_box(lower: &[f64], upper: &[f64]) -> Result<Self> {
        let dim = lower.len();
        check_dim(dim)?;
        if upper.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: upper.len(),
            });
        }
        for i in 0..dim {
            if !(lower[i] < upper[i]) {
                return Err(Error::invalid(format!(
                    "box bounds must satisfy lower < upper on axis {i}: {} vs {}",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(Domain::AxisBox {
            dim,
            lower: geom::from_slice(lower),
            upper: geom::from_slice(upper),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::FullSpace { dim } | Domain::AxisBox { dim, .. } => *dim,
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        match self {
            Domain::FullSpace { .. } => true,
            Domain::AxisBox { dim, lower, upper } => {
                (0..*dim).all(|i| x[i] > lower[i] && x[i] < upper[i])
            }
        }
    }

    /// Distance to the domain boundary, positive inside, negative outside;
    /// `+inf` for the full space.
    pub fn boundary_distance(&self, x: &Point) -> f64 {
        match self {
            Domain::FullSpace { .. } => f64::INFINITY,
            Domain::AxisBox { dim, lower, upper } => {
                geom::signed_dist_to_box_boundary(x, lower, upper, *dim)
            }
        }
    }

    pub fn diameter(&self) -> Option<f64> {
        match self {
            Domain::FullSpace { .. } => None,
            Domain::AxisBox { dim, lower, upper } => {
                let mut d2 = 0.0;
                for i in 0..*dim {
                    let e = upper[i] - lower[i];
                    d2 += e * e;
                }
                Some(d2.sqrt())
            }
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

/// Finite collection of balls with a uniform-grid index; one realization of
/// the obstacle configuration. Immutable after construction and safe to share
/// across path workers.
#[derive(Debug, Clone)]
pub struct ObstacleSet {
    dim: usize,
    balls: Vec<Ball>,
    grid: UniformGrid,
}

impl ObstacleSet {
    pub fn new(dim: usize, balls: Vec<Ball>) -> Result<Self> {
        check_dim(dim)?;
        for b in &balls {
            if !(b.radius > 0.0) || !b.radius.is_finite() {
                return Err(Error::invalid(format!(
                    "ball radius must be positive and finite, got {}",
                    b.radius
                )));
            }
            if !geom::is_finite(&b.center) {
                return Err(Error::invalid("ball center has non-finite coordinates"));
            }
        }
        let grid = UniformGrid::build(dim, &balls, Self::cell_size_for(dim, &balls));
        Ok(Self { dim, balls, grid })
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new())
    }

    /// Grid cell size: `max(2 * max radius, extent diagonal / 128)`.
    fn cell_size_for(dim: usize, balls: &[Ball]) -> f64 {
        let mut max_r: f64 = 0.0;
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for b in balls {
            max_r = max_r.max(b.radius);
            for i in 0..dim {
                lo[i] = lo[i].min(b.center[i]);
                hi[i] = hi[i].max(b.center[i]);
            }
        }
        let mut diag2 = 0.0;
        for i in 0..dim {
            let e = (hi[i] - lo[i]).max(0.0);
            diag2 += e * e;
        }
        let diag = diag2.sqrt();
        (2.0 * max_r).max(diag / 128.0).max(1e-9)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn max_radius(&self) -> f64 {
        self.grid.max_radius()
    }

    pub fn min_radius(&self) -> f64 {
        self.grid.min_radius()
    }

    pub fn total_classical_capacity_d3(&self) -> f64 {
        self.balls.iter().map(|b| 4.0 * std::f64::consts::PI * b.radius).sum()
    }

    /// Signed distance from `x` to the nearest ball surface: negative inside
    /// an obstacle, `+inf` for an empty set.
    pub fn nearest_distance(&self, x: &Point) -> f64 {
        self.grid.nearest_distance(x, &self.balls)
    }

    /// Conservative lower bound on [`Self::nearest_distance`]; much cheaper.
    #[inline]
    pub fn distance_lower_bound(&self, x: &Point) -> f64 {
        self.grid.distance_lower_bound(x)
    }

    /// Brute-force reference for the indexed query.
    pub fn nearest_distance_brute(&self, x: &Point) -> f64 {
        self.balls
            .iter()
            .map(|b| geom::dist(x, &b.center) - b.radius)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &Point) -> bool {
        !self.is_empty() && self.nearest_distance(x) <= 0.0
    }

    /// Same centers with radii scaled by `factor`, index rebuilt.
    pub fn shrink(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor < 1.0) {
            return Err(Error::invalid(format!(
                "shrink factor must lie in (0, 1), got {factor}"
            )));
        }
        let balls = self
            .balls
            .iter()
            .map(|b| Ball {
                center: b.center,
                radius: b.radius * factor,
            })
            .collect();
        Self::new(self.dim, balls)
    }

    pub fn to_json(&self) -> String {
        let mirror = ObstacleSetJson {
            dim: self.dim,
            balls: self
                .balls
                .iter()
                .map(|b| BallJson {
                    c: b.center[..self.dim].to_vec(),
                    r: b.radius,
                })
                .collect(),
        };
        serde_json::to_string(&mirror).expect("obstacle serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mirror: ObstacleSetJson =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let balls = mirror
            .balls
            .into_iter()
            .map(|b| {
                if b.c.len() != mirror.dim {
                    return Err(Error::DimensionMismatch {
                        expected: mirror.dim,
                        got: b.c.len(),
                    });
                }
                Ok(Ball {
                    center: geom::from_slice(&b.c),
                    radius: b.r,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(mirror.dim, balls)
    }
}

#[derive(Serialize, Deserialize)]
struct ObstacleSetJson {
    dim: usize,
    balls: Vec<BallJson>,
}

#[derive(Serialize, Deserialize)]
struct BallJson {
    c: Vec<f64>,
    r: f64,
}

/// Signed distance from `x` to the nearest obstacle of `set`.
pub fn nearest_obstacle_distance(set: &ObstacleSet, x: &Point) -> f64 {
    set.nearest_distance(x)
}

/// Law of the obstacle centers.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CenterLaw {
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
    PointMass { point: Vec<f64> },
}

impl CenterLaw {
    pub fn unit_cube(dim: usize) -> Self {
        CenterLaw::UniformBox {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        match self {
            CenterLaw::UniformBox { lower, upper } => {
                let mut p = geom::zero();
                for i in 0..lower.len() {
                    p[i] = rng.random_range(lower[i]..upper[i]);
                }
                p
            }
            CenterLaw::PointMass { point } => geom::from_slice(point),
        }
    }

    /// Lebesgue density at `x`, if the law has one.
    pub fn density(&self, x: &Point) -> Option<f64> {
        match self {
            CenterLaw::UniformBox { lower, upper } => {
                let inside = lower
                    .iter()
                    .zip(upper.iter())
                    .enumerate()
                    .all(|(i, (lo, hi))| x[i] >= *lo && x[i] <= *hi);
                let vol: f64 = lower
                    .iter()
                    .zip(upper.iter())
                    .map(|(lo, hi)| hi - lo)
                    .product();
                Some(if inside { 1.0 / vol } else { 0.0 })
            }
            CenterLaw::PointMass { .. } => None,
        }
    }

    pub fn sup_density(&self) -> Option<f64> {
        match self {
            CenterLaw::UniformBox { lower, upper } => {
                let vol: f64 = lower
                    .iter()
                    .zip(upper.iter())
                    .map(|(lo, hi)| hi - lo)
                    .product();
                Some(1.0 / vol)
            }
            CenterLaw::PointMass { .. } => None,
        }
    }

    pub fn support_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            CenterLaw::UniformBox { lower, upper } => Some((lower.clone(), upper.clone())),
            CenterLaw::PointMass { point } => Some((point.clone(), point.clone())),
        }
    }
}

/// Per-`n` obstacle radius rule. `n` is the zero-based sweep index.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RadiusRule {
    /// `r_n = coeff / kappa_n^power`; the capacity-balanced scaling in d = 3
    /// is `power = 1`.
    KappaPower { coeff: f64, power: f64 },
    /// `r_n = coeff * exp(-rate * (n + 1))`; logarithmic capacity scalings in d = 2.
    ExpInIndex { coeff: f64, rate: f64 },
    /// Position-dependent `r_n(x) = (coeff / kappa_n^power) * (offset + slope * x[axis])`.
    AffineField {
        coeff: f64,
        power: f64,
        axis: usize,
        offset: f64,
        slope: f64,
    },
}

impl RadiusRule {
    pub fn radius(&self, n_index: usize, kappa_n: u64, x: &Point) -> f64 {
        match self {
            RadiusRule::KappaPower { coeff, power } => coeff / (kappa_n as f64).powf(*power),
            RadiusRule::ExpInIndex { coeff, rate } => coeff * (-rate * (n_index as f64 + 1.0)).exp(),
            RadiusRule::AffineField {
                coeff,
                power,
                axis,
                offset,
                slope,
            } => coeff / (kappa_n as f64).powf(*power) * (offset + slope * x[*axis]),
        }
    }

    /// Uniform bound `rho_n` on the radius over the support of the center law.
    pub fn uniform_bound(&self, n_index: usize, kappa_n: u64, law: &CenterLaw) -> f64 {
        match self {
            RadiusRule::KappaPower { .. } | RadiusRule::ExpInIndex { .. } => {
                self.radius(n_index, kappa_n, &geom::zero())
            }
            RadiusRule::AffineField { axis, .. } => match law.support_box() {
                Some((lo, hi)) => {
                    let mut a = geom::zero();
                    let mut b = geom::zero();
                    a[*axis] = lo[*axis];
                    b[*axis] = hi[*axis];
                    self.radius(n_index, kappa_n, &a)
                        .max(self.radius(n_index, kappa_n, &b))
                }
                None => f64::INFINITY,
            },
        }
    }

    pub fn is_position_dependent(&self) -> bool {
        matches!(self, RadiusRule::AffineField { .. })
    }
}

/// Sequence of iid-ball obstacle ensembles: at sweep index `n`, `kappa_n`
/// centers are drawn from the center law and dressed with radii from the rule.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RandomCenterModel {
    pub dim: usize,
    /// `kappa_n` per sweep index; nondecreasing.
    pub kappas: Vec<u64>,
    pub radius_rule: RadiusRule,
    pub center_law: CenterLaw,
    /// Stream for obstacle realizations; the harness pins it to the master seed.
    #[serde(default)]
    pub seed: u64,
}

impl RandomCenterModel {
    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        if self.kappas.is_empty() {
            return Err(Error::invalid("kappa sequence is empty"));
        }
        if self.kappas.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("kappa sequence must be nondecreasing"));
        }
        let bounds: Vec<f64> = (0..self.kappas.len())
            .map(|n| self.rho(n))
            .collect();
        if bounds.windows(2).any(|w| w[1] > w[0] + 1e-15) {
            return Err(Error::invalid(
                "radius bound rho_n must be nonincreasing in n",
            ));
        }
        Ok(())
    }

    pub fn n_count(&self) -> usize {
        self.kappas.len()
    }

    /// Uniform radius bound `rho_n` at sweep index `n`.
    pub fn rho(&self, n_index: usize) -> f64 {
        let kappa = self.kappas[n_index].max(1);
        self.radius_rule
            .uniform_bound(n_index, kappa, &self.center_law)
    }

    /// Draw the obstacle realization for sweep index `n` from `rng`.
    pub fn sample_with(&self, n_index: usize, rng: &mut ChaCha8Rng) -> Result<ObstacleSet> {
        let kappa = *self
            .kappas
            .get(n_index)
            .ok_or_else(|| Error::invalid(format!("sweep index {n_index} out of range")))?;
        let mut balls = Vec::with_capacity(kappa as usize);
        for _ in 0..kappa {
            let center = self.center_law.sample(rng);
            let radius = self.radius_rule.radius(n_index, kappa, &center);
            if !(radius > 0.0) {
                return Err(Error::invalid(format!(
                    "radius rule produced nonpositive radius {radius} at {center:?}"
                )));
            }
            balls.push(Ball { center, radius });
        }
        ObstacleSet::new(self.dim, balls)
    }

    /// Deterministic realization for `(seed, n)`; each `n` gets its own stream.
    pub fn sample(&self, n_index: usize) -> Result<ObstacleSet> {
        let mut rng = substream(self.seed, &[ns::OBSTACLES, n_index as u64]);
        self.sample_with(n_index, &mut rng)
    }

    /// Independent environment replicate `env` at sweep index `n`.
    pub fn sample_env(&self, n_index: usize, env: u64) -> Result<ObstacleSet> {
        let mut rng = substream(self.seed, &[ns::OBSTACLES, n_index as u64, env]);
        self.sample_with(n_index, &mut rng)
    }
}

/// Draw an obstacle realization from an explicit stream.
pub fn sample_obstacles(
    model: &RandomCenterModel,
    n_index: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ObstacleSet> {
    model.sample_with(n_index, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_validation() {
        assert!(Domain::full_space(3).is_ok());
        assert!(matches!(
            Domain::full_space(4),
            Err(Error::UnsupportedDimension(4))
        ));
        assert!(Domain::axis_box(&[0.0, 0.0], &[1.0, 1.0]).is_ok());
        assert!(Domain::axis_box(&[0.0, 2.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn empty_model_yields_empty_set() {
        let model = RandomCenterModel {
            dim: 3,
            kappas: vec![0],
            radius_rule: RadiusRule::KappaPower {
                coeff: 0.1,
                power: 1.0,
            },
            center_law: CenterLaw::unit_cube(3),
            seed: 1,
        };
        let set = model.sample(0).unwrap();
        assert!(set.is_empty());
        assert!(set.nearest_distance(&[0.5; 3]).is_infinite());
    }

    #[test]
    fn point_mass_centers_are_identical() {
        let model = RandomCenterModel {
            dim: 3,
            kappas: vec![3],
            radius_rule: RadiusRule::KappaPower {
                coeff: 0.3,
                power: 1.0,
            },
            center_law: CenterLaw::PointMass {
                point: vec![0.2, 0.4, 0.6],
            },
            seed: 7,
        };
        let set = model.sample(0).unwrap();
        assert_eq!(set.len(), 3);
        for b in set.balls() {
            assert_eq!(b.center, [0.2, 0.4, 0.6]);
            assert!((b.radius - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn capacity_balanced_radius_matches_closed_form() {
        // kappa * 4 pi r = 2  =>  r = 2 / (4 pi kappa).
        let model = RandomCenterModel {
            dim: 3,
            kappas: vec![1000],
            radius_rule: RadiusRule::KappaPower {
                coeff: 2.0 / (4.0 * std::f64::consts::PI),
                power: 1.0,
            },
            center_law: CenterLaw::unit_cube(3),
            seed: 5,
        };
        let set = model.sample(0).unwrap();
        assert_eq!(set.len(), 1000);
        let r = set.balls()[0].radius;
        assert!((r - 1.591_549e-4).abs() < 1e-9, "r = {r}");
        for b in set.balls() {
            for i in 0..3 {
                assert!(b.center[i] >= 0.0 && b.center[i] <= 1.0);
            }
        }
    }

    #[test]
    fn sampling_is_reproducible_and_independent_across_n() {
        let model = RandomCenterModel {
            dim: 3,
            kappas: vec![50, 100],
            radius_rule: RadiusRule::KappaPower {
                coeff: 0.05,
                power: 1.0,
            },
            center_law: CenterLaw::unit_cube(3),
            seed: 42,
        };
        let a = model.sample(0).unwrap();
        let b = model.sample(0).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = model.sample(1).unwrap();
        // Streams must not share a prefix across n.
        assert_ne!(a.balls()[0].center, c.balls()[0].center);
    }

    #[test]
    fn shrink_scales_radii_and_rejects_bad_factors() {
        let set = ObstacleSet::new(
            3,
            vec![Ball {
                center: [0.0; 3],
                radius: 0.2,
            }],
        )
        .unwrap();
        assert!(set.shrink(1.0).is_err());
        assert!(set.shrink(0.0).is_err());
        let half = set.shrink(0.5).unwrap();
        assert!((half.balls()[0].radius - 0.1).abs() < 1e-15);
    }

    #[test]
    fn shrink_weakly_increases_distance() {
        let mut rng = substream(3, &[1]);
        let balls: Vec<Ball> = (0..1000)
            .map(|_| Ball {
                center: [
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                ],
                radius: rng.random_range(0.001..0.01),
            })
            .collect();
        let set = ObstacleSet::new(3, balls).unwrap();
        let shrunk = set.shrink(0.9).unwrap();
        for _ in 0..200 {
            let p = [
                rng.random_range(-0.2..1.2),
                rng.random_range(-0.2..1.2),
                rng.random_range(-0.2..1.2),
            ];
            assert!(shrunk.nearest_distance(&p) >= set.nearest_distance(&p) - 1e-12);
        }
    }

    #[test]
    fn two_ball_distance_example() {
        let set = ObstacleSet::new(
            3,
            vec![
                Ball {
                    center: [0.0, 0.0, 0.0],
                    radius: 0.1,
                },
                Ball {
                    center: [1.0, 0.0, 0.0],
                    radius: 0.2,
                },
            ],
        )
        .unwrap();
        let d = set.nearest_distance(&[0.5, 0.0, 0.0]);
        assert!((d - 0.3).abs() < 1e-12);
        let inside = set.nearest_distance(&[0.0, 0.0, 0.0]);
        assert!((inside + 0.1).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let set = ObstacleSet::new(
            2,
            vec![Ball {
                center: [0.25, 0.75, 0.0],
                radius: 0.05,
            }],
        )
        .unwrap();
        let text = set.to_json();
        assert!(text.contains("\"dim\":2"));
        let back = ObstacleSet::from_json(&text).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back.balls()[0].center, [0.25, 0.75, 0.0]);
        assert!(ObstacleSet::from_json("{\"dim\":3,\"balls\":[{\"c\":[1,2],\"r\":0.1}]}").is_err());
    }

    #[test]
    fn kappa_must_be_nondecreasing() {
        let model = RandomCenterModel {
            dim: 3,
            kappas: vec![100, 50],
            radius_rule: RadiusRule::KappaPower {
                coeff: 0.05,
                power: 1.0,
            },
            center_law: CenterLaw::unit_cube(3),
            seed: 0,
        };
        assert!(model.validate().is_err());
    }
}
