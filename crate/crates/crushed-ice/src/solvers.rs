//! Dirichlet solutions: Feynman–Kac Monte Carlo and a finite-difference
//! reference.
//!
//! Three probabilistic solvers share the walk engine: the hard-obstacle
//! solution stops at the obstacle entrance or domain exit and pays the
//! boundary value there; the relaxed solution damps the integrand by
//! `exp(-A_t)` and pays the boundary value both through the `dA` integral and
//! at the exit; the Schrödinger solution runs an exponential clock on the
//! occupation time of the obstacles. The grid solver discretizes
//! `-Lap u + (alpha + h) u = f + h phi` with central differences and pins
//! boundary and hole nodes, which is the strong form of the relaxed weak
//! formulation for absolutely continuous rate measures.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::geom::{self, Point};
use crate::hazard::HazardIndex;
use crate::model::{Domain, ObstacleSet};
use crate::paths::{walk, DiffusionSpec, ObstacleMode, StepObserver, WalkEnd, WalkParams};
use crate::rng::{ns, substream};
use crate::stats::{Estimate, Welford};

/// Dirichlet problem data on a box or the full space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirichletProblem {
    pub alpha: f64,
    /// Source term on the domain.
    pub f: ScalarField,
    /// Boundary value, evaluated on obstacles and on the domain boundary.
    pub phi: ScalarField,
    /// Killing-rate density of the relaxed problem, when present.
    pub rate: Option<ScalarField>,
}

impl DirichletProblem {
    pub fn new(alpha: f64, f: ScalarField, phi: ScalarField) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::invalid("dirichlet problem needs alpha > 0"));
        }
        Ok(Self {
            alpha,
            f,
            phi,
            rate: None,
        })
    }

    pub fn with_rate(mut self, h: ScalarField) -> Result<Self> {
        if h.global_min() < 0.0 {
            return Err(Error::invalid("rate density must be nonnegative"));
        }
        self.rate = Some(h);
        Ok(self)
    }

    fn sup_abs(&self, field: &ScalarField, domain: &Domain) -> f64 {
        match domain {
            Domain::AxisBox { dim, lower, upper } => {
                field.sup_abs_on_box(&lower[..*dim], &upper[..*dim])
            }
            Domain::FullSpace { .. } => {
                // Every field shape in use is globally bounded except a
                // nontrivial global affine; bound it over a wide box.
                field.sup_abs_on_box(&[-100.0; 3], &[100.0; 3])
            }
        }
    }
}

/// Monte Carlo solution value with truncation diagnostics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolutionEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Fraction of paths cut off by the horizon.
    pub horizon_fraction: f64,
    /// Upper bound on the truncation bias of the reported value.
    pub bias_bound: f64,
    pub exact: bool,
}

impl SolutionEstimate {
    fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
            horizon_fraction: 0.0,
            bias_bound: 0.0,
            exact: true,
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.value, self.stderr)
    }
}

/// Discounted source accumulator: `int e^{-alpha t} f(X_t) dt`.
struct DiscountObserver<'a> {
    alpha: f64,
    f: &'a ScalarField,
    value: f64,
    dim: usize,
    shrink: f64,
    hint_floor: f64,
    discontinuous: bool,
}

impl<'a> DiscountObserver<'a> {
    fn new(spec: &DiffusionSpec, alpha: f64, f: &'a ScalarField) -> Self {
        Self {
            alpha,
            f,
            value: 0.0,
            dim: spec.dim,
            shrink: spec.shrink,
            hint_floor: spec.dt / 64.0,
            discontinuous: f
                .discontinuity_distance(&geom::zero(), spec.dim)
                .is_finite(),
        }
    }
}

impl StepObserver for DiscountObserver<'_> {
    fn dt_hint(&self, x: &Point) -> f64 {
        field_hint(
            self.discontinuous,
            self.f,
            x,
            self.dim,
            self.shrink,
            self.hint_floor,
        )
    }

    #[inline]
    fn observe(&mut self, t: f64, x: &Point, dt: f64, _d: Option<f64>) -> Option<f64> {
        self.value += (-self.alpha * t).exp() * self.f.eval(x) * dt;
        None
    }
}

fn field_hint(
    discontinuous: bool,
    f: &ScalarField,
    x: &Point,
    dim: usize,
    shrink: f64,
    floor: f64,
) -> f64 {
    if !discontinuous {
        return f64::INFINITY;
    }
    let d = f.discontinuity_distance(x, dim);
    if d.is_infinite() {
        return f64::INFINITY;
    }
    let s = shrink * d;
    (s * s / (2.0 * dim as f64)).max(floor)
}

/// Hard-obstacle probabilistic solution
/// `u_n(x) = E_x[int_0^{tau^sigma} e^{-alpha t} f dt + e^{-alpha (tau^sigma)} phi(X_{tau^sigma})]`.
///
/// Horizon-truncated paths contribute only their source integral; the
/// truncation bias bound `e^{-alpha T}(||phi|| + ||f||/alpha)` is reported.
#[allow(clippy::too_many_arguments)]
pub fn solve_un_mc(
    problem: &DirichletProblem,
    domain: &Domain,
    obstacles: Option<&ObstacleSet>,
    x: &[f64],
    n_paths: usize,
    spec: &DiffusionSpec,
    seed: u64,
    salt: u64,
) -> Result<SolutionEstimate> {
    let x0 = geom::from_slice(x);
    if let Some(set) = obstacles {
        if set.contains(&x0) {
            return Ok(SolutionEstimate::exact(problem.phi.eval(&x0)));
        }
    }
    if !domain.contains(&x0) {
        return Ok(SolutionEstimate::exact(problem.phi.eval(&x0)));
    }
    if n_paths == 0 {
        return Err(Error::invalid("solution MC needs at least one path"));
    }

    let alpha = problem.alpha;
    let index = obstacles
        .filter(|set| spec.dim == 3 && !set.is_empty())
        .map(|set| HazardIndex::build(set, spec.dt));
    let values: Vec<(f64, bool)> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, &[ns::PATHS, salt, k as u64]);
            let mut obs = DiscountObserver::new(spec, alpha, &problem.f);
            let mode = match (obstacles, index.as_ref()) {
                (Some(set), Some(index)) => ObstacleMode::HazardAbsorb { set, index },
                (Some(set), None) => ObstacleMode::DiscreteAbsorb(set),
                (None, _) => ObstacleMode::None,
            };
            let params = WalkParams {
                spec,
                domain,
                mode,
                horizon: spec.t_max,
                probe_time: None,
            };
            let res = walk(&params, x0, 0.0, &mut rng, &mut obs);
            match res.end {
                WalkEnd::HitObstacle { time } | WalkEnd::ExitDomain { time } => (
                    obs.value + (-alpha * time).exp() * problem.phi.eval(&res.terminal),
                    false,
                ),
                _ => (obs.value, true),
            }
        })
        .collect();

    let mut acc = Welford::new();
    let mut horizon_count = 0usize;
    for (v, truncated) in &values {
        acc.push(*v);
        horizon_count += *truncated as usize;
    }
    let sup_phi = problem.sup_abs(&problem.phi, domain);
    let sup_f = problem.sup_abs(&problem.f, domain);
    let est = acc.estimate();
    Ok(SolutionEstimate {
        value: est.value,
        stderr: est.stderr,
        horizon_fraction: horizon_count as f64 / n_paths as f64,
        bias_bound: (-alpha * spec.t_max).exp() * (sup_phi + sup_f / alpha),
        exact: false,
    })
}

/// Relaxed-problem accumulator:
/// `int e^{-alpha t - A_t} f dt + int e^{-alpha t - A_t} phi h dt`,
/// finished by `e^{-alpha sigma - A_sigma} phi(X_sigma)` at the exit.
struct FeynmanKacObserver<'a> {
    alpha: f64,
    f: &'a ScalarField,
    phi: &'a ScalarField,
    h: Option<&'a ScalarField>,
    a: f64,
    value: f64,
    dim: usize,
    shrink: f64,
    hint_floor: f64,
    discontinuous: bool,
}

impl<'a> FeynmanKacObserver<'a> {
    fn new(
        spec: &DiffusionSpec,
        alpha: f64,
        f: &'a ScalarField,
        phi: &'a ScalarField,
        h: Option<&'a ScalarField>,
    ) -> Self {
        let zero = geom::zero();
        let discontinuous = f.discontinuity_distance(&zero, spec.dim).is_finite()
            || h.map(|h| h.discontinuity_distance(&zero, spec.dim).is_finite())
                .unwrap_or(false);
        Self {
            alpha,
            f,
            phi,
            h,
            a: 0.0,
            value: 0.0,
            dim: spec.dim,
            shrink: spec.shrink,
            hint_floor: spec.dt / 64.0,
            discontinuous,
        }
    }
}

impl StepObserver for FeynmanKacObserver<'_> {
    fn dt_hint(&self, x: &Point) -> f64 {
        if !self.discontinuous {
            return f64::INFINITY;
        }
        let mut d = self.f.discontinuity_distance(x, self.dim);
        if let Some(h) = self.h {
            d = d.min(h.discontinuity_distance(x, self.dim));
        }
        if d.is_infinite() {
            return f64::INFINITY;
        }
        let s = self.shrink * d;
        (s * s / (2.0 * self.dim as f64)).max(self.hint_floor)
    }

    #[inline]
    fn observe(&mut self, t: f64, x: &Point, dt: f64, _d: Option<f64>) -> Option<f64> {
        let damp = (-self.alpha * t - self.a).exp();
        let rate = self.h.map(|h| h.eval(x)).unwrap_or(0.0);
        self.value += damp * (self.f.eval(x) + rate * self.phi.eval(x)) * dt;
        self.a += rate * dt;
        None
    }
}

/// Relaxed (soft-killing) solution by path-weighted Feynman–Kac averaging;
/// the problem's rate density drives the damping `exp(-A_t)`.
pub fn solve_u_limit_mc(
    problem: &DirichletProblem,
    domain: &Domain,
    x: &[f64],
    n_paths: usize,
    spec: &DiffusionSpec,
    seed: u64,
    salt: u64,
) -> Result<SolutionEstimate> {
    let x0 = geom::from_slice(x);
    if !domain.contains(&x0) {
        return Ok(SolutionEstimate::exact(problem.phi.eval(&x0)));
    }
    if n_paths == 0 {
        return Err(Error::invalid("solution MC needs at least one path"));
    }
    let alpha = problem.alpha;
    let values: Vec<(f64, bool)> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, &[ns::PATHS, salt, k as u64]);
            let mut obs = FeynmanKacObserver::new(
                spec,
                alpha,
                &problem.f,
                &problem.phi,
                problem.rate.as_ref(),
            );
            let params = WalkParams {
                spec,
                domain,
                mode: ObstacleMode::None,
                horizon: spec.t_max,
                probe_time: None,
            };
            let res = walk(&params, x0, 0.0, &mut rng, &mut obs);
            match res.end {
                WalkEnd::ExitDomain { time } => (
                    obs.value + (-alpha * time - obs.a).exp() * problem.phi.eval(&res.terminal),
                    false,
                ),
                _ => (obs.value, true),
            }
        })
        .collect();

    let mut acc = Welford::new();
    let mut horizon_count = 0usize;
    for (v, truncated) in &values {
        acc.push(*v);
        horizon_count += *truncated as usize;
    }
    let sup_phi = problem.sup_abs(&problem.phi, domain);
    let sup_f = problem.sup_abs(&problem.f, domain);
    let sup_h = problem
        .rate
        .as_ref()
        .map(|h| problem.sup_abs(h, domain))
        .unwrap_or(0.0);
    let est = acc.estimate();
    Ok(SolutionEstimate {
        value: est.value,
        stderr: est.stderr,
        horizon_fraction: horizon_count as f64 / n_paths as f64,
        bias_bound: (-alpha * spec.t_max).exp() * (sup_f / alpha + sup_phi * (1.0 + sup_h / alpha)),
        exact: false,
    })
}

/// Schrödinger-potential solution: the randomized time fires through the
/// exponential clock on `A_t = c_n * (occupation time of the obstacles)`, and
/// the value is the discounted source integral up to the first of clock,
/// exit, horizon. Zero boundary values are built in, matching the potential
/// formulation.
#[allow(clippy::too_many_arguments)]
pub fn solve_schrodinger_mc(
    problem: &DirichletProblem,
    domain: &Domain,
    obstacles: &ObstacleSet,
    c_n: f64,
    x: &[f64],
    n_paths: usize,
    spec: &DiffusionSpec,
    seed: u64,
    salt: u64,
) -> Result<SolutionEstimate> {
    if !(c_n >= 0.0) {
        return Err(Error::invalid("potential height must be nonnegative"));
    }
    if spec.dim != 3 {
        return Err(Error::invalid("the soft-potential solver needs d = 3"));
    }
    let x0 = geom::from_slice(x);
    if !domain.contains(&x0) {
        return Ok(SolutionEstimate::exact(0.0));
    }
    if n_paths == 0 {
        return Err(Error::invalid("solution MC needs at least one path"));
    }
    let alpha = problem.alpha;
    let index = HazardIndex::build(obstacles, spec.dt);
    let values: Vec<(f64, bool)> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, &[ns::PATHS, salt, k as u64]);
            let e: f64 = rng.sample(rand_distr::Exp1);
            let mut obs = DiscountObserver::new(spec, alpha, &problem.f);
            let params = WalkParams {
                spec,
                domain,
                mode: ObstacleMode::HazardOccupation {
                    set: obstacles,
                    index: &index,
                    height: c_n,
                    threshold: e,
                },
                horizon: spec.t_max,
                probe_time: None,
            };
            let res = walk(&params, x0, 0.0, &mut rng, &mut obs);
            (obs.value, matches!(res.end, WalkEnd::Horizon))
        })
        .collect();

    let mut acc = Welford::new();
    let mut horizon_count = 0usize;
    for (v, truncated) in &values {
        acc.push(*v);
        horizon_count += *truncated as usize;
    }
    let sup_f = problem.sup_abs(&problem.f, domain);
    let est = acc.estimate();
    Ok(SolutionEstimate {
        value: est.value,
        stderr: est.stderr,
        horizon_fraction: horizon_count as f64 / n_paths as f64,
        bias_bound: (-alpha * spec.t_max).exp() * sup_f / alpha,
        exact: false,
    })
}

/// Uniform grid for the finite-difference reference solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Nodes per axis, at least 17.
    pub m: usize,
}

/// Nodal solution of the discretized relaxed problem.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub dim: usize,
    pub lower: Point,
    pub upper: Point,
    pub m: usize,
    /// All nodal values, pinned nodes included, x-index fastest.
    pub values: Vec<f64>,
    pub pinned: Vec<bool>,
    pub residual: f64,
    pub iterations: usize,
}

impl GridSolution {
    fn shape(&self) -> [usize; 3] {
        match self.dim {
            2 => [self.m, self.m, 1],
            _ => [self.m, self.m, self.m],
        }
    }

    fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.m - 1) as f64
    }

    pub fn node_coords(&self, flat: usize) -> Point {
        let s = self.shape();
        let i = flat % s[0];
        let j = (flat / s[0]) % s[1];
        let k = flat / (s[0] * s[1]);
        let mut p = geom::zero();
        p[0] = self.lower[0] + i as f64 * self.spacing(0);
        p[1] = self.lower[1] + j as f64 * self.spacing(1);
        if self.dim > 2 {
            p[2] = self.lower[2] + k as f64 * self.spacing(2);
        }
        p
    }

    /// Multilinear interpolation; `x` is clamped into the grid box.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let s = self.shape();
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for ax in 0..self.dim {
            let h = self.spacing(ax);
            let u = ((x[ax] - self.lower[ax]) / h).clamp(0.0, (self.m - 1) as f64);
            let i = (u.floor() as usize).min(self.m - 2);
            base[ax] = i;
            frac[ax] = u - i as f64;
        }
        let idx = |i: usize, j: usize, k: usize| (k * s[1] + j) * s[0] + i;
        let mut out = 0.0;
        let corners = if self.dim == 2 { 4 } else { 8 };
        for c in 0..corners {
            let di = c & 1;
            let dj = (c >> 1) & 1;
            let dk = (c >> 2) & 1;
            let mut w = if di == 1 { frac[0] } else { 1.0 - frac[0] };
            w *= if dj == 1 { frac[1] } else { 1.0 - frac[1] };
            if self.dim > 2 {
                w *= if dk == 1 { frac[2] } else { 1.0 - frac[2] };
            }
            out += w * self.values[idx(base[0] + di, base[1] + dj, base[2] + dk)];
        }
        out
    }

    /// CSV dump: one row per node, coordinates then value.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.dim == 2 {
            out.push_str("x1,x2,u\n");
        } else {
            out.push_str("x1,x2,x3,u\n");
        }
        for flat in 0..self.values.len() {
            let p = self.node_coords(flat);
            for ax in 0..self.dim {
                out.push_str(&format!("{:.12e},", p[ax]));
            }
            out.push_str(&format!("{:.12e}\n", self.values[flat]));
        }
        out
    }
}

/// Solve `-Lap u + (alpha + h) u = f + h phi` on the grid box with `u = phi`
/// on the box boundary and on hole-masked nodes, by conjugate gradients to
/// relative residual 1e-8.
pub fn solve_fd_reference(
    grid: &GridSpec,
    problem: &DirichletProblem,
    holes: Option<&ObstacleSet>,
) -> Result<GridSolution> {
    let dim = grid.lower.len();
    if dim != 2 && dim != 3 {
        return Err(Error::UnsupportedDimension(dim));
    }
    if grid.upper.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: grid.upper.len(),
        });
    }
    if grid.m < 17 {
        return Err(Error::invalid("grid needs at least 17 nodes per axis"));
    }
    let m = grid.m;
    let shape = if dim == 2 { [m, m, 1] } else { [m, m, m] };
    let n_nodes = shape[0] * shape[1] * shape[2];
    let lower = geom::from_slice(&grid.lower);
    let upper = geom::from_slice(&grid.upper);
    let mut h_ax = [1.0f64; 3];
    for ax in 0..dim {
        h_ax[ax] = (upper[ax] - lower[ax]) / (m - 1) as f64;
        if !(h_ax[ax] > 0.0) {
            return Err(Error::invalid("grid box must have positive extent"));
        }
    }

    let coords = |flat: usize| -> Point {
        let i = flat % shape[0];
        let j = (flat / shape[0]) % shape[1];
        let k = flat / (shape[0] * shape[1]);
        let mut p = geom::zero();
        p[0] = lower[0] + i as f64 * h_ax[0];
        p[1] = lower[1] + j as f64 * h_ax[1];
        if dim > 2 {
            p[2] = lower[2] + k as f64 * h_ax[2];
        }
        p
    };

    // Classify nodes and assign unknown indices.
    let mut pinned = vec![false; n_nodes];
    let mut values = vec![0.0f64; n_nodes];
    let mut free_index = vec![usize::MAX; n_nodes];
    let mut n_free = 0usize;
    for flat in 0..n_nodes {
        let i = flat % shape[0];
        let j = (flat / shape[0]) % shape[1];
        let k = flat / (shape[0] * shape[1]);
        let p = coords(flat);
        let on_boundary =
            i == 0 || i == m - 1 || j == 0 || j == m - 1 || (dim > 2 && (k == 0 || k == m - 1));
        let in_hole = holes.map(|set| set.contains(&p)).unwrap_or(false);
        if on_boundary || in_hole {
            pinned[flat] = true;
            values[flat] = problem.phi.eval(&p);
        } else {
            free_index[flat] = n_free;
            n_free += 1;
        }
    }

    let stride = [1usize, shape[0], shape[0] * shape[1]];
    let alpha = problem.alpha;
    let rate = problem.rate.clone();

    // Right-hand side and diagonal over unknowns; pinned neighbors feed b.
    let mut b = vec![0.0f64; n_free];
    let mut diag = vec![0.0f64; n_free];
    for flat in 0..n_nodes {
        let fi = free_index[flat];
        if fi == usize::MAX {
            continue;
        }
        let p = coords(flat);
        let h_val = rate.as_ref().map(|h| h.eval(&p)).unwrap_or(0.0);
        let mut d = alpha + h_val;
        let mut rhs = problem.f.eval(&p) + h_val * problem.phi.eval(&p);
        for ax in 0..dim {
            let inv_h2 = 1.0 / (h_ax[ax] * h_ax[ax]);
            d += 2.0 * inv_h2;
            for dir in [-1isize, 1isize] {
                let nb = (flat as isize + dir * stride[ax] as isize) as usize;
                if pinned[nb] {
                    rhs += values[nb] * inv_h2;
                }
            }
        }
        b[fi] = rhs;
        diag[fi] = d;
    }

    let flat_of_free: Vec<usize> = {
        let mut v = vec![0usize; n_free];
        for flat in 0..n_nodes {
            if free_index[flat] != usize::MAX {
                v[free_index[flat]] = flat;
            }
        }
        v
    };
    let apply = |u: &[f64], out: &mut [f64]| {
        for fi in 0..n_free {
            let flat = flat_of_free[fi];
            let mut y = diag[fi] * u[fi];
            for ax in 0..dim {
                let inv_h2 = 1.0 / (h_ax[ax] * h_ax[ax]);
                for dir in [-1isize, 1isize] {
                    let nb = (flat as isize + dir * stride[ax] as isize) as usize;
                    let nfi = free_index[nb];
                    if nfi != usize::MAX {
                        y -= u[nfi] * inv_h2;
                    }
                }
            }
            out[fi] = y;
        }
    };

    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut u = vec![0.0f64; n_free];
    let mut residual = 0.0;
    let mut iterations = 0;
    if b_norm > 0.0 {
        let mut r = b.clone();
        let mut p = b.clone();
        let mut ap = vec![0.0f64; n_free];
        let mut rr = r.iter().map(|v| v * v).sum::<f64>();
        let tol = 1e-8 * b_norm;
        let max_iter = 40 * m * dim + 2000;
        loop {
            if rr.sqrt() <= tol {
                break;
            }
            if iterations >= max_iter {
                return Err(Error::NoConvergence {
                    residual: rr.sqrt() / b_norm,
                    iterations,
                });
            }
            apply(&p, &mut ap);
            let pap = p.iter().zip(ap.iter()).map(|(a, b)| a * b).sum::<f64>();
            let step = rr / pap;
            for i in 0..n_free {
                u[i] += step * p[i];
                r[i] -= step * ap[i];
            }
            let rr_new = r.iter().map(|v| v * v).sum::<f64>();
            let beta = rr_new / rr;
            for i in 0..n_free {
                p[i] = r[i] + beta * p[i];
            }
            rr = rr_new;
            iterations += 1;
        }
        residual = rr.sqrt() / b_norm;
    }

    for fi in 0..n_free {
        values[flat_of_free[fi]] = u[fi];
    }
    Ok(GridSolution {
        dim,
        lower,
        upper,
        m,
        values,
        pinned,
        residual,
        iterations,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub point: Vec<f64>,
    pub u_n: Estimate,
    pub u_limit: Estimate,
    /// `u_n - u_limit` with combined standard error.
    pub gap: Estimate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub max_abs_gap: f64,
    pub mean_abs_gap: f64,
}

/// Per-point comparison of two solution vectors with combined errors.
pub fn compare_solutions(
    points: &[Vec<f64>],
    u_n: &[Estimate],
    u_limit: &[Estimate],
) -> Result<ComparisonReport> {
    if points.len() != u_n.len() || points.len() != u_limit.len() {
        return Err(Error::invalid("comparison needs matching point lists"));
    }
    let mut rows = Vec::with_capacity(points.len());
    let mut max_abs = 0.0f64;
    let mut sum_abs = 0.0f64;
    for i in 0..points.len() {
        let gap = u_n[i].minus(&u_limit[i]);
        max_abs = max_abs.max(gap.value.abs());
        sum_abs += gap.value.abs();
        rows.push(ComparisonRow {
            point: points[i].clone(),
            u_n: u_n[i],
            u_limit: u_limit[i],
            gap,
        });
    }
    Ok(ComparisonReport {
        max_abs_gap: max_abs,
        mean_abs_gap: if rows.is_empty() {
            0.0
        } else {
            sum_abs / rows.len() as f64
        },
        rows,
    })
}
