//! Adaptive Euler simulation of the diffusion with event detection.
//!
//! The process has generator `Delta`, so increments over a step `dt` are
//! exact Gaussians with per-coordinate variance `2 dt`; the only
//! discretization errors are event detection between sample points and
//! left-endpoint quadrature of additive functionals. Steps adapt to the
//! obstacle distance as `min(dt, (s * dist)^2 / (2d))`, and additionally
//! shrink near the domain boundary and near rate-field discontinuities to
//! keep those errors at the same order; halving `dt` is the documented
//! sanity check on the remaining bias.
//!
//! Obstacle distances are served by a cached lower bound that decays with the
//! travelled arc length, so the exact grid query only runs close to an
//! obstacle where the walk needs resolution anyway.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::geom::{self, Point};
use crate::hazard::HazardIndex;
use crate::model::{Domain, ObstacleSet};
use crate::rng::{ns, substream};

/// Time-stepping parameters for the diffusion with generator `Delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    pub dim: usize,
    /// Base time step; the cap for adaptive steps.
    pub dt: f64,
    /// Horizon truncating events that never happen.
    pub t_max: f64,
    /// Near-obstacle step shrink factor in (0, 1).
    pub shrink: f64,
}

impl DiffusionSpec {
    pub fn new(dim: usize, dt: f64, t_max: f64, shrink: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !(dt > 0.0) || !(t_max > 0.0) || !(shrink > 0.0 && shrink < 1.0) {
            return Err(Error::invalid(
                "need dt > 0, t_max > 0 and shrink in (0, 1)",
            ));
        }
        Ok(Self {
            dim,
            dt,
            t_max,
            shrink,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathEvent {
    HitObstacle,
    ExitDomain,
    Horizon,
}

impl PathEvent {
    pub fn as_str(&self) -> &'static str {
        match self {
            PathEvent::HitObstacle => "hit-obstacle",
            PathEvent::ExitDomain => "exit-domain",
            PathEvent::Horizon => "horizon",
        }
    }
}

/// One simulated path's terminal event and accumulated functionals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathOutcome {
    pub event: PathEvent,
    pub event_time: f64,
    pub terminal: Point,
    /// `A = int h_j(X_s) ds` up to the event time, one per rate density.
    pub rate_integrals: Vec<f64>,
    /// `int e^{-alpha_k t} f_k(X_t) dt` up to the event time.
    pub discounted_integrals: Vec<f64>,
}

/// Start distribution for batches of paths.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StartLaw {
    Point { point: Vec<f64> },
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
}

impl StartLaw {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        match self {
            StartLaw::Point { point } => geom::from_slice(point),
            StartLaw::UniformBox { lower, upper } => {
                let mut p = geom::zero();
                for i in 0..lower.len() {
                    p[i] = rng.random_range(lower[i]..upper[i]);
                }
                p
            }
        }
    }

    /// Sup of the Lebesgue density, when one exists.
    pub fn sup_density(&self) -> Option<f64> {
        match self {
            StartLaw::Point { .. } => None,
            StartLaw::UniformBox { lower, upper } => {
                let vol: f64 = lower
                    .iter()
                    .zip(upper.iter())
                    .map(|(lo, hi)| hi - lo)
                    .product();
                Some(1.0 / vol)
            }
        }
    }
}

/// How a walk ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WalkEnd {
    HitObstacle { time: f64 },
    ExitDomain { time: f64 },
    Horizon,
    /// An observer's or the engine's clock fired inside a step.
    ClockFired { time: f64 },
}

/// How obstacles act on the walk.
#[derive(Clone, Copy)]
pub enum ObstacleMode<'a> {
    None,
    /// Stop when a sample point has nonpositive signed distance; steps shrink
    /// as `min(dt, (s dist)^2 / 2d)`. Plain and deterministic, but loses a
    /// scale-invariant fraction of hits on small targets.
    DiscreteAbsorb(&'a ObstacleSet),
    /// Stop through the exact one-ball first-passage hazard per step (d = 3);
    /// see [`crate::hazard`].
    HazardAbsorb {
        set: &'a ObstacleSet,
        index: &'a HazardIndex,
    },
    /// Soft potential `height * 1_obstacles`: obstacle entries arrive through
    /// the hazard channel, then a fine local dwell accumulates occupation
    /// against an exponential threshold.
    HazardOccupation {
        set: &'a ObstacleSet,
        index: &'a HazardIndex,
        height: f64,
        threshold: f64,
    },
}

#[derive(Debug, Clone)]
pub struct WalkResult {
    pub end: WalkEnd,
    pub terminal: Point,
    pub final_time: f64,
    /// Position at the probe time, when requested and reached.
    pub probe: Option<Point>,
}

/// Per-step hook for accumulating functionals and firing clocks.
pub trait StepObserver {
    /// Extra step-size constraint at `x`, `+inf` when none.
    fn dt_hint(&self, _x: &Point) -> f64 {
        f64::INFINITY
    }

    /// Observe the step `[t, t + dt)` with left endpoint `x`.
    /// `obstacle_distance` carries the exact signed obstacle distance when the
    /// engine computed it at `x` (always the case on or inside an obstacle).
    /// Returning `Some(t_stop)` with `t < t_stop <= t + dt` stops the walk.
    fn observe(&mut self, t: f64, x: &Point, dt: f64, obstacle_distance: Option<f64>)
        -> Option<f64>;
}

/// Observer that does nothing.
pub struct NoObserver;

impl StepObserver for NoObserver {
    #[inline]
    fn observe(&mut self, _t: f64, _x: &Point, _dt: f64, _d: Option<f64>) -> Option<f64> {
        None
    }
}

pub struct WalkParams<'a> {
    pub spec: &'a DiffusionSpec,
    pub domain: &'a Domain,
    pub mode: ObstacleMode<'a>,
    pub horizon: f64,
    pub probe_time: Option<f64>,
}

const DT_FLOOR_FACTOR: f64 = 1e-9;
const DOMAIN_DT_DIVISOR: f64 = 256.0;

struct WalkState {
    x: Point,
    t: f64,
    probe: Option<Point>,
    probe_pending: bool,
    /// Occupation functional of the soft clock.
    occupation: f64,
}

impl WalkState {
    fn finish(&self, end: WalkEnd) -> WalkResult {
        let final_time = match end {
            WalkEnd::HitObstacle { time }
            | WalkEnd::ExitDomain { time }
            | WalkEnd::ClockFired { time } => time,
            WalkEnd::Horizon => self.t,
        };
        WalkResult {
            end,
            terminal: self.x,
            final_time,
            probe: self.probe,
        }
    }
}

/// Run one walk from `(x0, t0)`.
pub fn walk<O: StepObserver>(
    params: &WalkParams,
    x0: Point,
    t0: f64,
    rng: &mut ChaCha8Rng,
    observer: &mut O,
) -> WalkResult {
    let spec = params.spec;
    let dim = spec.dim;
    let two_d = 2.0 * dim as f64;
    let shrink = spec.shrink;
    let dt_floor = spec.dt * DT_FLOOR_FACTOR;

    let mut st = WalkState {
        x: x0,
        t: t0,
        probe: None,
        probe_pending: false,
    occupation: 0.0,
    };
    match params.probe_time {
        Some(pt) if pt > t0 => st.probe_pending = true,
        Some(pt) if pt == t0 => st.probe = Some(x0),
        _ => {}
    }

    if !params.domain.contains(&st.x) {
        return st.finish(WalkEnd::ExitDomain { time: st.t });
    }
    // Start inside an obstacle: the entrance time is zero for absorbing
    // modes; soft modes begin their dwell right away.
    match params.mode {
        ObstacleMode::DiscreteAbsorb(set) | ObstacleMode::HazardAbsorb { set, .. } => {
            if set.contains(&st.x) {
                return st.finish(WalkEnd::HitObstacle { time: st.t });
            }
        }
        ObstacleMode::HazardOccupation {
            set,
            index,
            height,
            threshold,
        } => {
            if set.nearest_distance(&st.x) <= 0.0 {
                // Identify the containing ball for the dwell.
                if let Some((center, radius)) = index.pick_fired_ball(&st.x, spec.dt, 0.0) {
                    if let Some(end) = dwell(
                        params, &mut st, center, radius, height, threshold, rng, observer,
                    ) {
                        return st.finish(end);
                    }
                }
            }
        }
        _ => {}
    }

    // Known lower bound on the obstacle distance at the current position;
    // decays with travelled arc length, refreshed when exhausted.
    let mut cached_bound = f64::NEG_INFINITY;

    loop {
        if st.t >= params.horizon {
            return st.finish(WalkEnd::Horizon);
        }

        let dt_cap = spec.dt.min(params.horizon - st.t);

        // Obstacle constraint on the step size.
        let mut dist_info: Option<f64> = None;
        let dt_obs = match params.mode {
            ObstacleMode::None => f64::INFINITY,
            ObstacleMode::DiscreteAbsorb(set) => {
                if cached_bound <= 0.0 {
                    let lb = set.distance_lower_bound(&st.x);
                    let d = if (shrink * lb) * (shrink * lb) / two_d >= dt_cap {
                        lb
                    } else {
                        let exact = set.nearest_distance(&st.x);
                        dist_info = Some(exact);
                        if exact <= 0.0 {
                            return st.finish(WalkEnd::HitObstacle { time: st.t });
                        }
                        exact
                    };
                    cached_bound = d;
                }
                let d_step = cached_bound.abs();
                ((shrink * d_step) * (shrink * d_step) / two_d).max(dt_floor)
            }
            ObstacleMode::HazardAbsorb { set, index }
            | ObstacleMode::HazardOccupation { set, index, .. } => {
                // Far from the obstacles the usual cascade applies, but it
                // never shrinks below the hazard step: close approaches are
                // handled by the first-passage kill, not by resolution.
                if cached_bound <= 0.0 {
                    cached_bound = set.distance_lower_bound(&st.x);
                }
                let d_step = cached_bound.max(0.0);
                ((shrink * d_step) * (shrink * d_step) / two_d).max(index.dt_step())
            }
        };

        // Domain-boundary constraint (exit overshoot control for boxes).
        let dt_dom = match params.domain {
            Domain::FullSpace { .. } => f64::INFINITY,
            Domain::AxisBox { .. } => {
                let bd = params.domain.boundary_distance(&st.x).abs();
                ((shrink * bd) * (shrink * bd) / two_d).max(spec.dt / DOMAIN_DT_DIVISOR)
            }
        };

        let mut dt = dt_cap.min(dt_obs).min(dt_dom).min(observer.dt_hint(&st.x));
        // Land exactly on the probe time when it falls inside this step.
        let mut clamp_to_probe = false;
        if st.probe_pending {
            let pt = params.probe_time.unwrap();
            if pt - st.t <= dt {
                dt = pt - st.t;
                clamp_to_probe = true;
            }
        }

        // Point-channel first-passage hazard of the step ahead.
        match params.mode {
            ObstacleMode::HazardAbsorb { index, .. } => {
                let p = index.step_hazard(&st.x, dt);
                if p > 0.0 && rng.random_range(0.0..1.0) < p {
                    let v: f64 = rng.random_range(0.0..1.0);
                    let t_event = st.t + v * dt;
                    if let Some(ts) = observer.observe(st.t, &st.x, v * dt, None) {
                        if ts <= t_event {
                            return st.finish(WalkEnd::ClockFired { time: ts });
                        }
                    }
                    if let Some((center, radius)) =
                        index.pick_fired_ball(&st.x, dt, rng.random_range(0.0..1.0))
                    {
                        st.x = crate::hazard::sample_entry_point(&center, radius, &st.x, rng);
                    }
                    st.t = t_event;
                    return st.finish(WalkEnd::HitObstacle { time: t_event });
                }
            }
            ObstacleMode::HazardOccupation {
                index,
                height,
                threshold,
                ..
            } => {
                let p = index.step_hazard(&st.x, dt);
                if p > 0.0 && rng.random_range(0.0..1.0) < p {
                    let v: f64 = rng.random_range(0.0..1.0);
                    let t_event = st.t + v * dt;
                    if let Some(ts) = observer.observe(st.t, &st.x, v * dt, None) {
                        if ts <= t_event {
                            return st.finish(WalkEnd::ClockFired { time: ts });
                        }
                    }
                    let fired = index.pick_fired_ball(&st.x, dt, rng.random_range(0.0..1.0));
                    if let Some((center, radius)) = fired {
                        let entry = crate::hazard::sample_entry_point(&center, radius, &st.x, rng);
                        st.x = entry;
                        st.t = t_event;
                        if let Some(end) = dwell(
                            params, &mut st, center, radius, height, threshold, rng, observer,
                        ) {
                            return st.finish(end);
                        }
                        // Escaped the dwell; resume coarse stepping.
                        cached_bound = f64::NEG_INFINITY;
                        continue;
                    }
                }
            }
            _ => {}
        }

        // Draw the step without committing it.
        let scale = (2.0 * dt).sqrt();
        let mut y = st.x;
        let mut travel2 = 0.0;
        for c in y.iter_mut().take(dim) {
            let g: f64 = rng.sample(StandardNormal);
            let dxi = scale * g;
            *c += dxi;
            travel2 += dxi * dxi;
        }

        // Bridge channel: endpoint detection plus the half-space kill.
        match params.mode {
            ObstacleMode::HazardAbsorb { index, .. } => {
                if let Some(hit) = index.bridge_outcome(&st.x, &y, dt, rng) {
                    let t_event = st.t + hit.fraction * dt;
                    if let Some(ts) = observer.observe(st.t, &st.x, hit.fraction * dt, None) {
                        if ts <= t_event {
                            return st.finish(WalkEnd::ClockFired { time: ts });
                        }
                    }
                    st.x = hit.entry;
                    st.t = t_event;
                    return st.finish(WalkEnd::HitObstacle { time: t_event });
                }
            }
            ObstacleMode::HazardOccupation {
                index,
                height,
                threshold,
                ..
            } => {
                if let Some(hit) = index.bridge_outcome(&st.x, &y, dt, rng) {
                    let t_event = st.t + hit.fraction * dt;
                    if let Some(ts) = observer.observe(st.t, &st.x, hit.fraction * dt, None) {
                        if ts <= t_event {
                            return st.finish(WalkEnd::ClockFired { time: ts });
                        }
                    }
                    st.x = hit.entry;
                    st.t = t_event;
                    if let Some(end) = dwell(
                        params,
                        &mut st,
                        hit.center,
                        hit.radius,
                        height,
                        threshold,
                        rng,
                        observer,
                    ) {
                        return st.finish(end);
                    }
                    cached_bound = f64::NEG_INFINITY;
                    continue;
                }
            }
            _ => {}
        }

        if let Some(t_stop) = observer.observe(st.t, &st.x, dt, dist_info) {
            return st.finish(WalkEnd::ClockFired { time: t_stop });
        }

        st.x = y;
        cached_bound -= travel2.sqrt();
        st.t += dt;
        if clamp_to_probe {
            st.t = params.probe_time.unwrap();
            st.probe = Some(st.x);
            st.probe_pending = false;
        }

        if !params.domain.contains(&st.x) {
            return st.finish(WalkEnd::ExitDomain { time: st.t });
        }
    }
}

/// Fine local simulation of a dwell around one ball for the soft clock:
/// accumulates occupation against the threshold until the clock fires, the
/// walk escapes to [`crate::hazard::DWELL_ESCAPE_FACTOR`] radii, or a global
/// event intervenes. Returns `Some(end)` to finish the walk, `None` to resume
/// coarse stepping from the updated state.
#[allow(clippy::too_many_arguments)]
fn dwell<O: StepObserver>(
    params: &WalkParams,
    st: &mut WalkState,
    center: Point,
    radius: f64,
    height: f64,
    threshold: f64,
    rng: &mut ChaCha8Rng,
    observer: &mut O,
) -> Option<WalkEnd> {
    let spec = params.spec;
    let dim = spec.dim;
    let two_d = 2.0 * dim as f64;
    let shrink = spec.shrink;
    let escape = crate::hazard::DWELL_ESCAPE_FACTOR * radius;
    let res = shrink * radius / 4.0;
    let dt_floor = (res * res / two_d).max(spec.dt * DT_FLOOR_FACTOR);

    loop {
        if st.t >= params.horizon {
            return Some(WalkEnd::Horizon);
        }
        let d_surf = geom::dist(&st.x, &center) - radius;
        if d_surf >= escape - radius {
            return None;
        }
        let mut dt = ((shrink * d_surf.abs()) * (shrink * d_surf.abs()) / two_d)
            .max(dt_floor)
            .min(spec.dt)
            .min(params.horizon - st.t);
        let mut clamp_to_probe = false;
        if st.probe_pending {
            let pt = params.probe_time.unwrap();
            if pt - st.t <= dt {
                dt = pt - st.t;
                clamp_to_probe = true;
            }
        }

        let inside = d_surf <= 0.0;
        if inside && height > 0.0 {
            let next = st.occupation + height * dt;
            if next >= threshold {
                let dt_part = (threshold - st.occupation) / height;
                let t_fire = st.t + dt_part;
                let stop = observer.observe(st.t, &st.x, dt_part, Some(d_surf));
                st.occupation = threshold;
                if let Some(ts) = stop {
                    if ts <= t_fire {
                        return Some(WalkEnd::ClockFired { time: ts });
                    }
                }
                return Some(WalkEnd::ClockFired { time: t_fire });
            }
            st.occupation = next;
        }

        if let Some(ts) = observer.observe(st.t, &st.x, dt, Some(d_surf)) {
            return Some(WalkEnd::ClockFired { time: ts });
        }

        let scale = (2.0 * dt).sqrt();
        for c in st.x.iter_mut().take(dim) {
            let g: f64 = rng.sample(StandardNormal);
            *c += scale * g;
        }
        st.t += dt;
        if clamp_to_probe {
            st.t = params.probe_time.unwrap();
            st.probe = Some(st.x);
            st.probe_pending = false;
        }
        if !params.domain.contains(&st.x) {
            return Some(WalkEnd::ExitDomain { time: st.t });
        }
    }
}

/// Accumulates plain rate functionals and discounted integrals along a walk.
pub struct FunctionalObserver<'a> {
    rates: &'a [ScalarField],
    integrands: &'a [(f64, ScalarField)],
    pub rate_integrals: Vec<f64>,
    pub discounted_integrals: Vec<f64>,
    dim: usize,
    shrink: f64,
    hint_floor: f64,
    any_discontinuous: bool,
}

impl<'a> FunctionalObserver<'a> {
    pub fn new(
        spec: &DiffusionSpec,
        rates: &'a [ScalarField],
        integrands: &'a [(f64, ScalarField)],
    ) -> Self {
        let any_discontinuous = rates
            .iter()
            .chain(integrands.iter().map(|(_, f)| f))
            .any(|f| f.discontinuity_distance(&geom::zero(), spec.dim).is_finite());
        Self {
            rates,
            integrands,
            rate_integrals: vec![0.0; rates.len()],
            discounted_integrals: vec![0.0; integrands.len()],
            dim: spec.dim,
            shrink: spec.shrink,
            hint_floor: spec.dt / 64.0,
            any_discontinuous,
        }
    }
}

impl StepObserver for FunctionalObserver<'_> {
    fn dt_hint(&self, x: &Point) -> f64 {
        if !self.any_discontinuous {
            return f64::INFINITY;
        }
        let mut d = f64::INFINITY;
        for f in self.rates.iter().chain(self.integrands.iter().map(|(_, f)| f)) {
            d = d.min(f.discontinuity_distance(x, self.dim));
        }
        if d.is_infinite() {
            return f64::INFINITY;
        }
        let s = self.shrink * d;
        (s * s / (2.0 * self.dim as f64)).max(self.hint_floor)
    }

    fn observe(&mut self, t: f64, x: &Point, dt: f64, _d: Option<f64>) -> Option<f64> {
        for (j, h) in self.rates.iter().enumerate() {
            self.rate_integrals[j] += h.eval(x) * dt;
        }
        for (k, (alpha, f)) in self.integrands.iter().enumerate() {
            self.discounted_integrals[k] += (-alpha * t).exp() * f.eval(x) * dt;
        }
        None
    }
}

fn outcome_from_walk(
    result: WalkResult,
    horizon: f64,
    observer: FunctionalObserver<'_>,
) -> PathOutcome {
    let (event, event_time) = match result.end {
        WalkEnd::HitObstacle { time } => (PathEvent::HitObstacle, time),
        WalkEnd::ExitDomain { time } => (PathEvent::ExitDomain, time),
        WalkEnd::Horizon | WalkEnd::ClockFired { .. } => (PathEvent::Horizon, horizon),
    };
    PathOutcome {
        event,
        event_time,
        terminal: result.terminal,
        rate_integrals: observer.rate_integrals,
        discounted_integrals: observer.discounted_integrals,
    }
}

/// Simulate one path until obstacle entrance, domain exit, or the horizon,
/// accumulating the requested functionals with left-endpoint quadrature.
pub fn simulate_path(
    spec: &DiffusionSpec,
    domain: &Domain,
    obstacles: Option<&ObstacleSet>,
    x0: &[f64],
    rates: &[ScalarField],
    integrands: &[(f64, ScalarField)],
    rng: &mut ChaCha8Rng,
) -> Result<PathOutcome> {
    if x0.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("start point has non-finite coordinates"));
    }
    if x0.len() != spec.dim {
        return Err(Error::DimensionMismatch {
            expected: spec.dim,
            got: x0.len(),
        });
    }
    let x0 = geom::from_slice(x0);
    let mut observer = FunctionalObserver::new(spec, rates, integrands);
    let params = WalkParams {
        spec,
        domain,
        mode: match obstacles {
            Some(set) => ObstacleMode::DiscreteAbsorb(set),
            None => ObstacleMode::None,
        },
        horizon: spec.t_max,
        probe_time: None,
    };
    let result = walk(&params, x0, 0.0, rng, &mut observer);
    Ok(outcome_from_walk(result, spec.t_max, observer))
}

/// [`simulate_path`] that also records the sampled trajectory `(t, x)`.
pub fn simulate_path_traced(
    spec: &DiffusionSpec,
    domain: &Domain,
    obstacles: Option<&ObstacleSet>,
    x0: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<(PathOutcome, Vec<(f64, Point)>)> {
    struct Tracer {
        points: Vec<(f64, Point)>,
    }
    impl StepObserver for Tracer {
        fn observe(&mut self, t: f64, x: &Point, _dt: f64, _d: Option<f64>) -> Option<f64> {
            self.points.push((t, *x));
            None
        }
    }
    if x0.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("start point has non-finite coordinates"));
    }
    let x0p = geom::from_slice(x0);
    let mut tracer = Tracer { points: Vec::new() };
    let params = WalkParams {
        spec,
        domain,
        mode: match obstacles {
            Some(set) => ObstacleMode::DiscreteAbsorb(set),
            None => ObstacleMode::None,
        },
        horizon: spec.t_max,
        probe_time: None,
    };
    let result = walk(&params, x0p, 0.0, rng, &mut tracer);
    tracer.points.push((result.final_time, result.terminal));
    let (event, event_time) = match result.end {
        WalkEnd::HitObstacle { time } => (PathEvent::HitObstacle, time),
        WalkEnd::ExitDomain { time } => (PathEvent::ExitDomain, time),
        _ => (PathEvent::Horizon, spec.t_max),
    };
    Ok((
        PathOutcome {
            event,
            event_time,
            terminal: result.terminal,
            rate_integrals: Vec::new(),
            discounted_integrals: Vec::new(),
        },
        tracer.points,
    ))
}

/// Piecewise-constant quadrature of a rate density along a recorded
/// trajectory; returns the nondecreasing cumulative functional `A_t`.
pub fn accumulate_rate(times: &[f64], points: &[Point], h: &ScalarField) -> Result<Vec<f64>> {
    if times.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: points.len(),
        });
    }
    let mut out = Vec::with_capacity(times.len());
    let mut a = 0.0;
    for i in 0..times.len() {
        if i > 0 {
            let dt = times[i] - times[i - 1];
            if dt < 0.0 {
                return Err(Error::invalid("trajectory times must be nondecreasing"));
            }
            let v = h.eval(&points[i - 1]);
            if v < 0.0 {
                return Err(Error::invalid(format!(
                    "rate density is negative ({v}) at {:?}",
                    &points[i - 1]
                )));
            }
            a += v * dt;
        }
        out.push(a);
    }
    Ok(out)
}

/// Simulate `n_paths` independent paths; path `k` uses the stream derived
/// from `(seed, k)`, so results do not depend on worker count.
#[allow(clippy::too_many_arguments)]
pub fn batch_simulate(
    spec: &DiffusionSpec,
    domain: &Domain,
    obstacles: Option<&ObstacleSet>,
    start: &StartLaw,
    n_paths: usize,
    rates: &[ScalarField],
    integrands: &[(f64, ScalarField)],
    seed: u64,
) -> Result<Vec<PathOutcome>> {
    if n_paths == 0 {
        return Err(Error::invalid("batch needs at least one path"));
    }
    (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, &[ns::PATHS, k as u64]);
            let x0 = start.sample(&mut rng);
            simulate_path(
                spec,
                domain,
                obstacles,
                &x0[..spec.dim],
                rates,
                integrands,
                &mut rng,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Ball;

    fn spec3(dt: f64, t_max: f64) -> DiffusionSpec {
        DiffusionSpec::new(3, dt, t_max, 0.5).unwrap()
    }

    #[test]
    fn start_inside_obstacle_hits_at_zero() {
        let spec = spec3(0.01, 1.0);
        let domain = Domain::full_space(3).unwrap();
        let set = ObstacleSet::new(
            3,
            vec![Ball {
                center: [0.0; 3],
                radius: 0.5,
            }],
        )
        .unwrap();
        let mut rng = substream(1, &[0]);
        let out =
            simulate_path(&spec, &domain, Some(&set), &[0.1, 0.0, 0.0], &[], &[], &mut rng)
                .unwrap();
        assert_eq!(out.event, PathEvent::HitObstacle);
        assert_eq!(out.event_time, 0.0);
    }

    #[test]
    fn no_obstacles_full_space_reaches_horizon() {
        let spec = spec3(0.01, 0.5);
        let domain = Domain::full_space(3).unwrap();
        let mut rng = substream(2, &[0]);
        let out = simulate_path(&spec, &domain, None, &[0.0; 3], &[], &[], &mut rng).unwrap();
        assert_eq!(out.event, PathEvent::Horizon);
        assert_eq!(out.event_time, 0.5);
    }

    #[test]
    fn obstacle_free_paths_never_report_hits() {
        let spec = spec3(0.01, 1.0);
        let domain = Domain::axis_box(&[0.0; 3], &[1.0; 3]).unwrap();
        let outs = batch_simulate(
            &spec,
            &domain,
            None,
            &StartLaw::Point {
                point: vec![0.5; 3],
            },
            200,
            &[],
            &[],
            7,
        )
        .unwrap();
        assert!(outs.iter().all(|o| o.event != PathEvent::HitObstacle));
        // box exits should dominate at this horizon
        assert!(outs.iter().any(|o| o.event == PathEvent::ExitDomain));
    }

    #[test]
    fn constant_rate_accumulates_exactly() {
        let spec = spec3(0.01, 0.8);
        let domain = Domain::full_space(3).unwrap();
        let rates = [ScalarField::constant(2.5)];
        let mut rng = substream(3, &[0]);
        let out = simulate_path(&spec, &domain, None, &[0.0; 3], &rates, &[], &mut rng).unwrap();
        assert!((out.rate_integrals[0] - 2.5 * 0.8).abs() < 1e-12);
    }

    #[test]
    fn discounted_constant_integrand_matches_closed_form() {
        // int_0^T e^{-alpha t} dt with left endpoints: error O(dt).
        let spec = spec3(0.001, 1.0);
        let domain = Domain::full_space(3).unwrap();
        let integrands = [(2.0, ScalarField::constant(1.0))];
        let mut rng = substream(4, &[0]);
        let out =
            simulate_path(&spec, &domain, None, &[0.0; 3], &[], &integrands, &mut rng).unwrap();
        let exact = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!(
            (out.discounted_integrals[0] - exact).abs() < 2e-3,
            "{} vs {exact}",
            out.discounted_integrals[0]
        );
    }

    #[test]
    fn batch_is_deterministic_and_order_free() {
        let spec = spec3(0.01, 0.5);
        let domain = Domain::full_space(3).unwrap();
        let set = ObstacleSet::new(
            3,
            vec![Ball {
                center: [0.3, 0.3, 0.3],
                radius: 0.05,
            }],
        )
        .unwrap();
        let start = StartLaw::UniformBox {
            lower: vec![0.0; 3],
            upper: vec![1.0; 3],
        };
        let a = batch_simulate(&spec, &domain, Some(&set), &start, 500, &[], &[], 99).unwrap();
        let b = batch_simulate(&spec, &domain, Some(&set), &start, 500, &[], &[], 99).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.event, y.event);
            assert_eq!(x.event_time, y.event_time);
            assert_eq!(x.terminal, y.terminal);
        }
        // single path equals batch element 0's stream
        let mut rng = substream(99, &[ns::PATHS, 0]);
        let x0 = start.sample(&mut rng);
        let single =
            simulate_path(&spec, &domain, Some(&set), &x0[..3], &[], &[], &mut rng).unwrap();
        assert_eq!(single.event, a[0].event);
        assert_eq!(single.event_time, a[0].event_time);
    }

    #[test]
    fn accumulate_rate_examples() {
        let h0 = ScalarField::zero();
        let ts = [0.0, 0.5, 1.0];
        let xs = [[0.0; 3], [0.1, 0.0, 0.0], [0.2, 0.0, 0.0]];
        let a = accumulate_rate(&ts, &xs, &h0).unwrap();
        assert_eq!(a, vec![0.0, 0.0, 0.0]);

        let hc = ScalarField::constant(3.0);
        let a = accumulate_rate(&ts, &xs, &hc).unwrap();
        assert!((a[2] - 3.0).abs() < 1e-15);
        assert!(a.windows(2).all(|w| w[1] >= w[0]));

        // indicator constant along a path inside the box
        let hbox = ScalarField::box_indicator(&[-1.0; 3], &[1.0; 3], 2.0);
        let a = accumulate_rate(&ts, &xs, &hbox).unwrap();
        assert!((a[2] - 2.0).abs() < 1e-15);

        let bad = ScalarField::constant(-1.0);
        assert!(accumulate_rate(&ts, &xs, &bad).is_err());
    }

    #[test]
    fn nan_start_is_rejected() {
        let spec = spec3(0.01, 1.0);
        let domain = Domain::full_space(3).unwrap();
        let mut rng = substream(5, &[0]);
        assert!(
            simulate_path(&spec, &domain, None, &[f64::NAN, 0.0, 0.0], &[], &[], &mut rng)
                .is_err()
        );
    }

    /// Dynkin oracle: for generator Delta, `E|X_t - x|^2 = 2 d t`, so the mean
    /// exit time from a ball of radius R started at the center is `R^2 / (2d)`.
    #[test]
    fn mean_exit_time_from_ball_matches_dynkin() {
        struct BallExit {
            radius: f64,
        }
        impl StepObserver for BallExit {
            fn dt_hint(&self, x: &Point) -> f64 {
                // resolve the sphere crossing like a box boundary
                let d = (self.radius - geom::norm(x)).abs();
                ((0.5 * d) * (0.5 * d) / 6.0).max(1e-6)
            }
            fn observe(&mut self, _t: f64, x: &Point, _dt: f64, _d: Option<f64>) -> Option<f64> {
                if geom::norm(x) >= self.radius {
                    Some(_t + 1e-300) // fire immediately; time recorded as ~t
                } else {
                    None
                }
            }
        }
        let spec = spec3(0.002, 50.0);
        let domain = Domain::full_space(3).unwrap();
        let radius = 1.0f64;
        let n = 4000;
        let mut acc = crate::stats::Welford::new();
        for k in 0..n {
            let mut rng = substream(31, &[ns::PATHS, k]);
            let mut obs = BallExit { radius };
            let params = WalkParams {
                spec: &spec,
                domain: &domain,
                mode: ObstacleMode::None,
                horizon: spec.t_max,
                probe_time: None,
            };
            let res = walk(&params, [0.0; 3], 0.0, &mut rng, &mut obs);
            match res.end {
                WalkEnd::ClockFired { time } => acc.push(time),
                _ => panic!("path failed to exit the ball"),
            }
        }
        let want = radius * radius / 6.0;
        let est = acc.estimate();
        assert!(
            (est.value - want).abs() < 3.0 * est.stderr + 0.01,
            "mean exit {} +- {} vs {}",
            est.value,
            est.stderr,
            want
        );
    }

    /// Annulus oracle: started at |x| = 0.5 between a ball of radius 0.1 and
    /// an absorbing sphere of radius 10, the hit probability is
    /// `(1/0.5 - 1/10) / (1/0.1 - 1/10)`. Halving dt must not move the
    /// estimate by more than two binomial standard errors.
    #[test]
    fn annulus_hitting_probability_and_dt_halving() {
        let domain = Domain::full_space(3).unwrap();
        let set = ObstacleSet::new(
            3,
            vec![Ball {
                center: [0.0; 3],
                radius: 0.1,
            }],
        )
        .unwrap();
        let exact = (1.0 / 0.5 - 1.0 / 10.0) / (1.0 / 0.1 - 1.0 / 10.0);

        let run = |dt: f64, n: u64, seed: u64| -> (f64, f64) {
            struct SphereExit;
            impl StepObserver for SphereExit {
                fn dt_hint(&self, x: &Point) -> f64 {
                    let d = (10.0 - geom::norm(x)).abs();
                    ((0.5 * d) * (0.5 * d) / 6.0).max(1e-5)
                }
                fn observe(&mut self, t: f64, x: &Point, _dt: f64, _d: Option<f64>) -> Option<f64> {
                    (geom::norm(x) >= 10.0).then_some(t + 1e-300)
                }
            }
            let spec = DiffusionSpec::new(3, dt, 1e9, 0.5).unwrap();
            let mut hits = 0u64;
            for k in 0..n {
                let mut rng = substream(seed, &[ns::PATHS, k]);
                let mut obs = SphereExit;
                let params = WalkParams {
                    spec: &spec,
                    domain: &domain,
                    mode: ObstacleMode::DiscreteAbsorb(&set),
                    horizon: spec.t_max,
                    probe_time: None,
                };
                let res = walk(&params, [0.5, 0.0, 0.0], 0.0, &mut rng, &mut obs);
                if matches!(res.end, WalkEnd::HitObstacle { .. }) {
                    hits += 1;
                }
            }
            let p = hits as f64 / n as f64;
            (p, crate::stats::proportion_stderr(p, n))
        };

        let n = 20_000;
        let (p1, s1) = run(0.01, n, 41);
        let (p2, s2) = run(0.005, n, 43);
        assert!(
            (p1 - exact).abs() < 3.0 * s1 + 0.01,
            "dt=0.01: {p1} vs {exact}"
        );
        assert!(
            (p2 - exact).abs() < 3.0 * s2 + 0.01,
            "dt=0.005: {p2} vs {exact}"
        );
        let sigma = (s1 * s1 + s2 * s2).sqrt();
        assert!(
            (p1 - p2).abs() < 2.0 * sigma + 0.005,
            "halving dt moved the estimate too far: {p1} vs {p2} (sigma {sigma})"
        );
    }

    /// The hazard engine must reproduce the exact finite-time first-passage
    /// law of a single ball, `P(D <= T) = (r/d) erfc((d-r)/(2 sqrt(T)))`,
    /// including for targets far smaller than any feasible step, where
    /// discrete endpoint detection loses a large fraction of the hits.
    #[test]
    fn hazard_engine_matches_first_passage_law() {
        let domain = Domain::full_space(3).unwrap();
        let run = |r: f64, d0: f64, t: f64, n: u64, dt: f64, seed: u64| -> (f64, f64) {
            let set = ObstacleSet::new(
                3,
                vec![Ball {
                    center: [0.0; 3],
                    radius: r,
                }],
            )
            .unwrap();
            let index = HazardIndex::build(&set, dt);
            let spec = DiffusionSpec::new(3, dt, t, 0.6).unwrap();
            let mut hits = 0u64;
            for k in 0..n {
                let mut rng = substream(seed, &[ns::PATHS, k]);
                let params = WalkParams {
                    spec: &spec,
                    domain: &domain,
                    mode: ObstacleMode::HazardAbsorb {
                        set: &set,
                        index: &index,
                    },
                    horizon: t,
                    probe_time: None,
                };
                let res = walk(&params, [d0, 0.0, 0.0], 0.0, &mut rng, &mut NoObserver);
                if matches!(res.end, WalkEnd::HitObstacle { .. }) {
                    hits += 1;
                }
            }
            let p = hits as f64 / n as f64;
            (p, crate::stats::proportion_stderr(p, n))
        };
        let exact = |r: f64, d0: f64, t: f64| {
            (r / d0) * statrs::function::erf::erfc((d0 - r) / (2.0 * t.sqrt()))
        };

        // Moderate ball.
        let (p, s) = run(0.1, 0.5, 6.0, 20_000, 0.01, 3);
        let want = exact(0.1, 0.5, 6.0);
        assert!((p - want).abs() < 3.0 * s + 0.004, "moderate: {p} vs {want}");

        // Tiny ball: radius far below the step scale.
        let (p, s) = run(1e-4, 0.05, 1.0, 300_000, 0.01, 4);
        let want = exact(1e-4, 0.05, 1.0);
        assert!(
            (p - want).abs() < 3.0 * s + 2e-4,
            "tiny: {p} +- {s} vs {want}"
        );

        // Halving dt must not move the moderate estimate beyond noise.
        let (p1, s1) = run(0.1, 0.5, 6.0, 20_000, 0.01, 5);
        let (p2, s2) = run(0.1, 0.5, 6.0, 20_000, 0.005, 6);
        let sig = (s1 * s1 + s2 * s2).sqrt();
        assert!((p1 - p2).abs() < 2.5 * sig + 0.004, "{p1} vs {p2}");
    }

    /// Hit times from the hazard engine follow the first-passage CDF in t,
    /// not just its endpoint value.
    #[test]
    fn hazard_engine_hit_time_law() {
        let domain = Domain::full_space(3).unwrap();
        let r = 0.05;
        let d0 = 0.3;
        let t_max = 4.0;
        let set = ObstacleSet::new(
            3,
            vec![Ball {
                center: [0.0; 3],
                radius: r,
            }],
        )
        .unwrap();
        let index = HazardIndex::build(&set, 0.01);
        let spec = DiffusionSpec::new(3, 0.01, t_max, 0.6).unwrap();
        let n = 40_000u64;
        let mut times = Vec::new();
        for k in 0..n {
            let mut rng = substream(9, &[ns::PATHS, k]);
            let params = WalkParams {
                spec: &spec,
                domain: &domain,
                mode: ObstacleMode::HazardAbsorb {
                    set: &set,
                    index: &index,
                },
                horizon: t_max,
                probe_time: None,
            };
            let res = walk(&params, [d0, 0.0, 0.0], 0.0, &mut rng, &mut NoObserver);
            if let WalkEnd::HitObstacle { time } = res.end {
                times.push(time);
            }
        }
        // Conditional CDF of the hit time given a hit by t_max.
        let total = (r / d0) * statrs::function::erf::erfc((d0 - r) / (2.0 * t_max.sqrt()));
        times.sort_by(|a, b| a.total_cmp(b));
        let mut max_gap = 0.0f64;
        for (i, &t) in times.iter().enumerate() {
            let emp = (i + 1) as f64 / times.len() as f64;
            let model =
                (r / d0) * statrs::function::erf::erfc((d0 - r) / (2.0 * t.sqrt())) / total;
            max_gap = max_gap.max((emp - model).abs());
        }
        let noise = 1.36 / (times.len() as f64).sqrt();
        assert!(max_gap < noise + 0.02, "KS vs first-passage law {max_gap}");
    }
}
