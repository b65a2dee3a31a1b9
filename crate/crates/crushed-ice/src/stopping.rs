//! Randomized stopping times and their statistics.
//!
//! A randomized stopping time with survival process `S_t = exp(-A_t)` is
//! sampled by drawing a unit-exponential threshold `e` and stopping the path
//! at the first `t` with `A_t >= e`; the equivalent inversion draws
//! `r ~ U(0,1)` and stops when `exp(-A_t) <= 1 - r`. Ensembles pair each
//! stopped time with bounded functionals of the path at a fixed probe time,
//! which is exactly what the truncated stable-convergence metric consumes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::ball_capacity_alpha_d3;
use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::geom::{self, Point};
use crate::hazard::HazardIndex;
use crate::model::{Domain, ObstacleSet};
use crate::paths::{
    walk, DiffusionSpec, NoObserver, ObstacleMode, StartLaw, StepObserver, WalkEnd, WalkParams,
};
use crate::rng::{ns, substream};
use crate::stats::{proportion_stderr, Estimate, Welford};

/// Terminal event of one stopped path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopKind {
    /// Entered the hard obstacle set.
    HitObstacle,
    /// An exponential clock fired.
    Killed,
    /// Left the domain first.
    ExitDomain,
    /// Reached the horizon unstopped.
    Horizon,
}

impl StopKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopKind::HitObstacle => "hit-obstacle",
            StopKind::Killed => "killed",
            StopKind::ExitDomain => "exit-domain",
            StopKind::Horizon => "horizon",
        }
    }
}

/// One ensemble entry: the stopped time clamped at the horizon, paired with
/// the suite's path functionals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClockSample {
    pub event: StopKind,
    /// `tau` clamped at the horizon.
    pub time: f64,
    pub h_values: Vec<f64>,
}

/// Rate measure: a nonnegative bounded density plus an identifier.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RateMeasure {
    pub id: String,
    pub density: ScalarField,
}

impl RateMeasure {
    pub fn new(id: impl Into<String>, density: ScalarField) -> Result<Self> {
        if density.global_min() < 0.0 {
            return Err(Error::invalid("rate density must be nonnegative"));
        }
        Ok(Self {
            id: id.into(),
            density,
        })
    }
}

/// Exponential clock accumulating `A_t = int h(X_s) ds`; fires at `A_t = e`.
struct RateClock<'a> {
    h: &'a ScalarField,
    threshold: f64,
    a: f64,
    dim: usize,
    shrink: f64,
    hint_floor: f64,
    discontinuous: bool,
}

impl<'a> RateClock<'a> {
    fn new(spec: &DiffusionSpec, h: &'a ScalarField, threshold: f64) -> Self {
        Self {
            h,
            threshold,
            a: 0.0,
            dim: spec.dim,
            shrink: spec.shrink,
            hint_floor: spec.dt / 64.0,
            discontinuous: h
                .discontinuity_distance(&geom::zero(), spec.dim)
                .is_finite(),
        }
    }
}

impl StepObserver for RateClock<'_> {
    fn dt_hint(&self, x: &Point) -> f64 {
        if !self.discontinuous {
            return f64::INFINITY;
        }
        let d = self.h.discontinuity_distance(x, self.dim);
        if d.is_infinite() {
            return f64::INFINITY;
        }
        let s = self.shrink * d;
        (s * s / (2.0 * self.dim as f64)).max(self.hint_floor)
    }

    #[inline]
    fn observe(&mut self, t: f64, x: &Point, dt: f64, _d: Option<f64>) -> Option<f64> {
        let rate = self.h.eval(x);
        if rate <= 0.0 {
            return None;
        }
        let next = self.a + rate * dt;
        if next >= self.threshold {
            let t_star = t + (self.threshold - self.a) / rate;
            self.a = self.threshold;
            return Some(t_star);
        }
        self.a = next;
        None
    }
}

/// How a stopping-time ensemble is generated.
#[derive(Debug, Clone, Copy)]
pub enum StopRule<'a> {
    /// Entrance time of the obstacle set (first-passage hazard engine in
    /// d = 3, discrete detection in d = 2).
    HardObstacle(&'a ObstacleSet),
    /// Exponential clock with rate density `h` (threshold `e ~ Exp(1)`).
    RateClock(&'a ScalarField),
    /// Same law through the survival-process inversion `r ~ U(0,1)`,
    /// `e = -ln(1-r)`.
    RateClockInverse(&'a ScalarField),
    /// Clock on the occupation time of the set at the given height
    /// (the soft potential `c * 1_Lambda`, d = 3).
    OccupationClock { set: &'a ObstacleSet, height: f64 },
}

/// A stop rule with its acceleration structures built.
pub enum PreparedRule<'a> {
    HardDiscrete(&'a ObstacleSet),
    Hard {
        set: &'a ObstacleSet,
        index: HazardIndex,
    },
    Clock {
        h: &'a ScalarField,
        inverse: bool,
    },
    Occupation {
        set: &'a ObstacleSet,
        index: HazardIndex,
        height: f64,
    },
}

/// Build the per-ensemble structures for a stop rule (one hazard index is
/// shared across all paths of an ensemble).
pub fn prepare_rule<'a>(rule: StopRule<'a>, spec: &DiffusionSpec) -> Result<PreparedRule<'a>> {
    match rule {
        StopRule::HardObstacle(set) => {
            if spec.dim == 3 {
                Ok(PreparedRule::Hard {
                    set,
                    index: HazardIndex::build(set, spec.dt),
                })
            } else {
                Ok(PreparedRule::HardDiscrete(set))
            }
        }
        StopRule::RateClock(h) => Ok(PreparedRule::Clock { h, inverse: false }),
        StopRule::RateClockInverse(h) => Ok(PreparedRule::Clock { h, inverse: true }),
        StopRule::OccupationClock { set, height } => {
            if spec.dim != 3 {
                return Err(Error::invalid(
                    "the soft occupation clock needs d = 3 (first-passage entries)",
                ));
            }
            if !(height >= 0.0) {
                return Err(Error::invalid("occupation height must be nonnegative"));
            }
            Ok(PreparedRule::Occupation {
                set,
                index: HazardIndex::build(set, spec.dt),
                height,
            })
        }
    }
}

/// Draw one stopped time `tau ^ t_max` starting from `x0`. Builds the rule's
/// structures on every call; batch work should go through [`sample_ensemble`].
pub fn sample_stopped_time(
    spec: &DiffusionSpec,
    domain: &Domain,
    rule: StopRule<'_>,
    x0: &Point,
    rng: &mut ChaCha8Rng,
) -> (StopKind, f64) {
    let prepared = prepare_rule(rule, spec).expect("stop rule preparation failed");
    let (end, _) = run_stop_walk(spec, domain, &prepared, *x0, rng, None);
    classify(end, spec.t_max)
}

/// Exponential-clock sampling of the killed time for a rate measure; the
/// survival process is `exp(-A_t)` with `A_t = int h(X_s) ds`. Returns the
/// horizon marker when `A` never reaches the threshold.
pub fn sample_killed_time(
    spec: &DiffusionSpec,
    domain: &Domain,
    h: &RateMeasure,
    x0: &Point,
    rng: &mut ChaCha8Rng,
) -> (StopKind, f64) {
    sample_stopped_time(spec, domain, StopRule::RateClock(&h.density), x0, rng)
}

fn classify(end: WalkEnd, t_max: f64) -> (StopKind, f64) {
    match end {
        WalkEnd::HitObstacle { time } => (StopKind::HitObstacle, time.min(t_max)),
        WalkEnd::ClockFired { time } => (StopKind::Killed, time.min(t_max)),
        WalkEnd::ExitDomain { time } => (StopKind::ExitDomain, time.min(t_max)),
        WalkEnd::Horizon => (StopKind::Horizon, t_max),
    }
}

fn run_stop_walk(
    spec: &DiffusionSpec,
    domain: &Domain,
    rule: &PreparedRule<'_>,
    x0: Point,
    rng: &mut ChaCha8Rng,
    probe_time: Option<f64>,
) -> (WalkEnd, Option<Point>) {
    let res = match rule {
        PreparedRule::HardDiscrete(set) => {
            let params = WalkParams {
                spec,
                domain,
                mode: ObstacleMode::DiscreteAbsorb(set),
                horizon: spec.t_max,
                probe_time,
            };
            walk(&params, x0, 0.0, rng, &mut NoObserver)
        }
        PreparedRule::Hard { set, index } => {
            let params = WalkParams {
                spec,
                domain,
                mode: ObstacleMode::HazardAbsorb { set, index },
                horizon: spec.t_max,
                probe_time,
            };
            walk(&params, x0, 0.0, rng, &mut NoObserver)
        }
        PreparedRule::Clock { h, inverse } => {
            let e: f64 = if *inverse {
                let r: f64 = rng.random_range(0.0..1.0);
                -(1.0 - r).ln()
            } else {
                rng.sample(rand_distr::Exp1)
            };
            let mut clock = RateClock::new(spec, h, e);
            let params = WalkParams {
                spec,
                domain,
                mode: ObstacleMode::None,
                horizon: spec.t_max,
                probe_time,
            };
            walk(&params, x0, 0.0, rng, &mut clock)
        }
        PreparedRule::Occupation { set, index, height } => {
            let e: f64 = rng.sample(rand_distr::Exp1);
            let params = WalkParams {
                spec,
                domain,
                mode: ObstacleMode::HazardOccupation {
                    set,
                    index,
                    height: *height,
                    threshold: e,
                },
                horizon: spec.t_max,
                probe_time,
            };
            walk(&params, x0, 0.0, rng, &mut NoObserver)
        }
    };
    finish_probe(spec, domain, res, rng, probe_time)
}

/// The stopping rule does not kill the underlying diffusion, so when a path
/// stops before the probe time the walk continues freely to record the probe.
fn finish_probe(
    spec: &DiffusionSpec,
    domain: &Domain,
    res: crate::paths::WalkResult,
    rng: &mut ChaCha8Rng,
    probe_time: Option<f64>,
) -> (WalkEnd, Option<Point>) {
    let end = res.end;
    match probe_time {
        None => (end, None),
        Some(pt) => {
            if res.probe.is_some() {
                return (end, res.probe);
            }
            if res.final_time >= pt || matches!(end, WalkEnd::ExitDomain { .. }) {
                // Past the probe already, or dead at the domain boundary.
                return (end, res.probe);
            }
            let params = WalkParams {
                spec,
                domain,
                mode: ObstacleMode::None,
                horizon: pt,
                probe_time: Some(pt),
            };
            let cont = walk(&params, res.terminal, res.final_time, rng, &mut NoObserver);
            (end, cont.probe)
        }
    }
}

/// Bounded test functions on `[0, inf]` for the stable metric.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeFn {
    /// `t -> exp(-lambda t)`.
    ExpDecay { lambda: f64 },
    /// Continuous ramp from 1 to 0 over `[cutoff, cutoff + width]`.
    SmoothStep { cutoff: f64, width: f64 },
}

impl TimeFn {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFn::ExpDecay { lambda } => (-lambda * t).exp(),
            TimeFn::SmoothStep { cutoff, width } => ((cutoff + width - t) / width).clamp(0.0, 1.0),
        }
    }

    pub fn sup(&self) -> f64 {
        1.0
    }
}

/// Bounded path functionals measured at the probe time.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HFunctional {
    /// Constant 1 (the whole space).
    One,
    /// Indicator that the probe position lies in the box; 0 if the path died
    /// before the probe time.
    InBox { lower: Vec<f64>, upper: Vec<f64> },
}

impl HFunctional {
    pub fn eval(&self, probe: Option<&Point>) -> f64 {
        match self {
            HFunctional::One => 1.0,
            HFunctional::InBox { lower, upper } => match probe {
                None => 0.0,
                Some(p) => {
                    let inside = lower
                        .iter()
                        .zip(upper.iter())
                        .enumerate()
                        .all(|(i, (lo, hi))| p[i] >= *lo && p[i] <= *hi);
                    if inside {
                        1.0
                    } else {
                        0.0
                    }
                }
            },
        }
    }
}

/// Test suite defining the truncated metric for stable convergence.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StableTestSuite {
    pub time_functions: Vec<TimeFn>,
    pub h_functionals: Vec<HFunctional>,
    /// Time at which the conditioning functionals observe the path.
    pub probe_time: f64,
}

/// Terms per index in the weighted double sum; the discarded tail is below
/// `2^-8` of the metric by the dyadic weights.
pub const SUITE_TRUNCATION: usize = 8;

impl StableTestSuite {
    /// Default suite: exponentials at rates 1/2, 1, 2 plus smoothed step
    /// indicators, and dyadic coordinate boxes of the given base box observed
    /// at `t0 = 0.25`.
    pub fn default_for_box(lower: &[f64], upper: &[f64]) -> Self {
        let dim = lower.len();
        let time_functions = vec![
            TimeFn::ExpDecay { lambda: 0.5 },
            TimeFn::ExpDecay { lambda: 1.0 },
            TimeFn::ExpDecay { lambda: 2.0 },
            TimeFn::SmoothStep {
                cutoff: 0.5,
                width: 0.25,
            },
            TimeFn::SmoothStep {
                cutoff: 1.0,
                width: 0.25,
            },
            TimeFn::SmoothStep {
                cutoff: 2.0,
                width: 0.25,
            },
        ];
        let mut h_functionals = vec![
            HFunctional::One,
            HFunctional::InBox {
                lower: lower.to_vec(),
                upper: upper.to_vec(),
            },
        ];
        for axis in 0..dim {
            let mut hi = upper.to_vec();
            hi[axis] = 0.5 * (lower[axis] + upper[axis]);
            h_functionals.push(HFunctional::InBox {
                lower: lower.to_vec(),
                upper: hi,
            });
        }
        for axis in 0..dim {
            if h_functionals.len() >= SUITE_TRUNCATION {
                break;
            }
            let mut hi = upper.to_vec();
            hi[axis] = lower[axis] + 0.25 * (upper[axis] - lower[axis]);
            h_functionals.push(HFunctional::InBox {
                lower: lower.to_vec(),
                upper: hi,
            });
        }
        Self {
            time_functions,
            h_functionals,
            probe_time: 0.25,
        }
    }

    pub fn h_values(&self, probe: Option<&Point>) -> Vec<f64> {
        self.h_functionals.iter().map(|h| h.eval(probe)).collect()
    }
}

/// Draw an ensemble of stopped times paired with suite functionals; path `k`
/// uses the stream `(seed, [CLOCK, salt, k])`, so the result is independent
/// of worker count.
#[allow(clippy::too_many_arguments)]
pub fn sample_ensemble(
    spec: &DiffusionSpec,
    domain: &Domain,
    rule: StopRule<'_>,
    start: &StartLaw,
    suite: &StableTestSuite,
    n_paths: usize,
    seed: u64,
    salt: u64,
) -> Result<Vec<ClockSample>> {
    if n_paths == 0 {
        return Err(Error::invalid("ensemble needs at least one path"));
    }
    let prepared = prepare_rule(rule, spec)?;
    Ok((0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, &[ns::CLOCK, salt, k as u64]);
            let x0 = start.sample(&mut rng);
            let (end, probe) = run_stop_walk(
                spec,
                domain,
                &prepared,
                x0,
                &mut rng,
                Some(suite.probe_time),
            );
            let (event, time) = classify(end, spec.t_max);
            ClockSample {
                event,
                time,
                h_values: suite.h_values(probe.as_ref()),
            }
        })
        .collect())
}

/// Right-continuous empirical distribution of stopped times.
#[derive(Debug, Clone)]
pub struct EmpiricalLaw {
    sorted: Vec<f64>,
}

impl EmpiricalLaw {
    pub fn cdf(&self, t: f64) -> f64 {
        let idx = self.sorted.partition_point(|&s| s <= t);
        idx as f64 / self.sorted.len() as f64
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let idx = ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.sorted[idx]
    }

    pub fn sorted_times(&self) -> &[f64] {
        &self.sorted
    }

    /// `E[exp(-lambda (tau ^ T))]` with its standard error.
    pub fn laplace_functional(&self, lambda: f64) -> Estimate {
        let mut acc = Welford::new();
        for &t in &self.sorted {
            acc.push((-lambda * t).exp());
        }
        acc.estimate()
    }
}

/// Empirical CDF and summary functionals of an ensemble of stopped times.
pub fn empirical_law(samples: &[f64]) -> Result<EmpiricalLaw> {
    if samples.is_empty() {
        return Err(Error::invalid("empirical law needs at least one sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(EmpiricalLaw { sorted })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov tail `Q(lambda) = 2 sum (-1)^{j-1} exp(-2 j^2 lambda^2)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test on stopped-time samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("KS test needs nonempty samples"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (na, nb) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut stat = 0.0f64;
    while i < na && j < nb {
        let t = xs[i].min(ys[j]);
        while i < na && xs[i] <= t {
            i += 1;
        }
        while j < nb && ys[j] <= t {
            j += 1;
        }
        let diff = (i as f64 / na as f64 - j as f64 / nb as f64).abs();
        if diff > stat {
            stat = diff;
        }
    }
    let ne = (na as f64 * nb as f64) / (na + nb) as f64;
    let sqrt_ne = ne.sqrt();
    let p_value = kolmogorov_tail((sqrt_ne + 0.12 + 0.11 / sqrt_ne) * stat);
    Ok(KsResult {
        statistic: stat,
        p_value,
    })
}

/// One-sample Kolmogorov–Smirnov statistic against an analytic CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::invalid("KS test needs nonempty samples"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    let n = xs.len() as f64;
    let mut stat = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        stat = stat
            .max(((i + 1) as f64 / n - f).abs())
            .max((f - i as f64 / n).abs());
    }
    let sqrt_n = n.sqrt();
    let p_value = kolmogorov_tail((sqrt_n + 0.12 + 0.11 / sqrt_n) * stat);
    Ok(KsResult {
        statistic: stat,
        p_value,
    })
}

/// Monte Carlo estimate of the truncated metric for stable convergence
/// between two ensembles:
/// `rho = sum_{i,j} 2^{-(i+j)} |mean_A[H_j f_i(tau)] - mean_B[H_j f_i(tau)]| / sup f_i`.
///
/// The reported standard error propagates the per-term sampling variances to
/// first order, treating terms as independent.
pub fn stable_metric_estimate(
    ensemble_a: &[ClockSample],
    ensemble_b: &[ClockSample],
    suite: &StableTestSuite,
) -> Result<Estimate> {
    if ensemble_a.is_empty() || ensemble_b.is_empty() {
        return Err(Error::invalid("stable metric needs nonempty ensembles"));
    }
    let nh = suite.h_functionals.len().min(SUITE_TRUNCATION);
    for s in ensemble_a.iter().chain(ensemble_b.iter()) {
        if s.h_values.len() < nh {
            return Err(Error::DimensionMismatch {
                expected: nh,
                got: s.h_values.len(),
            });
        }
    }
    let nf = suite.time_functions.len().min(SUITE_TRUNCATION);
    let mut rho = 0.0;
    let mut var = 0.0;
    for (i, f) in suite.time_functions.iter().take(nf).enumerate() {
        for j in 0..nh {
            let mut wa = Welford::new();
            for s in ensemble_a {
                wa.push(s.h_values[j] * f.eval(s.time));
            }
            let mut wb = Welford::new();
            for s in ensemble_b {
                wb.push(s.h_values[j] * f.eval(s.time));
            }
            let weight = 0.5f64.powi((i + j + 2) as i32) / f.sup();
            rho += weight * (wa.mean() - wb.mean()).abs();
            let se2 = wa.stderr().powi(2) + wb.stderr().powi(2);
            var += weight * weight * se2;
        }
    }
    Ok(Estimate::new(rho, var.sqrt()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HittingBoundReport {
    /// Monte Carlo estimate of `P_pi(D_W <= b)`.
    pub lhs: Estimate,
    /// `e^{alpha b} (sup density / alpha) * sum_i Cap_alpha(ball_i)`.
    pub rhs: f64,
    pub satisfied: bool,
    pub n_paths: usize,
}

/// Check the capacity bound on hitting probabilities,
/// `P_pi(D_W <= b) <= e^{alpha b} ||G_alpha pi||_sup Cap_alpha(W)`,
/// using `||G_alpha pi||_sup <= sup-density / alpha` (the kernel integrates
/// to `1/alpha`) and subadditivity of the alpha-capacity over the balls.
#[allow(clippy::too_many_arguments)]
pub fn hitting_bound_check(
    spec: &DiffusionSpec,
    start: &StartLaw,
    set: &ObstacleSet,
    b: f64,
    alpha: f64,
    n_paths: usize,
    seed: u64,
    salt: u64,
) -> Result<HittingBoundReport> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("hitting bound needs alpha > 0"));
    }
    if spec.dim != 3 {
        return Err(Error::invalid(
            "hitting bound uses the d = 3 closed-form ball capacities",
        ));
    }
    let sup_density = start
        .sup_density()
        .ok_or_else(|| Error::invalid("start law must have a bounded density"))?;

    let mut cap_sum = 0.0;
    for ball in set.balls() {
        cap_sum += ball_capacity_alpha_d3(ball.radius, alpha)?;
    }
    let rhs = (alpha * b).exp() * (sup_density / alpha) * cap_sum;

    if set.is_empty() {
        return Ok(HittingBoundReport {
            lhs: Estimate::exact(0.0),
            rhs,
            satisfied: true,
            n_paths,
        });
    }

    let domain = Domain::full_space(spec.dim)?;
    let horizon_spec = DiffusionSpec { t_max: b, ..*spec };
    let prepared = prepare_rule(StopRule::HardObstacle(set), &horizon_spec)?;
    let hits: u64 = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, &[ns::CLOCK, salt, k as u64]);
            let x0 = start.sample(&mut rng);
            let (end, _) = run_stop_walk(&horizon_spec, &domain, &prepared, x0, &mut rng, None);
            let (kind, _) = classify(end, horizon_spec.t_max);
            (kind == StopKind::HitObstacle) as u64
        })
        .sum();
    let p = hits as f64 / n_paths as f64;
    let lhs = Estimate::new(p, proportion_stderr(p, n_paths as u64));
    Ok(HittingBoundReport {
        satisfied: lhs.value <= rhs + 3.0 * lhs.stderr,
        lhs,
        rhs,
        n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec3(dt: f64, t_max: f64) -> DiffusionSpec {
        DiffusionSpec::new(3, dt, t_max, 0.5).unwrap()
    }

    fn exp_cdf(c: f64) -> impl Fn(f64) -> f64 {
        move |t| 1.0 - (-c * t).exp()
    }

    #[test]
    fn zero_rate_never_kills() {
        let spec = spec3(0.01, 2.0);
        let domain = Domain::full_space(3).unwrap();
        let h = RateMeasure::new("zero", ScalarField::zero()).unwrap();
        let mut rng = substream(1, &[1]);
        for _ in 0..20 {
            let (kind, t) = sample_killed_time(&spec, &domain, &h, &[0.0; 3], &mut rng);
            assert_eq!(kind, StopKind::Horizon);
            assert_eq!(t, 2.0);
        }
    }

    #[test]
    fn constant_rate_clock_is_exactly_exponential() {
        // With h = c the accumulated A_t is exactly c t, and the fractional
        // inversion makes the sampled law exactly Exp(c) up to the horizon.
        let spec = spec3(0.01, 200.0);
        let domain = Domain::full_space(3).unwrap();
        let c = 2.0;
        let h = RateMeasure::new("const", ScalarField::constant(c)).unwrap();
        let mut rng = substream(2, &[7]);
        let n = 20_000;
        let mut times = Vec::with_capacity(n);
        for _ in 0..n {
            let (kind, t) = sample_killed_time(&spec, &domain, &h, &[0.0; 3], &mut rng);
            assert_eq!(kind, StopKind::Killed);
            times.push(t);
        }
        let ks = ks_one_sample(&times, exp_cdf(c)).unwrap();
        assert!(ks.statistic < 0.012, "KS = {}", ks.statistic);
        let mean = times.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0 / c).abs() < 3.0 * (1.0 / c) / (n as f64).sqrt());
    }

    #[test]
    fn inversion_variant_agrees_in_law() {
        let spec = spec3(0.01, 100.0);
        let domain = Domain::full_space(3).unwrap();
        let h = ScalarField::constant(1.0);
        let start = StartLaw::Point {
            point: vec![0.0; 3],
        };
        let suite = StableTestSuite::default_for_box(&[0.0; 3], &[1.0; 3]);
        let a = sample_ensemble(
            &spec,
            &domain,
            StopRule::RateClock(&h),
            &start,
            &suite,
            20_000,
            3,
            0,
        )
        .unwrap();
        let b = sample_ensemble(
            &spec,
            &domain,
            StopRule::RateClockInverse(&h),
            &start,
            &suite,
            20_000,
            3,
            1,
        )
        .unwrap();
        let ta: Vec<f64> = a.iter().map(|s| s.time).collect();
        let tb: Vec<f64> = b.iter().map(|s| s.time).collect();
        let ks = ks_two_sample(&ta, &tb).unwrap();
        assert!(ks.statistic < 0.015, "KS = {}", ks.statistic);
    }

    #[test]
    fn indicator_rate_kill_probability_is_nontrivial() {
        // h = c 1_cube from the cube center in d = 3: transience keeps
        // P(tau < inf) strictly inside (0, 1).
        let spec = spec3(0.005, 30.0);
        let domain = Domain::full_space(3).unwrap();
        let h = ScalarField::box_indicator(&[0.0; 3], &[1.0; 3], 2.0);
        let start = StartLaw::Point {
            point: vec![0.5; 3],
        };
        let suite = StableTestSuite::default_for_box(&[0.0; 3], &[1.0; 3]);
        let samples = sample_ensemble(
            &spec,
            &domain,
            StopRule::RateClock(&h),
            &start,
            &suite,
            4000,
            11,
            0,
        )
        .unwrap();
        let killed = samples
            .iter()
            .filter(|s| s.event == StopKind::Killed)
            .count();
        let frac = killed as f64 / samples.len() as f64;
        assert!(frac > 0.2 && frac < 0.95, "killed fraction {frac}");
    }

    #[test]
    fn empirical_law_edge_cases() {
        assert!(empirical_law(&[]).is_err());
        let law = empirical_law(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(law.cdf(0.0), 1.0);
        assert_eq!(law.laplace_functional(3.0).value, 1.0);

        let t = 4.0;
        let law = empirical_law(&[t, t]).unwrap();
        let lf = law.laplace_functional(0.5);
        assert!((lf.value - (-0.5 * t).exp()).abs() < 1e-15);

        // Exp(1) samples: E[e^-tau] = 1/2.
        let mut rng = substream(3, &[4]);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| rng.sample::<f64, _>(rand_distr::Exp1))
            .collect();
        let law = empirical_law(&xs).unwrap();
        let lf = law.laplace_functional(1.0);
        assert!((lf.value - 0.5).abs() < 3.0 * lf.stderr);
    }

    #[test]
    fn ks_statistic_basics() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a).unwrap().statistic, 0.0);
        assert!(ks_two_sample(&a, &[]).is_err());

        // Exp(1) vs Exp(2): analytic CDF gap sup |e^-t - e^-2t| = 1/4 at ln 2.
        let mut rng = substream(9, &[1]);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| rng.sample::<f64, _>(rand_distr::Exp1))
            .collect();
        let ys: Vec<f64> = (0..10_000)
            .map(|_| rng.sample::<f64, _>(rand_distr::Exp1) / 2.0)
            .collect();
        let ks = ks_two_sample(&xs, &ys).unwrap();
        assert!(ks.statistic > 0.15, "KS = {}", ks.statistic);
        assert!(ks.p_value < 1e-6);
    }

    #[test]
    fn ks_null_p_values_are_calibrated() {
        // Same law twice: the p-value should exceed 0.01 in at least 95 of
        // 100 repetitions.
        let mut ok = 0;
        let reps = 100;
        for rep in 0..reps {
            let mut rng = substream(100 + rep, &[2]);
            let xs: Vec<f64> = (0..10_000)
                .map(|_| rng.sample::<f64, _>(rand_distr::Exp1))
                .collect();
            let ys: Vec<f64> = (0..10_000)
                .map(|_| rng.sample::<f64, _>(rand_distr::Exp1))
                .collect();
            if ks_two_sample(&xs, &ys).unwrap().p_value > 0.01 {
                ok += 1;
            }
        }
        assert!(ok >= 95, "only {ok}/{reps} null runs passed at level 0.01");
    }

    fn fixed_sample(time: f64, h: f64) -> ClockSample {
        ClockSample {
            event: StopKind::Killed,
            time,
            h_values: vec![h],
        }
    }

    #[test]
    fn stable_metric_identical_ensembles_is_zero() {
        let suite = StableTestSuite {
            time_functions: vec![TimeFn::ExpDecay { lambda: 1.0 }],
            h_functionals: vec![HFunctional::One],
            probe_time: 0.25,
        };
        let e: Vec<ClockSample> = (0..50).map(|i| fixed_sample(i as f64 * 0.1, 1.0)).collect();
        let rho = stable_metric_estimate(&e, &e, &suite).unwrap();
        assert_eq!(rho.value, 0.0);
    }

    #[test]
    fn stable_metric_two_deterministic_ensembles() {
        // tau = 0 vs tau = T with a single f(t) = e^-t and H = 1:
        // rho = 2^-(1+1) (1 - e^-T).
        let t_max = 4.0;
        let suite = StableTestSuite {
            time_functions: vec![TimeFn::ExpDecay { lambda: 1.0 }],
            h_functionals: vec![HFunctional::One],
            probe_time: 0.25,
        };
        let a: Vec<ClockSample> = (0..100).map(|_| fixed_sample(0.0, 1.0)).collect();
        let b: Vec<ClockSample> = (0..100).map(|_| fixed_sample(t_max, 1.0)).collect();
        let rho = stable_metric_estimate(&a, &b, &suite).unwrap();
        let want = 0.25 * (1.0 - (-t_max).exp());
        assert!((rho.value - want).abs() < 1e-12, "{} vs {want}", rho.value);
    }

    #[test]
    fn stable_metric_is_symmetric_and_triangular() {
        let suite = StableTestSuite::default_for_box(&[0.0; 3], &[1.0; 3]);
        let mut rng = substream(8, &[3]);
        let mut mk = |scale: f64| -> Vec<ClockSample> {
            (0..200)
                .map(|_| {
                    let t: f64 = rng.sample::<f64, _>(rand_distr::Exp1) * scale;
                    ClockSample {
                        event: StopKind::Killed,
                        time: t.min(4.0),
                        h_values: vec![1.0; suite.h_functionals.len()],
                    }
                })
                .collect()
        };
        let a = mk(1.0);
        let b = mk(1.5);
        let c = mk(2.0);
        let ab = stable_metric_estimate(&a, &b, &suite).unwrap().value;
        let ba = stable_metric_estimate(&b, &a, &suite).unwrap().value;
        let ac = stable_metric_estimate(&a, &c, &suite).unwrap().value;
        let cb = stable_metric_estimate(&c, &b, &suite).unwrap().value;
        assert_eq!(ab, ba);
        assert!(ac + cb >= ab - 1e-15);
    }

    #[test]
    fn stable_metric_null_concentrates_near_zero() {
        let suite = StableTestSuite {
            time_functions: vec![
                TimeFn::ExpDecay { lambda: 0.5 },
                TimeFn::ExpDecay { lambda: 1.0 },
                TimeFn::ExpDecay { lambda: 2.0 },
            ],
            h_functionals: vec![HFunctional::One],
            probe_time: 0.25,
        };
        let mut rng = substream(12, &[5]);
        let mut mk = |n: usize| -> Vec<ClockSample> {
            (0..n)
                .map(|_| fixed_sample(rng.sample::<f64, _>(rand_distr::Exp1), 1.0))
                .collect()
        };
        let a = mk(100_000);
        let b = mk(100_000);
        let rho = stable_metric_estimate(&a, &b, &suite).unwrap();
        assert!(
            rho.value < 4.0 * rho.stderr,
            "null rho {} vs stderr {}",
            rho.value,
            rho.stderr
        );
    }

    #[test]
    fn stable_metric_rejects_mismatched_h() {
        let suite = StableTestSuite::default_for_box(&[0.0; 3], &[1.0; 3]);
        let a = vec![fixed_sample(1.0, 1.0)];
        let b = vec![fixed_sample(1.0, 1.0)];
        assert!(stable_metric_estimate(&a, &b, &suite).is_err());
    }

    #[test]
    fn hitting_bound_empty_set() {
        let spec = spec3(0.01, 1.0);
        let set = ObstacleSet::empty(3).unwrap();
        let start = StartLaw::UniformBox {
            lower: vec![-1.0; 3],
            upper: vec![1.0; 3],
        };
        let rep = hitting_bound_check(&spec, &start, &set, 1.0, 1.0, 100, 1, 0).unwrap();
        assert_eq!(rep.lhs.value, 0.0);
        assert_eq!(rep.rhs, 0.0);
        assert!(rep.satisfied);
    }

    #[test]
    fn hitting_bound_single_ball() {
        let spec = spec3(0.005, 1.0);
        let set = ObstacleSet::new(
            3,
            vec![crate::model::Ball {
                center: [0.0; 3],
                radius: 0.1,
            }],
        )
        .unwrap();
        let start = StartLaw::UniformBox {
            lower: vec![-1.0; 3],
            upper: vec![1.0; 3],
        };
        let rep = hitting_bound_check(&spec, &start, &set, 1.0, 1.0, 4000, 5, 0).unwrap();
        assert!(rep.lhs.value > 0.0, "expected some hits");
        assert!(rep.satisfied, "lhs {:?} rhs {}", rep.lhs, rep.rhs);
        // the bound should be informative here, not vacuous
        assert!(rep.rhs < 1.0);
    }

    #[test]
    fn alpha_ball_capacity_matches_hitting_transform_oracle() {
        // For the ball B_r the alpha-equilibrium potential is
        // u(rho) = (r/rho) e^{-sqrt(alpha)(rho - r)} = E_x[e^{-alpha D_B}];
        // estimate the right side by Monte Carlo.
        let spec = spec3(0.004, 20.0);
        let domain = Domain::full_space(3).unwrap();
        let set = ObstacleSet::new(
            3,
            vec![crate::model::Ball {
                center: [0.0; 3],
                radius: 0.1,
            }],
        )
        .unwrap();
        let rho = 0.3;
        let alpha = 1.0f64;
        let n = 6000;
        let mut acc = Welford::new();
        for k in 0..n {
            let mut rng = substream(77, &[ns::CLOCK, 9, k]);
            let (kind, t) = sample_stopped_time(
                &spec,
                &domain,
                StopRule::HardObstacle(&set),
                &[rho, 0.0, 0.0],
                &mut rng,
            );
            acc.push(if kind == StopKind::HitObstacle {
                (-alpha * t).exp()
            } else {
                0.0
            });
        }
        let want = (0.1 / rho) * (-(alpha.sqrt()) * (rho - 0.1)).exp();
        let got = acc.estimate();
        assert!(
            (got.value - want).abs() < 3.0 * got.stderr + 0.01,
            "E[e^-aD] = {} +- {} vs {}",
            got.value,
            got.stderr,
            want
        );
    }
}
