//! First-passage machinery for absorbing ball obstacles (d = 3).
//!
//! Discrete endpoint detection loses a scale-invariant fraction of hits on
//! small targets: the walk jumps over the final approach scales, and the
//! deficit grows with the spacing-to-radius ratio. Each step therefore kills
//! stochastically, through one of two exact one-ball channels chosen by the
//! ball's size relative to the step length:
//!
//! * point channel (`r` well below the step length): the forward
//!   first-passage probability for the diffusion with generator `Delta`,
//!   `P_x(D_B <= dt) = (r/D) erfc((D - r)/(2 sqrt(dt)))`, `D = |x - c|`;
//! * bridge channel (`r` at least a few step lengths): endpoint detection
//!   plus the half-space bridge kill `exp(-d_x d_y / dt)` between the signed
//!   surface distances of the step endpoints.
//!
//! Both formulas are exact for a single ball; the union over nearby balls is
//! an independence product, and survivor conditioning is neglected, which is
//! second order once the step stays below the inter-obstacle spacing (point
//! channel) or a third of the radius (bridge channel). Halving the base step
//! is the standard check on what remains.
//!
//! Candidate balls per step come from a dense cell grid whose lists contain
//! every ball reachable within the truncation radius, so one step costs one
//! cell lookup plus a short scan.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

use crate::geom::{self, Point};
use crate::model::ObstacleSet;

/// Truncation multiple: balls with `(D - r) > CUTOFF * sqrt(dt)` are skipped.
const CUTOFF_SIGMAS: f64 = 6.5;
/// Step scale relative to the nearest-neighbor spacing of ball centers.
const STEP_SPACING_FRACTION: f64 = 0.8;
/// A ball is bridge-regime when `r >= BRIDGE_RATIO * sqrt(2 dt)`.
const BRIDGE_RATIO: f64 = 2.9;
/// The local dwell loop hands back to coarse stepping at this multiple of r.
pub const DWELL_ESCAPE_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    center: Point,
    radius: f64,
    /// Squared gate distance `(r + CUTOFF sqrt(dt_step))^2`.
    thresh2: f64,
    bridge: bool,
}

/// A step outcome from the bridge channel.
#[derive(Debug, Clone, Copy)]
pub struct BridgeHit {
    pub center: Point,
    pub radius: f64,
    /// Fraction of the step elapsed at the crossing.
    pub fraction: f64,
    /// Surface point representing the crossing.
    pub entry: Point,
}

#[derive(Debug, Clone)]
pub struct HazardIndex {
    lo: Point,
    cell: f64,
    shape: [usize; 3],
    offsets: Vec<u32>,
    entries: Vec<Candidate>,
    /// Hazard-stepping time step; keeps per-step hazards small.
    dt_step: f64,
    reach: f64,
    has_bridge: bool,
}

impl HazardIndex {
    /// Build the candidate grid for an obstacle set. `dt_cap` is the base
    /// time step of the simulation; the hazard step never exceeds it.
    pub fn build(set: &ObstacleSet, dt_cap: f64) -> Self {
        assert_eq!(set.dim(), 3, "the first-passage hazard engine is 3-d only");
        let balls = set.balls();
        if balls.is_empty() {
            return Self {
                lo: geom::zero(),
                cell: 1.0,
                shape: [1, 1, 1],
                offsets: vec![0, 0],
                entries: Vec::new(),
                dt_step: dt_cap,
                reach: 0.0,
                has_bridge: false,
            };
        }

        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        let mut max_r: f64 = 0.0;
        let mut min_r: f64 = f64::INFINITY;
        for b in balls {
            for i in 0..3 {
                lo[i] = lo[i].min(b.center[i]);
                hi[i] = hi[i].max(b.center[i]);
            }
            max_r = max_r.max(b.radius);
            min_r = min_r.min(b.radius);
        }
        let vol: f64 = (0..3).map(|i| (hi[i] - lo[i]).max(2.0 * max_r)).product();
        let spacing = ((vol / balls.len() as f64).cbrt()).max(2.0 * max_r);
        let sigma_point = STEP_SPACING_FRACTION * spacing;
        let mut dt_step = (sigma_point * sigma_point / 6.0).min(dt_cap);
        if max_r > 0.2 * sigma_point {
            // Large balls present: cap the step so they land in the bridge
            // channel, where the half-space kill is accurate.
            let dt_bridge = (min_r / BRIDGE_RATIO) * (min_r / BRIDGE_RATIO) / 2.0;
            dt_step = dt_step.min(dt_bridge);
        }
        dt_step = dt_step.max(dt_cap * 1e-6);
        let sigma_axis = (2.0 * dt_step).sqrt();
        let reach = CUTOFF_SIGMAS * dt_step.sqrt() + max_r;

        let cell = reach.max(1e-9);
        let mut shape = [1usize; 3];
        let mut grid_lo = geom::zero();
        for i in 0..3 {
            grid_lo[i] = lo[i] - reach - cell;
            let span = hi[i] + reach + cell - grid_lo[i];
            shape[i] = ((span / cell).ceil() as usize + 1).min(256);
        }
        let ncells = shape[0] * shape[1] * shape[2];
        let cell_index = |ix: i64, iy: i64, iz: i64| -> Option<usize> {
            if ix < 0
                || iy < 0
                || iz < 0
                || ix >= shape[0] as i64
                || iy >= shape[1] as i64
                || iz >= shape[2] as i64
            {
                None
            } else {
                Some(((iz as usize * shape[1]) + iy as usize) * shape[0] + ix as usize)
            }
        };

        // Count, then fill (CSR). Every cell a ball's gate sphere touches
        // lists that ball.
        let mut counts = vec![0u32; ncells + 1];
        let mut spans = Vec::with_capacity(balls.len());
        for b in balls {
            let gate = b.radius + CUTOFF_SIGMAS * dt_step.sqrt();
            let mut rng_lo = [0i64; 3];
            let mut rng_hi = [0i64; 3];
            for i in 0..3 {
                rng_lo[i] = ((b.center[i] - gate - grid_lo[i]) / cell).floor() as i64;
                rng_hi[i] = ((b.center[i] + gate - grid_lo[i]) / cell).floor() as i64;
            }
            spans.push((rng_lo, rng_hi, gate));
            for iz in rng_lo[2]..=rng_hi[2] {
                for iy in rng_lo[1]..=rng_hi[1] {
                    for ix in rng_lo[0]..=rng_hi[0] {
                        if let Some(c) = cell_index(ix, iy, iz) {
                            counts[c + 1] += 1;
                        }
                    }
                }
            }
        }
        for i in 0..ncells {
            counts[i + 1] += counts[i];
        }
        let offsets = counts;
        let mut cursor = offsets.clone();
        let mut entries = vec![
            Candidate {
                center: geom::zero(),
                radius: 0.0,
                thresh2: 0.0,
                bridge: false,
            };
            offsets[ncells] as usize
        ];
        let mut has_bridge = false;
        for (b, (rng_lo, rng_hi, gate)) in balls.iter().zip(spans.iter()) {
            let bridge = b.radius >= BRIDGE_RATIO * sigma_axis;
            has_bridge |= bridge;
            let cand = Candidate {
                center: b.center,
                radius: b.radius,
                thresh2: gate * gate,
                bridge,
            };
            for iz in rng_lo[2]..=rng_hi[2] {
                for iy in rng_lo[1]..=rng_hi[1] {
                    for ix in rng_lo[0]..=rng_hi[0] {
                        if let Some(c) = cell_index(ix, iy, iz) {
                            entries[cursor[c] as usize] = cand;
                            cursor[c] += 1;
                        }
                    }
                }
            }
        }

        Self {
            lo: grid_lo,
            cell,
            shape,
            offsets,
            entries,
            dt_step,
            reach,
            has_bridge,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Time step that keeps per-step hazards small.
    pub fn dt_step(&self) -> f64 {
        self.dt_step
    }

    pub fn reach(&self) -> f64 {
        self.reach
    }

    #[inline]
    fn cell_of(&self, x: &Point) -> Option<usize> {
        let mut idx = [0usize; 3];
        for i in 0..3 {
            let k = ((x[i] - self.lo[i]) / self.cell).floor();
            if k < 0.0 || k >= self.shape[i] as f64 {
                return None;
            }
            idx[i] = k as usize;
        }
        Some((idx[2] * self.shape[1] + idx[1]) * self.shape[0] + idx[0])
    }

    #[inline]
    fn candidates(&self, x: &Point) -> &[Candidate] {
        match self.cell_of(x) {
            None => &[],
            Some(c) => {
                let (a, b) = (self.offsets[c] as usize, self.offsets[c + 1] as usize);
                &self.entries[a..b]
            }
        }
    }

    #[inline]
    fn point_probability(cand: &Candidate, x: &Point, denom: f64) -> f64 {
        let d2 = geom::dist2(x, &cand.center);
        if d2 >= cand.thresh2 {
            return 0.0;
        }
        let d = d2.sqrt();
        if d <= cand.radius {
            1.0
        } else {
            ((cand.radius / d) * erfc((d - cand.radius) * denom)).min(1.0)
        }
    }

    /// Union forward first-passage probability over the point-channel
    /// candidates for a step of length `dt` starting at `x`.
    #[inline]
    pub fn step_hazard(&self, x: &Point, dt: f64) -> f64 {
        let list = self.candidates(x);
        if list.is_empty() {
            return 0.0;
        }
        let denom = 1.0 / (2.0 * dt.sqrt());
        let mut survive = 1.0;
        for cand in list {
            if cand.bridge {
                continue;
            }
            let p = Self::point_probability(cand, x, denom);
            if p > 0.0 {
                survive *= 1.0 - p;
            }
        }
        1.0 - survive
    }

    /// Pick the point-channel ball that fired, proportional to the per-ball
    /// hazards. Called only on firing steps.
    pub fn pick_fired_ball(&self, x: &Point, dt: f64, u: f64) -> Option<(Point, f64)> {
        let denom = 1.0 / (2.0 * dt.sqrt());
        let mut total = 0.0;
        let mut probs = [0.0f64; 64];
        let mut picks: Vec<(Point, f64)> = Vec::new();
        for cand in self.candidates(x) {
            if cand.bridge {
                continue;
            }
            let p = Self::point_probability(cand, x, denom);
            if p > 0.0 && picks.len() < probs.len() {
                probs[picks.len()] = p;
                picks.push((cand.center, cand.radius));
                total += p;
            }
        }
        if picks.is_empty() || total <= 0.0 {
            return None;
        }
        let target = u * total;
        let mut acc = 0.0;
        for (i, pick) in picks.iter().enumerate() {
            acc += probs[i];
            if target <= acc {
                return Some(*pick);
            }
        }
        picks.last().copied()
    }

    /// Bridge-channel outcome of an unconditional step `x -> y` over `dt`:
    /// endpoint landing inside a ball, or the half-space bridge kill between
    /// the endpoint surface distances. Consumes randomness only on demand.
    pub fn bridge_outcome(
        &self,
        x: &Point,
        y: &Point,
        dt: f64,
        rng: &mut ChaCha8Rng,
    ) -> Option<BridgeHit> {
        if !self.has_bridge {
            return None;
        }
        let list = self.candidates(x);

        // Endpoint landed inside a ball: certain crossing.
        for cand in list {
            if !cand.bridge {
                continue;
            }
            let dy = geom::dist(y, &cand.center) - cand.radius;
            if dy <= 0.0 {
                let dx = (geom::dist(x, &cand.center) - cand.radius).max(0.0);
                let fraction = if dx - dy > 0.0 { dx / (dx - dy) } else { 0.5 };
                let entry = project_to_sphere(&cand.center, cand.radius, x, y, fraction);
                return Some(BridgeHit {
                    center: cand.center,
                    radius: cand.radius,
                    fraction,
                    entry,
                });
            }
        }

        // Both endpoints outside: union of bridge kills.
        let mut survive = 1.0;
        let mut any = false;
        for cand in list {
            if !cand.bridge {
                continue;
            }
            let dx = geom::dist(x, &cand.center) - cand.radius;
            let dy = geom::dist(y, &cand.center) - cand.radius;
            let expo = dx * dy / dt;
            if expo < 40.0 {
                survive *= 1.0 - (-expo).exp();
                any = true;
            }
        }
        if !any {
            return None;
        }
        let p = 1.0 - survive;
        if p <= 0.0 || rng.random_range(0.0..1.0) >= p {
            return None;
        }
        // Pick the crossed ball proportional to per-ball kill probabilities.
        let u: f64 = rng.random_range(0.0..1.0);
        let mut total = 0.0;
        let mut probs = [0.0f64; 64];
        let mut picks: Vec<(Point, f64)> = Vec::new();
        for cand in list {
            if !cand.bridge {
                continue;
            }
            let dx = geom::dist(x, &cand.center) - cand.radius;
            let dy = geom::dist(y, &cand.center) - cand.radius;
            let expo = dx * dy / dt;
            if expo < 40.0 && picks.len() < probs.len() {
                probs[picks.len()] = (-expo).exp();
                picks.push((cand.center, cand.radius));
                total += probs[picks.len() - 1];
            }
        }
        let (center, radius) = if picks.is_empty() {
            return None;
        } else {
            let target = u * total;
            let mut acc = 0.0;
            let mut chosen = *picks.last().unwrap();
            for (i, pick) in picks.iter().enumerate() {
                acc += probs[i];
                if target <= acc {
                    chosen = *pick;
                    break;
                }
            }
            chosen
        };
        let fraction = 0.5;
        let entry = project_to_sphere(&center, radius, x, y, fraction);
        Some(BridgeHit {
            center,
            radius,
            fraction,
            entry,
        })
    }
}

/// Point on the sphere nearest to the step's crossing: the step position at
/// `fraction`, radially projected onto the surface.
fn project_to_sphere(center: &Point, radius: f64, x: &Point, y: &Point, fraction: f64) -> Point {
    let mut m = geom::zero();
    for i in 0..3 {
        m[i] = x[i] + fraction * (y[i] - x[i]) - center[i];
    }
    let n = geom::norm(&m);
    let mut out = geom::zero();
    if n < 1e-300 {
        out[0] = center[0] + radius;
        out[1] = center[1];
        out[2] = center[2];
        return out;
    }
    for i in 0..3 {
        out[i] = center[i] + radius * m[i] / n;
    }
    out
}

/// Sample the entry point on the sphere `|y - c| = r` under the harmonic
/// measure seen from an exterior point at distance `d`: conditioned on
/// hitting, `1/s` is uniform between `1/(d+r)` and `1/(d-r)`, where
/// `s = |from - y|`.
pub fn sample_entry_point(
    center: &Point,
    radius: f64,
    from: &Point,
    rng: &mut ChaCha8Rng,
) -> Point {
    let mut dir = [0.0f64; 3];
    for i in 0..3 {
        dir[i] = from[i] - center[i];
    }
    let d = geom::norm(&dir);
    if d <= radius * (1.0 + 1e-12) {
        return random_on_sphere(center, radius, rng);
    }
    for c in dir.iter_mut() {
        *c /= d;
    }
    let v: f64 = rng.random_range(0.0..1.0);
    let inv_s = (1.0 - v) / (d + radius) + v / (d - radius);
    let s = 1.0 / inv_s;
    let u = ((d * d + radius * radius - s * s) / (2.0 * d * radius)).clamp(-1.0, 1.0);

    // Orthonormal frame around dir.
    let pick = if dir[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let mut e1 = [
        dir[1] * pick[2] - dir[2] * pick[1],
        dir[2] * pick[0] - dir[0] * pick[2],
        dir[0] * pick[1] - dir[1] * pick[0],
    ];
    let n1 = geom::norm(&e1);
    for c in e1.iter_mut() {
        *c /= n1;
    }
    let e2 = [
        dir[1] * e1[2] - dir[2] * e1[1],
        dir[2] * e1[0] - dir[0] * e1[2],
        dir[0] * e1[1] - dir[1] * e1[0],
    ];
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let sin_t = (1.0 - u * u).max(0.0).sqrt();
    let mut y = geom::zero();
    for i in 0..3 {
        y[i] =
            center[i] + radius * (u * dir[i] + sin_t * (phi.cos() * e1[i] + phi.sin() * e2[i]));
    }
    y
}

fn random_on_sphere(center: &Point, radius: f64, rng: &mut ChaCha8Rng) -> Point {
    use rand_distr::StandardNormal;
    loop {
        let v: Point = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = geom::norm(&v);
        if n > 1e-12 {
            let mut y = geom::zero();
            for i in 0..3 {
                y[i] = center[i] + radius * v[i] / n;
            }
            return y;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Ball;
    use crate::rng::substream;

    fn one_ball(r: f64) -> ObstacleSet {
        ObstacleSet::new(
            3,
            vec![Ball {
                center: [0.0; 3],
                radius: r,
            }],
        )
        .unwrap()
    }

    #[test]
    fn tiny_ball_is_point_channel_with_exact_formula() {
        let set = one_ball(1e-4);
        let idx = HazardIndex::build(&set, 0.01);
        assert!(!idx.has_bridge);
        let dt = idx.dt_step();
        let d = 3e-4f64;
        let x = [d, 0.0, 0.0];
        let want = (1e-4 / d) * erfc((d - 1e-4) / (2.0 * dt.sqrt()));
        let got = idx.step_hazard(&x, dt);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        // inside: certain hit
        assert_eq!(idx.step_hazard(&[5e-5, 0.0, 0.0], dt), 1.0);
        // far away: gated to zero
        assert_eq!(idx.step_hazard(&[3.0, 0.0, 0.0], dt), 0.0);
    }

    #[test]
    fn moderate_ball_uses_bridge_channel() {
        let set = one_ball(0.1);
        let idx = HazardIndex::build(&set, 0.01);
        assert!(idx.has_bridge);
        // bridge balls do not contribute forward hazard
        assert_eq!(idx.step_hazard(&[0.15, 0.0, 0.0], idx.dt_step()), 0.0);
        // the step is small enough for the half-space approximation
        assert!((2.0 * idx.dt_step()).sqrt() <= 0.1 / 2.8);

        // endpoint inside -> certain crossing with an interpolated fraction
        let mut rng = substream(1, &[1]);
        let x = [0.12, 0.0, 0.0];
        let y = [0.08, 0.0, 0.0];
        let hit = idx.bridge_outcome(&x, &y, idx.dt_step(), &mut rng).unwrap();
        assert!((hit.fraction - 0.5).abs() < 1e-12); // dx = 0.02, dy = -0.02
        assert!((geom::dist(&hit.entry, &[0.0; 3]) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn bridge_kill_matches_half_space_formula_statistically() {
        let set = one_ball(0.1);
        let idx = HazardIndex::build(&set, 0.01);
        let dt = idx.dt_step();
        let x = [0.11, 0.0, 0.0];
        let y = [0.112, 0.0, 0.0];
        let want = (-(0.01f64 * 0.012) / dt).exp();
        let mut rng = substream(2, &[2]);
        let n = 200_000;
        let mut kills = 0;
        for _ in 0..n {
            if idx.bridge_outcome(&x, &y, dt, &mut rng).is_some() {
                kills += 1;
            }
        }
        let p = kills as f64 / n as f64;
        assert!(
            (p - want).abs() < 4.0 * (want * (1.0 - want) / n as f64).sqrt() + 1e-4,
            "{p} vs {want}"
        );
    }

    #[test]
    fn union_hazard_is_between_max_and_sum() {
        let set = ObstacleSet::new(
            3,
            vec![
                Ball {
                    center: [0.05, 0.0, 0.0],
                    radius: 0.01,
                },
                Ball {
                    center: [-0.05, 0.0, 0.0],
                    radius: 0.01,
                },
            ],
        )
        .unwrap();
        let idx = HazardIndex::build(&set, 0.01);
        let dt = idx.dt_step();
        let x = [0.0, 0.0, 0.0];
        let p = idx.step_hazard(&x, dt);
        let p1 = (0.01 / 0.05) * erfc(0.04 / (2.0 * dt.sqrt()));
        assert!(
            p >= p1 - 1e-15 && p <= 2.0 * p1 + 1e-15,
            "p = {p}, p1 = {p1}"
        );
    }

    #[test]
    fn entry_point_marginals_match_harmonic_measure() {
        // Against the closed form: 1/s is uniform on [1/(d+r), 1/(d-r)].
        let center = [0.0; 3];
        let r = 0.5;
        let from = [2.0, 0.0, 0.0];
        let mut rng = substream(5, &[1]);
        let n = 200_000;
        let mut below = 0usize;
        let s_med = 2.0 / (1.0 / (2.0 + r) + 1.0 / (2.0 - r));
        for _ in 0..n {
            let y = sample_entry_point(&center, r, &from, &mut rng);
            assert!((geom::dist(&y, &center) - r).abs() < 1e-12);
            if geom::dist(&y, &from) <= s_med {
                below += 1;
            }
        }
        let frac = below as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.005, "median split {frac}");
    }

    #[test]
    fn empty_set_is_inert() {
        let set = ObstacleSet::empty(3).unwrap();
        let idx = HazardIndex::build(&set, 0.01);
        assert!(idx.is_empty());
        assert_eq!(idx.step_hazard(&[0.0; 3], 0.01), 0.0);
    }
}
