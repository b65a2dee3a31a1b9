//! Small fixed-size vector helpers.
//!
//! Points are stored as `[f64; 3]` with unused trailing coordinates pinned to
//! zero in dimension 2. This keeps the hot path loops allocation-free; the
//! ambient dimension travels with the owning structure.

/// Point in up to three dimensions; coordinates beyond `dim` are zero.
pub type Point = [f64; 3];

#[inline]
pub fn zero() -> Point {
    [0.0; 3]
}

/// Pad a user-facing coordinate slice to the internal representation.
pub fn from_slice(coords: &[f64]) -> Point {
    let mut p = [0.0; 3];
    for (i, &c) in coords.iter().take(3).enumerate() {
        p[i] = c;
    }
    p
}

#[inline]
pub fn dist2(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub fn dist(a: &Point, b: &Point) -> f64 {
    dist2(a, b).sqrt()
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub fn is_finite(p: &Point) -> bool {
    p.iter().all(|c| c.is_finite())
}

/// Squared distance from `p` to the axis-aligned box `[lo, hi]` (zero inside).
#[inline]
pub fn dist2_to_box(p: &Point, lo: &Point, hi: &Point, dim: usize) -> f64 {
    let mut d2 = 0.0;
    for i in 0..dim {
        let d = if p[i] < lo[i] {
            lo[i] - p[i]
        } else if p[i] > hi[i] {
            p[i] - hi[i]
        } else {
            0.0
        };
        d2 += d * d;
    }
    d2
}

/// Distance from `p` to the boundary of the box, positive inside, negative outside.
#[inline]
pub fn signed_dist_to_box_boundary(p: &Point, lo: &Point, hi: &Point, dim: usize) -> f64 {
    let mut inside = true;
    let mut min_inside = f64::INFINITY;
    for i in 0..dim {
        if p[i] < lo[i] || p[i] > hi[i] {
            inside = false;
        } else {
            min_inside = min_inside.min(p[i] - lo[i]).min(hi[i] - p[i]);
        }
    }
    if inside {
        min_inside
    } else {
        -dist2_to_box(p, lo, hi, dim).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_distances() {
        let lo = [0.0, 0.0, 0.0];
        let hi = [1.0, 1.0, 1.0];
        assert_eq!(dist2_to_box(&[0.5, 0.5, 0.5], &lo, &hi, 3), 0.0);
        assert!((dist2_to_box(&[2.0, 0.5, 0.5], &lo, &hi, 3) - 1.0).abs() < 1e-15);
        let sd = signed_dist_to_box_boundary(&[0.5, 0.5, 0.1], &lo, &hi, 3);
        assert!((sd - 0.1).abs() < 1e-15);
        let sd = signed_dist_to_box_boundary(&[-0.3, 0.5, 0.5], &lo, &hi, 3);
        assert!((sd + 0.3).abs() < 1e-15);
    }
}
