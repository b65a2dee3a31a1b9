//! Scalar fields on `R^d`.
//!
//! A closed set of field shapes covers every rate density, source term, and
//! boundary function used by the experiments, while staying serializable for
//! config files. Fields report the distance to their nearest discontinuity so
//! path integrators can shrink steps only where the quadrature actually needs
//! it.

use serde::{Deserialize, Serialize};

use crate::geom::{self, Point};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalarField {
    /// Constant value everywhere.
    Constant { value: f64 },
    /// `inside` on the closed box, `outside` elsewhere.
    BoxIndicator {
        lower: Vec<f64>,
        upper: Vec<f64>,
        inside: f64,
        outside: f64,
    },
    /// `offset + slope . x` inside the box, zero outside.
    AffineInBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
        offset: f64,
        slope: Vec<f64>,
    },
    /// `offset + slope . x` everywhere.
    Affine { offset: f64, slope: Vec<f64> },
    /// `amp * prod_i sin(freq_i * pi * x_i)` over the first `freqs.len()` axes.
    SineProduct { amp: f64, freqs: Vec<f64> },
}

impl ScalarField {
    pub fn zero() -> Self {
        ScalarField::Constant { value: 0.0 }
    }

    pub fn constant(value: f64) -> Self {
        ScalarField::Constant { value }
    }

    /// Indicator of a box scaled by `level`.
    pub fn box_indicator(lower: &[f64], upper: &[f64], level: f64) -> Self {
        ScalarField::BoxIndicator {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            inside: level,
            outside: 0.0,
        }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        match self {
            ScalarField::Constant { value } => *value,
            ScalarField::BoxIndicator {
                lower,
                upper,
                inside,
                outside,
            } => {
                if in_box(x, lower, upper) {
                    *inside
                } else {
                    *outside
                }
            }
            ScalarField::AffineInBox {
                lower,
                upper,
                offset,
                slope,
            } => {
                if in_box(x, lower, upper) {
                    offset + dot(slope, x)
                } else {
                    0.0
                }
            }
            ScalarField::Affine { offset, slope } => offset + dot(slope, x),
            ScalarField::SineProduct { amp, freqs } => {
                let mut v = *amp;
                for (i, f) in freqs.iter().enumerate() {
                    v *= (f * std::f64::consts::PI * x[i]).sin();
                }
                v
            }
        }
    }

    /// Distance from `x` to the nearest discontinuity surface of the field,
    /// `+inf` for continuous fields. Used to adapt quadrature steps.
    pub fn discontinuity_distance(&self, x: &Point, dim: usize) -> f64 {
        match self {
            ScalarField::Constant { .. }
            | ScalarField::Affine { .. }
            | ScalarField::SineProduct { .. } => f64::INFINITY,
            ScalarField::BoxIndicator { lower, upper, .. }
            | ScalarField::AffineInBox { lower, upper, .. } => {
                let lo = geom::from_slice(lower);
                let hi = geom::from_slice(upper);
                geom::signed_dist_to_box_boundary(x, &lo, &hi, dim).abs()
            }
        }
    }

    /// Upper bound for `|field|` over the box `[lo, hi]`.
    pub fn sup_abs_on_box(&self, lo: &[f64], hi: &[f64]) -> f64 {
        match self {
            ScalarField::Constant { value } => value.abs(),
            ScalarField::BoxIndicator {
                inside, outside, ..
            } => inside.abs().max(outside.abs()),
            ScalarField::AffineInBox {
                lower,
                upper,
                offset,
                slope,
            } => corner_extremum(lower, upper, *offset, slope)
                .map(|(a, b)| a.abs().max(b.abs()))
                .unwrap_or(0.0),
            ScalarField::Affine { offset, slope } => corner_extremum(lo, hi, *offset, slope)
                .map(|(a, b)| a.abs().max(b.abs()))
                .unwrap_or(offset.abs()),
            ScalarField::SineProduct { amp, .. } => amp.abs(),
        }
    }

    /// Lower bound for the field over all of space (boxes contribute their
    /// corners and the outside value). Used to validate rate densities.
    pub fn global_min(&self) -> f64 {
        match self {
            ScalarField::Constant { value } => *value,
            ScalarField::BoxIndicator {
                inside, outside, ..
            } => inside.min(*outside),
            ScalarField::AffineInBox {
                lower,
                upper,
                offset,
                slope,
            } => corner_extremum(lower, upper, *offset, slope)
                .map(|(min, _)| min.min(0.0))
                .unwrap_or(0.0),
            ScalarField::Affine { offset, slope } => {
                if slope.iter().all(|s| *s == 0.0) {
                    *offset
                } else {
                    f64::NEG_INFINITY
                }
            }
            ScalarField::SineProduct { amp, .. } => -amp.abs(),
        }
    }
}

fn in_box(x: &Point, lower: &[f64], upper: &[f64]) -> bool {
    lower
        .iter()
        .zip(upper.iter())
        .enumerate()
        .all(|(i, (lo, hi))| x[i] >= *lo && x[i] <= *hi)
}

fn dot(slope: &[f64], x: &Point) -> f64 {
    slope.iter().enumerate().map(|(i, s)| s * x[i]).sum()
}

/// (min, max) of an affine function over the corners of a box.
fn corner_extremum(lower: &[f64], upper: &[f64], offset: f64, slope: &[f64]) -> Option<(f64, f64)> {
    if lower.is_empty() {
        return None;
    }
    let mut min = offset;
    let mut max = offset;
    for (i, s) in slope.iter().enumerate() {
        let (lo, hi) = (lower.get(i)?, upper.get(i)?);
        let (a, b) = (s * lo, s * hi);
        min += a.min(b);
        max += a.max(b);
    }
    Some((min, max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_indicator_eval() {
        let f = ScalarField::box_indicator(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], 2.0);
        assert_eq!(f.eval(&[0.5, 0.5, 0.5]), 2.0);
        assert_eq!(f.eval(&[1.5, 0.5, 0.5]), 0.0);
        assert_eq!(f.sup_abs_on_box(&[-1.0; 3], &[2.0; 3]), 2.0);
        assert_eq!(f.global_min(), 0.0);
    }

    #[test]
    fn affine_in_box_bounds() {
        // (4/3)(1 + x1) on the unit cube.
        let f = ScalarField::AffineInBox {
            lower: vec![0.0; 3],
            upper: vec![1.0; 3],
            offset: 4.0 / 3.0,
            slope: vec![4.0 / 3.0, 0.0, 0.0],
        };
        assert!((f.eval(&[0.5, 0.2, 0.2]) - 2.0).abs() < 1e-15);
        assert_eq!(f.eval(&[2.0, 0.0, 0.0]), 0.0);
        assert!((f.sup_abs_on_box(&[0.0; 3], &[1.0; 3]) - 8.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.global_min(), 0.0);
    }

    #[test]
    fn discontinuity_distance_reports_box_surface() {
        let f = ScalarField::box_indicator(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], 1.0);
        assert!((f.discontinuity_distance(&[0.5, 0.5, 0.9], 3) - 0.1).abs() < 1e-12);
        assert!((f.discontinuity_distance(&[0.5, 0.5, 1.4], 3) - 0.4).abs() < 1e-12);
        let c = ScalarField::constant(1.0);
        assert!(c.discontinuity_distance(&[0.0, 0.0, 0.0], 3).is_infinite());
    }

    #[test]
    fn sine_product_matches_formula() {
        let f = ScalarField::SineProduct {
            amp: 3.0,
            freqs: vec![1.0, 1.0],
        };
        let x = [0.25, 0.5, 0.0];
        let expect = 3.0 * (std::f64::consts::PI * 0.25).sin();
        assert!((f.eval(&x) - expect).abs() < 1e-14);
    }
}
