//! Estimates with standard errors and small statistical helpers.

use serde::{Deserialize, Serialize};

/// A Monte Carlo estimate with its standard error. `stderr == 0` marks exact
/// (closed-form) values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }

    pub fn new(value: f64, stderr: f64) -> Self {
        Estimate { value, stderr }
    }

    /// Sample mean and standard error of the mean.
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut acc = Welford::new();
        for &s in samples {
            acc.push(s);
        }
        acc.estimate()
    }

    /// Is `other` within `k` combined standard errors of `self`?
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        let sigma = (self.stderr * self.stderr + other.stderr * other.stderr).sqrt();
        (self.value - other.value).abs() <= k * sigma
    }

    pub fn scaled(&self, c: f64) -> Self {
        Estimate {
            value: self.value * c,
            stderr: self.stderr * c.abs(),
        }
    }

    /// Difference with independently propagated error.
    pub fn minus(&self, other: &Estimate) -> Self {
        Estimate {
            value: self.value - other.value,
            stderr: (self.stderr * self.stderr + other.stderr * other.stderr).sqrt(),
        }
    }
}

/// Streaming mean/variance accumulator.
#[derive(Debug, Clone, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let n = (self.n + other.n) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n;
        self.m2 += other.m2 + d * d * self.n as f64 * other.n as f64 / n;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n as f64 - 1.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.mean, self.stderr())
    }
}

/// Standard error of a binomial proportion `p` from `n` trials.
pub fn proportion_stderr(p: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (p.clamp(0.0, 1.0) * (1.0 - p.clamp(0.0, 1.0)) / n as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_direct() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let e = Estimate::from_samples(&xs);
        assert!((e.value - 3.75).abs() < 1e-14);
        let var = xs.iter().map(|x| (x - 3.75f64).powi(2)).sum::<f64>() / 3.0;
        assert!((e.stderr - (var / 4.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let mut a = Welford::new();
        let mut b = Welford::new();
        for &x in &xs[..37] {
            a.push(x);
        }
        for &x in &xs[37..] {
            b.push(x);
        }
        a.merge(&b);
        let whole = Estimate::from_samples(&xs);
        assert!((a.mean() - whole.value).abs() < 1e-12);
        assert!((a.stderr() - whole.stderr).abs() < 1e-12);
    }
}
