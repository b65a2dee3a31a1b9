//! Dense uniform-grid index over a ball collection.
//!
//! Cells store ball indices in CSR layout for cache-friendly shell scans, and
//! every cell carries a precomputed conservative lower bound on the distance
//! from anywhere in the cell to the nearest ball surface. Path simulation
//! reads that bound on almost every step and only falls back to an exact
//! shell search close to an obstacle.

use crate::geom::{self, Point};

#[derive(Debug, Clone)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct UniformGrid {
    dim: usize,
    lo: Point,
    cell: f64,
    shape: [usize; 3],
    /// CSR offsets, length `ncells + 1`.
    offsets: Vec<u32>,
    /// Ball indices grouped by cell.
    entries: Vec<u32>,
    /// Per-cell lower bound on distance to the nearest ball surface.
    cell_bound: Vec<f32>,
    max_radius: f64,
    min_radius: f64,
    /// Bounding box of all ball extents.
    bbox_lo: Point,
    bbox_hi: Point,
}

const PAD_CELLS: i64 = 2;
const MAX_CELLS_PER_AXIS: usize = 192;

impl UniformGrid {
    /// Build the index. `cell_size_hint` is clamped so the grid stays dense.
    pub fn build(dim: usize, balls: &[Ball], cell_size_hint: f64) -> Self {
        if balls.is_empty() {
            return Self {
                dim,
                lo: geom::zero(),
                cell: 1.0,
                shape: [1, 1, 1],
                offsets: vec![0, 0],
                entries: Vec::new(),
                cell_bound: vec![f32::INFINITY],
                max_radius: 0.0,
                min_radius: 0.0,
                bbox_lo: geom::zero(),
                bbox_hi: geom::zero(),
            };
        }

        let mut bbox_lo = [f64::INFINITY; 3];
        let mut bbox_hi = [f64::NEG_INFINITY; 3];
        let mut max_radius: f64 = 0.0;
        let mut min_radius: f64 = f64::INFINITY;
        for b in balls {
            for i in 0..dim {
                bbox_lo[i] = bbox_lo[i].min(b.center[i] - b.radius);
                bbox_hi[i] = bbox_hi[i].max(b.center[i] + b.radius);
            }
            max_radius = max_radius.max(b.radius);
            min_radius = min_radius.min(b.radius);
        }
        for i in dim..3 {
            bbox_lo[i] = 0.0;
            bbox_hi[i] = 0.0;
        }

        let extent = (0..dim)
            .map(|i| bbox_hi[i] - bbox_lo[i])
            .fold(0.0f64, f64::max);
        let mut cell = cell_size_hint.max(1e-12);
        // Keep the dense array affordable even for adversarial hints.
        let min_cell = (extent + 2.0 * PAD_CELLS as f64 * cell) / MAX_CELLS_PER_AXIS as f64;
        if cell < min_cell {
            cell = min_cell;
        }

        let mut lo = geom::zero();
        let mut shape = [1usize; 3];
        for i in 0..dim {
            lo[i] = bbox_lo[i] - PAD_CELLS as f64 * cell;
            let span = bbox_hi[i] + PAD_CELLS as f64 * cell - lo[i];
            shape[i] = (span / cell).ceil() as usize + 1;
        }
        let ncells = shape[0] * shape[1] * shape[2];

        // Counting sort of balls into cells by center.
        let idx_of = |p: &Point| -> usize {
            let mut id = [0usize; 3];
            for i in 0..dim {
                let k = ((p[i] - lo[i]) / cell).floor() as i64;
                id[i] = k.clamp(0, shape[i] as i64 - 1) as usize;
            }
            (id[2] * shape[1] + id[1]) * shape[0] + id[0]
        };
        let mut counts = vec![0u32; ncells + 1];
        for b in balls {
            counts[idx_of(&b.center) + 1] += 1;
        }
        for i in 0..ncells {
            counts[i + 1] += counts[i];
        }
        let offsets = counts;
        let mut cursor = offsets.clone();
        let mut entries = vec![0u32; balls.len()];
        for (bi, b) in balls.iter().enumerate() {
            let c = idx_of(&b.center);
            entries[cursor[c] as usize] = bi as u32;
            cursor[c] += 1;
        }

        let mut grid = Self {
            dim,
            lo,
            cell,
            shape,
            offsets,
            entries,
            cell_bound: Vec::new(),
            max_radius,
            min_radius,
            bbox_lo,
            bbox_hi,
        };
        grid.cell_bound = grid.compute_cell_bounds();
        grid
    }

    /// Multi-source BFS over cells: L-inf cell distance to the nearest
    /// occupied cell, converted to a Euclidean lower bound.
    fn compute_cell_bounds(&self) -> Vec<f32> {
        let ncells = self.offsets.len() - 1;
        let mut ring = vec![u32::MAX; ncells];
        let mut frontier: Vec<u32> = (0..ncells)
            .filter(|&c| self.offsets[c + 1] > self.offsets[c])
            .map(|c| c as u32)
            .collect();
        for &c in &frontier {
            ring[c as usize] = 0;
        }
        let (nx, ny, nz) = (self.shape[0], self.shape[1], self.shape[2]);
        let mut depth = 0u32;
        let mut next = Vec::new();
        while !frontier.is_empty() {
            depth += 1;
            next.clear();
            for &c in &frontier {
                let c = c as usize;
                let x = c % nx;
                let y = (c / nx) % ny;
                let z = c / (nx * ny);
                for dz in -1i64..=1 {
                    let zz = z as i64 + dz;
                    if zz < 0 || zz >= nz as i64 {
                        continue;
                    }
                    for dy in -1i64..=1 {
                        let yy = y as i64 + dy;
                        if yy < 0 || yy >= ny as i64 {
                            continue;
                        }
                        for dx in -1i64..=1 {
                            let xx = x as i64 + dx;
                            if xx < 0 || xx >= nx as i64 {
                                continue;
                            }
                            let n = (zz as usize * ny + yy as usize) * nx + xx as usize;
                            if ring[n] == u32::MAX {
                                ring[n] = depth;
                                next.push(n as u32);
                            }
                        }
                    }
                }
            }
            std::mem::swap(&mut frontier, &mut next);
        }
        // A ball center in a cell at L-inf distance k is at least (k-1)*cell
        // away. Shade the stored bound down so f32 rounding stays conservative.
        ring.iter()
            .map(|&k| {
                if k == u32::MAX {
                    f32::INFINITY
                } else {
                    let d = self.cell * (k as f64 - 1.0).max(0.0) - self.max_radius;
                    (d.max(0.0) * (1.0 - 1e-6)) as f32
                }
            })
            .collect()
    }

    #[inline]
    fn clamped_cell(&self, p: &Point) -> ([usize; 3], f64) {
        let mut id = [0usize; 3];
        let mut extra2 = 0.0;
        for i in 0..self.dim {
            let raw = (p[i] - self.lo[i]) / self.cell;
            let k = raw.floor() as i64;
            let kc = k.clamp(0, self.shape[i] as i64 - 1);
            id[i] = kc as usize;
            if k != kc {
                let edge = if k < kc {
                    self.lo[i]
                } else {
                    self.lo[i] + (kc as f64 + 1.0) * self.cell
                };
                let d = p[i] - edge;
                extra2 += d * d;
            }
        }
        (id, extra2.sqrt())
    }

    /// Cheap conservative bound: a positive return certifies that every ball
    /// surface is at least that far from `p`; the return is 0 whenever `p`
    /// may be on or inside an obstacle, which forces an exact query.
    #[inline]
    pub fn distance_lower_bound(&self, p: &Point) -> f64 {
        if self.entries.is_empty() {
            return f64::INFINITY;
        }
        let (id, extra) = self.clamped_cell(p);
        let c = (id[2] * self.shape[1] + id[1]) * self.shape[0] + id[0];
        let cell_lb = self.cell_bound[c] as f64 - extra;
        let bbox_lb = geom::dist2_to_box(p, &self.bbox_lo, &self.bbox_hi, self.dim).sqrt();
        cell_lb.max(bbox_lb).max(0.0)
    }

    /// Exact signed distance from `p` to the nearest ball surface:
    /// `min_i (|p - c_i| - r_i)`, `+inf` for an empty set.
    pub fn nearest_distance(&self, p: &Point, balls: &[Ball]) -> f64 {
        if self.entries.is_empty() {
            return f64::INFINITY;
        }
        let (id, _) = self.clamped_cell(p);
        let (nx, ny, nz) = (self.shape[0], self.shape[1], self.shape[2]);
        let max_shell = {
            let mut m = 0usize;
            for i in 0..self.dim {
                m = m.max(id[i]).max(self.shape[i] - 1 - id[i]);
            }
            m
        };

        // Skip shells that the per-cell bound proves empty of candidates.
        let c0 = (id[2] * ny + id[1]) * nx + id[0];
        let start_shell = {
            let lb = self.cell_bound[c0] as f64;
            if lb > 0.0 {
                (((lb + self.max_radius) / self.cell) as usize).saturating_sub(1)
            } else {
                0
            }
        };

        let mut best = f64::INFINITY;
        for shell in start_shell..=max_shell {
            // Remaining shells cannot contain a closer ball.
            if self.cell * (shell as f64 - 1.0) - self.max_radius > best {
                break;
            }
            let s = shell as i64;
            let zr = if self.dim > 2 { -s..=s } else { 0..=0 };
            for dz in zr {
                let zz = id[2] as i64 + dz;
                if zz < 0 || zz >= nz as i64 {
                    continue;
                }
                let yr = if self.dim > 1 { -s..=s } else { 0..=0 };
                for dy in yr {
                    let yy = id[1] as i64 + dy;
                    if yy < 0 || yy >= ny as i64 {
                        continue;
                    }
                    let on_rim_zy = dz.abs() == s || dy.abs() == s;
                    let mut dx = -s;
                    while dx <= s {
                        if !on_rim_zy && dx.abs() != s {
                            // Interior of the shell was visited by a previous shell.
                            dx = s;
                            continue;
                        }
                        let xx = id[0] as i64 + dx;
                        if xx >= 0 && xx < nx as i64 {
                            let c = (zz as usize * ny + yy as usize) * nx + xx as usize;
                            let (a, b) =
                                (self.offsets[c] as usize, self.offsets[c + 1] as usize);
                            for &bi in &self.entries[a..b] {
                                let ball = &balls[bi as usize];
                                let d = geom::dist(p, &ball.center) - ball.radius;
                                if d < best {
                                    best = d;
                                }
                            }
                        }
                        dx += 1;
                    }
                }
            }
        }
        best
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn max_radius(&self) -> f64 {
        self.max_radius
    }

    pub fn min_radius(&self) -> f64 {
        self.min_radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn brute(p: &Point, balls: &[Ball]) -> f64 {
        balls
            .iter()
            .map(|b| geom::dist(p, &b.center) - b.radius)
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn grid_matches_brute_force() {
        let mut rng = crate::rng::substream(11, &[99]);
        for dim in [2usize, 3] {
            let balls: Vec<Ball> = (0..500)
                .map(|_| {
                    let mut c = geom::zero();
                    for item in c.iter_mut().take(dim) {
                        *item = rng.random_range(0.0..1.0);
                    }
                    Ball {
                        center: c,
                        radius: rng.random_range(0.001..0.02),
                    }
                })
                .collect();
            let grid = UniformGrid::build(dim, &balls, 0.04);
            for _ in 0..2000 {
                let mut p = geom::zero();
                for item in p.iter_mut().take(dim) {
                    *item = rng.random_range(-0.5..1.5);
                }
                let exact = grid.nearest_distance(&p, &balls);
                let expect = brute(&p, &balls);
                assert!(
                    (exact - expect).abs() < 1e-12,
                    "dim {dim}: {exact} vs {expect} at {p:?}"
                );
                let lb = grid.distance_lower_bound(&p);
                if expect > 0.0 {
                    assert!(
                        lb <= expect + 1e-12,
                        "bound {lb} exceeds true distance {expect}"
                    );
                } else {
                    assert_eq!(lb, 0.0, "inside a ball the bound must collapse to 0");
                }
            }
        }
    }

    #[test]
    fn empty_grid_is_infinite() {
        let grid = UniformGrid::build(3, &[], 0.1);
        assert!(grid.nearest_distance(&[0.3; 3], &[]).is_infinite());
        assert!(grid.distance_lower_bound(&[0.3; 3]).is_infinite());
    }
}
