//! Sampling: axis-aligned boxes, tensor grids, shells and time grids.

use serde::{Deserialize, Serialize};

use crate::contact::Point;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Aabb {
    /// The cube `[-r, r]^3`.
    pub fn cube(r: f64) -> Self {
        Self {
            lo: [-r; 3],
            hi: [r; 3],
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|i| p[i] >= self.lo[i] && p[i] <= self.hi[i])
    }

    pub fn max_abs(&self, axis: usize) -> f64 {
        self.lo[axis].abs().max(self.hi[axis].abs())
    }
}

/// Tensor-product grid with `n[i]` points per axis (endpoints included).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub bbox: Aabb,
    pub n: [usize; 3],
}

impl Grid {
    pub fn new(bbox: Aabb, n: [usize; 3]) -> Result<Self> {
        if n.contains(&0) || (0..3).any(|i| bbox.lo[i] > bbox.hi[i]) {
            return Err(Error::InvalidParameter(format!(
                "grid needs positive counts and lo <= hi, got {n:?} on {bbox:?}"
            )));
        }
        Ok(Self { bbox, n })
    }

    /// `n^3` points on `[-r, r]^3`.
    pub fn cube(r: f64, n: usize) -> Self {
        Self {
            bbox: Aabb::cube(r),
            n: [n.max(1); 3],
        }
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn coord(&self, axis: usize, k: usize) -> f64 {
        let (lo, hi) = (self.bbox.lo[axis], self.bbox.hi[axis]);
        let n = self.n[axis];
        if n == 1 {
            0.5 * (lo + hi)
        } else if k + 1 == n {
            hi
        } else {
            lo + (hi - lo) * k as f64 / (n - 1) as f64
        }
    }

    /// Points in x-major order.
    pub fn points(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.n[0] {
            for j in 0..self.n[1] {
                for k in 0..self.n[2] {
                    out.push(Point::new(
                        self.coord(0, i),
                        self.coord(1, j),
                        self.coord(2, k),
                    ));
                }
            }
        }
        out
    }
}

/// Grid points whose Euclidean norm is at least `min_radius`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    pub grid: Grid,
    pub min_radius: f64,
}

impl Shell {
    pub fn points(&self) -> Vec<Point> {
        self.grid
            .points()
            .into_iter()
            .filter(|p| p.coords.norm() >= self.min_radius)
            .collect()
    }
}

/// `n` equispaced times on `[0, 1]`, endpoints included.
pub fn time_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| if i + 1 == n { 1.0 } else { i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_hits_corners() {
        let g = Grid::cube(1.0, 11);
        let pts = g.points();
        assert_eq!(pts.len(), 1331);
        assert_eq!(pts[0], Point::new(-1.0, -1.0, -1.0));
        assert_eq!(pts[1330], Point::new(1.0, 1.0, 1.0));
        assert!(pts.contains(&Point::new(0.0, 0.0, 0.0)));
    }

    #[test]
    fn shell_filters_by_radius() {
        let s = Shell {
            grid: Grid::cube(2.0, 5),
            min_radius: 1.9,
        };
        assert!(s.points().iter().all(|p| p.coords.norm() >= 1.9));
        assert_eq!(time_grid(5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
