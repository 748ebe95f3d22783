//! Cell grids on the fundamental domain, support regions and base measures.

use crate::error::{Error, Result};
use crate::torus::{frac, Torus};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// `n × n` grid of congruent parallelogram cells in lattice coordinates.
/// Cell `(i, j)` covers `a ∈ [i/n, (i+1)/n)`, `b ∈ [j/n, (j+1)/n)` and has
/// flat index `i + n j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "grid resolution must be positive");
        Self { n }
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.n * j
    }

    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    /// Lattice coordinates of the centre of a cell.
    pub fn center_coords(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.ij(idx);
        ((i as f64 + 0.5) * self.h(), (j as f64 + 0.5) * self.h())
    }

    pub fn center(&self, torus: &Torus, idx: usize) -> C64 {
        let (a, b) = self.center_coords(idx);
        torus.lattice().from_coords(a, b)
    }

    pub fn cell_of(&self, torus: &Torus, z: C64) -> usize {
        let (a, b) = torus.lattice().coords(z);
        let i = ((frac(a) * self.n as f64) as usize).min(self.n - 1);
        let j = ((frac(b) * self.n as f64) as usize).min(self.n - 1);
        self.index(i, j)
    }

    /// Index of the cell offset `(di, dj)` from `idx`, wrapping around.
    pub fn offset(&self, idx: usize, di: isize, dj: isize) -> usize {
        let (i, j) = self.ij(idx);
        let n = self.n as isize;
        let ii = (i as isize + di).rem_euclid(n) as usize;
        let jj = (j as isize + dj).rem_euclid(n) as usize;
        self.index(ii, jj)
    }
}

/// Support region `K` on the torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Region {
    Torus,
    /// Rectangle in lattice coordinates, `a ∈ [a0, a1)`, `b ∈ [b0, b1)`.
    Rect { a0: f64, a1: f64, b0: f64, b1: f64 },
    /// Geodesic disk for the quotient metric.
    Disk { center: [f64; 2], radius: f64 },
}

impl Region {
    pub fn contains(&self, torus: &Torus, z: C64) -> bool {
        match self {
            Region::Torus => true,
            Region::Rect { a0, a1, b0, b1 } => {
                let (a, b) = torus.lattice().coords(torus.reduce(z));
                a >= *a0 && a < *a1 && b >= *b0 && b < *b1
            }
            Region::Disk { center, radius } => {
                torus.dist(z, C64::new(center[0], center[1])) <= *radius
            }
        }
    }

    /// Cells of `grid` whose centres lie in the region.
    pub fn cells(&self, torus: &Torus, grid: &Grid) -> Vec<usize> {
        (0..grid.len())
            .filter(|&k| self.contains(torus, grid.center(torus, k)))
            .collect()
    }
}

/// Kind of base measure `ν`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeasureKind {
    UniformTorus,
    UniformRect { a0: f64, a1: f64, b0: f64, b1: f64 },
    UniformDisk { center: [f64; 2], radius: f64 },
    /// Uniform on a circle in the plane; used by the genus-zero baseline.
    UniformCircle { center: [f64; 2], radius: f64 },
}

impl MeasureKind {
    /// Support of the measure as a torus region; `None` for the planar circle.
    pub fn support_region(&self) -> Option<Region> {
        match *self {
            MeasureKind::UniformTorus => Some(Region::Torus),
            MeasureKind::UniformRect { a0, a1, b0, b1 } => Some(Region::Rect { a0, a1, b0, b1 }),
            MeasureKind::UniformDisk { center, radius } => Some(Region::Disk { center, radius }),
            MeasureKind::UniformCircle { .. } => None,
        }
    }
}

/// Probability measure `ν` given by quadrature nodes and weights.
///
/// Torus kinds use the midpoint rule of a `res × res` [`Grid`] restricted
/// to the support; the circle uses `res` equally spaced nodes.
#[derive(Clone, Debug)]
pub struct BaseMeasure {
    pub kind: MeasureKind,
    pub resolution: usize,
    pub nodes: Vec<C64>,
    pub weights: Vec<f64>,
}

impl BaseMeasure {
    pub fn new(torus: &Torus, kind: MeasureKind, resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidInput("resolution must be positive".into()));
        }
        let nodes: Vec<C64> = match &kind {
            MeasureKind::UniformCircle { center, radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidInput("circle radius must be positive".into()));
                }
                let c = C64::new(center[0], center[1]);
                (0..resolution)
                    .map(|k| {
                        c + C64::from_polar(
                            *radius,
                            2.0 * std::f64::consts::PI * k as f64 / resolution as f64,
                        )
                    })
                    .collect()
            }
            other => {
                let region = other.support_region().expect("planar kinds handled above");
                let grid = Grid::new(resolution);
                region
                    .cells(torus, &grid)
                    .into_iter()
                    .map(|k| grid.center(torus, k))
                    .collect()
            }
        };
        if nodes.is_empty() {
            return Err(Error::InvalidInput(
                "support contains no quadrature nodes; increase the resolution".into(),
            ));
        }
        let w = 1.0 / nodes.len() as f64;
        let weights = vec![w; nodes.len()];
        Ok(Self {
            kind,
            resolution,
            nodes,
            weights,
        })
    }

    pub fn uniform_torus(torus: &Torus, resolution: usize) -> Self {
        Self::new(torus, MeasureKind::UniformTorus, resolution).expect("valid resolution")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_indexing_round_trips() {
        let t = Torus::new(C64::new(0.2, 0.8), 1e-15).unwrap();
        let g = Grid::new(7);
        for k in 0..g.len() {
            assert_eq!(g.cell_of(&t, g.center(&t, k)), k);
            assert_eq!(g.offset(g.offset(k, 3, -2), -3, 2), k);
        }
    }

    #[test]
    fn measures_have_unit_mass_and_nodes_in_support() {
        let t = Torus::square();
        let kind = MeasureKind::UniformDisk {
            center: [0.5, 0.5],
            radius: 0.3,
        };
        let m = BaseMeasure::new(&t, kind, 32).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
        assert!(m.nodes.iter().all(|z| t.dist(*z, C64::new(0.5, 0.5)) <= 0.3));
        assert!(m.weights.iter().all(|w| *w >= 0.0));
    }
}
