//! Green's potentials and energies of grid and empirical measures, the rate
//! functional and its discrete approximant.
//!
//! Grid measures are piecewise constant on the cells of a [`Grid`]. Their
//! energies and cell-averaged potentials are exact bilinear forms in a
//! [`KernelTable`] of double cell averages of `G`, so that the uniform
//! measure has potential and energy zero up to rounding.

use crate::error::{Error, Result};
use crate::grid::{BaseMeasure, Grid};
use crate::quad;
use crate::sections::{LargeSpace, LineBundle};
use crate::torus::{centered, Torus};
use crate::zeros::{canonical_section_coeffs, Configuration};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Double cell averages `K(d) = ⨍_A ⨍_{A+d} G(x, y)` of the Green's function
/// over pairs of cells at offset `d`. Translation invariance of `G` makes
/// the kernel a function of the offset only.
#[derive(Clone, Debug)]
pub struct KernelTable {
    grid: Grid,
    table: Vec<f64>,
}

const FAR_ORDER: usize = 10;
const NEAR_ORDER: usize = 16;
const DUFFY_ORDER: usize = 24;

impl KernelTable {
    pub fn new(torus: &Torus, grid: Grid) -> Result<Self> {
        if grid.n < 6 {
            return Err(Error::InvalidInput(
                "kernel tables need a grid of at least 6 x 6 cells".into(),
            ));
        }
        let n = grid.n as isize;
        let table: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = grid.ij(k);
                let di = wrap_offset(i as isize, n);
                let dj = wrap_offset(j as isize, n);
                double_average(torus, grid.h(), di, dj)
            })
            .collect();
        Ok(Self { grid, table })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Kernel between cells `p` and `q`.
    pub fn get(&self, p: usize, q: usize) -> f64 {
        let (pi, pj) = self.grid.ij(p);
        let (qi, qj) = self.grid.ij(q);
        let n = self.grid.n;
        let di = (qi + n - pi) % n;
        let dj = (qj + n - pj) % n;
        self.table[self.grid.index(di, dj)]
    }

    /// Cell-averaged potential `(K w)_p` on every cell.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.grid.len());
        let support: Vec<(usize, f64)> = w
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(q, v)| (q, *v))
            .collect();
        (0..self.grid.len())
            .into_par_iter()
            .map(|p| support.iter().map(|&(q, v)| v * self.get(p, q)).sum())
            .collect()
    }

    /// Dense kernel matrix restricted to `cells`.
    pub fn matrix_on(&self, cells: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(cells.len(), cells.len(), |a, b| self.get(cells[a], cells[b]))
    }

    /// Sum of all entries; zero because `G` has ω-mean zero.
    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }
}

fn wrap_offset(i: isize, n: isize) -> isize {
    if i > n / 2 {
        i - n
    } else {
        i
    }
}

// ∫_{[-1,1]^2} (1-|s1|)(1-|s2|) g(h (d + s)) ds in lattice coordinates:
// the law of the difference of two uniform points of unit cells is the
// tent density.
fn double_average(torus: &Torus, h: f64, di: isize, dj: isize) -> f64 {
    let lt = torus.lattice();
    let to_plane = |v1: f64, v2: f64| lt.from_coords(h * v1, h * v2);
    let near = di.abs() <= 1 && dj.abs() <= 1;
    let (d1, d2) = (di as f64, dj as f64);
    let mut total = 0.0;
    for q1 in [-1.0, 0.0] {
        for q2 in [-1.0, 0.0] {
            // quadrant s ∈ [q1, q1+1] x [q2, q2+1]
            let tent = |s1: f64, s2: f64| (1.0 - s1.abs()) * (1.0 - s2.abs());
            if !near {
                let r1 = quad::gauss_legendre_on(FAR_ORDER, q1, q1 + 1.0);
                let r2 = quad::gauss_legendre_on(FAR_ORDER, q2, q2 + 1.0);
                for &(s1, w1) in &r1 {
                    for &(s2, w2) in &r2 {
                        total += w1 * w2 * tent(s1, s2) * torus.green0(to_plane(d1 + s1, d2 + s2));
                    }
                }
                continue;
            }
            // smooth remainder
            let r1 = quad::gauss_legendre_on(NEAR_ORDER, q1, q1 + 1.0);
            let r2 = quad::gauss_legendre_on(NEAR_ORDER, q2, q2 + 1.0);
            for &(s1, w1) in &r1 {
                for &(s2, w2) in &r2 {
                    total +=
                        w1 * w2 * tent(s1, s2) * torus.green_regular(to_plane(d1 + s1, d2 + s2));
                }
            }
            // log|u|^2 part; the singular point u = 0 is a corner of the
            // square v ∈ [d + q, d + q + 1] when it touches it at all
            let (v1, v2) = (d1 + q1, d2 + q2);
            let touches = (v1 == 0.0 || v1 == -1.0) && (v2 == 0.0 || v2 == -1.0);
            if touches {
                let corners = [(v1, v2), (v1 + 1.0, v2), (v1 + 1.0, v2 + 1.0), (v1, v2 + 1.0)];
                let k = corners
                    .iter()
                    .position(|&(a, b)| a == 0.0 && b == 0.0)
                    .expect("singular corner");
                let c: Vec<C64> = (0..4)
                    .map(|m| {
                        let (a, b) = corners[(k + m) % 4];
                        to_plane(a, b)
                    })
                    .collect();
                let area = h * h * lt.im();
                let weight = |u: C64| {
                    let (a, b) = lt.coords(u);
                    tent(a / h - d1, b / h - d2)
                };
                let origin = C64::new(0.0, 0.0);
                let tri = quad::integrate_triangle_log_weighted(origin, c[1], c[2], DUFFY_ORDER, weight)
                    + quad::integrate_triangle_log_weighted(origin, c[2], c[3], DUFFY_ORDER, weight);
                total += tri / area;
            } else {
                for &(s1, w1) in &r1 {
                    for &(s2, w2) in &r2 {
                        let u = to_plane(d1 + s1, d2 + s2);
                        total += w1 * w2 * tent(s1, s2) * u.norm_sqr().ln();
                    }
                }
            }
        }
    }
    total
}

/// Average of `G(z, ·)` over grid cell `cell`.
pub fn cell_average_green(torus: &Torus, grid: &Grid, cell: usize, z: C64) -> f64 {
    let lt = torus.lattice();
    let h = grid.h();
    let center = grid.center(torus, cell);
    let u = lt.reduce_centered(z - center);
    let (ua, ub) = lt.coords(u);
    let e1 = C64::new(h, 0.0);
    let e2 = lt.tau() * h;
    let area = h * h * lt.im();
    let zp = center + u;
    if ua.abs() <= 3.0 * h && ub.abs() <= 3.0 * h {
        let verts = quad::parallelogram(center, e1, e2);
        let sing = quad::log_dist_sq_polygon(zp, &verts);
        let smooth = quad::integrate_parallelogram(center, e1, e2, 8, |y| {
            torus.green_regular(zp - y)
        });
        (sing + smooth) / area
    } else {
        quad::integrate_parallelogram(center, e1, e2, 8, |y| torus.green0(zp - y)) / area
    }
}

/// Probability measure with constant density on each cell of a grid,
/// stored as the cell masses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    pub grid: Grid,
    pub weights: Vec<f64>,
}

impl GridMeasure {
    /// Checks non-negativity and unit mass to `1e-9`, then renormalizes.
    pub fn new(grid: Grid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} weights, got {}",
                grid.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
        }
        let mass: f64 = weights.iter().sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("total mass {mass} is not 1")));
        }
        Ok(Self {
            grid,
            weights: weights.into_iter().map(|w| w / mass).collect(),
        })
    }

    /// The flat measure `ω`.
    pub fn uniform(grid: Grid) -> Self {
        let w = 1.0 / grid.len() as f64;
        Self {
            grid,
            weights: vec![w; grid.len()],
        }
    }

    /// Uniform on a set of cells.
    pub fn uniform_on(grid: Grid, cells: &[usize]) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidInput("empty cell set".into()));
        }
        let mut weights = vec![0.0; grid.len()];
        for &c in cells {
            weights[c] = 1.0 / cells.len() as f64;
        }
        Self::new(grid, weights)
    }

    /// Bins a configuration into the grid cells.
    pub fn from_configuration(torus: &Torus, grid: Grid, cfg: &Configuration) -> Self {
        let mut weights = vec![0.0; grid.len()];
        let m = 1.0 / cfg.len() as f64;
        for z in &cfg.points {
            weights[grid.cell_of(torus, *z)] += m;
        }
        Self { grid, weights }
    }

    /// Mass-weighted mixture `(1 - t) self + t other`.
    pub fn mix(&self, other: &GridMeasure, t: f64) -> GridMeasure {
        assert_eq!(self.grid, other.grid);
        GridMeasure {
            grid: self.grid,
            weights: self
                .weights
                .iter()
                .zip(&other.weights)
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect(),
        }
    }

    pub fn total_variation(&self, other: &GridMeasure) -> f64 {
        0.5 * self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&k| self.weights[k] > 0.0).collect()
    }

    /// Writes `node,weight` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["node", "weight"])?;
        for (k, v) in self.weights.iter().enumerate() {
            w.serialize((k, v))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `node,weight` rows; absent nodes get weight zero.
    pub fn read_csv(path: &Path, grid: Grid) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut weights = vec![0.0; grid.len()];
        for rec in r.deserialize() {
            let (k, v): (usize, f64) = rec?;
            if k >= grid.len() {
                return Err(Error::InvalidInput(format!("node {k} outside the grid")));
            }
            weights[k] = v;
        }
        Self::new(grid, weights)
    }
}

/// `U^μ(z) = ∫ G(z, w) dμ(w)` at an arbitrary point.
pub fn potential_at(torus: &Torus, mu: &GridMeasure, z: C64) -> f64 {
    mu.weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(k, w)| w * cell_average_green(torus, &mu.grid, k, z))
        .sum()
}

/// Potential of the empirical measure of `cfg` at `z`. Atoms sitting at `z`
/// (closer than `1e-12`) are left out; the flag reports whether any were.
pub fn potential_empirical(torus: &Torus, cfg: &Configuration, z: C64) -> (f64, bool) {
    let n = cfg.len() as f64;
    let mut excluded = false;
    let mut acc = 0.0;
    for p in &cfg.points {
        if torus.dist(z, *p) < 1e-12 {
            excluded = true;
        } else {
            acc += torus.green(z, *p);
        }
    }
    (acc / n, excluded)
}

/// `E(μ) = ∬ G dμ dμ` for a grid measure, exact for the piecewise-constant
/// density up to the kernel quadrature.
pub fn energy(table: &KernelTable, mu: &GridMeasure) -> f64 {
    let u = table.apply(&mu.weights);
    u.iter().zip(&mu.weights).map(|(a, b)| a * b).sum()
}

/// `E_N(μ_ζ) = N^{-2} Σ_{i≠j} G(ζ_i, ζ_j)`.
pub fn discrete_energy_en(torus: &Torus, cfg: &Configuration) -> f64 {
    let n = cfg.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..i {
            acc += 2.0 * torus.green(cfg.points[i], cfg.points[j]);
        }
    }
    acc / (n * n) as f64
}

/// `log Σ_k w_k e^{x_k}` with the maximum subtracted first.
pub fn log_sum_exp(weights: &[f64], exps: &[f64]) -> f64 {
    let m = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = weights
        .iter()
        .zip(exps)
        .map(|(w, x)| w * (x - m).exp())
        .sum();
    m + s.ln()
}

/// `log ∫ exp(N U^{μ_ζ}(z) + G(z, P1)) dν(z)`.
pub fn log_partition_integral(torus: &Torus, cfg: &Configuration, p1: C64, nu: &BaseMeasure) -> f64 {
    let exps: Vec<f64> = nu
        .nodes
        .iter()
        .map(|z| cfg.points.iter().map(|p| torus.green(*z, *p)).sum::<f64>() + torus.green(*z, p1))
        .collect();
    log_sum_exp(&nu.weights, &exps)
}

/// `J_N(μ_ζ) = N^{-1} log ∫ exp(N U^{μ_ζ} + G(·, P1)) dν`, the log of the
/// `L^N(ν)` norm of `e^{U^{μ_ζ} + U^{μ_P}/N}`.
pub fn discrete_jn(torus: &Torus, cfg: &Configuration, p1: C64, nu: &BaseMeasure) -> f64 {
    log_partition_integral(torus, cfg, p1, nu) / cfg.len() as f64
}

/// `I_N(μ_ζ) = -E_N/2 + (N+1)/N J_N`.
pub fn rate_in(torus: &Torus, cfg: &Configuration, p1: C64, nu: &BaseMeasure) -> f64 {
    let n = cfg.len() as f64;
    -0.5 * discrete_energy_en(torus, cfg) + (n + 1.0) / n * discrete_jn(torus, cfg, p1, nu)
}

/// The rate functional `I(μ) = -E(μ)/2 + sup_K U^μ` on grid measures, with
/// the supremum taken over the cell averages of `U^μ` on the cells of `K`.
#[derive(Clone, Debug)]
pub struct RateFunctional {
    pub table: KernelTable,
    pub k_cells: Vec<usize>,
}

impl RateFunctional {
    pub fn new(table: KernelTable, k_cells: Vec<usize>) -> Result<Self> {
        if k_cells.is_empty() {
            return Err(Error::InvalidInput("K contains no grid cells".into()));
        }
        Ok(Self { table, k_cells })
    }

    /// `(E(μ), sup_K U^μ)`.
    pub fn parts(&self, mu: &GridMeasure) -> (f64, f64) {
        let u = self.table.apply(&mu.weights);
        let e = u.iter().zip(&mu.weights).map(|(a, b)| a * b).sum();
        let sup = self
            .k_cells
            .iter()
            .map(|&k| u[k])
            .fold(f64::NEG_INFINITY, f64::max);
        (e, sup)
    }

    pub fn rate(&self, mu: &GridMeasure) -> f64 {
        let (e, sup) = self.parts(mu);
        -0.5 * e + sup
    }

    /// `Ĩ = I - E_0`.
    pub fn rate_tilde(&self, mu: &GridMeasure, e0: f64) -> f64 {
        self.rate(mu) - e0
    }
}

/// ω-mean of a function with logarithmic singularities at `zeros`, of the
/// form `f = Σ log|z - ζ|^2 + smooth`. The domain is cut into `m × m`
/// cells; in cells close to a singularity the logarithms are integrated
/// exactly and Gauss-Legendre is applied to the remainder.
pub fn omega_mean_log_singular(
    torus: &Torus,
    f: impl Fn(C64) -> f64,
    zeros: &[C64],
    m: usize,
) -> f64 {
    let lt = torus.lattice();
    let h = 1.0 / m as f64;
    let e1 = C64::new(h, 0.0);
    let e2 = lt.tau() * h;
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            let center = lt.from_coords((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            let near: Vec<C64> = zeros
                .iter()
                .filter_map(|p| {
                    let (a, b) = lt.coords(*p - center);
                    let (a, b) = (centered(a), centered(b));
                    (a.abs() <= 1.5 * h && b.abs() <= 1.5 * h)
                        .then(|| center + lt.from_coords(a, b))
                })
                .collect();
            let verts = quad::parallelogram(center, e1, e2);
            let sing: f64 = near.iter().map(|p| quad::log_dist_sq_polygon(*p, &verts)).sum();
            let smooth = quad::integrate_parallelogram(center, e1, e2, 10, |z| {
                f(z) - near.iter().map(|p| (z - p).norm_sqr().ln()).sum::<f64>()
            });
            acc += sing + smooth;
        }
    }
    acc / torus.area()
}

/// Compares `N^{-1}(log‖S_ζ(z)‖^2 - ∫ log‖S_ζ‖^2 ω)` for the canonical
/// section, evaluated through its coefficients in the theta basis, with
/// `U^{μ_ζ}(z) + N^{-1} G(z, P1)` at the points `zs`. Returns the largest
/// error relative to `max(1, |rhs|)`.
pub fn norm_potential_identity_check(
    torus: &Torus,
    cfg: &Configuration,
    bundle: &LineBundle,
    large: &LargeSpace,
    zs: &[C64],
) -> Result<f64> {
    let n = cfg.len() as f64;
    let coords = canonical_section_coeffs(torus, cfg, bundle, large)?;
    let frame = crate::zeros::adapted_frame(&large.space, large.p0());
    let section = large.space.section(&frame * coords);
    let p1 = torus.reduce(bundle.p0 - bundle.translate);
    let log_norm = |z: C64| section.eval(z).norm_sqr().ln();
    let mut sing = cfg.points.clone();
    sing.push(p1);
    let mean = omega_mean_log_singular(torus, log_norm, &sing, 24);
    let mut worst: f64 = 0.0;
    for z in zs {
        let lhs = (log_norm(*z) - mean) / n;
        let (u, _) = potential_empirical(torus, cfg, *z);
        let rhs = u + torus.green(*z, p1) / n;
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_table_sums_to_zero() {
        let t = Torus::new(C64::new(0.2, 0.9), 1e-15).unwrap();
        let k = KernelTable::new(&t, Grid::new(8)).unwrap();
        assert!(k.total().abs() < 1e-11, "{}", k.total());
    }

    #[test]
    fn kernel_matches_direct_double_average() {
        let t = Torus::square();
        let g = Grid::new(8);
        let k = KernelTable::new(&t, g).unwrap();
        // average cell_average_green over cell q by Gauss-Legendre in z
        for (p, q) in [(0usize, 3usize), (0, 1), (0, 9)] {
            let center = g.center(&t, p);
            let h = g.h();
            let rule = quad::gauss_legendre_on(12, -0.5, 0.5);
            let mut acc = 0.0;
            for &(s, ws) in &rule {
                for &(r, wr) in &rule {
                    let z = center + C64::new(s * h, r * h);
                    acc += ws * wr * cell_average_green(&t, &g, q, z);
                }
            }
            assert!((acc - k.get(p, q)).abs() < 1e-6, "{p},{q}: {acc} vs {}", k.get(p, q));
        }
    }

    #[test]
    fn uniform_measure_has_zero_potential() {
        let t = Torus::new(C64::new(0.1, 1.3), 1e-15).unwrap();
        let g = Grid::new(8);
        let mu = GridMeasure::uniform(g);
        for z in [C64::new(0.3, 0.2), C64::new(0.77, 1.1)] {
            assert!(potential_at(&t, &mu, z).abs() < 1e-8);
        }
        let k = KernelTable::new(&t, g).unwrap();
        assert!(energy(&k, &mu).abs() < 1e-12);
    }

    #[test]
    fn two_point_discrete_energy() {
        let t = Torus::square();
        let a = C64::new(0.1, 0.2);
        let b = C64::new(0.6, 0.7);
        let cfg = Configuration::new(vec![a, b]);
        let e = discrete_energy_en(&t, &cfg);
        assert!((e - 2.0 * t.green(a, b) / 4.0).abs() < 1e-14);
    }

    #[test]
    fn omega_mean_of_green_vanishes() {
        let t = Torus::new(C64::new(0.3, 0.8), 1e-15).unwrap();
        let w = C64::new(0.41, 0.33);
        let m = omega_mean_log_singular(&t, |z| t.green(z, w), &[w], 12);
        assert!(m.abs() < 1e-9, "{m}");
    }

    #[test]
    fn norm_potential_identity_holds() {
        use crate::sections::{sample_fsh, LargeSpace, LineBundle};
        use rand::SeedableRng;
        use std::sync::Arc;
        let t = Torus::square();
        let nu = Arc::new(BaseMeasure::uniform_torus(&t, 24));
        let p0 = C64::new(0.5, 0.5);
        let large = LargeSpace::new(&t, 5, p0, nu).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let s = sample_fsh(&large, &mut rng);
        let zs = crate::zeros::find_zeros(&s.section, &t).unwrap();
        let cfg = crate::zeros::remove_partner(&t, &zs, s.p1).unwrap();
        let bundle = LineBundle::new(5, s.translate, p0).unwrap();
        let pts: Vec<C64> = (0..20).map(|k| C64::new(0.05 * k as f64 + 0.013, 0.37 + 0.031 * k as f64)).collect();
        let err = norm_potential_identity_check(&t, &cfg, &bundle, &large, &pts).unwrap();
        assert!(err < 1e-6, "{err}");
    }
}
