//! Unnormalized joint densities of zeros and the determinant identities
//! behind them, plus Monte Carlo validation of the densities by cell counts.
//!
//! Densities are returned as logarithms with respect to Lebesgue measure on
//! `X^N` and are only defined up to an additive constant, so every check
//! compares differences or ratios.

use crate::ensemble::{stream_rng, Draw};
use crate::error::{Error, Result};
use crate::grid::BaseMeasure;
use crate::potential::log_partition_integral;
use crate::quad::gauss_legendre_on;
use crate::sections::{LargeSpace, SectionSpace};
use crate::torus::Torus;
use crate::zeros::Configuration;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::genus0::jpc_density_g0;

fn has_coincidence(torus: &Torus, pts: &[C64]) -> bool {
    (0..pts.len()).any(|i| (0..i).any(|j| torus.dist(pts[i], pts[j]) < 1e-13))
}

fn pair_green_sum(torus: &Torus, cfg: &Configuration) -> f64 {
    let p = &cfg.points;
    let mut acc = 0.0;
    for i in 0..p.len() {
        for j in 0..i {
            acc += torus.green(p[i], p[j]);
        }
    }
    acc
}

/// Partner point `P1 = (N+1) P0 - Σζ`.
pub fn partner(torus: &Torus, cfg: &Configuration, p0: C64) -> C64 {
    crate::zeros::abel_partner(torus, cfg, p0)
}

/// The configuration-dependent factor kept from `F_N` in the projective
/// linear density:
/// `Σ_k G(ζ_k, P1) - log‖θ(P1 - P0 - Δ)‖^2 + log‖E(P1, P0)‖^2`.
/// The last two terms cancel up to a constant on the flat torus.
pub fn log_f_tilde(torus: &Torus, cfg: &Configuration, p0: C64) -> f64 {
    let p1 = partner(torus, cfg, p0);
    let g: f64 = cfg.points.iter().map(|z| torus.green(*z, p1)).sum();
    let theta = torus.log_theta00_norm(p1 - p0 - torus.riemann_constant());
    g - theta + torus.log_point_norm(p1, p0)
}

/// Log-density of the projective linear ensemble:
/// `Σ_{i<j} G(ζ_i, ζ_j) - (N+1) log ∫ e^{N U^{μ_ζ} + G(·, P1)} dν + log F̃_N`.
/// Returns `-∞` for coincident points, including `ζ_k = P1`.
pub fn jpc_density_g1_pl(torus: &Torus, cfg: &Configuration, p0: C64, nu: &BaseMeasure) -> f64 {
    let p1 = partner(torus, cfg, p0);
    let mut all = cfg.points.clone();
    all.push(p1);
    if has_coincidence(torus, &all) {
        return f64::NEG_INFINITY;
    }
    let n = cfg.len() as f64;
    pair_green_sum(torus, cfg) - (n + 1.0) * log_partition_integral(torus, cfg, p1, nu)
        + log_f_tilde(torus, cfg, p0)
}

/// `log 𝒥̃_N`: the factor by which the Fubini-Study-fiber density differs
/// from the projective linear core `Σ_{i<j} G - (N+1) log ∫(...)`, namely
/// `log ∫ e^{N U^{μ_ζ} + G(·, P1)} dν + log B(P1, P1)` with `B` the Bergman
/// density of the large space.
pub fn log_j_tilde(torus: &Torus, cfg: &Configuration, large: &LargeSpace) -> f64 {
    let p1 = partner(torus, cfg, large.p0());
    log_partition_integral(torus, cfg, p1, large.space.measure()) + large.space.bergman_density(p1).ln()
}

/// Log-density of the Fubini-Study-fiber ensemble:
/// `Σ_{i<j} G(ζ_i, ζ_j) - N log ∫ e^{N U^{μ_ζ} + G(·, P1)} dν + log B(P1, P1)`.
pub fn jpc_density_g1_fsh(torus: &Torus, cfg: &Configuration, large: &LargeSpace) -> f64 {
    if has_coincidence(torus, &cfg.points) {
        return f64::NEG_INFINITY;
    }
    let p1 = partner(torus, cfg, large.p0());
    let n = cfg.len() as f64;
    pair_green_sum(torus, cfg)
        - n * log_partition_integral(torus, cfg, p1, large.space.measure())
        + large.space.bergman_density(p1).ln()
}

/// `(FSH - PL) - (log 𝒥̃_N - log F̃_N)` at one configuration.
pub fn fsh_pl_consistency(torus: &Torus, cfg: &Configuration, large: &LargeSpace) -> f64 {
    let nu = large.space.measure();
    let p0 = large.p0();
    let diff = jpc_density_g1_fsh(torus, cfg, large) - jpc_density_g1_pl(torus, cfg, p0, nu);
    diff - (log_j_tilde(torus, cfg, large) - log_f_tilde(torus, cfg, p0))
}

/// `|det f_j(ζ_k)|^2 / det⟨f_j, f_k⟩` against `det B(ζ_j, ζ_k)` for the raw
/// basis of `space`; returns the relative error.
pub fn slater_bergman_check(space: &SectionSpace, points: &[C64]) -> Result<f64> {
    let n = space.dim();
    if points.len() != n {
        return Err(Error::InvalidInput(format!(
            "need {n} points for a space of dimension {n}, got {}",
            points.len()
        )));
    }
    let raw: Vec<_> = points.iter().map(|z| space.eval_raw(*z)).collect();
    let slater = DMatrix::from_fn(n, n, |j, k| raw[k][j]).determinant();
    let lhs = slater.norm_sqr() / space.gram().determinant().re;
    let bmat = DMatrix::from_fn(n, n, |j, k| space.bergman(points[j], points[k]));
    let rhs = bmat.determinant().re;
    Ok((lhs - rhs).abs() / rhs.abs().max(lhs.abs()).max(f64::MIN_POSITIVE))
}

/// Log of the right side of the genus-one bosonization formula for the
/// Slater determinant of a degree-`N` bundle with zero sum `D`:
/// `Σ_{i<j} G(ζ_i, ζ_j) + log‖θ1(Σζ - D)‖^2`.
pub fn log_bosonization_rhs(torus: &Torus, points: &[C64], zero_sum: C64) -> f64 {
    let cfg = Configuration::new(points.to_vec());
    let s: C64 = points.iter().sum();
    pair_green_sum(torus, &cfg) + torus.log_point_norm(s - zero_sum, C64::new(0.0, 0.0))
}

/// `log |det ψ_j(ζ_k)|^2` for the orthonormal basis of `space`.
pub fn log_slater_orthonormal(space: &SectionSpace, points: &[C64]) -> f64 {
    let n = space.dim();
    let vals: Vec<_> = points.iter().map(|z| space.eval_on(*z)).collect();
    DMatrix::from_fn(n, n, |j, k| vals[k][j]).determinant().norm_sqr().ln()
}

/// Compares `|det ψ_j(ζ_k)|^2 / RHS` at two configurations; the unknown
/// constant of the bosonization formula cancels, so `|r_1/r_2 - 1|` should
/// vanish.
pub fn bosonization_ratio_check(space: &SectionSpace, configs: [&[C64]; 2]) -> Result<f64> {
    let torus = space.torus();
    let d = space.bundle().zero_sum(torus);
    let mut logs = [0.0; 2];
    for (k, pts) in configs.iter().enumerate() {
        if pts.len() != space.dim() {
            return Err(Error::InvalidInput("configuration size differs from the dimension".into()));
        }
        logs[k] = log_slater_orthonormal(space, pts) - log_bosonization_rhs(torus, pts, d);
    }
    Ok(((logs[0] - logs[1]).exp() - 1.0).abs())
}

/// Genus-zero reduction: `|det(ζ_j^k) - Δ(ζ)| / |Δ(ζ)|`.
pub fn bosonization_g0_check(points: &[C64]) -> f64 {
    let d = crate::genus0::vandermonde(points);
    (crate::genus0::slater_monomials(points) - d).norm() / d.norm()
}

/// Product cell `A × B` in the coordinates of a pair of points, with `A`
/// and `B` axis-aligned squares that do not overlap. For the torus the
/// coordinates are lattice coordinates, for the plane real and imaginary
/// parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCell {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub side: f64,
}

impl PairCell {
    fn contains_ordered(&self, p: [f64; 2], q: [f64; 2]) -> bool {
        let inside = |lo: [f64; 2], x: [f64; 2]| {
            x[0] >= lo[0] && x[0] < lo[0] + self.side && x[1] >= lo[1] && x[1] < lo[1] + self.side
        };
        inside(self.a, p) && inside(self.b, q)
    }

    /// Whether the unordered pair `{p, q}` lies in the cell.
    pub fn contains(&self, p: [f64; 2], q: [f64; 2]) -> bool {
        self.contains_ordered(p, q) || self.contains_ordered(q, p)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellRow {
    pub cell: PairCell,
    pub count: u64,
    /// Predicted mass relative to the reference cell.
    pub predicted_ratio: f64,
    /// Conditional binomial z-score against the reference cell.
    pub z: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McValidation {
    pub ensemble: String,
    pub samples: u64,
    pub failures: u64,
    pub seed: u64,
    pub reference: CellRow,
    pub rows: Vec<CellRow>,
    pub max_abs_z: f64,
    /// Largest log-density seen among checked samples was finite.
    pub finite_on_samples: bool,
}

impl McValidation {
    pub fn passed(&self, z_max: f64) -> bool {
        self.max_abs_z <= z_max && self.finite_on_samples
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["a_x", "a_y", "b_x", "b_y", "side", "count", "predicted_ratio", "z", "reference"])?;
        let mut put = |r: &CellRow, reference: bool| -> Result<()> {
            w.serialize((
                r.cell.a[0], r.cell.a[1], r.cell.b[0], r.cell.b[1], r.cell.side, r.count,
                r.predicted_ratio, r.z, reference,
            ))?;
            Ok(())
        };
        put(&self.reference, true)?;
        for r in &self.rows {
            put(r, false)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Settings of a cell-count validation.
#[derive(Clone, Debug)]
pub struct McOptions {
    pub samples: u64,
    pub seed: u64,
    pub reference: PairCell,
    pub cells: Vec<PairCell>,
    /// Gauss-Legendre points per coordinate for the predicted cell masses.
    pub order: usize,
    /// Number of samples whose log-density is checked for finiteness.
    pub finite_checks: u64,
}

/// Counts unordered pairs drawn by `draw` in the cells and compares with the
/// masses predicted by `log_density`, both expressed in the same pair
/// coordinates. `draw` returns `None` when the zero finder failed.
pub fn mc_validate(
    name: &str,
    opts: &McOptions,
    draw: impl Fn(u64) -> Option<[[f64; 2]; 2]> + Sync,
    log_density: impl Fn([f64; 2], [f64; 2]) -> f64 + Sync,
) -> Result<McValidation> {
    let cells: Vec<PairCell> = std::iter::once(opts.reference).chain(opts.cells.iter().cloned()).collect();
    let (counts, failures, finite) = (0..opts.samples)
        .into_par_iter()
        .fold(
            || (vec![0u64; cells.len()], 0u64, true),
            |(mut c, mut f, mut fin), i| {
                match draw(i) {
                    Some([p, q]) => {
                        for (k, cell) in cells.iter().enumerate() {
                            if cell.contains(p, q) {
                                c[k] += 1;
                            }
                        }
                        if i < opts.finite_checks && !log_density(p, q).is_finite() {
                            fin = false;
                        }
                    }
                    None => f += 1,
                }
                (c, f, fin)
            },
        )
        .reduce(
            || (vec![0u64; cells.len()], 0u64, true),
            |(a, fa, xa), (b, fb, xb)| {
                (a.iter().zip(&b).map(|(x, y)| x + y).collect(), fa + fb, xa && xb)
            },
        );
    if failures * 100 > opts.samples {
        return Err(Error::ZeroFinder(format!(
            "{failures} of {} samples failed",
            opts.samples
        )));
    }
    let logs: Vec<Vec<f64>> = cells
        .par_iter()
        .map(|c| cell_log_values(c, opts.order, &log_density))
        .collect();
    let top = logs
        .iter()
        .flatten()
        .cloned()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let rule = gauss_legendre_on(opts.order, 0.0, 1.0);
    let masses: Vec<f64> = logs
        .iter()
        .map(|vals| {
            let mut acc = 0.0;
            let q = rule.len();
            for (idx, v) in vals.iter().enumerate() {
                let (i0, i1, i2, i3) = (idx % q, (idx / q) % q, (idx / (q * q)) % q, idx / (q * q * q));
                let w = rule[i0].1 * rule[i1].1 * rule[i2].1 * rule[i3].1;
                acc += w * (v - top).exp();
            }
            acc
        })
        .collect();
    let row = |k: usize| -> CellRow {
        let (nc, nr) = (counts[k] as f64, counts[0] as f64);
        let p = masses[k] / (masses[k] + masses[0]);
        let n = nc + nr;
        let z = if k == 0 { 0.0 } else { (nc - n * p) / (n * p * (1.0 - p)).sqrt() };
        CellRow {
            cell: cells[k],
            count: counts[k],
            predicted_ratio: masses[k] / masses[0],
            z,
        }
    };
    let rows: Vec<CellRow> = (1..cells.len()).map(row).collect();
    let max_abs_z = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    Ok(McValidation {
        ensemble: name.to_string(),
        samples: opts.samples,
        failures,
        seed: opts.seed,
        reference: row(0),
        rows,
        max_abs_z,
        finite_on_samples: finite,
    })
}

// Log-density at the tensor Gauss-Legendre nodes of the cell A × B (the
// ordering A, B is enough since the density is symmetric).
fn cell_log_values(c: &PairCell, order: usize, f: &(impl Fn([f64; 2], [f64; 2]) -> f64 + Sync)) -> Vec<f64> {
    let rule = gauss_legendre_on(order, 0.0, 1.0);
    let q = rule.len();
    let mut out = Vec::with_capacity(q * q * q * q);
    for i3 in 0..q {
        for i2 in 0..q {
            for i1 in 0..q {
                for i0 in 0..q {
                    let p = [c.a[0] + c.side * rule[i0].0, c.a[1] + c.side * rule[i1].0];
                    let r = [c.b[0] + c.side * rule[i2].0, c.b[1] + c.side * rule[i3].0];
                    out.push(f(p, r));
                }
            }
        }
    }
    out
}

fn cells_of(side: f64, pairs: &[([f64; 2], [f64; 2])]) -> Vec<PairCell> {
    pairs.iter().map(|&(a, b)| PairCell { a, b, side }).collect()
}

/// Reference cell and comparison cells in lattice coordinates for the
/// two-point torus validations. No two boxes of a cell touch.
pub fn default_torus_cells() -> (PairCell, Vec<PairCell>) {
    let reference = PairCell { a: [0.2, 0.3], b: [0.6, 0.7], side: 0.2 };
    let cells = cells_of(
        0.2,
        &[
            ([0.1, 0.1], [0.5, 0.5]),
            ([0.0, 0.6], [0.5, 0.1]),
            ([0.3, 0.3], [0.7, 0.7]),
            ([0.8, 0.2], [0.2, 0.8]),
            ([0.1, 0.6], [0.6, 0.2]),
        ],
    );
    (reference, cells)
}

/// Reference cell and comparison cells in the plane for zeros of Gaussian
/// quadratics orthonormal on the unit circle.
pub fn default_plane_cells() -> (PairCell, Vec<PairCell>) {
    let reference = PairCell { a: [0.5, -0.25], b: [-1.0, -0.25], side: 0.5 };
    let cells = cells_of(
        0.5,
        &[
            ([-0.25, 0.5], [-0.25, -1.0]),
            ([0.5, -0.25], [-0.25, 0.5]),
            ([0.0, 0.0], [-0.5, -0.5]),
            ([1.0, 0.0], [-1.0, -0.5]),
        ],
    );
    (reference, cells)
}

/// Pair coordinates of a two-point draw on the torus.
pub fn torus_pair(torus: &Torus, d: &Draw) -> [[f64; 2]; 2] {
    let c = |z: C64| {
        let (a, b) = torus.lattice().coords(torus.reduce(z));
        [a, b]
    };
    [c(d.cfg.points[0]), c(d.cfg.points[1])]
}

/// Runs [`mc_validate`] for a two-point torus ensemble.
pub fn mc_validate_torus(
    ensemble: &crate::ensemble::Ensemble,
    opts: &McOptions,
    log_density: impl Fn(&Configuration) -> f64 + Sync,
) -> Result<McValidation> {
    if ensemble.degree() != 2 {
        return Err(Error::InvalidInput("cell validation is for two-point configurations".into()));
    }
    let torus = &ensemble.torus;
    let lt = torus.lattice();
    let name = format!("{:?}", ensemble.kind);
    mc_validate(
        &name,
        opts,
        |i| {
            let mut rng = stream_rng(opts.seed, i);
            ensemble.sample(&mut rng).ok().map(|d| torus_pair(torus, &d))
        },
        |p, q| {
            let cfg = Configuration::new(vec![lt.from_coords(p[0], p[1]), lt.from_coords(q[0], q[1])]);
            log_density(&cfg)
        },
    )
}

/// Runs [`mc_validate`] for zeros of Gaussian quadratic polynomials.
pub fn mc_validate_g0(space: &crate::genus0::PolySpace, opts: &McOptions) -> Result<McValidation> {
    if space.n != 2 {
        return Err(Error::InvalidInput("cell validation is for two-point configurations".into()));
    }
    mc_validate(
        "Genus0",
        opts,
        |i| {
            let mut rng = stream_rng(opts.seed, i);
            let c = space.sample_gaussian(&mut rng);
            let r = crate::genus0::roots(&c).ok()?;
            Some([[r[0].re, r[0].im], [r[1].re, r[1].im]])
        },
        |p, q| jpc_density_g0(space, &[C64::new(p[0], p[1]), C64::new(q[0], q[1])]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sections::LineBundle;
    use std::sync::Arc;

    #[test]
    fn slater_bergman_identity() {
        let t = Torus::new(C64::new(0.2, 1.1), 1e-16).unwrap();
        let nu = Arc::new(BaseMeasure::uniform_torus(&t, 24));
        let b = LineBundle::new(4, C64::new(0.3, 0.2), C64::new(0.5, 0.5)).unwrap();
        let s = SectionSpace::new(&t, b, nu).unwrap();
        let pts = [C64::new(0.1, 0.2), C64::new(0.7, 0.3), C64::new(0.4, 0.9), C64::new(0.9, 0.8)];
        assert!(slater_bergman_check(&s, &pts).unwrap() < 1e-10);
    }

    #[test]
    fn bosonization_constant_is_configuration_independent() {
        let t = Torus::new(C64::new(0.2, 1.1), 1e-16).unwrap();
        let nu = Arc::new(BaseMeasure::new(&t, crate::grid::MeasureKind::UniformDisk { center: [0.5, 0.5], radius: 0.4 }, 24).unwrap());
        let b = LineBundle::new(3, C64::new(0.3, 0.2), C64::new(0.5, 0.5)).unwrap();
        let s = SectionSpace::new(&t, b, nu).unwrap();
        let c1 = [C64::new(0.1, 0.2), C64::new(0.7, 0.3), C64::new(0.4, 0.9)];
        let c2 = [C64::new(0.15, 0.6), C64::new(0.33, 0.31), C64::new(0.81, 0.05)];
        let e = bosonization_ratio_check(&s, [&c1, &c2]).unwrap();
        assert!(e < 1e-8, "{e}");
    }

    #[test]
    fn pl_factor_theta_terms_are_constant() {
        let t = Torus::new(C64::new(0.2, 1.1), 1e-16).unwrap();
        let p0 = C64::new(0.5, 0.5);
        let f = |p1: C64| t.log_point_norm(p1, p0) - t.log_theta00_norm(p1 - p0 - t.riemann_constant());
        let r = f(C64::new(0.1, 0.2));
        for p in [C64::new(0.8, 0.1), C64::new(0.33, 0.9)] {
            assert!((f(p) - r).abs() < 1e-10);
        }
    }

    #[test]
    fn genus_zero_bosonization_is_exact() {
        let pts = [C64::new(0.3, -0.2), C64::new(-1.0, 0.5), C64::new(0.1, 0.9), C64::new(0.7, 0.7)];
        assert!(bosonization_g0_check(&pts) < 1e-12);
    }
}
