//! Equilibrium measure of a compact set `K`, its minimal rate `E_0` and
//! the capacity `Cap = e^{2 E_0}`.
//!
//! On grid measures the rate `I(μ) = -E(μ)/2 + sup_K U^μ` is minimized by
//! the maximizer of the concave quadratic `E` over probability weights on
//! the cells of `K`. Frank-Wolfe with away steps locates the support and a
//! fully corrective active-set pass solves the optimality system on it.

use crate::error::{Error, Result};
use crate::potential::{GridMeasure, RateFunctional};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Starting point of the solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Init {
    /// Uniform weights on `K`.
    Uniform,
    /// All mass on the `k`-th cell of `K`.
    Vertex(usize),
    /// Random weights from a flat Dirichlet law.
    Random(u64),
}

#[derive(Clone, Debug)]
pub struct EquilibriumOptions {
    /// Stopping tolerance on the Frank-Wolfe gap and the optimality residual.
    pub tol: f64,
    pub max_iter: usize,
    pub init: Init,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            init: Init::Uniform,
        }
    }
}

/// Frostman-type optimality residuals of a candidate equilibrium measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `max |U^ν - E(ν)|` over the support of `ν`.
    pub support_spread: f64,
    /// `max (U^ν - E(ν))_+` over the cells of `K`.
    pub excess_on_k: f64,
}

impl Certificate {
    pub fn residual(&self) -> f64 {
        self.support_spread.max(self.excess_on_k)
    }
}

#[derive(Clone, Debug)]
pub struct EquilibriumSolution {
    pub measure: GridMeasure,
    /// `E_0 = I(ν) = min I`.
    pub e0: f64,
    /// `E(ν)`; `-E(ν)` is the minimum of `-E` over probability measures on `K`.
    pub energy: f64,
    pub sup_potential: f64,
    pub fw_gap: f64,
    pub certificate: Certificate,
    pub converged: bool,
    pub iterations: usize,
    /// Whether the objective never increased across accepted steps.
    pub monotone: bool,
}

impl EquilibriumSolution {
    pub fn capacity(&self) -> f64 {
        capacity_from_e0(self.e0)
    }

    pub fn report(&self) -> EquilibriumReport {
        EquilibriumReport {
            grid: self.measure.grid.n,
            support_cells: self.measure.support().len(),
            e0: self.e0,
            capacity: self.capacity(),
            energy: self.energy,
            min_neg_energy: -self.energy,
            sup_potential: self.sup_potential,
            fw_gap: self.fw_gap,
            support_spread: self.certificate.support_spread,
            excess_on_k: self.certificate.excess_on_k,
            converged: self.converged,
            iterations: self.iterations,
        }
    }
}

/// Scalar summary written next to the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub grid: usize,
    pub support_cells: usize,
    pub e0: f64,
    pub capacity: f64,
    pub energy: f64,
    pub min_neg_energy: f64,
    pub sup_potential: f64,
    pub fw_gap: f64,
    pub support_spread: f64,
    pub excess_on_k: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// `Cap = exp(2 E_0)`.
pub fn capacity_from_e0(e0: f64) -> f64 {
    (2.0 * e0).exp()
}

/// Residuals of the optimality conditions for `mu` on the cells of `K`.
pub fn certificate(rate: &RateFunctional, mu: &GridMeasure) -> Certificate {
    let u = rate.table.apply(&mu.weights);
    let e: f64 = u.iter().zip(&mu.weights).map(|(a, b)| a * b).sum();
    let wmax = mu.weights.iter().cloned().fold(0.0, f64::max);
    let support_spread = mu
        .weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 1e-10 * wmax)
        .map(|(k, _)| (u[k] - e).abs())
        .fold(0.0, f64::max);
    let excess_on_k = rate
        .k_cells
        .iter()
        .map(|&k| (u[k] - e).max(0.0))
        .fold(0.0, f64::max);
    Certificate {
        support_spread,
        excess_on_k,
    }
}

pub fn solve_equilibrium(rate: &RateFunctional, opts: &EquilibriumOptions) -> Result<EquilibriumSolution> {
    let cells = &rate.k_cells;
    let m = cells.len();
    if m < 2 {
        return Err(Error::InvalidInput("K must contain at least two grid cells".into()));
    }
    let kmat = rate.table.matrix_on(cells);
    let mut w = initial_weights(m, opts.init)?;
    let mut u = &kmat * &w;
    // objective F(w) = -wᵀ M w / 2, minimized
    let objective = |w: &DVector<f64>, u: &DVector<f64>| -0.5 * w.dot(u);
    let mut f = objective(&w, &u);
    let mut monotone = true;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let e = w.dot(&u);
        let (s, us) = argmax(u.iter().cloned().enumerate());
        gap = us - e;
        if gap <= opts.tol {
            break;
        }
        let (a, ua) = argmax(
            u.iter()
                .enumerate()
                .filter(|(i, _)| w[*i] > 0.0)
                .map(|(i, v)| (i, -v)),
        );
        let ua = -ua;
        // directional derivatives of -F along the two candidates
        let fw_slope = us - e;
        let away_slope = e - ua;
        let (dir, gmax, slope) = if fw_slope >= away_slope || w[a] >= 1.0 {
            (Step::Toward(s), 1.0, fw_slope)
        } else {
            (Step::Away(a), w[a] / (1.0 - w[a]), away_slope)
        };
        // M d and dᵀ M d for d = e_s - w or w - e_a
        let md = match dir {
            Step::Toward(s) => kmat.column(s) - &u,
            Step::Away(a) => &u - kmat.column(a),
        };
        let dmd = match dir {
            Step::Toward(s) => md[s] - w.dot(&md),
            Step::Away(a) => w.dot(&md) - md[a],
        };
        let gamma = if dmd < 0.0 {
            (slope / -dmd).min(gmax)
        } else {
            gmax
        };
        if gamma <= 0.0 {
            break;
        }
        match dir {
            Step::Toward(s) => {
                w *= 1.0 - gamma;
                w[s] += gamma;
            }
            Step::Away(a) => {
                w *= 1.0 + gamma;
                w[a] -= gamma;
                if w[a] < 1e-15 {
                    w[a] = 0.0;
                }
            }
        }
        u += md * gamma;
        let fnew = objective(&w, &u);
        if fnew > f + 1e-13 * (1.0 + f.abs()) {
            monotone = false;
        }
        f = fnew;
    }
    let polished = polish(&kmat, &w, opts.tol)?;
    let converged = polished.is_some();
    if let Some(wp) = polished {
        let up = &kmat * &wp;
        let fp = objective(&wp, &up);
        if fp > f + 1e-12 * (1.0 + f.abs()) {
            monotone = false;
        }
        w = wp;
    }
    let mut weights = vec![0.0; rate.table.grid().len()];
    for (i, &c) in cells.iter().enumerate() {
        weights[c] = w[i].max(0.0);
    }
    let total: f64 = weights.iter().sum();
    let measure = GridMeasure::new(rate.table.grid(), weights.iter().map(|v| v / total).collect())?;
    let (energy, sup_potential) = rate.parts(&measure);
    let cert = certificate(rate, &measure);
    Ok(EquilibriumSolution {
        e0: -0.5 * energy + sup_potential,
        energy,
        sup_potential,
        fw_gap: gap.min(sup_potential - energy),
        certificate: cert,
        converged: converged && cert.residual() <= opts.tol.max(1e-9),
        iterations,
        monotone,
        measure,
    })
}

#[derive(Clone, Copy)]
enum Step {
    Toward(usize),
    Away(usize),
}

fn argmax(it: impl Iterator<Item = (usize, f64)>) -> (usize, f64) {
    it.fold((usize::MAX, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc })
}

fn initial_weights(m: usize, init: Init) -> Result<DVector<f64>> {
    Ok(match init {
        Init::Uniform => DVector::from_element(m, 1.0 / m as f64),
        Init::Vertex(k) => {
            if k >= m {
                return Err(Error::InvalidInput(format!("vertex {k} outside K ({m} cells)")));
            }
            let mut w = DVector::zeros(m);
            w[k] = 1.0;
            w
        }
        Init::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut w = DVector::from_fn(m, |_, _| -(1.0 - rng.random::<f64>()).ln());
            let s = w.sum();
            w /= s;
            w
        }
    })
}

// Primal active-set method for max wᵀMw/2 on the simplex, started from the
// feasible point `w0`. Returns `None` if it does not settle.
fn polish(kmat: &DMatrix<f64>, w0: &DVector<f64>, tol: f64) -> Result<Option<DVector<f64>>> {
    let m = w0.len();
    let mut w = w0.clone();
    let mut active: Vec<bool> = w.iter().map(|v| *v > 0.0).collect();
    for _ in 0..2000 {
        let s: Vec<usize> = (0..m).filter(|&i| active[i]).collect();
        let x = solve_on_support(kmat, &s)?;
        if s.iter().any(|&i| x[i] <= 0.0) {
            // move from w toward x until the first blocking weight reaches zero
            let mut alpha: f64 = 1.0;
            for &i in &s {
                if x[i] <= 0.0 {
                    alpha = alpha.min(w[i] / (w[i] - x[i]));
                }
            }
            for &i in &s {
                w[i] += alpha * (x[i] - w[i]);
                if x[i] <= 0.0 && w[i] <= 1e-15 {
                    w[i] = 0.0;
                    active[i] = false;
                }
            }
            continue;
        }
        w = x;
        let u = kmat * &w;
        let e = w.dot(&u);
        let violators: Vec<usize> = (0..m)
            .filter(|&i| !active[i] && u[i] - e > tol)
            .collect();
        if violators.is_empty() {
            return Ok(Some(w));
        }
        // add the worst few violators at once
        let mut v = violators;
        v.sort_by(|&a, &b| u[b].partial_cmp(&u[a]).unwrap());
        for &i in v.iter().take(16.max(s.len() / 4)) {
            active[i] = true;
        }
    }
    Ok(None)
}

// Solves M_SS x = λ 1, Σ x = 1 and scatters x into a full-length vector.
fn solve_on_support(kmat: &DMatrix<f64>, s: &[usize]) -> Result<DVector<f64>> {
    let k = s.len();
    let mut a = DMatrix::<f64>::zeros(k + 1, k + 1);
    for (p, &i) in s.iter().enumerate() {
        for (q, &j) in s.iter().enumerate() {
            a[(p, q)] = kmat[(i, j)];
        }
        a[(p, k)] = -1.0;
        a[(k, p)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NoConvergence("singular optimality system".into()))?;
    let mut x = DVector::zeros(kmat.nrows());
    for (p, &i) in s.iter().enumerate() {
        x[i] = sol[p];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, Region};
    use crate::potential::KernelTable;
    use crate::torus::Torus;

    fn disk_rate(n: usize, r: f64) -> RateFunctional {
        let t = Torus::square();
        let g = Grid::new(n);
        let k = Region::Disk {
            center: [0.5, 0.5],
            radius: r,
        }
        .cells(&t, &g);
        RateFunctional::new(KernelTable::new(&t, g).unwrap(), k).unwrap()
    }

    #[test]
    fn full_torus_gives_flat_measure() {
        let t = Torus::square();
        let g = Grid::new(12);
        let rate = RateFunctional::new(KernelTable::new(&t, g).unwrap(), (0..g.len()).collect()).unwrap();
        let opts = EquilibriumOptions {
            init: Init::Vertex(7),
            ..Default::default()
        };
        let sol = solve_equilibrium(&rate, &opts).unwrap();
        assert!(sol.measure.total_variation(&GridMeasure::uniform(g)) < 1e-8);
        assert!(sol.e0.abs() < 1e-10);
        assert!(sol.converged && sol.monotone);
    }

    #[test]
    fn disk_certificate_and_uniqueness() {
        let rate = disk_rate(16, 0.25);
        let a = solve_equilibrium(&rate, &EquilibriumOptions::default()).unwrap();
        let b = solve_equilibrium(
            &rate,
            &EquilibriumOptions {
                init: Init::Random(9),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(a.certificate.residual() < 1e-8, "{:?}", a.certificate);
        assert!(a.measure.total_variation(&b.measure) < 1e-6);
        assert!(a.e0 < 0.0);
        // E_0 = E(ν)/2 at the optimum
        assert!((a.e0 - 0.5 * a.energy).abs() < 1e-8);
    }

    #[test]
    fn capacity_is_monotone_in_k() {
        let small = solve_equilibrium(&disk_rate(16, 0.15), &EquilibriumOptions::default()).unwrap();
        let big = solve_equilibrium(&disk_rate(16, 0.3), &EquilibriumOptions::default()).unwrap();
        assert!(small.capacity() < big.capacity());
    }
}
