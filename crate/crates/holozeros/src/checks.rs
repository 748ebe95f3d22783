//! Numerical identity suites: theta and prime form, Green's function, zero
//! finder, determinant identities, the norm-potential identity and the
//! properties of the rate functional. Each returns the observed errors; the
//! caller decides on tolerances.

use crate::error::Result;
use crate::genus0::{slater_monomials, vandermonde};
use crate::grid::BaseMeasure;
use crate::jpc::{bosonization_ratio_check, slater_bergman_check};
use crate::potential::{
    norm_potential_identity_check, omega_mean_log_singular, GridMeasure, RateFunctional,
};
use crate::sections::{sample_fsh, sample_gaussian, LargeSpace, LineBundle, SectionSpace};
use crate::torus::{theta1_with_deriv, Torus};
use crate::zeros::{
    boundary_winding, find_zeros, find_zeros_with, lattice_residual, remove_partner, SectionFn,
    ZeroFinderOptions,
};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

const I: C64 = C64::new(0.0, 1.0);

fn random_point<R: Rng + ?Sized>(torus: &Torus, rng: &mut R) -> C64 {
    torus.lattice().from_coords(rng.random(), rng.random())
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThetaSuite {
    /// Largest relative error of `θ1(z+1) = -θ1(z)` and
    /// `θ1(z+τ) = -e^{-iπτ - 2iπz} θ1(z)`.
    pub quasi_periodicity: f64,
    /// Largest relative error of `E(z, w) = -E(w, z)`.
    pub antisymmetry: f64,
    /// `max |E(w, z)/(w - z) - 1|` for `|z - w| = h`.
    pub diagonal: f64,
    pub h: f64,
}

pub fn theta_suite(torus: &Torus, samples: usize, h: f64, seed: u64) -> ThetaSuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = torus.tau();
    let (mut qp, mut anti, mut diag) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples {
        let z = random_point(torus, &mut rng) - torus.lattice().from_coords(0.5, 0.5);
        let w = random_point(torus, &mut rng);
        let t = torus.theta1(z);
        qp = qp.max(rel(torus.theta1(z + 1.0), -t));
        qp = qp.max(rel(torus.theta1(z + tau), -(-I * PI * tau - 2.0 * I * PI * z).exp() * t));
        anti = anti.max(rel(torus.prime_form(z, w), -torus.prime_form(w, z)));
        let dir = C64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI);
        let z2 = w + h * dir;
        let e = torus.prime_form(w, z2) / (w - z2);
        diag = diag.max((e - 1.0).norm());
    }
    ThetaSuite {
        quasi_periodicity: qp,
        antisymmetry: anti,
        diagonal: diag,
        h,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreenSuite {
    /// `max |G(z, w) - G(w, z)|`.
    pub symmetry: f64,
    /// `max |∫ G(·, w) ω|`.
    pub mean_zero: f64,
    /// Discrete flux of `G(·, w)` out of a box around `w`, divided by `4π`,
    /// plus the `ω`-mass of the box; equals one.
    pub flux: f64,
    pub grid: usize,
}

pub fn green_suite(torus: &Torus, samples: usize, grid: usize, seed: u64) -> GreenSuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sym = 0.0f64;
    let mut mean = 0.0f64;
    for k in 0..samples {
        let z = random_point(torus, &mut rng);
        let w = random_point(torus, &mut rng);
        sym = sym.max((torus.green(z, w) - torus.green(w, z)).abs());
        if k < 4 {
            mean = mean.max(omega_mean_log_singular(torus, |u| torus.green(u, w), &[w], 16).abs());
        }
    }
    GreenSuite {
        symmetry: sym,
        mean_zero: mean,
        flux: green_flux(torus, grid),
        grid,
    }
}

/// `(4π)^{-1} ∮ ∂_n G(·, w) ds + ω(B)` for a box `B` of half the period
/// around `w`, with the normal derivative from differences of node values
/// of `G` on an `n × n` grid.
pub fn green_flux(torus: &Torus, n: usize) -> f64 {
    let lt = torus.lattice();
    let h = 1.0 / n as f64;
    let (tr, ti) = (torus.tau().re, torus.tau().im);
    let (iw, jw) = (n / 2, n / 2);
    let w = lt.from_coords((iw as f64 + 0.3) * h, (jw as f64 + 0.2) * h);
    let g = |i: isize, j: isize| torus.green(lt.from_coords(i as f64 * h, j as f64 * h), w);
    let q = (n / 4) as isize;
    let (i0, i1) = (iw as isize - q, iw as isize + q);
    let (j0, j1) = (jw as isize - q, jw as isize + q);
    let mut flux = 0.0;
    // edges where a is constant: outward flux density (|τ|^2 G_a - τr G_b)/τi per db
    for (i_in, sign) in [(i1, 1.0), (i0, -1.0)] {
        let i_out = i_in + sign as isize;
        for j in j0..=j1 {
            let ga = sign * (g(i_out, j) - g(i_in, j)) / h;
            let gb = 0.25 * (g(i_in, j + 1) - g(i_in, j - 1) + g(i_out, j + 1) - g(i_out, j - 1)) / h;
            flux += sign * ((tr * tr + ti * ti) * ga - tr * gb) / ti * h;
        }
    }
    // edges where b is constant: outward flux density (G_b - τr G_a)/τi per da
    for (j_in, sign) in [(j1, 1.0), (j0, -1.0)] {
        let j_out = j_in + sign as isize;
        for i in i0..=i1 {
            let gb = sign * (g(i, j_out) - g(i, j_in)) / h;
            let ga = 0.25 * (g(i + 1, j_in) - g(i - 1, j_in) + g(i + 1, j_out) - g(i - 1, j_out)) / h;
            flux += sign * (gb - tr * ga) / ti * h;
        }
    }
    let side = (2 * q + 1) as f64 * h;
    flux / (4.0 * PI) + side * side
}

/// `Π θ1(z - w_j)`: an entire function with exactly the zeros `w_j` in
/// each period parallelogram.
struct PlantedProduct<'a> {
    torus: &'a Torus,
    roots: Vec<C64>,
}

impl SectionFn for PlantedProduct<'_> {
    fn degree(&self) -> usize {
        self.roots.len()
    }

    fn eval(&self, z: C64) -> C64 {
        self.roots.iter().map(|w| self.torus.theta1(z - w)).product()
    }

    fn eval_with_deriv(&self, z: C64) -> (C64, C64) {
        let mut v = C64::new(1.0, 0.0);
        let mut logd = C64::new(0.0, 0.0);
        for w in &self.roots {
            let (t, d) = theta1_with_deriv(z - w, self.torus.lattice()).expect("finite");
            v *= t;
            logd += d / t;
        }
        (v, v * logd)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZeroFinderSuite {
    pub sections: usize,
    pub degree: usize,
    /// Sections whose zero count differed from the degree or that failed.
    pub wrong_count: usize,
    /// `max |winding - N|` of the boundary argument increment.
    pub winding_error: f64,
    /// Largest distance between planted and recovered zeros.
    pub plant_recover: f64,
    /// Largest lattice distance between Abel sums within one bundle.
    pub abel_spread: f64,
}

pub fn zero_finder_suite(torus: &Torus, degree: usize, sections: usize, seed: u64) -> Result<ZeroFinderSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nu = Arc::new(BaseMeasure::uniform_torus(torus, 32));
    let p0 = torus.lattice().from_coords(0.5, 0.5);
    let bundle = LineBundle::new(degree, torus.lattice().from_coords(0.21, 0.37), p0)?;
    let space = SectionSpace::new(torus, bundle, nu)?;
    let mut wrong = 0;
    let mut wind: f64 = 0.0;
    let mut sums = Vec::new();
    for _ in 0..sections {
        let s = sample_gaussian(&space, &mut rng);
        wind = wind.max((boundary_winding(&s, torus, C64::new(0.0, 0.0))? - degree as f64).abs());
        match find_zeros(&s, torus) {
            Ok(cfg) if cfg.len() == degree => sums.push(cfg.points.iter().sum::<C64>()),
            _ => wrong += 1,
        }
    }
    let spread = sums
        .iter()
        .map(|s| lattice_residual(torus, s - sums[0]))
        .fold(0.0, f64::max);
    let mut plant: f64 = 0.0;
    for _ in 0..sections.min(50) {
        let roots: Vec<C64> = (0..degree).map(|_| random_point(torus, &mut rng)).collect();
        let f = PlantedProduct { torus, roots: roots.clone() };
        let found = find_zeros_with(&f, torus, &ZeroFinderOptions::default())?;
        if found.len() != degree {
            wrong += 1;
            continue;
        }
        for r in &roots {
            let d = found.iter().map(|z| torus.dist(z.z, *r)).fold(f64::INFINITY, f64::min);
            plant = plant.max(d);
        }
    }
    Ok(ZeroFinderSuite {
        sections,
        degree,
        wrong_count: wrong,
        winding_error: wind,
        plant_recover: plant,
        abel_spread: spread,
    })
}

/// Largest relative error of the Slater/Bergman identity over random
/// configurations at each degree.
pub fn slater_suite(torus: &Torus, degrees: &[usize], configs: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nu = Arc::new(BaseMeasure::uniform_torus(torus, 32));
    let p0 = torus.lattice().from_coords(0.5, 0.5);
    let mut out = Vec::new();
    for &n in degrees {
        let t = random_point(torus, &mut rng);
        let space = SectionSpace::new(torus, LineBundle::new(n, t, p0)?, nu.clone())?;
        let mut worst: f64 = 0.0;
        for _ in 0..configs {
            let pts: Vec<C64> = (0..n).map(|_| random_point(torus, &mut rng)).collect();
            worst = worst.max(slater_bergman_check(&space, &pts)?);
        }
        out.push((n, worst));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BosonizationSuite {
    pub degree: usize,
    pub pairs: usize,
    /// `max |r_1/r_2 - 1|` over configuration pairs.
    pub genus_one: f64,
    /// `max |det(ζ_j^k) - Δ(ζ)|/|Δ(ζ)|` over random planar configurations.
    pub genus_zero: f64,
}

pub fn bosonization_suite(torus: &Torus, degree: usize, pairs: usize, seed: u64) -> Result<BosonizationSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nu = Arc::new(BaseMeasure::uniform_torus(torus, 32));
    let p0 = torus.lattice().from_coords(0.5, 0.5);
    let space = SectionSpace::new(
        torus,
        LineBundle::new(degree, random_point(torus, &mut rng), p0)?,
        nu,
    )?;
    let mut g1: f64 = 0.0;
    let mut g0: f64 = 0.0;
    for _ in 0..pairs {
        let a: Vec<C64> = (0..degree).map(|_| random_point(torus, &mut rng)).collect();
        let b: Vec<C64> = (0..degree).map(|_| random_point(torus, &mut rng)).collect();
        g1 = g1.max(bosonization_ratio_check(&space, [&a, &b])?);
        let p: Vec<C64> = (0..degree)
            .map(|_| C64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0))
            .collect();
        let d = vandermonde(&p);
        g0 = g0.max((slater_monomials(&p) - d).norm() / d.norm());
    }
    Ok(BosonizationSuite {
        degree,
        pairs,
        genus_one: g1,
        genus_zero: g0,
    })
}

/// Largest relative error of the norm-potential identity for the canonical
/// section of a sampled configuration, at `points` random evaluation points.
pub fn norm_identity_check(torus: &Torus, degree: usize, points: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nu = Arc::new(BaseMeasure::uniform_torus(torus, 24));
    let p0 = torus.lattice().from_coords(0.5, 0.5);
    let large = LargeSpace::new(torus, degree, p0, nu)?;
    let s = sample_fsh(&large, &mut rng);
    let zeros = find_zeros(&s.section, torus)?;
    let cfg = remove_partner(torus, &zeros, s.p1)?;
    let bundle = LineBundle::new(degree, s.translate, p0)?;
    let zs: Vec<C64> = (0..points).map(|_| random_point(torus, &mut rng)).collect();
    norm_potential_identity_check(torus, &cfg, &bundle, &large, &zs)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateSuite {
    /// `max (I((μ+μ')/2) - (I(μ)+I(μ'))/2)_+` over random pairs.
    pub convexity_violation: f64,
    /// `Ĩ` at the equilibrium measure.
    pub rate_at_equilibrium: f64,
    /// Smallest `Ĩ` over perturbations of the equilibrium measure.
    pub min_perturbed: f64,
}

/// Convexity of `I` on random grid measures supported in `K`, `Ĩ(ν) = 0`
/// and positivity of `Ĩ` on mixtures of `ν` with random measures.
pub fn rate_suite(rate: &RateFunctional, eq: &GridMeasure, e0: f64, pairs: usize, seed: u64) -> Result<RateSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = rate.table.grid();
    let random_measure = |rng: &mut ChaCha8Rng| -> Result<GridMeasure> {
        let mut w = vec![0.0; grid.len()];
        // sparse and dense draws alike
        let dense = rng.random::<bool>();
        for &c in &rate.k_cells {
            if dense || rng.random::<f64>() < 0.1 {
                w[c] = -rng.random::<f64>().ln();
            }
        }
        if w.iter().all(|v| *v == 0.0) {
            w[rate.k_cells[0]] = 1.0;
        }
        let s: f64 = w.iter().sum();
        GridMeasure::new(grid, w.into_iter().map(|v| v / s).collect())
    };
    let mut viol: f64 = 0.0;
    for _ in 0..pairs {
        let a = random_measure(&mut rng)?;
        let b = random_measure(&mut rng)?;
        let mid = a.mix(&b, 0.5);
        viol = viol.max(rate.rate(&mid) - 0.5 * (rate.rate(&a) + rate.rate(&b)));
    }
    let mut min_pert = f64::INFINITY;
    for k in 0..20 {
        let other = random_measure(&mut rng)?;
        let t = 0.05 + 0.9 * (k as f64 / 19.0);
        min_pert = min_pert.min(rate.rate_tilde(&eq.mix(&other, t), e0));
    }
    Ok(RateSuite {
        convexity_violation: viol.max(0.0),
        rate_at_equilibrium: rate.rate_tilde(eq, e0),
        min_perturbed: min_pert,
    })
}
