//! Zeros of sections: argument-principle quadtree search with Newton
//! refinement, configurations and empirical measures, Abel sums, and the
//! zeros-to-coefficients map.

use crate::error::{Error, Result};
use crate::sections::{LargeSpace, LineBundle, RandomSection, SectionSpace};
use crate::torus::Torus;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Holomorphic function on the plane whose zeros are counted inside a
/// fundamental domain. `eval` may include a positive weight; `eval_with_deriv`
/// returns the value and the holomorphic derivative with the same weight.
pub trait SectionFn {
    /// Number of zeros in a fundamental domain.
    fn degree(&self) -> usize;
    fn eval(&self, z: C64) -> C64;
    fn eval_with_deriv(&self, z: C64) -> (C64, C64);
}

impl SectionFn for RandomSection {
    fn degree(&self) -> usize {
        RandomSection::degree(self)
    }
    fn eval(&self, z: C64) -> C64 {
        RandomSection::eval(self, z)
    }
    fn eval_with_deriv(&self, z: C64) -> (C64, C64) {
        RandomSection::eval_with_deriv(self, z)
    }
}

/// Multiset of points of the torus, stored reduced to the fundamental
/// domain. A zero of multiplicity `k` appears `k` times and is flagged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub points: Vec<C64>,
    pub multiple: Vec<bool>,
}

impl Configuration {
    pub fn new(points: Vec<C64>) -> Self {
        let multiple = vec![false; points.len()];
        Self { points, multiple }
    }

    pub fn reduced(torus: &Torus, points: &[C64]) -> Self {
        Self::new(points.iter().map(|z| torus.reduce(*z)).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn empirical(&self) -> EmpiricalMeasure<'_> {
        EmpiricalMeasure { cfg: self }
    }
}

/// Uniform atoms of mass `1/N` at the points of a configuration.
#[derive(Clone, Copy, Debug)]
pub struct EmpiricalMeasure<'a> {
    pub cfg: &'a Configuration,
}

impl EmpiricalMeasure<'_> {
    pub fn atoms(&self) -> impl Iterator<Item = (C64, f64)> + '_ {
        let w = 1.0 / self.cfg.len() as f64;
        self.cfg.points.iter().map(move |z| (*z, w))
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms().map(|(_, w)| w).sum()
    }
}

/// `Σ (ζ_j - P0)` reduced modulo the lattice.
pub fn abel_sum(torus: &Torus, cfg: &Configuration, p0: C64) -> C64 {
    let s: C64 = cfg.points.iter().map(|z| z - p0).sum();
    torus.reduce(s)
}

/// The point `P1` with `ζ_1 + ... + ζ_N + P1 ≡ (N+1) P0`.
pub fn abel_partner(torus: &Torus, cfg: &Configuration, p0: C64) -> C64 {
    let s: C64 = cfg.points.iter().sum();
    torus.reduce((cfg.len() + 1) as f64 * p0 - s)
}

/// Distance between two points of the lattice quotient of the real plane
/// spanned by `1` and `τ`; used to compare Abel sums.
pub fn lattice_residual(torus: &Torus, u: C64) -> f64 {
    torus.dist(u, C64::new(0.0, 0.0))
}

/// Tuning of the zero finder.
#[derive(Clone, Debug)]
pub struct ZeroFinderOptions {
    /// Largest allowed argument jump between boundary samples.
    pub max_arg_step: f64,
    /// Cells smaller than this (in lattice units) stop subdividing.
    pub min_cell: f64,
    /// Relative residual `|s(ζ)| / scale` accepted after Newton.
    pub residual_tol: f64,
    pub newton_iters: usize,
    pub max_restarts: usize,
}

impl Default for ZeroFinderOptions {
    fn default() -> Self {
        Self {
            max_arg_step: PI / 3.0,
            min_cell: 1e-9,
            residual_tol: 1e-10,
            newton_iters: 60,
            max_restarts: 12,
        }
    }
}

/// A zero with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Zero {
    pub z: C64,
    pub multiplicity: usize,
}

#[derive(Debug)]
enum Fail {
    OnEdge,
    Inconsistent,
    Budget,
}

struct Finder<'a, F: SectionFn + ?Sized> {
    f: &'a F,
    torus: &'a Torus,
    origin: C64,
    opts: &'a ZeroFinderOptions,
    scale: f64,
    // longest boundary segment accepted without bisection, in lattice units
    max_seg: f64,
    // bound the full log-derivative at segment ends, not only its phase part
    careful: bool,
    budget: usize,
    evals: usize,
}

impl<F: SectionFn + ?Sized> Finder<'_, F> {
    fn z(&self, a: f64, b: f64) -> C64 {
        self.origin + self.torus.lattice().from_coords(a, b)
    }

    fn eval(&mut self, a: f64, b: f64) -> C64 {
        self.evals += 1;
        self.f.eval(self.z(a, b))
    }

    fn eval_d(&mut self, a: f64, b: f64) -> (C64, C64) {
        self.evals += 1;
        self.f.eval_with_deriv(self.z(a, b))
    }

    // Argument increment along the segment between two lattice-coordinate
    // points. Segments are bisected until both the observed increment and
    // the increments predicted from f'/f at either end are small, which
    // guards against aliasing a full turn.
    fn segment(
        &mut self,
        p: (f64, f64),
        q: (f64, f64),
        fp: (C64, C64),
        fq: (C64, C64),
        depth: usize,
    ) -> std::result::Result<f64, Fail> {
        let tiny = 1e-13 * self.scale;
        if fp.0.norm() <= tiny || fq.0.norm() <= tiny {
            return Err(Fail::OnEdge);
        }
        let dz = self.z(q.0, q.1) - self.z(p.0, p.1);
        let d = (fq.0 / fp.0).arg();
        let rp = (fp.1 / fp.0 * dz).im;
        let rq = (fq.1 / fq.0 * dz).im;
        let step = self.opts.max_arg_step;
        let len = (q.0 - p.0).abs().max((q.1 - p.1).abs());
        // Two zeros beside a segment can add a full turn that the phase
        // tests miss; the modulus of f'/f·dz also sees them.
        let close = self.careful && ((fp.1 / fp.0 * dz).norm() > step || (fq.1 / fq.0 * dz).norm() > step);
        if len <= self.max_seg && d.abs() <= step && rp.abs() <= step && rq.abs() <= step && !close {
            return Ok(d);
        }
        if depth > 48 {
            return Err(Fail::OnEdge);
        }
        let m = (0.5 * (p.0 + q.0), 0.5 * (p.1 + q.1));
        let fm = self.eval_d(m.0, m.1);
        Ok(self.segment(p, m, fp, fm, depth + 1)? + self.segment(m, q, fm, fq, depth + 1)?)
    }

    fn winding(&mut self, a0: f64, a1: f64, b0: f64, b1: f64) -> std::result::Result<usize, Fail> {
        let corners = [(a0, b0), (a1, b0), (a1, b1), (a0, b1)];
        let mut total = 0.0;
        for e in 0..4 {
            let p = corners[e];
            let q = corners[(e + 1) % 4];
            let fp = self.eval_d(p.0, p.1);
            let fq = self.eval_d(q.0, q.1);
            total += self.segment(p, q, fp, fq, 0)?;
        }
        let w = total / (2.0 * PI);
        let r = w.round();
        if (w - r).abs() > 1e-3 || r < -0.5 {
            return Err(Fail::Inconsistent);
        }
        Ok(r as usize)
    }

    fn newton(&mut self, start: C64) -> Option<C64> {
        let mut z = start;
        for _ in 0..self.opts.newton_iters {
            let (v, d) = self.f.eval_with_deriv(z);
            self.evals += 1;
            if d.norm() == 0.0 {
                return None;
            }
            let step = v / d;
            z -= step;
            if !z.re.is_finite() || !z.im.is_finite() {
                return None;
            }
            if step.norm() < 1e-15 * (1.0 + z.norm()) {
                break;
            }
        }
        // final polishing step
        let (v, d) = self.f.eval_with_deriv(z);
        if d.norm() > 0.0 {
            z -= v / d;
        }
        Some(z)
    }

    fn inside(&self, z: C64, a0: f64, a1: f64, b0: f64, b1: f64) -> bool {
        let (a, b) = self.torus.lattice().coords(z - self.origin);
        let eps = 1e-9;
        a >= a0 - eps && a <= a1 + eps && b >= b0 - eps && b <= b1 + eps
    }

    fn search(
        &mut self,
        cell: (f64, f64, f64, f64),
        wind: usize,
        out: &mut Vec<Zero>,
        rng_state: &mut u64,
    ) -> std::result::Result<(), Fail> {
        let (a0, a1, b0, b1) = cell;
        if wind == 0 {
            return Ok(());
        }
        if self.evals > self.budget {
            return Err(Fail::Budget);
        }
        let center = self.z(0.5 * (a0 + a1), 0.5 * (b0 + b1));
        if wind == 1 {
            if let Some(z) = self.newton(center) {
                if self.inside(z, a0, a1, b0, b1)
                    && self.f.eval(z).norm() <= self.opts.residual_tol * self.scale
                {
                    out.push(Zero { z, multiplicity: 1 });
                    return Ok(());
                }
            }
        }
        let size = (a1 - a0).max(b1 - b0);
        if size < self.opts.min_cell {
            let z = if wind == 1 {
                center
            } else {
                self.newton(center)
                    .filter(|z| self.inside(*z, a0, a1, b0, b1))
                    .unwrap_or(center)
            };
            out.push(Zero {
                z,
                multiplicity: wind,
            });
            return Ok(());
        }
        // split near the midpoint, jittering the split lines when a zero
        // sits on one of them
        for attempt in 0..8 {
            let jit = |s: &mut u64| {
                *s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((*s >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 0.2
            };
            let (ja, jb) = if attempt == 0 {
                (0.0, 0.0)
            } else {
                (jit(rng_state), jit(rng_state))
            };
            let am = a0 + (0.5 + ja) * (a1 - a0);
            let bm = b0 + (0.5 + jb) * (b1 - b0);
            let kids = [
                (a0, am, b0, bm),
                (am, a1, b0, bm),
                (a0, am, bm, b1),
                (am, a1, bm, b1),
            ];
            let mut winds = [0usize; 4];
            let mut ok = true;
            for (k, c) in kids.iter().enumerate() {
                match self.winding(c.0, c.1, c.2, c.3) {
                    Ok(w) => winds[k] = w,
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if self.evals > self.budget {
                return Err(Fail::Budget);
            }
            if !ok || winds.iter().sum::<usize>() != wind {
                continue;
            }
            let mark = out.len();
            let mut failed = false;
            for (k, c) in kids.iter().enumerate() {
                match self.search(*c, winds[k], out, rng_state) {
                    Ok(()) => {}
                    Err(Fail::Budget) => return Err(Fail::Budget),
                    Err(_) => {
                        failed = true;
                        break;
                    }
                }
            }
            if failed {
                out.truncate(mark);
                continue;
            }
            return Ok(());
        }
        Err(Fail::Inconsistent)
    }
}

/// All zeros of `f` in the fundamental domain, reduced to `[0, 1)^2`
/// lattice coordinates, with multiplicities.
///
/// The boundary winding of the whole domain must equal `f.degree()`, and
/// the multiplicities found must add up to it; otherwise the search is
/// restarted on a shifted domain, and after `max_restarts` an error is
/// returned. Restarts also bound the modulus of `f'/f` along cell edges,
/// which costs more evaluations but resolves close pairs next to an edge.
pub fn find_zeros_with<F: SectionFn + ?Sized>(
    f: &F,
    torus: &Torus,
    opts: &ZeroFinderOptions,
) -> Result<Vec<Zero>> {
    let n = f.degree();
    let mut rng_state: u64 = 0x9e3779b97f4a7c15;
    let mut last = String::new();
    for attempt in 0..=opts.max_restarts {
        let origin = if attempt == 0 {
            C64::new(0.0, 0.0)
        } else {
            let a = halton(attempt, 2) - 0.5;
            let b = halton(attempt, 3) - 0.5;
            torus.lattice().from_coords(a, b)
        };
        let mut finder = Finder {
            f,
            torus,
            origin,
            opts,
            scale: 1.0,
            max_seg: 1.0 / (n as f64 + 1.0),
            careful: attempt > 0,
            budget: if attempt > 0 { 400_000 } else { 5_000 } * (n + 1),
            evals: 0,
        };
        // scale for residual tests: RMS over a coarse grid
        let mut acc = 0.0;
        let m = 6;
        for i in 0..m {
            for j in 0..m {
                let v = finder.eval((i as f64 + 0.5) / m as f64, (j as f64 + 0.5) / m as f64);
                acc += v.norm_sqr();
            }
        }
        finder.scale = (acc / (m * m) as f64).sqrt();
        if finder.scale == 0.0 || !finder.scale.is_finite() {
            return Err(Error::ZeroFinder("section vanishes identically".into()));
        }
        let total = match finder.winding(0.0, 1.0, 0.0, 1.0) {
            Ok(w) => w,
            Err(e) => {
                last = format!("boundary winding failed: {e:?}");
                continue;
            }
        };
        if total != n {
            last = format!("boundary winding {total} differs from degree {n}");
            continue;
        }
        let mut out = Vec::with_capacity(n);
        match finder.search((0.0, 1.0, 0.0, 1.0), total, &mut out, &mut rng_state) {
            Ok(()) => {
                let count: usize = out.iter().map(|z| z.multiplicity).sum();
                if count != n {
                    last = format!("found {count} zeros, expected {n}");
                    continue;
                }
                return Ok(out
                    .into_iter()
                    .map(|z| Zero {
                        z: torus.reduce(z.z),
                        multiplicity: z.multiplicity,
                    })
                    .collect());
            }
            Err(e) => last = format!("subdivision failed: {e:?}"),
        }
    }
    Err(Error::ZeroFinder(last))
}

/// Winding number of `f` around the fundamental domain with corner
/// `origin`, before rounding to an integer.
pub fn boundary_winding<F: SectionFn + ?Sized>(f: &F, torus: &Torus, origin: C64) -> Result<f64> {
    let opts = ZeroFinderOptions::default();
    let mut finder = Finder {
        f,
        torus,
        origin,
        opts: &opts,
        scale: f.eval(origin).norm().max(f64::MIN_POSITIVE),
        max_seg: 1.0 / (f.degree() as f64 + 1.0),
        careful: true,
        budget: usize::MAX,
        evals: 0,
    };
    let corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
    let mut total = 0.0;
    for e in 0..4 {
        let (p, q) = (corners[e], corners[(e + 1) % 4]);
        let fp = finder.eval_d(p.0, p.1);
        let fq = finder.eval_d(q.0, q.1);
        total += finder
            .segment(p, q, fp, fq, 0)
            .map_err(|e| Error::ZeroFinder(format!("boundary winding failed: {e:?}")))?;
    }
    Ok(total / (2.0 * PI))
}

fn halton(i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = i;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Zeros of a section as a configuration of `degree` points, checked
/// against the bundle's Abel invariant.
pub fn find_zeros(s: &RandomSection, torus: &Torus) -> Result<Configuration> {
    let zs = find_zeros_with(s, torus, &ZeroFinderOptions::default())?;
    let cfg = expand(&zs);
    let target = s.bundle.zero_sum(torus);
    let sum: C64 = cfg.points.iter().sum();
    let err = lattice_residual(torus, sum - target);
    if err > 1e-6 {
        return Err(Error::ZeroFinder(format!(
            "zeros violate the Abel constraint by {err:.3e}"
        )));
    }
    Ok(cfg)
}

fn expand(zs: &[Zero]) -> Configuration {
    let mut points = Vec::new();
    let mut multiple = Vec::new();
    for z in zs {
        for _ in 0..z.multiplicity {
            points.push(z.z);
            multiple.push(z.multiplicity > 1);
        }
    }
    Configuration { points, multiple }
}

/// Splits the `N + 1` zeros of a large-space section into a configuration
/// of `N` points and the partner `P1`, chosen uniformly among the zeros.
pub fn split_large_zeros<R: Rng + ?Sized>(
    zeros: &Configuration,
    rng: &mut R,
) -> (Configuration, C64) {
    let k = rng.random_range(0..zeros.len());
    let mut points = zeros.points.clone();
    let mut multiple = zeros.multiple.clone();
    let p1 = points.remove(k);
    multiple.remove(k);
    (Configuration { points, multiple }, p1)
}

/// Removes the zero closest to `p1` from the zeros of a large-space
/// section vanishing at `p1`.
pub fn remove_partner(torus: &Torus, zeros: &Configuration, p1: C64) -> Result<Configuration> {
    let (k, d) = zeros
        .points
        .iter()
        .enumerate()
        .map(|(k, z)| (k, torus.dist(*z, p1)))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    if d > 1e-6 {
        return Err(Error::ZeroFinder(format!(
            "section does not vanish at the partner point (nearest zero {d:.3e} away)"
        )));
    }
    let mut points = zeros.points.clone();
    let mut multiple = zeros.multiple.clone();
    points.remove(k);
    multiple.remove(k);
    Ok(Configuration { points, multiple })
}

/// Orthonormal coordinates adapted to the base point: column 0 is the
/// normalized coherent state at `P0` and the remaining columns span the
/// sections vanishing at `P0`. Coordinates of a section with orthonormal
/// coefficients `a` are `U^* a`.
pub fn adapted_frame(space: &SectionSpace, p0: C64) -> DMatrix<C64> {
    let n = space.dim();
    let phi = space.coherent_state(p0);
    let phi = phi.unscale(phi.norm());
    let mut cols: Vec<DVector<C64>> = vec![phi];
    for k in 0..n {
        let mut v = DVector::<C64>::zeros(n);
        v[k] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for c in &cols {
                let p = c.dotc(&v);
                v -= c * p;
            }
        }
        let nv = v.norm();
        if nv > 1e-8 && cols.len() < n {
            cols.push(v.unscale(nv));
        }
    }
    DMatrix::from_columns(&cols)
}

/// Holomorphic product `h(z) = e^{κz} Π_j θ1(z - w_j)` over the points of a
/// configuration and a lift of its partner, with `κ` chosen so that `h` is
/// a section of the large bundle.
#[derive(Clone, Debug)]
pub struct PrimeFormProduct {
    pub roots: Vec<C64>,
    pub kappa: C64,
}

impl PrimeFormProduct {
    /// `roots` are the `N` configuration points; the partner is appended.
    pub fn new(torus: &Torus, large: &LargeSpace, points: &[C64], p1: C64) -> Result<Self> {
        let n = large.space.dim();
        let c = large.space.basis().shift();
        let sum: C64 = points.iter().sum::<C64>() + p1;
        // sum must equal n c - (n/2 + k) τ - n/2 + l for integers k, l
        let half = 0.5 * n as f64;
        let d = sum - n as f64 * c + half;
        let (alpha, beta) = torus.lattice().coords(d);
        let l = alpha.round();
        let k = (-beta - half).round();
        let err = torus.lattice().from_coords(alpha - l, beta + half + k).norm();
        if err > 1e-6 {
            return Err(Error::AbelConstraint(err));
        }
        let exact = n as f64 * c - (half + k) * torus.tau() - half + l;
        let p1_lift = p1 - (sum - exact);
        let mut roots = points.to_vec();
        roots.push(p1_lift);
        let kappa = C64::new(0.0, PI * (n as f64 + 2.0 * k));
        Ok(Self { roots, kappa })
    }

    pub fn eval(&self, torus: &Torus, z: C64) -> C64 {
        let mut v = (self.kappa * z).exp();
        for r in &self.roots {
            v *= torus.theta1(z - r);
        }
        v
    }

    /// `h'(ζ_k)` at one of the roots.
    pub fn deriv_at_root(&self, torus: &Torus, k: usize) -> C64 {
        let zk = self.roots[k];
        let mut v = (self.kappa * zk).exp() * torus.theta1_prime_zero();
        for (j, r) in self.roots.iter().enumerate() {
            if j != k {
                v *= torus.theta1(zk - r);
            }
        }
        v
    }
}

/// Coordinates `ℰ` of the canonical section with zeros `cfg + P1`, where
/// `P1 = P0 - t` is the partner of the bundle `(N, t)`: entry 0 is the
/// anchor `ℰ_0 = 1` along the coherent state at `P0`, entry `j ≥ 1` is the
/// coordinate along the `j`-th adapted basis vector divided by the anchor
/// coordinate.
///
/// The product of theta functions is fitted by least squares on a coarse
/// grid of `4(N+1)` or more sample points; the fit residual and the
/// conditioning of the sample matrix are checked.
pub fn canonical_section_coeffs(
    torus: &Torus,
    cfg: &Configuration,
    bundle: &LineBundle,
    large: &LargeSpace,
) -> Result<DVector<C64>> {
    let (coords, _) = canonical_section_raw(torus, cfg, bundle, large)?;
    Ok(coords)
}

/// As [`canonical_section_coeffs`], also returning the unnormalized
/// adapted coordinate `Z_0` of the fitted product and the product itself.
pub fn canonical_section_raw(
    torus: &Torus,
    cfg: &Configuration,
    bundle: &LineBundle,
    large: &LargeSpace,
) -> Result<(DVector<C64>, (C64, PrimeFormProduct))> {
    let n_pts = cfg.len();
    if bundle.degree != n_pts || large.degree != n_pts {
        return Err(Error::InvalidInput(format!(
            "configuration has {n_pts} points, bundle degree {}, large space for {}",
            bundle.degree, large.degree
        )));
    }
    let sum: C64 = cfg.points.iter().sum();
    let err = lattice_residual(torus, sum - bundle.zero_sum(torus));
    if err > 1e-8 {
        return Err(Error::AbelConstraint(err));
    }
    let p1 = torus.reduce(bundle.p0 - bundle.translate);
    let prod = PrimeFormProduct::new(torus, large, &cfg.points, p1)?;
    let space = &large.space;
    let n = space.dim();
    let m = ((4 * n) as f64).sqrt().ceil() as usize;
    let mut rows = Vec::with_capacity(m * m);
    let mut rhs = Vec::with_capacity(m * m);
    let basis = space.basis();
    for i in 0..m {
        for j in 0..m {
            let z = torus
                .lattice()
                .from_coords((i as f64 + 0.5) / m as f64, (j as f64 + 0.5) / m as f64);
            let w = basis.weight(z);
            rows.push(basis.eval_all(z));
            rhs.push(prod.eval(torus, z) * w);
        }
    }
    let a = DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c]);
    let b = DVector::from_vec(rhs);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-12 * smax {
        return Err(Error::IllConditioned(format!(
            "sample matrix condition {:.2e}",
            smax / smin
        )));
    }
    let raw = svd
        .solve(&b, 1e-14 * smax)
        .map_err(|e| Error::IllConditioned(e.to_string()))?;
    let resid = (&a * &raw - &b).norm() / b.norm().max(1e-300);
    if resid > 1e-8 {
        return Err(Error::IllConditioned(format!(
            "prime-form product not in the large space (fit residual {resid:.2e})"
        )));
    }
    let sec = space.section_from_raw(raw.as_slice());
    let u = adapted_frame(space, large.p0());
    let z = u.adjoint() * &sec.coeffs;
    let z0 = z[0];
    if z0.norm() < 1e-14 * z.norm() {
        return Err(Error::IllConditioned(
            "canonical section vanishes at the base point".into(),
        ));
    }
    Ok((z.map(|v| v / z0), (z0, prod)))
}

/// Compares `|det ∂ℰ_j/∂ζ_k|^2`, computed by central finite differences of
/// [`canonical_section_coeffs`], with the closed form
/// `Π_k |h'(ζ_k)|^2 / (|Z_0|^{2N} |det ψ̂_j(ζ_k)|^2)` at two configurations
/// of the same bundle, and returns `|r_1 / r_2 - 1|` for the ratios
/// `r = numeric / closed form`.
pub fn coefficient_jacobian_check(
    torus: &Torus,
    cfgs: [&Configuration; 2],
    bundle: &LineBundle,
    large: &LargeSpace,
) -> Result<f64> {
    let r1 = coefficient_jacobian_ratio(torus, cfgs[0], bundle, large)?;
    let r2 = coefficient_jacobian_ratio(torus, cfgs[1], bundle, large)?;
    Ok((r1 / r2 - 1.0).abs())
}

/// Ratio of the finite-difference Jacobian to the closed form at one
/// configuration.
pub fn coefficient_jacobian_ratio(
    torus: &Torus,
    cfg: &Configuration,
    bundle: &LineBundle,
    large: &LargeSpace,
) -> Result<f64> {
    let n = cfg.len();
    for i in 0..n {
        for j in 0..i {
            if torus.dist(cfg.points[i], cfg.points[j]) < 1e-3 {
                return Err(Error::IllConditioned(
                    "configuration too close to the diagonal".into(),
                ));
            }
        }
    }
    let h = 1e-5;
    // moving ζ_k moves the partner and with it the bundle translate
    let mut jac = DMatrix::<C64>::zeros(n, n);
    for k in 0..n {
        let mut plus = cfg.clone();
        let mut minus = cfg.clone();
        plus.points[k] += h;
        minus.points[k] -= h;
        let bp = LineBundle {
            translate: bundle.translate + h,
            ..*bundle
        };
        let bm = LineBundle {
            translate: bundle.translate - h,
            ..*bundle
        };
        let ep = canonical_section_coeffs(torus, &plus, &bp, large)?;
        let em = canonical_section_coeffs(torus, &minus, &bm, large)?;
        for j in 0..n {
            jac[(j, k)] = (ep[j + 1] - em[j + 1]) / (2.0 * h);
        }
    }
    let lhs = jac.determinant().norm_sqr();

    let (_, (z0, prod)) = canonical_section_raw(torus, cfg, bundle, large)?;
    let space = &large.space;
    let u = adapted_frame(space, large.p0());
    let basis = space.basis();
    let mut psi = DMatrix::<C64>::zeros(n, n);
    let mut dprod = C64::new(1.0, 0.0);
    for (k, zk) in cfg.points.iter().enumerate() {
        let w = basis.weight(*zk);
        let on = space.eval_on(*zk);
        let hat = u.transpose() * on;
        for j in 0..n {
            psi[(j, k)] = hat[j + 1];
        }
        dprod *= prod.deriv_at_root(torus, k) * w;
    }
    let rhs = dprod.norm_sqr() / (z0.norm_sqr().powi(n as i32) * psi.determinant().norm_sqr());
    Ok(lhs / rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BaseMeasure;
    use crate::sections::{sample_gaussian, SectionSpace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn finds_all_zeros_with_abel_sum() {
        let t = Torus::new(C64::new(0.1, 1.05), 1e-16).unwrap();
        let nu = Arc::new(BaseMeasure::uniform_torus(&t, 32));
        let b = LineBundle::new(7, C64::new(0.3, 0.2), C64::new(0.1, 0.1)).unwrap();
        let sp = SectionSpace::new(&t, b, nu).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let s = sample_gaussian(&sp, &mut rng);
            let cfg = find_zeros(&s, &t).unwrap();
            assert_eq!(cfg.len(), 7);
            for z in &cfg.points {
                assert!(s.eval(*z).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn adapted_frame_is_unitary_and_splits_at_base_point() {
        let t = Torus::square();
        let nu = Arc::new(BaseMeasure::uniform_torus(&t, 32));
        let large = LargeSpace::new(&t, 3, C64::new(0.2, 0.3), nu).unwrap();
        let u = adapted_frame(&large.space, large.p0());
        assert!((u.adjoint() * &u - DMatrix::identity(4, 4)).camax() < 1e-12);
        let hat = u.transpose() * large.space.eval_on(large.p0());
        for j in 1..4 {
            assert!(hat[j].norm() < 1e-12);
        }
    }

    #[test]
    fn prime_form_product_lies_in_large_space() {
        let t = Torus::new(C64::new(0.3, 0.9), 1e-16).unwrap();
        let nu = Arc::new(BaseMeasure::uniform_torus(&t, 32));
        let p0 = C64::new(0.05, 0.1);
        let large = LargeSpace::new(&t, 3, p0, nu).unwrap();
        let cfg = Configuration::new(vec![
            C64::new(0.2, 0.1),
            C64::new(0.7, 0.3),
            C64::new(0.4, 0.7),
        ]);
        let p1 = abel_partner(&t, &cfg, p0);
        let prod = PrimeFormProduct::new(&t, &large, &cfg.points, p1).unwrap();
        // metric-weighted modulus must be lattice periodic
        let w = |z: C64| prod.eval(&t, z).norm() * large.space.basis().weight(z);
        let z = C64::new(0.33, 0.21);
        assert!((w(z) - w(z + 1.0)).abs() < 1e-10 * w(z));
        assert!((w(z) - w(z + t.tau())).abs() < 1e-10 * w(z));
    }

    fn setup() -> (Torus, LargeSpace, Configuration, LineBundle) {
        let t = Torus::new(C64::new(0.2, 1.1), 1e-16).unwrap();
        let nu = Arc::new(BaseMeasure::uniform_torus(&t, 32));
        let p0 = C64::new(0.1, 0.05);
        let large = LargeSpace::new(&t, 3, p0, nu).unwrap();
        let cfg = Configuration::reduced(
            &t,
            &[C64::new(0.25, 0.2), C64::new(0.75, 0.4), C64::new(0.45, 0.85)],
        );
        let tr = abel_sum(&t, &cfg, p0);
        let b = LineBundle::new(3, tr, p0).unwrap();
        (t, large, cfg, b)
    }

    #[test]
    fn canonical_coefficients_round_trip() {
        let (t, large, cfg, b) = setup();
        let e = canonical_section_coeffs(&t, &cfg, &b, &large).unwrap();
        assert!((e[0] - 1.0).norm() < 1e-15);
        let u = adapted_frame(&large.space, large.p0());
        let sec = large.space.section(&u * e);
        let zs = find_zeros(&sec, &t).unwrap();
        let p1 = abel_partner(&t, &cfg, large.p0());
        let rest = remove_partner(&t, &zs, p1).unwrap();
        for z in &cfg.points {
            let d = rest.points.iter().map(|w| t.dist(*z, *w)).fold(1.0, f64::min);
            assert!(d < 1e-9, "{d}");
        }
    }

    #[test]
    fn jacobian_matches_closed_form() {
        let (t, large, cfg, b) = setup();
        let r = coefficient_jacobian_ratio(&t, &cfg, &b, &large).unwrap();
        assert!((r - 1.0).abs() < 1e-6, "{r}");
    }
}
