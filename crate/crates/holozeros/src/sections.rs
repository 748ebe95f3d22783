//! Holomorphic sections of degree-`n` line bundles on the torus, their
//! inner products `G_N(h, ν)` and the Gaussian, Fubini-Study, fiber and
//! projective linear ensembles.

use crate::error::{Error, Result};
use crate::grid::BaseMeasure;
use crate::torus::Torus;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

const I: C64 = C64::new(0.0, 1.0);

/// Line bundle of degree `degree` whose sections have zeros summing to
/// `degree·p0 + translate` modulo the lattice. The translate parametrizes
/// `Pic^N`, which at genus one is a copy of the torus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineBundle {
    pub degree: usize,
    pub translate: C64,
    pub p0: C64,
}

impl LineBundle {
    pub fn new(degree: usize, translate: C64, p0: C64) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidInput("degree must be at least 1".into()));
        }
        Ok(Self {
            degree,
            translate,
            p0,
        })
    }

    /// `O(n P0)`.
    pub fn multiple_of_base(degree: usize, p0: C64) -> Result<Self> {
        Self::new(degree, C64::new(0.0, 0.0), p0)
    }

    /// Sum of the zeros of any section, reduced to the fundamental domain.
    pub fn zero_sum(&self, torus: &Torus) -> C64 {
        torus.reduce(self.degree as f64 * self.p0 + self.translate)
    }

    /// Characteristic shift `c` of the level-`n` theta basis: its sections
    /// have zeros summing to `n(1+τ)/2 + n c`.
    pub fn shift(&self, torus: &Torus) -> C64 {
        self.p0 - 0.5 * (1.0 + torus.tau()) + self.translate / self.degree as f64
    }
}

/// Level-`n` theta functions
/// `f_j(z) = Σ_{m ≡ j (mod n)} exp(iπτ m²/n + 2πi m (z - c))`, `j = 0..n`,
/// which share the automorphy factor `exp(-iπnτ - 2πin(z - c))`.
///
/// Values are returned in the metric frame: multiplied by
/// `exp(-n φ(z - c)/2)`, so that their squared modulus is the pointwise
/// metric norm, a lattice-periodic quantity.
#[derive(Clone, Debug)]
pub struct ThetaBasis {
    n: usize,
    shift: C64,
    tau: C64,
    half_width: f64,
}

impl ThetaBasis {
    pub fn new(torus: &Torus, n: usize, shift: C64) -> Self {
        let t = torus.area();
        let l = -torus.lattice().precision().ln() + 4.0;
        let half_width = (l * n as f64 / (PI * t)).sqrt() + 1.0;
        Self {
            n,
            shift,
            tau: torus.tau(),
            half_width,
        }
    }

    pub fn level(&self) -> usize {
        self.n
    }

    pub fn shift(&self) -> C64 {
        self.shift
    }

    fn window(&self, y: f64) -> (i64, i64) {
        let center = -(self.n as f64) * y / self.tau.im;
        (
            (center - self.half_width).floor() as i64,
            (center + self.half_width).ceil() as i64,
        )
    }

    #[inline]
    fn term(&self, m: i64, x: f64, y: f64) -> C64 {
        let n = self.n as f64;
        let t = self.tau.im;
        let mf = m as f64;
        let g = t * mf + n * y;
        let re = -PI / (n * t) * g * g;
        let ph = PI * self.tau.re * mf * mf / n + 2.0 * PI * mf * x;
        C64::from_polar(re.exp(), ph)
    }

    /// `exp(-n φ(z - c) / 2)`.
    pub fn weight(&self, z: C64) -> f64 {
        let y = (z - self.shift).im;
        (-PI * self.n as f64 * y * y / self.tau.im).exp()
    }

    /// All basis functions at `z`, in the metric frame.
    pub fn eval_all(&self, z: C64) -> Vec<C64> {
        let w = z - self.shift;
        let (lo, hi) = self.window(w.im);
        let n = self.n as i64;
        let mut out = vec![C64::new(0.0, 0.0); self.n];
        for m in lo..=hi {
            out[m.rem_euclid(n) as usize] += self.term(m, w.re, w.im);
        }
        out
    }

    /// All basis functions and their holomorphic derivatives at `z`, both
    /// multiplied by the metric weight.
    pub fn eval_all_with_deriv(&self, z: C64) -> (Vec<C64>, Vec<C64>) {
        let w = z - self.shift;
        let (lo, hi) = self.window(w.im);
        let n = self.n as i64;
        let mut v = vec![C64::new(0.0, 0.0); self.n];
        let mut d = vec![C64::new(0.0, 0.0); self.n];
        for m in lo..=hi {
            let t = self.term(m, w.re, w.im);
            let j = m.rem_euclid(n) as usize;
            v[j] += t;
            d[j] += 2.0 * PI * I * m as f64 * t;
        }
        (v, d)
    }

    /// `Σ_j raw_j f_j(z)` in the metric frame.
    pub fn eval_combination(&self, raw: &[C64], z: C64) -> C64 {
        let w = z - self.shift;
        let (lo, hi) = self.window(w.im);
        let n = self.n as i64;
        let mut acc = C64::new(0.0, 0.0);
        for m in lo..=hi {
            acc += raw[m.rem_euclid(n) as usize] * self.term(m, w.re, w.im);
        }
        acc
    }

    /// Value and holomorphic derivative of `Σ_j raw_j f_j` at `z`, both in
    /// the metric frame; their ratio is the Newton step of the holomorphic
    /// function.
    pub fn eval_combination_with_deriv(&self, raw: &[C64], z: C64) -> (C64, C64) {
        let w = z - self.shift;
        let (lo, hi) = self.window(w.im);
        let n = self.n as i64;
        let mut v = C64::new(0.0, 0.0);
        let mut d = C64::new(0.0, 0.0);
        for m in lo..=hi {
            let t = raw[m.rem_euclid(n) as usize] * self.term(m, w.re, w.im);
            v += t;
            d += 2.0 * PI * I * m as f64 * t;
        }
        (v, d)
    }

    /// Holomorphic values `f_j(z)` without the metric weight.
    pub fn eval_all_holomorphic(&self, z: C64) -> Vec<C64> {
        let y = (z - self.shift).im;
        let lift = (PI * self.n as f64 * y * y / self.tau.im).exp();
        self.eval_all(z).into_iter().map(|v| v * lift).collect()
    }
}

/// Space of sections of a line bundle with the inner product
/// `⟨s, s'⟩ = ∫ s conj(s') e^{-Nφ} dν` and an orthonormal basis obtained
/// from the Cholesky factor `Gram = L L^*`: `ψ = L^{-1} f`.
#[derive(Clone, Debug)]
pub struct SectionSpace {
    torus: Torus,
    bundle: LineBundle,
    basis: ThetaBasis,
    measure: Arc<BaseMeasure>,
    gram: DMatrix<C64>,
    l_inv: DMatrix<C64>,
}

impl SectionSpace {
    pub fn new(torus: &Torus, bundle: LineBundle, measure: Arc<BaseMeasure>) -> Result<Self> {
        let basis = ThetaBasis::new(torus, bundle.degree, bundle.shift(torus));
        let gram = gram_matrix(&basis, &measure)?;
        let chol = gram.clone().cholesky().ok_or_else(|| {
            Error::DegenerateGram(format!(
                "Cholesky failed at degree {} with {} nodes",
                bundle.degree,
                measure.len()
            ))
        })?;
        let l = chol.l();
        let n = bundle.degree;
        let l_inv = l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or_else(|| Error::DegenerateGram("singular Cholesky factor".into()))?;
        if l_inv.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::DegenerateGram("non-finite orthonormalizing factor".into()));
        }
        Ok(Self {
            torus: torus.clone(),
            bundle,
            basis,
            measure,
            gram,
            l_inv,
        })
    }

    pub fn dim(&self) -> usize {
        self.bundle.degree
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn bundle(&self) -> &LineBundle {
        &self.bundle
    }

    pub fn basis(&self) -> &ThetaBasis {
        &self.basis
    }

    pub fn measure(&self) -> &Arc<BaseMeasure> {
        &self.measure
    }

    pub fn gram(&self) -> &DMatrix<C64> {
        &self.gram
    }

    /// `L^{-1}`, mapping raw basis values to orthonormal basis values.
    pub fn orthonormalizer(&self) -> &DMatrix<C64> {
        &self.l_inv
    }

    /// Spectral condition number of the Gram matrix.
    pub fn gram_condition(&self) -> f64 {
        let ev = self.gram.clone().symmetric_eigenvalues();
        let max = ev.iter().cloned().fold(f64::MIN, f64::max);
        let min = ev.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }

    /// Raw basis values `f_j(z)` in the metric frame.
    pub fn eval_raw(&self, z: C64) -> DVector<C64> {
        DVector::from_vec(self.basis.eval_all(z))
    }

    /// Orthonormal basis values `ψ_j(z)` in the metric frame.
    pub fn eval_on(&self, z: C64) -> DVector<C64> {
        &self.l_inv * self.eval_raw(z)
    }

    /// Bergman kernel `B(z, w) = Σ ψ_j(z) conj(ψ_j(w))` in the metric frame.
    pub fn bergman(&self, z: C64, w: C64) -> C64 {
        let a = self.eval_on(z);
        let b = self.eval_on(w);
        a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
    }

    /// `B(z, z)`, the pointwise density whose `ν`-integral is the dimension.
    pub fn bergman_density(&self, z: C64) -> f64 {
        self.eval_on(z).norm_squared()
    }

    /// Coherent state `Φ^P = B(·, P)` as orthonormal coordinates
    /// `conj(ψ_j(P))`; pairing with it evaluates sections at `P`.
    pub fn coherent_state(&self, p: C64) -> DVector<C64> {
        self.eval_on(p).map(|v| v.conj())
    }

    /// Section with the given orthonormal coordinates.
    pub fn section(&self, coeffs: DVector<C64>) -> RandomSection {
        let raw = self.l_inv.transpose() * &coeffs;
        RandomSection {
            coeffs,
            raw: raw.iter().cloned().collect(),
            basis: self.basis.clone(),
            bundle: self.bundle,
            seed: None,
        }
    }

    /// Section with the given raw coefficients `s = Σ raw_j f_j`.
    pub fn section_from_raw(&self, raw: &[C64]) -> RandomSection {
        let r = DVector::from_column_slice(raw);
        // raw = L^{-T} a, so a = L^T raw
        let l = self
            .l_inv
            .clone()
            .try_inverse()
            .expect("triangular factor is invertible");
        let coeffs = l.transpose() * r;
        self.section(coeffs)
    }

    /// `⟨s, s'⟩` by quadrature over the nodes of `ν`.
    pub fn inner_product(&self, s: &RandomSection, t: &RandomSection) -> C64 {
        self.measure
            .nodes
            .iter()
            .zip(&self.measure.weights)
            .map(|(z, w)| *w * s.eval(*z) * t.eval(*z).conj())
            .sum()
    }
}

/// `G_{jk} = ∫ f_j conj(f_k) e^{-Nφ} dν` by the quadrature rule of `ν`.
pub fn gram_matrix(basis: &ThetaBasis, nu: &BaseMeasure) -> Result<DMatrix<C64>> {
    let n = basis.level();
    let mut g = DMatrix::<C64>::zeros(n, n);
    for (z, w) in nu.nodes.iter().zip(&nu.weights) {
        let f = basis.eval_all(*z);
        for j in 0..n {
            let fj = f[j] * *w;
            for k in 0..n {
                g[(j, k)] += fj * f[k].conj();
            }
        }
    }
    let asym = (&g - g.adjoint()).camax();
    if asym > 1e-12 * g.camax().max(1e-300) {
        return Err(Error::DegenerateGram(format!(
            "Gram matrix not Hermitian (asymmetry {asym:.2e})"
        )));
    }
    let h = (&g + g.adjoint()) * C64::new(0.5, 0.0);
    Ok(h)
}

/// A section given by orthonormal coordinates and the equivalent raw
/// theta-basis coefficients.
#[derive(Clone, Debug)]
pub struct RandomSection {
    pub coeffs: DVector<C64>,
    pub raw: Vec<C64>,
    pub basis: ThetaBasis,
    pub bundle: LineBundle,
    pub seed: Option<u64>,
}

impl RandomSection {
    pub fn degree(&self) -> usize {
        self.bundle.degree
    }

    /// Value in the metric frame; `|s(z)|^2` is the pointwise norm.
    pub fn eval(&self, z: C64) -> C64 {
        self.basis.eval_combination(&self.raw, z)
    }

    pub fn eval_with_deriv(&self, z: C64) -> (C64, C64) {
        self.basis.eval_combination_with_deriv(&self.raw, z)
    }

    /// `‖s‖^2` in the orthonormal frame.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.norm_squared()
    }
}

/// Standard complex Gaussian: real and imaginary parts `N(0, 1/2)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}

fn gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<C64> {
    DVector::from_fn(n, |_, _| complex_gaussian(rng))
}

/// Gaussian section: i.i.d. standard complex coefficients in the
/// orthonormal frame, so `E‖s‖^2 = dim`.
pub fn sample_gaussian<R: Rng + ?Sized>(space: &SectionSpace, rng: &mut R) -> RandomSection {
    space.section(gaussian_vector(space.dim(), rng))
}

/// Fubini-Study section: a Gaussian draw scaled to unit norm.
pub fn sample_fs<R: Rng + ?Sized>(space: &SectionSpace, rng: &mut R) -> RandomSection {
    loop {
        let c = gaussian_vector(space.dim(), rng);
        let norm = c.norm();
        if norm > 0.0 {
            return space.section(c.unscale(norm));
        }
    }
}

/// Ensembles built on the large space `H^0(O((N+1) P0))` of dimension
/// `N + 1`, in which every degree-`N` bundle embeds by multiplication with
/// the canonical section of `O(P1)`.
#[derive(Clone, Debug)]
pub struct LargeSpace {
    pub degree: usize,
    pub space: SectionSpace,
}

impl LargeSpace {
    /// Large space for configurations of `degree` points.
    pub fn new(torus: &Torus, degree: usize, p0: C64, nu: Arc<BaseMeasure>) -> Result<Self> {
        let bundle = LineBundle::multiple_of_base(degree + 1, p0)?;
        Ok(Self {
            degree,
            space: SectionSpace::new(torus, bundle, nu)?,
        })
    }

    pub fn p0(&self) -> C64 {
        self.space.bundle().p0
    }

    /// Partner point `P1 = (N+1) P0 - Σζ` completing a configuration.
    pub fn partner(&self, sum: C64) -> C64 {
        let t = self.space.torus();
        t.reduce((self.degree + 1) as f64 * self.p0() - sum)
    }
}

/// Draw from the Fubini-Study-fiber (Haar) ensemble: a translate `t`
/// uniform on the fundamental domain, then a Fubini-Study section of the
/// fiber. The fiber is realized inside the large space as the sections
/// vanishing at `P1 = P0 - t`, with the restricted inner product.
#[derive(Clone, Debug)]
pub struct FshSample {
    pub section: RandomSection,
    pub translate: C64,
    pub p1: C64,
}

/// `sample_fsh` on a prebuilt large space.
pub fn sample_fsh<R: Rng + ?Sized>(large: &LargeSpace, rng: &mut R) -> FshSample {
    let torus = large.space.torus();
    let a: f64 = rng.random();
    let b: f64 = rng.random();
    let translate = torus.lattice().from_coords(a, b);
    let p1 = torus.reduce(large.p0() - translate);
    let phi = large.space.coherent_state(p1);
    let phi_n2 = phi.norm_squared();
    loop {
        let mut c = gaussian_vector(large.space.dim(), rng);
        let proj = phi.dotc(&c) / phi_n2;
        c -= &phi * proj;
        let norm = c.norm();
        if norm > 0.0 {
            return FshSample {
                section: large.space.section(c.unscale(norm)),
                translate,
                p1,
            };
        }
    }
}

/// Draw from the projective linear ensemble: a Fubini-Study section of the
/// large space. Splitting its `N + 1` zeros into a configuration and the
/// partner point happens in [`crate::zeros::split_large_zeros`].
pub fn sample_pl<R: Rng + ?Sized>(large: &LargeSpace, rng: &mut R) -> RandomSection {
    sample_fs(&large.space, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn basis_derivative_matches_finite_difference() {
        let t = Torus::new(C64::new(0.25, 1.2), 1e-16).unwrap();
        let b = ThetaBasis::new(&t, 4, C64::new(0.1, -0.2));
        let z = C64::new(0.3, 0.4);
        let h = 1e-6;
        let hol = |z: C64| b.eval_all_holomorphic(z);
        let (v, d) = b.eval_all_with_deriv(z);
        let lift = 1.0 / b.weight(z);
        let (p, m) = (hol(z + h), hol(z - h));
        for j in 0..4 {
            let fd = (p[j] - m[j]) / (2.0 * h);
            assert!((fd - d[j] * lift).norm() < 1e-6 * (1.0 + fd.norm()));
            assert!((v[j] * lift - hol(z)[j]).norm() < 1e-12 * (1.0 + v[j].norm() * lift));
        }
    }

    #[test]
    fn orthonormal_basis_has_identity_gram() {
        let t = Torus::square();
        let nu = Arc::new(
            BaseMeasure::new(
                &t,
                crate::grid::MeasureKind::UniformDisk {
                    center: [0.5, 0.5],
                    radius: 0.35,
                },
                64,
            )
            .unwrap(),
        );
        let b = LineBundle::new(3, C64::new(0.2, 0.1), C64::new(0.0, 0.0)).unwrap();
        let s = SectionSpace::new(&t, b, nu.clone()).unwrap();
        let l = s.orthonormalizer();
        let id = l * s.gram() * l.adjoint();
        assert!((id - DMatrix::<C64>::identity(3, 3)).camax() < 1e-10);
    }

    #[test]
    fn fsh_sections_vanish_at_partner() {
        let t = Torus::square();
        let nu = Arc::new(BaseMeasure::uniform_torus(&t, 48));
        let large = LargeSpace::new(&t, 3, C64::new(0.0, 0.0), nu).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let s = sample_fsh(&large, &mut rng);
            assert!(s.section.eval(s.p1).norm() < 1e-12);
            assert!((s.section.norm_sq() - 1.0).abs() < 1e-12);
        }
    }
}
