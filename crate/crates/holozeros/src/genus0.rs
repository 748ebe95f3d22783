//! Genus-zero baseline: polynomials of degree `N` in the affine chart with
//! the inner product `∫ |p|^2 e^{-Nφ} dν`.

use crate::error::{Error, Result};
use crate::grid::{BaseMeasure, MeasureKind};
use crate::sections::complex_gaussian;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;

/// Polynomial space of degree `n` with its Gram matrix and orthonormalizer.
#[derive(Clone, Debug)]
pub struct PolySpace {
    pub n: usize,
    nodes: Vec<C64>,
    // quadrature weight times e^{-Nφ} at each node
    weights: Vec<f64>,
    gram: DMatrix<C64>,
    l_inv: DMatrix<C64>,
}

impl PolySpace {
    /// `phi` is evaluated at the nodes of `nu`.
    pub fn new(n: usize, nu: &BaseMeasure, phi: impl Fn(C64) -> f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("degree must be at least 1".into()));
        }
        let weights: Vec<f64> = nu
            .nodes
            .iter()
            .zip(&nu.weights)
            .map(|(z, w)| w * (-(n as f64) * phi(*z)).exp())
            .collect();
        let d = n + 1;
        let mut gram = DMatrix::<C64>::zeros(d, d);
        for (z, w) in nu.nodes.iter().zip(&weights) {
            let pw: Vec<C64> = powers(*z, d);
            for j in 0..d {
                for k in 0..d {
                    gram[(j, k)] += *w * pw[j] * pw[k].conj();
                }
            }
        }
        let chol = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::DegenerateGram("polynomial Gram matrix".into()))?;
        let l_inv = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .ok_or_else(|| Error::DegenerateGram("singular factor".into()))?;
        Ok(Self {
            n,
            nodes: nu.nodes.clone(),
            weights,
            gram,
            l_inv,
        })
    }

    /// Degree-`n` polynomials with `ν` uniform on the unit circle and
    /// `φ = 0`, for which the monomials are orthonormal.
    pub fn unit_circle(n: usize) -> Self {
        let torus = crate::torus::Torus::square();
        let nu = BaseMeasure::new(
            &torus,
            MeasureKind::UniformCircle {
                center: [0.0, 0.0],
                radius: 1.0,
            },
            4 * n + 8,
        )
        .expect("valid circle");
        Self::new(n, &nu, |_| 0.0).expect("monomials are independent on the circle")
    }

    pub fn gram(&self) -> &DMatrix<C64> {
        &self.gram
    }

    /// Gaussian polynomial: i.i.d. standard complex coordinates in the
    /// orthonormal basis. Returns monomial coefficients, constant first.
    pub fn sample_gaussian<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<C64> {
        let a = DVector::from_fn(self.n + 1, |_, _| complex_gaussian(rng));
        let raw = self.l_inv.transpose() * a;
        raw.iter().cloned().collect()
    }

    /// `∫ |p|^2 e^{-Nφ} dν` for a polynomial given by its roots (monic).
    pub fn monic_norm_sq(&self, roots: &[C64]) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| {
                let v: f64 = roots.iter().map(|r| (z - r).norm_sqr()).product();
                w * v
            })
            .sum()
    }
}

fn powers(z: C64, d: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(d);
    let mut p = C64::new(1.0, 0.0);
    for _ in 0..d {
        out.push(p);
        p *= z;
    }
    out
}

/// Coefficients of `Π (z - ζ_j)`, constant first; entry `N - k` is the
/// signed elementary symmetric function `(-1)^k e_k(ζ)`.
pub fn vieta(roots: &[C64]) -> Vec<C64> {
    let mut c = vec![C64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![C64::new(0.0, 0.0); c.len() + 1];
        for (k, ck) in c.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= ck * r;
        }
        c = next;
    }
    c
}

/// Vandermonde `Δ(ζ) = Π_{i<j} (ζ_j - ζ_i)`.
pub fn vandermonde(points: &[C64]) -> C64 {
    let mut v = C64::new(1.0, 0.0);
    for j in 0..points.len() {
        for i in 0..j {
            v *= points[j] - points[i];
        }
    }
    v
}

/// `det(ζ_j^k)_{j,k < N}` evaluated as a determinant.
pub fn slater_monomials(points: &[C64]) -> C64 {
    let n = points.len();
    DMatrix::from_fn(n, n, |j, k| points[j].powi(k as i32)).determinant()
}

/// Roots of a polynomial (constant coefficient first) by Aberth-Ehrlich
/// iteration followed by Newton polishing; closed form for degrees 1, 2.
pub fn roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    if n == 0 || lead.norm() == 0.0 {
        return Err(Error::InvalidInput("leading coefficient vanishes".into()));
    }
    match n {
        1 => return Ok(vec![-coeffs[0] / lead]),
        2 => {
            let (a, b, c) = (lead, coeffs[1], coeffs[0]);
            let disc = (b * b - 4.0 * a * c).sqrt();
            let q = if (b.conj() * disc).re >= 0.0 {
                -0.5 * (b + disc)
            } else {
                -0.5 * (b - disc)
            };
            if q.norm() == 0.0 {
                return Ok(vec![C64::new(0.0, 0.0); 2]);
            }
            return Ok(vec![q / a, c / q]);
        }
        _ => {}
    }
    let eval = |z: C64| -> (C64, C64) {
        let mut p = coeffs[n];
        let mut d = C64::new(0.0, 0.0);
        for k in (0..n).rev() {
            d = d * z + p;
            p = p * z + coeffs[k];
        }
        (p, d)
    };
    let radius = coeffs
        .iter()
        .take(n)
        .map(|c| (c / lead).norm())
        .fold(0.0, f64::max)
        + 1.0;
    let mut z: Vec<C64> = (0..n)
        .map(|k| C64::from_polar(0.5 * radius, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let (p, d) = eval(z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / d;
            let s: C64 = (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let w = ratio / (1.0 - ratio * s);
            z[i] -= w;
            moved = moved.max(w.norm() / (1.0 + z[i].norm()));
        }
        if moved < 1e-15 {
            break;
        }
    }
    for zi in z.iter_mut() {
        let (p, d) = eval(*zi);
        if d.norm() > 0.0 {
            *zi -= p / d;
        }
    }
    Ok(z)
}

/// Log of the unnormalized joint density of zeros of the Fubini-Study
/// (equivalently Gaussian) polynomial ensemble:
/// `2 log|Δ(ζ)| - (N+1) log ∫ Π|z - ζ_j|^2 e^{-Nφ} dν`.
/// Returns `-∞` for coincident points.
pub fn jpc_density_g0(space: &PolySpace, roots: &[C64]) -> f64 {
    let v = vandermonde(roots);
    if v.norm() == 0.0 {
        return f64::NEG_INFINITY;
    }
    2.0 * v.norm().ln() - (space.n as f64 + 1.0) * space.monic_norm_sq(roots).ln()
}

/// `|det ∂c/∂ζ|` of the Vieta map (leading coefficient excluded) by central
/// finite differences.
pub fn vieta_jacobian_fd(roots: &[C64], h: f64) -> C64 {
    let n = roots.len();
    let mut jac = DMatrix::<C64>::zeros(n, n);
    for k in 0..n {
        let mut p = roots.to_vec();
        let mut m = roots.to_vec();
        p[k] += h;
        m[k] -= h;
        let cp = vieta(&p);
        let cm = vieta(&m);
        for j in 0..n {
            jac[(j, k)] = (cp[j] - cm[j]) / (2.0 * h);
        }
    }
    jac.determinant()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vieta_gives_signed_elementary_symmetric_functions() {
        let r = [C64::new(1.0, 2.0), C64::new(-0.5, 0.1), C64::new(0.3, -0.7)];
        let c = vieta(&r);
        let e1: C64 = r.iter().sum();
        let e2 = r[0] * r[1] + r[0] * r[2] + r[1] * r[2];
        let e3 = r[0] * r[1] * r[2];
        assert!((c[3] - 1.0).norm() < 1e-15);
        assert!((c[2] + e1).norm() < 1e-14);
        assert!((c[1] - e2).norm() < 1e-14);
        assert!((c[0] + e3).norm() < 1e-14);
    }

    #[test]
    fn roots_recover_planted() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..7 {
            let planted: Vec<C64> = (0..n).map(|_| complex_gaussian(&mut rng)).collect();
            let got = roots(&vieta(&planted)).unwrap();
            for p in &planted {
                let d = got.iter().map(|g| (g - p).norm()).fold(f64::MAX, f64::min);
                assert!(d < 1e-9, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn unit_circle_monomials_are_orthonormal() {
        let s = PolySpace::unit_circle(4);
        assert!((s.gram() - DMatrix::<C64>::identity(5, 5)).camax() < 1e-13);
    }
}
