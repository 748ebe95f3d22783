//! Flat complex tori `C / (Z + τZ)`: the odd theta function, the prime form,
//! the admissible potential and the Green's function of the flat area form.

use crate::error::{Error, Result};
use crate::quad;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const I: C64 = C64::new(0.0, 1.0);
// Coefficients of the theta series that are cached per lattice.
const CACHED_TERMS: usize = 48;
const MIN_TERMS: usize = 8;

/// Modulus `τ` of the lattice `Z + τZ` together with the series tolerance.
#[derive(Clone, Debug)]
pub struct LatticeTau {
    tau: C64,
    precision: f64,
    // (-1)^n q^{(n+1/2)^2} with q = exp(iπτ)
    coeffs: Vec<C64>,
}

impl LatticeTau {
    pub fn new(tau: C64, precision: f64) -> Result<Self> {
        if !tau.re.is_finite() || !tau.im.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite tau {tau}")));
        }
        if tau.im <= 0.0 {
            return Err(Error::BadTau(tau.im));
        }
        if !(precision > 0.0 && precision < 1.0) {
            return Err(Error::InvalidInput(format!(
                "precision must lie in (0, 1), got {precision}"
            )));
        }
        let coeffs = (0..CACHED_TERMS)
            .map(|n| theta_coeff(tau, n))
            .collect();
        Ok(Self {
            tau,
            precision,
            coeffs,
        })
    }

    pub fn tau(&self) -> C64 {
        self.tau
    }

    pub fn precision(&self) -> f64 {
        self.precision
    }

    /// `Im τ`, which is also the area of the fundamental domain.
    pub fn im(&self) -> f64 {
        self.tau.im
    }

    /// Real coordinates `(a, b)` with `z = a + bτ`.
    pub fn coords(&self, z: C64) -> (f64, f64) {
        let b = z.im / self.tau.im;
        (z.re - b * self.tau.re, b)
    }

    pub fn from_coords(&self, a: f64, b: f64) -> C64 {
        C64::new(a, 0.0) + b * self.tau
    }

    /// Representative with lattice coordinates in `[0, 1)^2`.
    pub fn reduce(&self, z: C64) -> C64 {
        let (a, b) = self.coords(z);
        self.from_coords(frac(a), frac(b))
    }

    /// Representative with lattice coordinates in `[-1/2, 1/2)^2`.
    pub fn reduce_centered(&self, z: C64) -> C64 {
        let (a, b) = self.coords(z);
        self.from_coords(centered(a), centered(b))
    }

    /// Quotient distance: the shortest of the nine translates of the
    /// centred difference.
    pub fn dist(&self, z: C64, w: C64) -> f64 {
        let u = self.reduce_centered(z - w);
        let mut best = f64::INFINITY;
        for m in -1..=1 {
            for k in -1..=1 {
                let d = (u + self.from_coords(m as f64, k as f64)).norm();
                best = best.min(d);
            }
        }
        best
    }

    fn coeff(&self, n: usize) -> C64 {
        if n < self.coeffs.len() {
            self.coeffs[n]
        } else {
            theta_coeff(self.tau, n)
        }
    }
}

fn theta_coeff(tau: C64, n: usize) -> C64 {
    let k = n as f64 + 0.5;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sign * (I * PI * tau * k * k).exp()
}

pub(crate) fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

pub(crate) fn centered(x: f64) -> f64 {
    let f = frac(x + 0.5) - 0.5;
    if f >= 0.5 {
        -0.5
    } else {
        f
    }
}

/// Point of the torus stored by its lattice coordinates in `[0, 1)^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub a: f64,
    pub b: f64,
}

impl TorusPoint {
    pub fn new(z: C64, tau: &LatticeTau) -> Self {
        let (a, b) = tau.coords(z);
        Self::from_coords(a, b)
    }

    pub fn from_coords(a: f64, b: f64) -> Self {
        Self {
            a: frac(a),
            b: frac(b),
        }
    }

    pub fn z(&self, tau: &LatticeTau) -> C64 {
        tau.from_coords(self.a, self.b)
    }

    pub fn reduce(&self) -> Self {
        Self::from_coords(self.a, self.b)
    }
}

// Series for θ1 and θ1' at a point already reduced to the centred domain.
fn theta1_series(z: C64, lt: &LatticeTau, with_deriv: bool) -> (C64, C64) {
    let e = (I * PI * z).exp();
    let e2 = e * e;
    let ei = e.inv();
    let ei2 = ei * ei;
    let (mut p, mut m) = (e, ei);
    // d = p - m, advanced without cancellation so that θ1 keeps its relative
    // accuracy near the lattice
    let mut d = 2.0 * I * (PI * z).sin();
    let s2 = 2.0 * I * (2.0 * PI * z).sin();
    let mut val = C64::new(0.0, 0.0);
    let mut der = C64::new(0.0, 0.0);
    let mut scale = 0.0;
    let mut n = 0;
    loop {
        let c = lt.coeff(n);
        let t = c * d;
        val += t;
        if with_deriv {
            der += c * (2 * n + 1) as f64 * (p + m);
        }
        scale += t.norm();
        d = e2 * d + s2 * m;
        p *= e2;
        m *= ei2;
        n += 1;
        if n >= MIN_TERMS {
            let next = lt.coeff(n).norm() * (p.norm() + m.norm()) * (2 * n + 1) as f64;
            if next < lt.precision * scale || next == 0.0 {
                break;
            }
        }
        if n > 10_000 {
            break;
        }
    }
    // θ1(z) = -i Σ ... (e^{(2n+1)iπz} - e^{-(2n+1)iπz}) = 2 Σ ... sin((2n+1)πz)
    (-I * val, PI * der)
}

// Splits z = z' + m + kτ with z' centred and returns (z', m + k, k).
fn split(z: C64, lt: &LatticeTau) -> (C64, i64, i64) {
    let (a, b) = lt.coords(z);
    let k = b.round();
    let m = a.round();
    let zr = z - C64::new(m, 0.0) - k * lt.tau;
    (zr, (m + k) as i64, k as i64)
}

/// Odd Jacobi theta function
/// `θ1(z|τ) = 2 Σ_{n≥0} (-1)^n q^{(n+1/2)^2} sin((2n+1)πz)`, `q = e^{iπτ}`.
pub fn theta1(z: C64, tau: &LatticeTau) -> Result<C64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite argument {z}")));
    }
    let (zr, parity, k) = split(z, tau);
    let (v, _) = theta1_series(zr, tau, false);
    let kf = k as f64;
    let factor = (-I * PI * kf * kf * tau.tau - 2.0 * I * PI * kf * zr).exp();
    let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * factor * v)
}

/// `θ1(z)` and `θ1'(z)`.
pub fn theta1_with_deriv(z: C64, tau: &LatticeTau) -> Result<(C64, C64)> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite argument {z}")));
    }
    let (zr, parity, k) = split(z, tau);
    let (v, d) = theta1_series(zr, tau, true);
    let kf = k as f64;
    let factor = (-I * PI * kf * kf * tau.tau - 2.0 * I * PI * kf * zr).exp();
    let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
    let f = sign * factor;
    Ok((f * v, f * (d - 2.0 * I * PI * kf * v)))
}

/// `θ1'(0) = 2π Σ_{n≥0} (-1)^n (2n+1) q^{(n+1/2)^2}`.
pub fn theta1_prime_zero(tau: &LatticeTau) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    let mut scale = 0.0;
    let mut n = 0;
    loop {
        let t = tau.coeff(n) * (2 * n + 1) as f64;
        acc += t;
        scale += t.norm();
        n += 1;
        if n >= MIN_TERMS && tau.coeff(n).norm() * ((2 * n + 1) as f64) < tau.precision * scale {
            break;
        }
    }
    2.0 * PI * acc
}

/// Flat admissible data: `φ(z) = (2π/Im τ)(Im z)^2` with `dd^c φ = ω`,
/// where `ω = dx dy / Im τ` has total mass one.
#[derive(Clone, Copy, Debug)]
pub struct AdmissibleForm {
    t: f64,
}

impl AdmissibleForm {
    pub fn phi(&self, z: C64) -> f64 {
        2.0 * PI / self.t * z.im * z.im
    }

    /// Density of `ω` with respect to Lebesgue measure.
    pub fn density(&self) -> f64 {
        1.0 / self.t
    }

    pub fn mass(&self) -> f64 {
        1.0
    }
}

/// Torus geometry with the constants the Green's function needs.
#[derive(Clone, Debug)]
pub struct Torus {
    lt: LatticeTau,
    theta1p0: C64,
    log_theta1p0: f64,
    c0: f64,
}

impl Torus {
    pub fn new(tau: C64, precision: f64) -> Result<Self> {
        let lt = LatticeTau::new(tau, precision)?;
        Ok(Self::from_lattice(lt))
    }

    pub fn from_lattice(lt: LatticeTau) -> Self {
        let theta1p0 = theta1_prime_zero(&lt);
        let log_theta1p0 = theta1p0.norm().ln();
        // ω-mean of log|E(·,w)|^2 - (2π/T)(Im(· - w))^2, i.e. -2 log 2π - 4 log|η|
        let c0 = -2.0 * (2.0 * PI).ln() - (4.0 / 3.0) * (theta1p0.norm() / (2.0 * PI)).ln();
        Self {
            lt,
            theta1p0,
            log_theta1p0,
            c0,
        }
    }

    pub fn square() -> Self {
        Self::new(C64::new(0.0, 1.0), 1e-16).expect("tau = i is valid")
    }

    pub fn lattice(&self) -> &LatticeTau {
        &self.lt
    }

    pub fn tau(&self) -> C64 {
        self.lt.tau
    }

    pub fn area(&self) -> f64 {
        self.lt.tau.im
    }

    pub fn omega(&self) -> AdmissibleForm {
        AdmissibleForm { t: self.lt.tau.im }
    }

    pub fn phi(&self, z: C64) -> f64 {
        self.omega().phi(z)
    }

    pub fn theta1_prime_zero(&self) -> C64 {
        self.theta1p0
    }

    /// The mean-offset constant `c0` in the Green's function.
    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn point(&self, z: C64) -> TorusPoint {
        TorusPoint::new(z, &self.lt)
    }

    pub fn z(&self, p: TorusPoint) -> C64 {
        p.z(&self.lt)
    }

    pub fn reduce(&self, z: C64) -> C64 {
        self.lt.reduce(z)
    }

    pub fn dist(&self, z: C64, w: C64) -> f64 {
        self.lt.dist(z, w)
    }

    pub fn theta1(&self, z: C64) -> C64 {
        theta1(z, &self.lt).expect("finite argument")
    }

    /// `E(z, w) = θ1(z - w) / θ1'(0)`.
    pub fn prime_form(&self, z: C64, w: C64) -> C64 {
        self.theta1(z - w) / self.theta1p0
    }

    /// `log ‖1_{O(w)}(z)‖^2 = log|E(z,w)|^2 - (2π/Im τ)(Im(z - w))^2`, a
    /// lattice-periodic function of `z - w`.
    pub fn log_point_norm(&self, z: C64, w: C64) -> f64 {
        let u = self.lt.reduce_centered(z - w);
        if u.norm_sqr() == 0.0 {
            return f64::NEG_INFINITY;
        }
        let (v, _) = theta1_series(u, &self.lt, false);
        2.0 * (v.norm().ln() - self.log_theta1p0) - 2.0 * PI / self.lt.tau.im * u.im * u.im
    }

    /// Riemann constant `Δ = (1 + τ)/2`; `θ00(z - Δ)` vanishes exactly on
    /// the lattice.
    pub fn riemann_constant(&self) -> C64 {
        0.5 * (1.0 + self.lt.tau)
    }

    /// `log ‖θ00(v)‖^2 = log|θ00(v)|^2 - (2π/Im τ)(Im v)^2`, lattice periodic,
    /// with `θ00(v) = Σ_n e^{iπτ n^2 + 2πi n v}`.
    pub fn log_theta00_norm(&self, v: C64) -> f64 {
        let v = self.lt.reduce_centered(v);
        let mut acc = C64::new(1.0, 0.0);
        let mut scale = 1.0;
        for n in 1..10_000 {
            let nf = n as f64;
            let q = (I * PI * self.lt.tau * nf * nf).exp();
            let e = (2.0 * I * PI * nf * v).exp();
            let t = q * (e + e.inv());
            acc += t;
            scale += t.norm();
            if n >= MIN_TERMS && t.norm() < self.lt.precision * scale {
                break;
            }
        }
        2.0 * acc.norm().ln() - 2.0 * PI / self.lt.tau.im * v.im * v.im
    }

    /// Green's function `G(z, w) = log|E(z,w)|^2 - (2π/Im τ)(Im(z-w))^2 - c0`,
    /// so that `dd^c G(·, w) = δ_w - ω` and `∫ G(·, w) ω = 0`.
    /// Returns `-∞` on the diagonal.
    pub fn green(&self, z: C64, w: C64) -> f64 {
        self.log_point_norm(z, w) - self.c0
    }

    /// `g(u) = G(u, 0)`.
    pub fn green0(&self, u: C64) -> f64 {
        self.green(u, C64::new(0.0, 0.0))
    }

    /// `G(u, 0) - log|u'|^2` where `u'` is the centred representative of `u`;
    /// smooth on the centred fundamental domain, including at `u' = 0`.
    pub fn green_regular(&self, u: C64) -> f64 {
        let u = self.lt.reduce_centered(u);
        let r = u.norm();
        let ratio = if r < 1e-8 {
            // θ1(u)/u = θ1'(0) (1 + O(u^2))
            self.theta1p0 * (1.0 + u * u * self.theta1_cubic_ratio())
        } else {
            let (v, _) = theta1_series(u, &self.lt, false);
            v / u
        };
        2.0 * (ratio.norm().ln() - self.log_theta1p0) - 2.0 * PI / self.lt.tau.im * u.im * u.im - self.c0
    }

    // θ1'''(0) / (6 θ1'(0))
    fn theta1_cubic_ratio(&self) -> C64 {
        let mut a = C64::new(0.0, 0.0);
        let mut b = C64::new(0.0, 0.0);
        for n in 0..24 {
            let k = (2 * n + 1) as f64;
            a += self.lt.coeff(n) * k * k * k;
            b += self.lt.coeff(n) * k;
        }
        -(PI * PI / 6.0) * a / b
    }

    /// Gradient of `G(·, w)` at `z` as `(∂_x G, ∂_y G)`.
    pub fn green_gradient(&self, z: C64, w: C64) -> (f64, f64) {
        let u = self.lt.reduce_centered(z - w);
        let (v, d) = theta1_with_deriv(u, &self.lt).expect("finite");
        let r = d / v;
        // ∂_x log|f|^2 = 2 Re(f'/f), ∂_y log|f|^2 = -2 Im(f'/f)
        let t = self.lt.tau.im;
        (2.0 * r.re, -2.0 * r.im - 4.0 * PI / t * u.im)
    }

    /// `ρ_ω(w) = ∫ log ‖1_{O(w)}(z)‖^2 ω_z`, integrated with the logarithmic
    /// singularity split off exactly and an `n × n` Gauss-Legendre rule on
    /// the remainder. The result is compared with the rule at `2n` and an
    /// error is returned if the two disagree by more than `tol`.
    pub fn rho_omega(&self, w: C64, n: usize, tol: f64) -> Result<f64> {
        let a = self.log_norm_mean(w, n);
        let b = self.log_norm_mean(w, 2 * n);
        if (a - b).abs() > tol || !b.is_finite() {
            return Err(Error::NoConvergence(format!(
                "rho_omega quadrature: {a} at n={n} vs {b} at n={}",
                2 * n
            )));
        }
        Ok(b)
    }

    fn log_norm_mean(&self, w: C64, n: usize) -> f64 {
        self.mean_over_omega_log_singular(w, n, |u| self.green_regular(u) + self.c0)
    }

    /// `∫ (log|z - p|^2 + s(z - p)) ω_z` over the fundamental domain centred
    /// at `p`, where `s` is smooth there.
    pub fn mean_over_omega_log_singular(
        &self,
        p: C64,
        n: usize,
        s: impl Fn(C64) -> f64,
    ) -> f64 {
        let e1 = C64::new(1.0, 0.0);
        let e2 = self.lt.tau;
        let verts = quad::parallelogram(p, e1, e2);
        let sing = quad::log_dist_sq_polygon(p, &verts);
        let smooth = quad::integrate_parallelogram(C64::new(0.0, 0.0), e1, e2, n, s);
        (sing + smooth) / self.area()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tau1() -> LatticeTau {
        LatticeTau::new(C64::new(0.3, 1.1), 1e-16).unwrap()
    }

    #[test]
    fn rejects_lower_half_plane() {
        assert!(LatticeTau::new(C64::new(0.0, -1.0), 1e-12).is_err());
        assert!(LatticeTau::new(C64::new(0.0, 0.0), 1e-12).is_err());
    }

    #[test]
    fn reduce_is_idempotent_and_half_open() {
        let lt = tau1();
        let z = C64::new(-3.7, 5.2);
        let r = lt.reduce(z);
        let (a, b) = lt.coords(r);
        assert!((0.0..1.0).contains(&a) && (0.0..1.0).contains(&b));
        assert!((lt.reduce(r) - r).norm() < 1e-14);
        let p = TorusPoint::new(z, &lt);
        assert_eq!(p.reduce(), p);
        assert_eq!(TorusPoint::from_coords(1.0, -0.0), TorusPoint::from_coords(0.0, 0.0));
    }

    #[test]
    fn theta1_derivative_at_zero_matches_series_derivative() {
        let lt = tau1();
        let (_, d) = theta1_with_deriv(C64::new(0.0, 0.0), &lt).unwrap();
        assert!((d - theta1_prime_zero(&lt)).norm() < 1e-13);
    }

    #[test]
    fn theta1_derivative_matches_finite_difference() {
        let lt = tau1();
        for z in [C64::new(0.2, 0.3), C64::new(1.7, -2.1)] {
            let h = 1e-6;
            let fd = (theta1(z + h, &lt).unwrap() - theta1(z - h, &lt).unwrap()) / (2.0 * h);
            let (_, d) = theta1_with_deriv(z, &lt).unwrap();
            assert!((fd - d).norm() < 1e-7 * d.norm().max(1.0), "{fd} vs {d}");
        }
    }

    #[test]
    fn c0_matches_quadrature_of_log_point_norm() {
        let t = Torus::new(C64::new(0.3, 1.1), 1e-16).unwrap();
        let rho = t.rho_omega(C64::new(0.1, 0.2), 24, 1e-10).unwrap();
        assert!((rho - t.c0()).abs() < 1e-10, "{rho} vs {}", t.c0());
    }

    #[test]
    fn green_regular_is_continuous_at_zero() {
        let t = Torus::square();
        let a = t.green_regular(C64::new(0.0, 0.0));
        let b = t.green_regular(C64::new(1e-6, 2e-6));
        let c = t.green_regular(C64::new(1e-9, 0.0));
        assert!((a - b).abs() < 1e-10 && (a - c).abs() < 1e-14);
    }

    #[test]
    fn green_gradient_matches_finite_difference() {
        let t = Torus::new(C64::new(-0.2, 0.9), 1e-16).unwrap();
        let (z, w) = (C64::new(0.4, 0.3), C64::new(0.1, 0.7));
        let h = 1e-6;
        let gx = (t.green(z + h, w) - t.green(z - h, w)) / (2.0 * h);
        let gy = (t.green(z + I * h, w) - t.green(z - I * h, w)) / (2.0 * h);
        let (ax, ay) = t.green_gradient(z, w);
        assert!((gx - ax).abs() < 1e-7 && (gy - ay).abs() < 1e-7);
    }
}
