//! Quadrature helpers: Gauss-Legendre rules and exact integrals of
//! `log|z - p|^2` over polygons, used to integrate functions with a
//! logarithmic point singularity.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, t);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -t;
        x[n - 1 - i] = t;
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    x.iter().zip(&w).map(|(xi, wi)| (m + h * xi, h * wi)).collect()
}

/// Exact value of `∫_polygon log|z - p|^2 dA`.
///
/// The polygon is given by its vertices in order (either orientation,
/// not necessarily convex). `p` may lie inside, outside, on an edge or
/// at a vertex.
pub fn log_dist_sq_polygon(p: C64, verts: &[C64]) -> f64 {
    let n = verts.len();
    let mut total = 0.0;
    let mut area2 = 0.0;
    for i in 0..n {
        let a = verts[i] - p;
        let b = verts[(i + 1) % n] - p;
        total += edge_term(a, b);
        area2 += cross(verts[i], verts[(i + 1) % n]);
    }
    if area2 < 0.0 {
        -total
    } else {
        total
    }
}

fn cross(a: C64, b: C64) -> f64 {
    a.re * b.im - a.im * b.re
}

// Signed integral over the triangle (0, a, b). In polar coordinates the
// inner radial integral is R^2 (log R^2 - 1) / 2; with t the tangent of
// the angle measured from the foot of the perpendicular onto the edge
// line the angular integral has the closed form below.
fn edge_term(a: C64, b: C64) -> f64 {
    let e = b - a;
    let len = e.norm();
    if len == 0.0 {
        return 0.0;
    }
    let c = cross(a, b);
    let d = c.abs() / len;
    if d <= 1e-300 || d < 1e-15 * len.max(a.norm()) {
        return 0.0;
    }
    let dir = e / len;
    let ta = (a.re * dir.re + a.im * dir.im) / d;
    let tb = (b.re * dir.re + b.im * dir.im) / d;
    let f = |t: f64, r2: f64| t * (r2.ln() - 3.0) + 2.0 * t.atan();
    let val = 0.5 * d * d * (f(tb, b.norm_sqr()) - f(ta, a.norm_sqr()));
    val * c.signum()
}

/// Vertices of the parallelogram `center + s e1 + t e2`, `s, t ∈ [-1/2, 1/2]`.
pub fn parallelogram(center: C64, e1: C64, e2: C64) -> [C64; 4] {
    [
        center - 0.5 * e1 - 0.5 * e2,
        center + 0.5 * e1 - 0.5 * e2,
        center + 0.5 * e1 + 0.5 * e2,
        center - 0.5 * e1 + 0.5 * e2,
    ]
}

/// `∫ f dA` over the parallelogram `center + s e1 + t e2` by an `n × n`
/// tensor Gauss-Legendre rule.
pub fn integrate_parallelogram(
    center: C64,
    e1: C64,
    e2: C64,
    n: usize,
    f: impl Fn(C64) -> f64,
) -> f64 {
    let rule = gauss_legendre_on(n, -0.5, 0.5);
    let jac = cross(e1, e2).abs();
    let mut acc = 0.0;
    for &(s, ws) in &rule {
        let mut row = 0.0;
        for &(t, wt) in &rule {
            row += wt * f(center + s * e1 + t * e2);
        }
        acc += ws * row;
    }
    acc * jac
}

/// Integral over the triangle `(p, a, b)` of `g(z) log|z - p|^2` with `g`
/// smooth, by a Duffy map collapsing one side of the unit square onto `p`.
/// The log singularity is absorbed by the graded substitution `s = r^4`.
pub fn integrate_triangle_log_weighted(
    p: C64,
    a: C64,
    b: C64,
    n: usize,
    g: impl Fn(C64) -> f64,
) -> f64 {
    let rule = gauss_legendre_on(n, 0.0, 1.0);
    let jac = cross(a - p, b - p).abs();
    let mut acc = 0.0;
    for &(r, wr) in &rule {
        let s = (r * r) * (r * r);
        for &(t, wt) in &rule {
            let z = p + s * ((a - p) + t * (b - a));
            let l = (z - p).norm_sqr();
            if l > 0.0 {
                // dA = jac * s ds dt, ds = 4 r^3 dr
                acc += wr * wt * g(z) * l.ln() * s * 4.0 * r * r * r;
            }
        }
    }
    acc * jac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let num: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((num - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn polygon_log_integral_matches_disk() {
        // a fine regular polygon approximates the disk, whose integral is
        // pi R^2 (log R^2 - 1)
        let r = 0.7;
        let m = 4000;
        let verts: Vec<C64> = (0..m)
            .map(|k| C64::from_polar(r, 2.0 * PI * k as f64 / m as f64))
            .collect();
        let exact = PI * r * r * ((r * r).ln() - 1.0);
        let got = log_dist_sq_polygon(C64::new(0.0, 0.0), &verts);
        assert!((got - exact).abs() < 1e-5, "{got} vs {exact}");
    }

    #[test]
    fn polygon_log_integral_agrees_with_duffy() {
        let verts = parallelogram(C64::new(0.1, 0.2), C64::new(1.0, 0.0), C64::new(0.3, 1.1));
        for p in [C64::new(0.15, 0.3), verts[0], C64::new(2.0, -1.0)] {
            let exact = log_dist_sq_polygon(p, &verts);
            let mut num = 0.0;
            for i in 0..4 {
                let a = verts[i];
                let b = verts[(i + 1) % 4];
                let s = cross(a - p, b - p).signum();
                num += s * integrate_triangle_log_weighted(p, a, b, 40, |_| 1.0);
            }
            assert!((exact - num).abs() < 1e-10, "{exact} vs {num}");
        }
    }
}
