use holozeros::torus::Torus;
use holozeros::C64;
use proptest::prelude::*;

fn torus() -> impl Strategy<Value = Torus> {
    (-0.5f64..0.5, 0.7f64..2.5).prop_map(|(re, im)| Torus::new(C64::new(re, im), 1e-16).unwrap())
}

fn coords() -> impl Strategy<Value = (f64, f64)> {
    (0.0f64..1.0, 0.0f64..1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn theta_quasi_periodicity(t in torus(), (a, b) in coords()) {
        let z = t.lattice().from_coords(a - 0.5, b - 0.5);
        let tau = t.tau();
        let v = t.theta1(z);
        let i = C64::new(0.0, 1.0);
        let shifted = -(-i * std::f64::consts::PI * (tau + 2.0 * z)).exp() * v;
        prop_assert!((t.theta1(z + 1.0) + v).norm() <= 1e-12 * v.norm());
        prop_assert!((t.theta1(z + tau) - shifted).norm() <= 1e-11 * shifted.norm());
    }

    #[test]
    fn green_is_symmetric_and_periodic(t in torus(), (a, b) in coords(), (c, d) in coords()) {
        let z = t.lattice().from_coords(a, b);
        let w = t.lattice().from_coords(c, d);
        prop_assume!(t.dist(z, w) > 1e-3);
        let g = t.green(z, w);
        prop_assert!((g - t.green(w, z)).abs() < 1e-10);
        prop_assert!((g - t.green(z + 1.0, w)).abs() < 1e-10);
        prop_assert!((g - t.green(z, w - t.tau())).abs() < 1e-10);
    }

    #[test]
    fn green_has_a_logarithmic_pole(t in torus(), (a, b) in coords(), r in 1e-6f64..1e-3, arg in 0.0f64..std::f64::consts::TAU) {
        let w = t.lattice().from_coords(a, b);
        let z = w + C64::from_polar(r, arg);
        // G - 2 log|z - w| stays bounded as z approaches w
        let rem = t.green(z, w) - 2.0 * r.ln();
        let rem2 = t.green(w + C64::from_polar(r / 10.0, arg), w) - 2.0 * (r / 10.0).ln();
        prop_assert!((rem - rem2).abs() < 1e-2);
    }
}

#[test]
fn invalid_modulus_is_rejected() {
    assert!(Torus::new(C64::new(0.0, -1.0), 1e-15).is_err());
    assert!(Torus::new(C64::new(f64::NAN, 1.0), 1e-15).is_err());
}

#[test]
fn green_diagonal_is_the_sentinel() {
    let t = Torus::square();
    let w = C64::new(0.3, 0.4);
    assert_eq!(t.green(w, w), f64::NEG_INFINITY);
}
