use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, ZeroConeT};
use holozeros::grid::Grid;
use holozeros::potential::GridMeasure;
use holozeros::torus::Torus;
use holozeros::transport::{transport_cost, CellDistances};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Transport problem as a dense linear program, solved by an interior point
// method. The last column constraint is implied by the others and dropped.
fn lp_cost(a: &[f64], b: &[f64], c: &dyn Fn(usize, usize) -> f64) -> f64 {
    let (m, k) = (a.len(), b.len());
    let nvar = m * k;
    let n_eq = m + k - 1;
    let (mut colptr, mut rowval, mut nzval) = (vec![0], Vec::new(), Vec::new());
    for v in 0..nvar {
        let (i, j) = (v / k, v % k);
        rowval.push(i);
        nzval.push(1.0);
        if j < k - 1 {
            rowval.push(m + j);
            nzval.push(1.0);
        }
        rowval.push(n_eq + v);
        nzval.push(-1.0);
        colptr.push(rowval.len());
    }
    let amat = CscMatrix::new(n_eq + nvar, nvar, colptr, rowval, nzval);
    let p = CscMatrix::zeros((nvar, nvar));
    let q: Vec<f64> = (0..nvar).map(|v| c(v / k, v % k)).collect();
    let mut rhs = vec![0.0; n_eq + nvar];
    rhs[..m].copy_from_slice(a);
    rhs[m..n_eq].copy_from_slice(&b[..k - 1]);
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(1e-12)
        .tol_gap_rel(1e-12)
        .build()
        .unwrap();
    let cones = [ZeroConeT(n_eq), NonnegativeConeT(nvar)];
    let mut solver = DefaultSolver::new(&p, &q, &amat, &rhs, &cones, settings).unwrap();
    solver.solve();
    assert!(matches!(solver.solution.status, SolverStatus::Solved));
    solver.solution.obj_val
}

fn random_measure(rng: &mut ChaCha8Rng, grid: Grid, support: usize) -> GridMeasure {
    let mut w = vec![0.0; grid.len()];
    for _ in 0..support {
        w[rng.random_range(0..grid.len())] += rng.random::<f64>() + 0.05;
    }
    let s: f64 = w.iter().sum();
    GridMeasure::new(grid, w.into_iter().map(|v| v / s).collect()).unwrap()
}

#[test]
fn w1_matches_linear_program() {
    let torus = Torus::new(holozeros::C64::new(0.3, 1.2), 1e-15).unwrap();
    let grid = Grid::new(6);
    let dist = CellDistances::new(&torus, grid);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..12 {
        let mu = random_measure(&mut rng, grid, 3 + trial);
        let nu = random_measure(&mut rng, grid, 14 - trial);
        let w = dist.w1(&mu, &nu).unwrap();
        let (si, sj) = (mu.support(), nu.support());
        let a: Vec<f64> = si.iter().map(|&i| mu.weights[i]).collect();
        let b: Vec<f64> = sj.iter().map(|&j| nu.weights[j]).collect();
        let lp = lp_cost(&a, &b, &|i, j| dist.get(si[i], sj[j]));
        assert!((w - lp).abs() < 1e-7, "trial {trial}: {w} vs {lp}");
    }
}

#[test]
fn unbalanced_masses_are_rejected() {
    assert!(transport_cost(&[0.5, 0.5], &[0.7, 0.5], |_, _| 1.0).is_err());
}

#[test]
fn point_masses_cost_their_distance() {
    let c = transport_cost(&[1.0, 0.0], &[0.0, 1.0], |i, j| if i == j { 0.0 } else { 2.5 }).unwrap();
    assert!((c - 2.5).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn w1_is_a_metric(seed in 0u64..1000) {
        let torus = Torus::square();
        let grid = Grid::new(5);
        let dist = CellDistances::new(&torus, grid);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, c) = (
            random_measure(&mut rng, grid, 4),
            random_measure(&mut rng, grid, 6),
            random_measure(&mut rng, grid, 9),
        );
        let ab = dist.w1(&a, &b).unwrap();
        prop_assert!((ab - dist.w1(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(dist.w1(&a, &a).unwrap().abs() < 1e-12);
        prop_assert!(ab <= dist.w1(&a, &c).unwrap() + dist.w1(&c, &b).unwrap() + 1e-12);
        // bounded by the diameter of the torus
        prop_assert!(ab <= 0.5f64.hypot(0.5) + 1e-12);
    }
}
