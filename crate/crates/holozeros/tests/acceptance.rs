//! Acceptance checks, one test per criterion. Each prints a single
//! `criterion k ... PASS|FAIL` line with the measured quantities before
//! asserting. Run with `--nocapture` to see the lines.

use holozeros::checks;
use holozeros::ensemble::{Ensemble, EnsembleKind};
use holozeros::equilibrium::{solve_equilibrium, EquilibriumOptions, Init};
use holozeros::genus0::PolySpace;
use holozeros::grid::{BaseMeasure, Grid, MeasureKind, Region};
use holozeros::harness::{ldp_sweep, rate_consistency, ConsistencyConfig, SweepConfig};
use holozeros::jpc::{self, McOptions};
use holozeros::potential::{GridMeasure, KernelTable, RateFunctional};
use holozeros::torus::Torus;
use holozeros::C64;
use std::sync::Arc;
use std::time::{Duration, Instant};

const SEED: u64 = 20_240_601;

fn verdict(k: usize, name: &str, ok: bool, elapsed: Duration, detail: String) {
    println!(
        "criterion {k:>2} {name:<26} {}  [{:.1} s]  {detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    assert!(ok, "criterion {k} ({name}) failed: {detail}");
}

fn rate_on(torus: &Torus, grid: usize, region: &Region) -> RateFunctional {
    let grid = Grid::new(grid);
    RateFunctional::new(KernelTable::new(torus, grid).unwrap(), region.cells(torus, &grid)).unwrap()
}

#[test]
fn criterion_01_theta_and_prime_form() {
    let t0 = Instant::now();
    let h = 1e-6;
    let s = checks::theta_suite(&Torus::square(), 500, h, SEED);
    let el = t0.elapsed();
    let ok = s.quasi_periodicity <= 1e-10
        && s.antisymmetry <= 1e-10
        && s.diagonal <= 1e-5 * h
        && el < Duration::from_secs(5);
    verdict(
        1,
        "theta/prime form",
        ok,
        el,
        format!(
            "quasi-periodicity {:.1e}, antisymmetry {:.1e}, diagonal {:.1e} (h = {h:.0e})",
            s.quasi_periodicity, s.antisymmetry, s.diagonal
        ),
    );
}

#[test]
fn criterion_02_green_function() {
    let t0 = Instant::now();
    let s = checks::green_suite(&Torus::square(), 500, 256, SEED);
    let el = t0.elapsed();
    let ok = s.symmetry <= 1e-10
        && s.mean_zero <= 1e-6
        && (s.flux - 1.0).abs() <= 1e-3
        && el < Duration::from_secs(30);
    verdict(
        2,
        "green function",
        ok,
        el,
        format!(
            "symmetry {:.1e}, mean {:.1e}, flux {:.6} on {}^2",
            s.symmetry, s.mean_zero, s.flux, s.grid
        ),
    );
}

#[test]
fn criterion_03_zero_finder() {
    let t0 = Instant::now();
    let s = checks::zero_finder_suite(&Torus::square(), 10, 200, SEED).unwrap();
    let el = t0.elapsed();
    let ok = s.wrong_count == 0
        && s.winding_error < 1e-6
        && s.plant_recover <= 1e-7
        && s.abel_spread <= 1e-6
        && el < Duration::from_secs(60);
    verdict(
        3,
        "zero finder",
        ok,
        el,
        format!(
            "wrong counts {}, winding {:.1e}, plant/recover {:.1e}, Abel spread {:.1e}",
            s.wrong_count, s.winding_error, s.plant_recover, s.abel_spread
        ),
    );
}

#[test]
fn criterion_04_slater_bergman() {
    let t0 = Instant::now();
    let errs = checks::slater_suite(&Torus::square(), &[2, 3, 4, 5, 6], 50, SEED).unwrap();
    let el = t0.elapsed();
    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    let ok = worst <= 1e-8 && el < Duration::from_secs(60);
    let per: Vec<String> = errs.iter().map(|(n, e)| format!("N={n}: {e:.1e}")).collect();
    verdict(4, "slater determinant", ok, el, per.join(", "));
}

#[test]
fn criterion_05_bosonization() {
    let t0 = Instant::now();
    let s = checks::bosonization_suite(&Torus::square(), 4, 20, SEED).unwrap();
    let el = t0.elapsed();
    let ok = s.genus_one <= 1e-6 && s.genus_zero <= 1e-12;
    verdict(
        5,
        "bosonization ratio",
        ok,
        el,
        format!("genus one {:.1e}, genus zero {:.1e} over {} pairs", s.genus_one, s.genus_zero, s.pairs),
    );
}

#[test]
fn criterion_06_norm_potential_identity() {
    let t0 = Instant::now();
    let e = checks::norm_identity_check(&Torus::square(), 5, 20, SEED).unwrap();
    verdict(6, "norm/potential identity", e <= 1e-6, t0.elapsed(), format!("relative error {e:.1e}"));
}

fn mc_options(samples: u64) -> (McOptions, McOptions) {
    let (reference, cells) = jpc::default_torus_cells();
    let torus = McOptions {
        samples,
        seed: SEED,
        reference,
        cells,
        order: 6,
        finite_checks: 10_000,
    };
    let (reference, cells) = jpc::default_plane_cells();
    let plane = McOptions {
        reference,
        cells,
        ..torus.clone()
    };
    (torus, plane)
}

fn mc_verdict(label: &str, r: &jpc::McValidation, el: Duration) {
    let ok = r.passed(3.0) && el < Duration::from_secs(600);
    verdict(
        7,
        label,
        ok,
        el,
        format!(
            "max |z| {:.2} over {} cells, {} samples, {} failures, finite {}",
            r.max_abs_z,
            r.rows.len(),
            r.samples,
            r.failures,
            r.finite_on_samples
        ),
    );
}

fn torus_ensemble(kind: EnsembleKind) -> (Torus, Ensemble) {
    let torus = Torus::square();
    let nu = Arc::new(BaseMeasure::new(&torus, MeasureKind::UniformTorus, 32).unwrap());
    let p0 = torus.lattice().from_coords(0.5, 0.5);
    let ens = Ensemble::new(&torus, 2, p0, nu, kind, C64::new(0.0, 0.0)).unwrap();
    (torus, ens)
}

#[test]
fn criterion_07a_jpc_genus_zero() {
    let t0 = Instant::now();
    let (_, plane) = mc_options(1_000_000);
    let r = jpc::mc_validate_g0(&PolySpace::unit_circle(2), &plane).unwrap();
    mc_verdict("jpc monte carlo, genus 0", &r, t0.elapsed());
}

#[test]
fn criterion_07b_jpc_projective_linear() {
    let t0 = Instant::now();
    let (opts, _) = mc_options(1_000_000);
    let (torus, ens) = torus_ensemble(EnsembleKind::ProjectiveLinear);
    let nu = ens.large.space.measure().clone();
    let p0 = ens.p0();
    let r = jpc::mc_validate_torus(&ens, &opts, |x| jpc::jpc_density_g1_pl(&torus, x, p0, &nu)).unwrap();
    mc_verdict("jpc monte carlo, PL", &r, t0.elapsed());
}

#[test]
fn criterion_07c_jpc_fiber_haar() {
    let t0 = Instant::now();
    let (opts, _) = mc_options(1_000_000);
    let (torus, ens) = torus_ensemble(EnsembleKind::FiberHaar);
    let r = jpc::mc_validate_torus(&ens, &opts, |x| jpc::jpc_density_g1_fsh(&torus, x, &ens.large)).unwrap();
    mc_verdict("jpc monte carlo, FSH", &r, t0.elapsed());
}

#[test]
fn criterion_08_equilibrium() {
    let t0 = Instant::now();
    let torus = Torus::square();
    let full = rate_on(&torus, 32, &Region::Torus);
    let sol = solve_equilibrium(&full, &EquilibriumOptions::default()).unwrap();
    let tv = sol.measure.total_variation(&GridMeasure::uniform(full.table.grid()));
    let disk = rate_on(
        &torus,
        32,
        &Region::Disk {
            center: [0.5, 0.5],
            radius: 0.3,
        },
    );
    let a = solve_equilibrium(&disk, &EquilibriumOptions::default()).unwrap();
    let b = solve_equilibrium(
        &disk,
        &EquilibriumOptions {
            init: Init::Random(SEED),
            ..Default::default()
        },
    )
    .unwrap();
    let agree = a.measure.total_variation(&b.measure);
    let cert = a.certificate.residual();
    let ok = tv <= 1e-4
        && sol.e0.abs() <= 1e-6
        && (sol.capacity() - 1.0).abs() <= 2e-6
        && cert <= 1e-4
        && agree <= 1e-3;
    verdict(
        8,
        "equilibrium solver",
        ok,
        t0.elapsed(),
        format!(
            "torus TV {tv:.1e}, E0 {:.1e}, Cap-1 {:.1e}; disk certificate {cert:.1e}, init TV {agree:.1e}",
            sol.e0,
            sol.capacity() - 1.0
        ),
    );
}

#[test]
fn criterion_09_rate_function() {
    let t0 = Instant::now();
    let torus = Torus::square();
    let rate = rate_on(
        &torus,
        16,
        &Region::Disk {
            center: [0.5, 0.5],
            radius: 0.35,
        },
    );
    let sol = solve_equilibrium(&rate, &EquilibriumOptions::default()).unwrap();
    let s = checks::rate_suite(&rate, &sol.measure, sol.e0, 50, SEED).unwrap();
    let ok = s.convexity_violation <= 1e-9 && s.rate_at_equilibrium.abs() <= 1e-6 && s.min_perturbed > 0.0;
    verdict(
        9,
        "rate function",
        ok,
        t0.elapsed(),
        format!(
            "convexity violation {:.1e}, rate at equilibrium {:.1e}, smallest perturbed rate {:.2e}",
            s.convexity_violation, s.rate_at_equilibrium, s.min_perturbed
        ),
    );
}

#[test]
fn criterion_10_ldp_trends() {
    let t0 = Instant::now();
    let cfg = SweepConfig {
        tau: [0.0, 1.0],
        precision: 1e-15,
        ns: vec![8, 16, 32, 64],
        samples: 500,
        kind: EnsembleKind::FiberHaar,
        measure: MeasureKind::UniformTorus,
        quadrature: 32,
        grid: 16,
        sigma: Region::Rect {
            a0: 0.0,
            a1: 0.5,
            b0: 0.0,
            b1: 1.0,
        },
        delta: 0.1,
        p0: [0.5, 0.5],
        seed: SEED,
        out_dir: None,
    };
    let r = ldp_sweep(&cfg).unwrap();
    let el = t0.elapsed();
    let conc: Vec<String> = r.concentration().iter().map(|c| format!("{:.4}", c.1)).collect();
    let rates: Vec<String> = r
        .rows
        .iter()
        .map(|row| match row.log_rate {
            Some(v) => format!("{v:.4}"),
            None => format!("<= {:.4}", row.log_rate_upper),
        })
        .collect();
    let ok = r.concentration_decreasing()
        && r.ldp_decreasing()
        && r.ldp_bracketed()
        && el < Duration::from_secs(1800);
    verdict(
        10,
        "ldp trends",
        ok,
        el,
        format!(
            "W1 to equilibrium [{}] decreasing {}; N^-2 log P [{}] decreasing {}; -inf over closed ball {:.4} bracket {}",
            conc.join(", "),
            r.concentration_decreasing(),
            rates.join(", "),
            r.ldp_decreasing(),
            r.bound_closed,
            r.ldp_bracketed()
        ),
    );
}

#[test]
fn criterion_11_rate_consistency() {
    let t0 = Instant::now();
    let rows = rate_consistency(&ConsistencyConfig {
        tau: [0.0, 1.0],
        precision: 1e-15,
        ns: vec![8, 16, 32],
        pairs: 50,
        measure: MeasureKind::UniformTorus,
        quadrature: 32,
        p0: [0.5, 0.5],
        seed: SEED,
    })
    .unwrap();
    let ratio = rows[2].mean_deviation / rows[0].mean_deviation;
    let per: Vec<String> = rows.iter().map(|r| format!("N={}: {:.2e}", r.n, r.mean_deviation)).collect();
    verdict(
        11,
        "rate consistency",
        ratio < 0.5,
        t0.elapsed(),
        format!("mean deviation {}; ratio N=32/N=8 {ratio:.3}", per.join(", ")),
    );
}
