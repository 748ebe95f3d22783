//! Monte Carlo sweeps over the degree: probabilities of Wasserstein balls,
//! concentration of the empirical measure and consistency of the discrete
//! rate with the joint density.

use crate::ensemble::{stream_rng, Ensemble, EnsembleKind};
use crate::equilibrium::{solve_equilibrium, EquilibriumOptions};
use crate::error::{Error, Result};
use crate::grid::{BaseMeasure, Grid, MeasureKind, Region};
use crate::jpc::jpc_density_g1_fsh;
use crate::potential::{rate_in, GridMeasure, KernelTable, RateFunctional};
use crate::torus::Torus;
use crate::transport::CellDistances;
use crate::zeros::Configuration;
use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, ZeroConeT,
};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Largest tolerated share of failed zero extractions.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub tau: [f64; 2],
    #[serde(default = "default_precision")]
    pub precision: f64,
    pub ns: Vec<usize>,
    pub samples: usize,
    pub kind: EnsembleKind,
    /// Base measure `ν`; its support is the set `K`.
    pub measure: MeasureKind,
    /// Quadrature resolution of `ν`.
    pub quadrature: usize,
    /// Grid of the Wasserstein distance and of the rate functional.
    pub grid: usize,
    /// `σ` is the uniform measure on this region.
    pub sigma: Region,
    pub delta: f64,
    #[serde(default = "default_p0")]
    pub p0: [f64; 2],
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_precision() -> f64 {
    1e-15
}

fn default_p0() -> [f64; 2] {
    [0.5, 0.5]
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.ns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("N list must be non-empty and strictly increasing".into()));
        }
        if self.ns[0] == 0 {
            return Err(Error::InvalidInput("degrees must be positive".into()));
        }
        if self.samples < 100 {
            return Err(Error::InvalidInput("at least 100 samples per degree are needed".into()));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidInput("ball radius must be positive".into()));
        }
        if self.measure.support_region().is_none() {
            return Err(Error::InvalidInput("the base measure must live on the torus".into()));
        }
        Ok(())
    }

    pub fn torus(&self) -> Result<Torus> {
        Torus::new(C64::new(self.tau[0], self.tau[1]), self.precision)
    }
}

/// Binomial proportion with a 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub hits: u64,
    pub trials: u64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Proportion {
    /// Wilson score interval; with no hits the upper end is the exact
    /// one-sided bound `1 - 0.05^{1/n}` and the lower end is zero.
    pub fn new(hits: u64, trials: u64) -> Self {
        let n = trials as f64;
        let p = hits as f64 / n;
        if hits == 0 {
            return Self {
                hits,
                trials,
                estimate: 0.0,
                lower: 0.0,
                upper: 1.0 - 0.05f64.powf(1.0 / n),
            };
        }
        let z = 1.959963984540054;
        let z2 = z * z;
        let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
        let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        Self {
            hits,
            trials,
            estimate: p,
            lower: (centre - half).max(0.0),
            upper: (centre + half).min(1.0),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub samples: u64,
    pub failures: u64,
    pub ball: Proportion,
    /// `N^{-2} log` of the estimate and of the interval ends (`-∞` as `null`).
    pub log_rate: Option<f64>,
    pub log_rate_lower: Option<f64>,
    pub log_rate_upper: f64,
    pub mean_w1_eq: f64,
    pub se_w1_eq: f64,
    pub mean_w1_sigma: f64,
    /// Closest approach of `μ_ζ` to `σ` among the samples.
    pub min_w1_sigma: f64,
    pub mean_rate_in: f64,
    pub std_rate_in: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub seed: u64,
    pub e0: f64,
    pub rate_sigma: f64,
    pub w1_sigma_eq: f64,
    /// `-inf Ĩ` over the closed ball `B̄(σ, δ)`.
    pub bound_closed: f64,
    /// `-inf Ĩ` over the ball of radius `δ - h/2`, standing in for the
    /// interior on the grid.
    pub bound_interior: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn concentration(&self) -> Vec<(usize, f64, f64)> {
        self.rows.iter().map(|r| (r.n, r.mean_w1_eq, r.se_w1_eq)).collect()
    }

    pub fn concentration_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].mean_w1_eq < w[0].mean_w1_eq)
    }

    /// Point estimates of `N^{-2} log Prob` strictly decreasing; rows without
    /// hits have no point estimate and fail.
    pub fn ldp_decreasing(&self) -> bool {
        self.rows.iter().all(|r| r.log_rate.is_some())
            && self
                .rows
                .windows(2)
                .all(|w| w[1].log_rate.unwrap() < w[0].log_rate.unwrap())
    }

    /// Every point estimate lies above `-inf_{B̄} Ĩ`.
    pub fn ldp_bracketed(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.log_rate.is_some_and(|v| v >= self.bound_closed))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("ldp_sweep.json"), serde_json::to_string_pretty(self)?)?;
        let mut w = csv::Writer::from_path(dir.join("ldp_sweep.csv"))?;
        w.write_record([
            "n", "samples", "failures", "hits", "prob", "prob_lower", "prob_upper", "log_rate",
            "log_rate_upper", "mean_w1_eq", "se_w1_eq", "mean_w1_sigma", "min_w1_sigma", "mean_rate_in",
            "std_rate_in", "seconds",
        ])?;
        for r in &self.rows {
            w.serialize((
                r.n, r.samples, r.failures, r.ball.hits, r.ball.estimate, r.ball.lower,
                r.ball.upper, r.log_rate, r.log_rate_upper, r.mean_w1_eq, r.se_w1_eq,
                r.mean_w1_sigma, r.min_w1_sigma, r.mean_rate_in, r.std_rate_in, r.seconds,
            ))?;
        }
        w.flush()?;
        Ok(())
    }
}

struct SampleStats {
    w1_eq: f64,
    w1_sigma: f64,
    rate_in: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}

/// Random stream index for sample `i` at degree `n`.
fn stream_index(n: usize, i: u64) -> u64 {
    ((n as u64) << 40) | i
}

/// Estimates `Prob_N(W1(μ_ζ, σ) ≤ δ)` over the degrees of `cfg`, together
/// with the distance of `μ_ζ` to the equilibrium measure and the discrete
/// rate `I_N`. Aborts when more than 1% of the samples fail.
pub fn ldp_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let torus = cfg.torus()?;
    let grid = Grid::new(cfg.grid);
    let region = cfg.measure.support_region().expect("validated");
    let table = KernelTable::new(&torus, grid)?;
    let rate = RateFunctional::new(table, region.cells(&torus, &grid))?;
    let eq = solve_equilibrium(&rate, &EquilibriumOptions::default())?;
    let sigma = GridMeasure::uniform_on(grid, &cfg.sigma.cells(&torus, &grid))?;
    let dist = CellDistances::new(&torus, grid);
    let w1_sigma_eq = dist.w1(&sigma, &eq.measure)?;
    let bound_closed = -inf_rate_on_ball(&rate, &dist, &sigma, cfg.delta, eq.e0)?;
    let bound_interior = -inf_rate_on_ball(&rate, &dist, &sigma, cfg.delta - 0.5 * grid.h(), eq.e0)?;
    let nu = std::sync::Arc::new(BaseMeasure::new(&torus, cfg.measure.clone(), cfg.quadrature)?);
    let p0 = C64::new(cfg.p0[0], cfg.p0[1]);
    let mut rows = Vec::new();
    for &n in &cfg.ns {
        let start = Instant::now();
        let ens = Ensemble::new(&torus, n, p0, nu.clone(), cfg.kind, C64::new(0.0, 0.0))?;
        let stats: Vec<Option<SampleStats>> = (0..cfg.samples as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(cfg.seed, stream_index(n, i));
                let d = ens.sample(&mut rng).ok()?;
                let mu = GridMeasure::from_configuration(&torus, grid, &d.cfg);
                Some(SampleStats {
                    w1_eq: dist.w1(&mu, &eq.measure).ok()?,
                    w1_sigma: dist.w1(&mu, &sigma).ok()?,
                    rate_in: rate_in(&torus, &d.cfg, d.p1, &nu),
                })
            })
            .collect();
        let failures = stats.iter().filter(|s| s.is_none()).count() as u64;
        if failures as f64 > MAX_FAILURE_RATE * cfg.samples as f64 {
            return Err(Error::ZeroFinder(format!(
                "{failures} of {} samples failed at N = {n}",
                cfg.samples
            )));
        }
        let ok: Vec<&SampleStats> = stats.iter().flatten().collect();
        let hits = ok.iter().filter(|s| s.w1_sigma <= cfg.delta).count() as u64;
        let ball = Proportion::new(hits, ok.len() as u64);
        let n2 = (n * n) as f64;
        let to_rate = |p: f64| if p > 0.0 { Some(p.ln() / n2) } else { None };
        let w1: Vec<f64> = ok.iter().map(|s| s.w1_eq).collect();
        let (mean_w1_eq, sd) = mean_std(&w1);
        let (mean_rate_in, std_rate_in) = mean_std(&ok.iter().map(|s| s.rate_in).collect::<Vec<_>>());
        rows.push(SweepRow {
            n,
            samples: ok.len() as u64,
            failures,
            log_rate: to_rate(ball.estimate),
            log_rate_lower: to_rate(ball.lower),
            log_rate_upper: ball.upper.ln() / n2,
            ball,
            mean_w1_eq,
            se_w1_eq: sd / (w1.len() as f64).sqrt(),
            mean_w1_sigma: ok.iter().map(|s| s.w1_sigma).sum::<f64>() / ok.len() as f64,
            min_w1_sigma: ok.iter().map(|s| s.w1_sigma).fold(f64::INFINITY, f64::min),
            mean_rate_in,
            std_rate_in,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let result = SweepResult {
        seed: cfg.seed,
        e0: eq.e0,
        rate_sigma: rate.rate_tilde(&sigma, eq.e0),
        w1_sigma_eq,
        bound_closed,
        bound_interior,
        rows,
    };
    if let Some(dir) = &cfg.out_dir {
        result.write(dir)?;
    }
    Ok(result)
}

/// Mean Wasserstein distance of `μ_ζ` to the equilibrium measure, with its
/// standard error, for each degree of `cfg`.
pub fn concentration_curve(cfg: &SweepConfig) -> Result<Vec<(usize, f64, f64)>> {
    Ok(ldp_sweep(cfg)?.concentration())
}

/// `inf Ĩ` over grid measures within Wasserstein distance `radius` of
/// `sigma`, as a quadratic program in the measure `μ`, the epigraph
/// variable `t ≥ max_K U^μ` and a transport plan from `μ` to `σ`.
pub fn inf_rate_on_ball(
    rate: &RateFunctional,
    dist: &CellDistances,
    sigma: &GridMeasure,
    radius: f64,
    e0: f64,
) -> Result<f64> {
    let grid = rate.table.grid();
    let m = grid.len();
    if radius < 0.0 {
        return Err(Error::InvalidInput("negative ball radius".into()));
    }
    let targets = sigma.support();
    let k = targets.len();
    let nvar = m + 1 + m * k;
    let plan = |i: usize, j: usize| m + 1 + i * k + j;

    // P = -K on the measure block, upper triangle in column order.
    let mut colptr = vec![0usize];
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    for c in 0..nvar {
        if c < m {
            for r in 0..=c {
                rowval.push(r);
                nzval.push(-rate.table.get(r, c));
            }
        }
        colptr.push(rowval.len());
    }
    let p = CscMatrix::new(nvar, nvar, colptr, rowval, nzval);
    let mut q = vec![0.0; nvar];
    q[m] = 1.0;

    // Rows: m + (k - 1) equalities, then μ ≥ 0, plan ≥ 0, U - t ≤ 0 on K,
    // transport cost ≤ radius.
    let n_eq = m + k - 1;
    let kc = &rate.k_cells;
    let row_mu_nonneg = n_eq;
    let row_plan_nonneg = row_mu_nonneg + m;
    let row_pot = row_plan_nonneg + m * k;
    let row_cost = row_pot + kc.len();
    let nrow = row_cost + 1;
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nvar];
    for i in 0..m {
        cols[i].push((i, -1.0));
        cols[i].push((row_mu_nonneg + i, -1.0));
        for (r, &c) in kc.iter().enumerate() {
            cols[i].push((row_pot + r, rate.table.get(c, i)));
        }
    }
    for (r, _) in kc.iter().enumerate() {
        cols[m].push((row_pot + r, -1.0));
    }
    for i in 0..m {
        for (j, &tj) in targets.iter().enumerate() {
            let v = plan(i, j);
            cols[v].push((i, 1.0));
            if j + 1 < k {
                cols[v].push((m + j, 1.0));
            }
            cols[v].push((row_plan_nonneg + i * k + j, -1.0));
            cols[v].push((row_cost, dist.get(i, tj)));
        }
    }
    let mut colptr = vec![0usize];
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    for c in cols.iter_mut() {
        c.sort_by_key(|e| e.0);
        for &(r, v) in c.iter() {
            rowval.push(r);
            nzval.push(v);
        }
        colptr.push(rowval.len());
    }
    let a = CscMatrix::new(nrow, nvar, colptr, rowval, nzval);
    let mut b = vec![0.0; nrow];
    for (j, &tj) in targets.iter().enumerate().take(k - 1) {
        b[m + j] = sigma.weights[tj];
    }
    b[row_cost] = radius;
    let cones = [ZeroConeT(n_eq), NonnegativeConeT(nrow - n_eq)];
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(1e-10)
        .tol_gap_rel(1e-10)
        .max_iter(500)
        .build()
        .map_err(|e| Error::InvalidInput(format!("{e:?}")))?;
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
        .map_err(|e| Error::InvalidInput(format!("{e:?}")))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {}
        s => return Err(Error::NoConvergence(format!("ball program: {s:?}"))),
    }
    let x = &solver.solution.x;
    // re-evaluate at the projected measure so that the value is a rate
    let w: Vec<f64> = x[..m].iter().map(|v| v.max(0.0)).collect();
    let s: f64 = w.iter().sum();
    let mu = GridMeasure {
        grid,
        weights: w.into_iter().map(|v| v / s).collect(),
    };
    Ok(rate.rate_tilde(&mu, e0))
}

/// Deviation between `-N^{-2}` times log-density differences and `I_N`
/// differences over configuration pairs at one degree.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub n: usize,
    pub pairs: usize,
    pub max_deviation: f64,
    pub mean_deviation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConsistencyConfig {
    pub tau: [f64; 2],
    #[serde(default = "default_precision")]
    pub precision: f64,
    pub ns: Vec<usize>,
    pub pairs: usize,
    pub measure: MeasureKind,
    pub quadrature: usize,
    #[serde(default = "default_p0")]
    pub p0: [f64; 2],
    pub seed: u64,
}

/// Compares `-(log D(ζ) - log D(ζ'))/N^2` with `I_N(ζ) - I_N(ζ')` for the
/// Fubini-Study-fiber density `D` over `pairs` sampled pairs per degree.
pub fn rate_consistency(cfg: &ConsistencyConfig) -> Result<Vec<ConsistencyRow>> {
    let torus = Torus::new(C64::new(cfg.tau[0], cfg.tau[1]), cfg.precision)?;
    let nu = std::sync::Arc::new(BaseMeasure::new(&torus, cfg.measure.clone(), cfg.quadrature)?);
    let p0 = C64::new(cfg.p0[0], cfg.p0[1]);
    let mut out = Vec::new();
    for &n in &cfg.ns {
        let ens = Ensemble::new(&torus, n, p0, nu.clone(), EnsembleKind::FiberHaar, C64::new(0.0, 0.0))?;
        let draws: Vec<(f64, f64)> = (0..2 * cfg.pairs as u64)
            .into_par_iter()
            .filter_map(|i| {
                let mut rng = stream_rng(cfg.seed, stream_index(n, i));
                let d = ens.sample(&mut rng).ok()?;
                let dens = jpc_density_g1_fsh(&torus, &d.cfg, &ens.large);
                Some((dens, rate_in(&torus, &d.cfg, d.p1, &nu)))
            })
            .collect();
        let n2 = (n * n) as f64;
        let devs: Vec<f64> = draws
            .chunks_exact(2)
            .map(|c| (-(c[0].0 - c[1].0) / n2 - (c[0].1 - c[1].1)).abs())
            .collect();
        if devs.is_empty() {
            return Err(Error::ZeroFinder("no configuration pairs were sampled".into()));
        }
        out.push(ConsistencyRow {
            n,
            pairs: devs.len(),
            max_deviation: devs.iter().cloned().fold(0.0, f64::max),
            mean_deviation: devs.iter().sum::<f64>() / devs.len() as f64,
        });
    }
    Ok(out)
}

/// `-(log D(a) - log D(b))/N^2 - (I_N(a) - I_N(b))` for two configurations.
pub fn pair_deviation(torus: &Torus, ens: &Ensemble, a: &Configuration, b: &Configuration) -> f64 {
    let nu = ens.large.space.measure();
    let p0 = ens.p0();
    let n2 = (a.len() * a.len()) as f64;
    let da = jpc_density_g1_fsh(torus, a, &ens.large);
    let db = jpc_density_g1_fsh(torus, b, &ens.large);
    let ia = rate_in(torus, a, crate::zeros::abel_partner(torus, a, p0), nu);
    let ib = rate_in(torus, b, crate::zeros::abel_partner(torus, b, p0), nu);
    -(da - db) / n2 - (ia - ib)
}
