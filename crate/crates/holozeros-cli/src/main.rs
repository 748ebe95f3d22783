use clap::{Args, Parser, Subcommand};
use holozeros::checks;
use holozeros::config::{read_configurations, write_configurations, ConfigurationRecord, RunConfig};
use holozeros::ensemble::{stream_rng, EnsembleKind};
use holozeros::equilibrium::{certificate, solve_equilibrium, EquilibriumOptions, EquilibriumReport};
use holozeros::genus0::PolySpace;
use holozeros::grid::Grid;
use holozeros::harness::{ldp_sweep, rate_consistency};
use holozeros::jpc::{self, McOptions};
use holozeros::potential::{GridMeasure, KernelTable, RateFunctional};
use holozeros::sections::{sample_gaussian, LineBundle, SectionSpace};
use holozeros::zeros::{find_zeros, lattice_residual};
use holozeros::{Error, Result, C64};
use serde_json::json;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "holozeros", version, about = "Zeros of random holomorphic sections on complex tori")]
struct Cli {
    /// Overrides the seed of the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// JSON run configuration.
    #[arg(long, short)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Draw configurations from the ensemble and write them as CSV.
    Sample {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 100)]
        count: u64,
    },
    /// Zeros of one section of the fixed bundle, from coefficients or drawn
    /// from the seed.
    Zeros {
        #[command(flatten)]
        config: ConfigArg,
        /// CSV of `re,im` coefficients in the orthonormal basis.
        #[arg(long)]
        coeffs: Option<PathBuf>,
    },
    /// Equilibrium measure of the support of the base measure.
    Equilibrium {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Density consistency and cell-count validation of the two-point
    /// joint densities.
    JpcCheck {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
    /// Theta, Green, zero finder and determinant identity suites.
    IdentityCheck {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Ball probabilities, concentration and rate consistency over N.
    LdpSweep {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Summarizes and re-verifies the outputs found in the output directory.
    Report {
        /// Configuration used to produce the outputs.
        #[command(flatten)]
        config: ConfigArg,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let out = &cli.out_dir;
    match &cli.command {
        Command::Sample { config, count } => {
            let cfg = RunConfig::load(&config.config)?;
            let seed = cli.seed.unwrap_or(cfg.ensemble.seed);
            sample(&cfg, seed, *count, out)
        }
        Command::Zeros { config, coeffs } => {
            let cfg = RunConfig::load(&config.config)?;
            zeros(&cfg, cli.seed.unwrap_or(cfg.ensemble.seed), coeffs.as_deref(), out)
        }
        Command::Equilibrium { config } => equilibrium(&RunConfig::load(&config.config)?, out),
        Command::JpcCheck { config, samples } => {
            let cfg = RunConfig::load(&config.config)?;
            jpc_check(&cfg, cli.seed.unwrap_or(cfg.ensemble.seed), *samples, out)
        }
        Command::IdentityCheck { config } => {
            let cfg = RunConfig::load(&config.config)?;
            identity_check(&cfg, cli.seed.unwrap_or(cfg.ensemble.seed), out)
        }
        Command::LdpSweep { config } => {
            let cfg = RunConfig::load(&config.config)?;
            let seed = cli.seed.unwrap_or(cfg.ensemble.seed);
            let sweep = ldp_sweep(&cfg.sweep_config(seed, Some(out.clone()))?)?;
            let consistency = rate_consistency(&cfg.consistency_config(seed)?)?;
            for r in &sweep.rows {
                println!(
                    "N={:>3}  P(ball)={:.4} [{:.4}, {:.4}]  W1(mu, nu_eq)={:.5}  I_N={:.5}",
                    r.n, r.ball.estimate, r.ball.lower, r.ball.upper, r.mean_w1_eq, r.mean_rate_in
                );
            }
            println!("-inf over the closed ball: {:.6}", sweep.bound_closed);
            write_json(out, "rate_consistency.json", &serde_json::to_value(&consistency)?)?;
            println!("wrote {}", out.join("ldp_sweep.json").display());
            Ok(())
        }
        Command::Report { config } => report(&RunConfig::load(&config.config)?, out),
    }
}

fn sample(cfg: &RunConfig, seed: u64, count: u64, out: &Path) -> Result<()> {
    let torus = cfg.torus()?;
    let ens = cfg.build_ensemble(&torus, None)?;
    let mut records = Vec::new();
    let mut failures = 0u64;
    for i in 0..count {
        let mut rng = stream_rng(seed, i);
        match ens.sample(&mut rng) {
            Ok(d) => records.push(ConfigurationRecord {
                cfg: d.cfg,
                translate: d.translate,
                seed,
                stream: i,
            }),
            Err(_) => failures += 1,
        }
    }
    std::fs::create_dir_all(out)?;
    let path = out.join("configurations.csv");
    write_configurations(&path, &records)?;
    println!("wrote {}", path.display());
    write_json(
        out,
        "sample.json",
        &json!({
            "kind": ens.kind,
            "n": ens.degree(),
            "seed": seed,
            "count": count,
            "failures": failures,
        }),
    )
}

fn zeros(cfg: &RunConfig, seed: u64, coeffs: Option<&Path>, out: &Path) -> Result<()> {
    let torus = cfg.torus()?;
    let e = &cfg.ensemble;
    let bundle = LineBundle::new(e.n, C64::new(e.translate[0], e.translate[1]), cfg.p0())?;
    let space = SectionSpace::new(&torus, bundle, cfg.base_measure(&torus)?)?;
    let section = match coeffs {
        Some(p) => {
            let mut rd = csv::ReaderBuilder::new().has_headers(false).from_path(p).map_err(Error::from)?;
            let mut a = Vec::new();
            for rec in rd.deserialize() {
                let (re, im): (f64, f64) = rec.map_err(Error::from)?;
                a.push(C64::new(re, im));
            }
            if a.len() != space.dim() {
                return Err(Error::InvalidInput(format!(
                    "expected {} coefficients, found {}",
                    space.dim(),
                    a.len()
                )));
            }
            space.section(nalgebra::DVector::from_vec(a))
        }
        None => sample_gaussian(&space, &mut stream_rng(seed, 0)),
    };
    let found = find_zeros(&section, &torus)?;
    std::fs::create_dir_all(out)?;
    let path = out.join("zeros.csv");
    let mut w = csv::Writer::from_path(&path).map_err(Error::from)?;
    w.write_record(["index", "re", "im", "multiple", "residual"]).map_err(Error::from)?;
    for (k, z) in found.points.iter().enumerate() {
        w.serialize((k, z.re, z.im, found.multiple[k], section.eval(*z).norm()))
            .map_err(Error::from)?;
    }
    w.flush()?;
    println!("wrote {}", path.display());
    let sum: C64 = found.points.iter().sum();
    let target = space.bundle().zero_sum(&torus);
    write_json(
        out,
        "zeros.json",
        &json!({
            "n": found.len(),
            "abel_sum": [sum.re, sum.im],
            "expected_sum": [target.re, target.im],
            "abel_residual": lattice_residual(&torus, sum - target),
        }),
    )
}

fn rate_functional(cfg: &RunConfig) -> Result<RateFunctional> {
    let torus = cfg.torus()?;
    let grid = Grid::new(cfg.grid);
    let region = cfg
        .ensemble
        .measure
        .support_region()
        .ok_or_else(|| Error::InvalidInput("the base measure must live on the torus".into()))?;
    RateFunctional::new(KernelTable::new(&torus, grid)?, region.cells(&torus, &grid))
}

fn equilibrium(cfg: &RunConfig, out: &Path) -> Result<()> {
    let rate = rate_functional(cfg)?;
    let sol = solve_equilibrium(&rate, &EquilibriumOptions::default())?;
    std::fs::create_dir_all(out)?;
    let path = out.join("equilibrium_weights.csv");
    sol.measure.write_csv(&path)?;
    println!("wrote {}", path.display());
    let rep = sol.report();
    println!(
        "E0 = {:.10}  Cap = {:.10}  certificate residual = {:.2e}  converged = {}",
        rep.e0,
        rep.capacity,
        sol.certificate.residual(),
        rep.converged
    );
    write_json(out, "equilibrium.json", &serde_json::to_value(&rep)?)
}

fn jpc_check(cfg: &RunConfig, seed: u64, samples: u64, out: &Path) -> Result<()> {
    let torus = cfg.torus()?;
    let mut report = serde_json::Map::new();
    // FSH and PL densities differ by the factor log J̃ - log F̃
    let ens = cfg.build_ensemble(&torus, Some(cfg.ensemble.n.max(2)))?;
    let mut worst: f64 = 0.0;
    let mut sym: f64 = 0.0;
    for i in 0..20 {
        let d = ens.sample(&mut stream_rng(seed, i))?;
        worst = worst.max(jpc::fsh_pl_consistency(&torus, &d.cfg, &ens.large).abs());
        let mut rev = d.cfg.clone();
        rev.points.reverse();
        sym = sym.max(
            (jpc::jpc_density_g1_fsh(&torus, &d.cfg, &ens.large)
                - jpc::jpc_density_g1_fsh(&torus, &rev, &ens.large))
            .abs(),
        );
    }
    report.insert("fsh_pl_consistency".into(), json!(worst));
    report.insert("permutation_symmetry".into(), json!(sym));
    let (reference, cells) = jpc::default_torus_cells();
    let opts = McOptions {
        samples,
        seed,
        reference,
        cells,
        order: 6,
        finite_checks: samples.min(10_000),
    };
    let mut mc = Vec::new();
    for kind in [EnsembleKind::ProjectiveLinear, EnsembleKind::FiberHaar] {
        let mut c = cfg.clone();
        c.ensemble.kind = kind;
        let e = c.build_ensemble(&torus, Some(2))?;
        let nu = e.large.space.measure().clone();
        let p0 = e.p0();
        let r = match kind {
            EnsembleKind::ProjectiveLinear => {
                jpc::mc_validate_torus(&e, &opts, |x| jpc::jpc_density_g1_pl(&torus, x, p0, &nu))?
            }
            _ => jpc::mc_validate_torus(&e, &opts, |x| jpc::jpc_density_g1_fsh(&torus, x, &e.large))?,
        };
        mc.push(r);
    }
    let (reference, cells) = jpc::default_plane_cells();
    mc.push(jpc::mc_validate_g0(
        &PolySpace::unit_circle(2),
        &McOptions {
            reference,
            cells,
            ..opts.clone()
        },
    )?);
    std::fs::create_dir_all(out)?;
    let mut summary = Vec::new();
    for r in &mc {
        let path = out.join(format!("mc_{}.csv", r.ensemble.to_lowercase()));
        r.write_csv(&path)?;
        println!(
            "{:<18} max |z| = {:.2}  finite = {}  failures = {}",
            r.ensemble, r.max_abs_z, r.finite_on_samples, r.failures
        );
        summary.push(json!({
            "ensemble": r.ensemble,
            "samples": r.samples,
            "failures": r.failures,
            "max_abs_z": r.max_abs_z,
            "finite_on_samples": r.finite_on_samples,
            "passed": r.passed(3.0),
            "table": path.file_name().and_then(|s| s.to_str()),
        }));
    }
    report.insert("mc".into(), json!(summary));
    write_json(out, "jpc_report.json", &serde_json::Value::Object(report))
}

fn identity_check(cfg: &RunConfig, seed: u64, out: &Path) -> Result<()> {
    let torus = cfg.torus()?;
    let theta = checks::theta_suite(&torus, 200, 1e-6, seed);
    let green = checks::green_suite(&torus, 200, 256, seed);
    let zeros = checks::zero_finder_suite(&torus, 10, 200, seed)?;
    let slater = checks::slater_suite(&torus, &[2, 3, 4, 5, 6], 50, seed)?;
    let boson = checks::bosonization_suite(&torus, 4, 20, seed)?;
    let norm = checks::norm_identity_check(&torus, 5, 20, seed)?;
    let rate = rate_functional(cfg)?;
    let sol = solve_equilibrium(&rate, &EquilibriumOptions::default())?;
    let rs = checks::rate_suite(&rate, &sol.measure, sol.e0, 50, seed)?;
    let value = json!({
        "theta": theta,
        "green": green,
        "zero_finder": zeros,
        "slater_bergman": slater,
        "bosonization": boson,
        "norm_potential": norm,
        "rate_functional": rs,
    });
    println!("{}", serde_json::to_string_pretty(&value)?);
    write_json(out, "identity_report.json", &value)
}

fn report(cfg: &RunConfig, out: &Path) -> Result<()> {
    let torus = cfg.torus()?;
    let mut summary = serde_json::Map::new();
    let weights = out.join("equilibrium_weights.csv");
    let eq_json = out.join("equilibrium.json");
    if weights.exists() && eq_json.exists() {
        let rep: EquilibriumReport = serde_json::from_str(&std::fs::read_to_string(&eq_json)?)?;
        let rate = rate_functional(cfg)?;
        let mu = GridMeasure::read_csv(&weights, rate.table.grid())?;
        let (e, _) = rate.parts(&mu);
        let cert = certificate(&rate, &mu);
        println!(
            "equilibrium: E0 = {:.10} (recomputed {:.10}), certificate residual {:.2e}",
            rep.e0,
            0.5 * e,
            cert.residual()
        );
        summary.insert(
            "equilibrium".into(),
            json!({ "e0": rep.e0, "e0_recomputed": 0.5 * e, "certificate_residual": cert.residual() }),
        );
    }
    let confs = out.join("configurations.csv");
    if confs.exists() {
        let recs = read_configurations(&confs)?;
        let p0 = cfg.p0();
        // Σζ + P1 lies in the class of (N+1) P0 with P1 = P0 - t
        let worst = recs
            .iter()
            .map(|r| {
                let n = r.cfg.len() as f64;
                let s: C64 = r.cfg.points.iter().sum::<C64>() + (p0 - r.translate);
                lattice_residual(&torus, s - (n + 1.0) * p0)
            })
            .fold(0.0, f64::max);
        println!("configurations: {} rows, largest Abel residual {:.2e}", recs.len(), worst);
        summary.insert("configurations".into(), json!({ "rows": recs.len(), "abel_residual": worst }));
    }
    for name in ["jpc_report.json", "identity_report.json", "ldp_sweep.json", "rate_consistency.json"] {
        let p = out.join(name);
        if p.exists() {
            let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p)?)?;
            println!("{name}: present");
            summary.insert(name.trim_end_matches(".json").into(), v);
        }
    }
    if summary.is_empty() {
        return Err(Error::InvalidInput(format!("no outputs found in {}", out.display())));
    }
    write_json(out, "report.json", &serde_json::Value::Object(summary))
}
