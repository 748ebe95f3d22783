//! JSON run configuration and CSV persistence of zero configurations.

use crate::ensemble::{Ensemble, EnsembleKind};
use crate::error::{Error, Result};
use crate::grid::{BaseMeasure, MeasureKind, Region};
use crate::harness::{ConsistencyConfig, SweepConfig};
use crate::torus::Torus;
use crate::zeros::Configuration;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

fn default_precision() -> f64 {
    1e-15
}

fn default_grid() -> usize {
    32
}

fn default_p0() -> [f64; 2] {
    [0.5, 0.5]
}

/// Geometry, ensemble and optional sweep settings of a run.
///
/// ```json
/// {
///   "tau": [0.0, 1.0],
///   "precision": 1e-15,
///   "grid": 32,
///   "ensemble": {
///     "n": 8,
///     "kind": "fiber-haar",
///     "measure": { "kind": "uniform-disk", "center": [0.5, 0.5], "radius": 0.35 },
///     "quadrature": 32,
///     "seed": 1
///   }
/// }
/// ```
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tau: [f64; 2],
    #[serde(default = "default_precision")]
    pub precision: f64,
    /// Resolution of the grid carrying potentials, equilibrium measures and
    /// the Wasserstein distance.
    #[serde(default = "default_grid")]
    pub grid: usize,
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n: usize,
    /// Must agree with the top-level `tau` when given.
    #[serde(default)]
    pub tau: Option<[f64; 2]>,
    pub kind: EnsembleKind,
    pub measure: MeasureKind,
    /// Resolution of the quadrature rule of `ν`.
    #[serde(default = "default_quadrature")]
    pub quadrature: usize,
    pub seed: u64,
    #[serde(default = "default_p0")]
    pub p0: [f64; 2],
    /// Bundle translate of the fixed-bundle ensembles.
    #[serde(default)]
    pub translate: [f64; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub ns: Vec<usize>,
    pub samples: usize,
    pub sigma: Region,
    pub delta: f64,
    /// Configuration pairs per degree for the rate consistency check.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
}

fn default_quadrature() -> usize {
    128
}

fn default_pairs() -> usize {
    50
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.ensemble.tau {
            if t != self.tau {
                return Err(Error::InvalidInput(format!(
                    "ensemble tau {t:?} differs from the geometry tau {:?}",
                    self.tau
                )));
            }
        }
        if self.ensemble.n == 0 {
            return Err(Error::InvalidInput("degree must be positive".into()));
        }
        if self.grid < 6 {
            return Err(Error::InvalidInput("grid resolution must be at least 6".into()));
        }
        Ok(())
    }

    pub fn torus(&self) -> Result<Torus> {
        Torus::new(C64::new(self.tau[0], self.tau[1]), self.precision)
    }

    pub fn p0(&self) -> C64 {
        C64::new(self.ensemble.p0[0], self.ensemble.p0[1])
    }

    pub fn base_measure(&self, torus: &Torus) -> Result<Arc<BaseMeasure>> {
        Ok(Arc::new(BaseMeasure::new(
            torus,
            self.ensemble.measure.clone(),
            self.ensemble.quadrature,
        )?))
    }

    /// The ensemble at degree `n` (the configured degree when `None`).
    pub fn build_ensemble(&self, torus: &Torus, n: Option<usize>) -> Result<Ensemble> {
        let e = &self.ensemble;
        Ensemble::new(
            torus,
            n.unwrap_or(e.n),
            self.p0(),
            self.base_measure(torus)?,
            e.kind,
            C64::new(e.translate[0], e.translate[1]),
        )
    }

    fn sweep_block(&self) -> Result<&SweepBlock> {
        self.sweep
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("the configuration has no sweep block".into()))
    }

    pub fn sweep_config(&self, seed: u64, out_dir: Option<PathBuf>) -> Result<SweepConfig> {
        let s = self.sweep_block()?;
        Ok(SweepConfig {
            tau: self.tau,
            precision: self.precision,
            ns: s.ns.clone(),
            samples: s.samples,
            kind: self.ensemble.kind,
            measure: self.ensemble.measure.clone(),
            quadrature: self.ensemble.quadrature,
            grid: self.grid,
            sigma: s.sigma.clone(),
            delta: s.delta,
            p0: self.ensemble.p0,
            seed,
            out_dir,
        })
    }

    pub fn consistency_config(&self, seed: u64) -> Result<ConsistencyConfig> {
        let s = self.sweep_block()?;
        Ok(ConsistencyConfig {
            tau: self.tau,
            precision: self.precision,
            ns: s.ns.clone(),
            pairs: s.pairs,
            measure: self.ensemble.measure.clone(),
            quadrature: self.ensemble.quadrature,
            p0: self.ensemble.p0,
            seed,
        })
    }
}

/// A sampled configuration with the data needed to reproduce it: the
/// bundle translate of the draw, the run seed and the sample's stream.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigurationRecord {
    pub cfg: Configuration,
    pub translate: C64,
    pub seed: u64,
    pub stream: u64,
}

/// Writes one row per record: `N, re_1, im_1, ..., re_N, im_N, t_re, t_im,
/// seed, stream`. Rows may have different lengths.
pub fn write_configurations(path: &Path, records: &[ConfigurationRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_path(path)?;
    for r in records {
        let mut row = vec![r.cfg.len().to_string()];
        for p in &r.cfg.points {
            row.push(format!("{:e}", p.re));
            row.push(format!("{:e}", p.im));
        }
        row.push(format!("{:e}", r.translate.re));
        row.push(format!("{:e}", r.translate.im));
        row.push(r.seed.to_string());
        row.push(r.stream.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_configurations(path: &Path) -> Result<Vec<ConfigurationRecord>> {
    let mut rd = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(false)
        .from_path(path)?;
    let bad = |line: usize, what: &str| Error::InvalidInput(format!("row {line}: {what}"));
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| bad(line, "too few fields"))?
                .trim()
                .parse::<f64>()
                .map_err(|_| bad(line, "not a number"))
        };
        let n: usize = rec
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad(line, "bad point count"))?;
        if rec.len() != 2 * n + 5 {
            return Err(bad(line, &format!("expected {} fields, found {}", 2 * n + 5, rec.len())));
        }
        let points = (0..n)
            .map(|k| Ok(C64::new(f(1 + 2 * k)?, f(2 + 2 * k)?)))
            .collect::<Result<Vec<_>>>()?;
        let int = |i: usize| -> Result<u64> {
            rec[i].trim().parse().map_err(|_| bad(line, "bad integer"))
        };
        out.push(ConfigurationRecord {
            cfg: Configuration::new(points),
            translate: C64::new(f(2 * n + 1)?, f(2 * n + 2)?),
            seed: int(2 * n + 3)?,
            stream: int(2 * n + 4)?,
        });
    }
    Ok(out)
}
