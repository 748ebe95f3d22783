//! Random configurations drawn from the section ensembles, with
//! reproducible per-sample random streams.

use crate::error::{Error, Result};
use crate::grid::BaseMeasure;
use crate::sections::{sample_fs, sample_fsh, sample_gaussian, sample_pl, LargeSpace, LineBundle, SectionSpace};
use crate::torus::Torus;
use crate::zeros::{find_zeros, remove_partner, split_large_zeros, Configuration};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::str::FromStr;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    /// Gaussian coefficients in a fixed bundle.
    Gaussian,
    /// Fubini-Study in a fixed bundle.
    FubiniStudy,
    /// Haar-random bundle, then Fubini-Study in its fiber.
    FiberHaar,
    /// Fubini-Study in the large space with a uniformly chosen partner.
    ProjectiveLinear,
}

impl FromStr for EnsembleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "fubini-study" | "fs" => Ok(Self::FubiniStudy),
            "fiber-haar" | "fsh" => Ok(Self::FiberHaar),
            "projective-linear" | "pl" => Ok(Self::ProjectiveLinear),
            other => Err(Error::InvalidInput(format!("unknown ensemble {other}"))),
        }
    }
}

/// One draw: the zero configuration, the partner point `P1` completing it to
/// the class of `(N+1) P0`, and the bundle translate `t = P0 - P1`.
#[derive(Clone, Debug)]
pub struct Draw {
    pub cfg: Configuration,
    pub p1: C64,
    pub translate: C64,
}

#[derive(Clone, Debug)]
pub struct Ensemble {
    pub kind: EnsembleKind,
    pub torus: Torus,
    pub large: LargeSpace,
    fixed: Option<SectionSpace>,
}

impl Ensemble {
    /// `translate` selects the bundle of the fixed-bundle ensembles and is
    /// ignored otherwise.
    pub fn new(
        torus: &Torus,
        degree: usize,
        p0: C64,
        nu: Arc<BaseMeasure>,
        kind: EnsembleKind,
        translate: C64,
    ) -> Result<Self> {
        let large = LargeSpace::new(torus, degree, p0, nu.clone())?;
        let fixed = match kind {
            EnsembleKind::Gaussian | EnsembleKind::FubiniStudy => Some(SectionSpace::new(
                torus,
                LineBundle::new(degree, translate, p0)?,
                nu,
            )?),
            _ => None,
        };
        Ok(Self {
            kind,
            torus: torus.clone(),
            large,
            fixed,
        })
    }

    pub fn degree(&self) -> usize {
        self.large.degree
    }

    pub fn p0(&self) -> C64 {
        self.large.p0()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Draw> {
        let t = &self.torus;
        match self.kind {
            EnsembleKind::Gaussian | EnsembleKind::FubiniStudy => {
                let space = self.fixed.as_ref().expect("fixed bundle space");
                let s = if self.kind == EnsembleKind::Gaussian {
                    sample_gaussian(space, rng)
                } else {
                    sample_fs(space, rng)
                };
                let cfg = find_zeros(&s, t)?;
                let b = space.bundle();
                Ok(Draw {
                    cfg,
                    p1: t.reduce(b.p0 - b.translate),
                    translate: b.translate,
                })
            }
            EnsembleKind::FiberHaar => {
                let s = sample_fsh(&self.large, rng);
                let zeros = find_zeros(&s.section, t)?;
                let cfg = remove_partner(t, &zeros, s.p1)?;
                Ok(Draw {
                    cfg,
                    p1: s.p1,
                    translate: s.translate,
                })
            }
            EnsembleKind::ProjectiveLinear => {
                let s = sample_pl(&self.large, rng);
                let zeros = find_zeros(&s, t)?;
                let (cfg, p1) = split_large_zeros(&zeros, rng);
                Ok(Draw {
                    cfg,
                    p1,
                    translate: t.reduce(self.p0() - p1),
                })
            }
        }
    }
}

/// Random stream for sample `index` of a run seeded with `seed`; independent
/// of how samples are spread over threads.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
