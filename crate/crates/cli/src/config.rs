//! Run configuration: a TOML file merged with command-line overrides.
//!
//! ```toml
//! [material]
//! family = "checkerboard:1,100"   # or: path = "micro.json"
//!
//! [grid]
//! shape = [243, 243]
//! half_periods = [1.0, 1.0]
//!
//! [load]
//! e = [1.0, 0.0]
//!
//! [solver]
//! method = "cg"
//! tol = 1e-8
//! max_iter = 1000
//! ref_lambda = 1.0                # or: reference = [[2.0, 0.0], [0.0, 1.0]]
//!
//! [output]
//! dir = "out"
//!
//! [study]
//! kind = "contrast"               # convergence | contrast | approximation
//! grids = [[9], [17], [33], [65]]
//! contrasts = [10.0, 100.0, 1000.0]
//! orders = [0.0, 1.0]
//! smoothness = 2.0
//! cutoff = 4096
//! ```

use std::path::{Path, PathBuf};

use homog_core::solver::{LoadCase, Method, SolverConfig};
use homog_core::{Error, Family, GridSpec, ReferenceTensor, Result};
use serde::Deserialize;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub material: MaterialSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub load: LoadSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub study: StudySection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub family: Option<String>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub shape: Option<Vec<usize>>,
    pub half_periods: Option<Vec<f64>>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSection {
    pub e: Option<Vec<f64>>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub method: Option<String>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub ref_lambda: Option<f64>,
    pub reference: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub kind: Option<String>,
    pub grids: Option<Vec<Vec<usize>>>,
    pub contrasts: Option<Vec<f64>>,
    pub orders: Option<Vec<f64>>,
    pub smoothness: Option<f64>,
    pub cutoff: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Format(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

/// Values given on the command line; each one replaces its config entry.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub material: Option<PathBuf>,
    pub family: Option<String>,
    pub grid: Option<Vec<usize>>,
    pub half_periods: Option<Vec<f64>>,
    pub load: Option<Vec<f64>>,
    pub solver: Option<String>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub ref_lambda: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaterialSource {
    Voxel(PathBuf),
    Family(Family),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Convergence,
    Contrast,
    Approximation,
}

impl std::str::FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convergence" => Ok(StudyKind::Convergence),
            "contrast" => Ok(StudyKind::Contrast),
            "approximation" => Ok(StudyKind::Approximation),
            other => Err(Error::Format(format!(
                "unknown study kind {other:?}, expected convergence, contrast or approximation"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub kind: Option<StudyKind>,
    pub grids: Option<Vec<Vec<usize>>>,
    pub contrasts: Vec<f64>,
    pub orders: Vec<f64>,
    pub smoothness: f64,
    pub cutoff: usize,
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub material: Option<MaterialSource>,
    pub shape: Option<Vec<usize>>,
    pub half_periods: Option<Vec<f64>>,
    pub load: Option<Vec<f64>>,
    pub solver: SolverConfig,
    pub ref_lambda: Option<f64>,
    pub out: PathBuf,
    pub study: StudyConfig,
}

impl RunConfig {
    pub fn resolve(file: ConfigFile, flags: Overrides) -> Result<Self> {
        let material = match (flags.material, flags.family) {
            (Some(_), Some(_)) => return Err(Error::Format("--material and --family are mutually exclusive".into())),
            (Some(p), None) => Some(MaterialSource::Voxel(p)),
            (None, Some(f)) => Some(MaterialSource::Family(f.parse()?)),
            (None, None) => match (file.material.path, file.material.family) {
                (Some(_), Some(_)) => {
                    return Err(Error::Format("[material] takes either path or family, not both".into()))
                }
                (Some(p), None) => Some(MaterialSource::Voxel(p)),
                (None, Some(f)) => Some(MaterialSource::Family(f.parse()?)),
                (None, None) => None,
            },
        };

        let shape = flags.grid.or(file.grid.shape);
        let half_periods = flags.half_periods.or(file.grid.half_periods);
        if let Some(shape) = &shape {
            let y = half_periods.clone().unwrap_or_else(|| vec![1.0; shape.len()]);
            GridSpec::new(&y, shape)?;
        }

        let method: Method = flags.solver.or(file.solver.method).as_deref().unwrap_or("cg").parse()?;
        let tol = flags.tol.or(file.solver.tol).unwrap_or(1e-8);
        let max_iter = flags.max_iter.or(file.solver.max_iter).unwrap_or(match method {
            Method::Cg => 1_000,
            Method::Neumann => 100_000,
        });
        let mut solver = SolverConfig { method, tol, max_iter, reference: None };
        solver.validate().map_err(|e| Error::Format(e.to_string()))?;

        let ref_lambda = flags.ref_lambda.or(file.solver.ref_lambda);
        if let Some(l) = ref_lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Format(format!("reference lambda must be positive, got {l}")));
            }
        }
        if flags.ref_lambda.is_none() {
            if let Some(rows) = &file.solver.reference {
                let d = rows.len();
                if rows.iter().any(|r| r.len() != d) {
                    return Err(Error::Format("reference must be a square matrix".into()));
                }
                let full: Vec<f64> = rows.iter().flatten().copied().collect();
                solver.reference =
                    Some(ReferenceTensor::new(d, &full).map_err(|e| Error::Format(format!("reference: {e}")))?);
            }
        }

        let load = flags.load.or(file.load.e);
        if let Some(e) = &load {
            LoadCase::new(e.clone()).map_err(|e| Error::Format(e.to_string()))?;
        }

        let study = StudyConfig {
            kind: file.study.kind.as_deref().map(str::parse).transpose()?,
            grids: file.study.grids,
            contrasts: file.study.contrasts.unwrap_or_else(|| vec![10.0, 100.0, 1000.0]),
            orders: file.study.orders.unwrap_or_else(|| vec![0.0, 1.0]),
            smoothness: file.study.smoothness.unwrap_or(2.0),
            cutoff: file.study.cutoff.unwrap_or(4096),
        };

        Ok(RunConfig {
            material,
            shape,
            half_periods,
            load,
            solver,
            ref_lambda,
            out: flags.out.or(file.output.dir).unwrap_or_else(|| PathBuf::from("out")),
            study,
        })
    }

    /// Solver settings with the reference resolved for a `d`-dimensional
    /// problem.
    pub fn solver_for(&self, d: usize) -> Result<SolverConfig> {
        let mut cfg = self.solver.clone();
        if let Some(l) = self.ref_lambda {
            cfg.reference = Some(ReferenceTensor::scalar(d, l)?);
        }
        if let Some(r) = &cfg.reference {
            if r.dim() != d {
                return Err(Error::Format(format!("{}-dimensional reference for a {d}-dimensional cell", r.dim())));
            }
        }
        Ok(cfg)
    }
}
