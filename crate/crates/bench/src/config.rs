//! Run configuration, read from TOML.
//!
//! ```toml
//! schema_version = 1
//! seed = 0
//! output = "out"
//! label = "skew"
//!
//! [problem]
//! kind = "skew_toy"
//! d = 10
//! tau = 0.1
//!
//! [solver]
//! kind = "fast_km"
//! alpha = 4.0
//! eta = 0.5
//! sigma = 4.0
//! iterations = 1000
//! ```

use std::path::{Path, PathBuf};

use fastkm::fastkm::{Cooling, CoolingMode, ScheduleParams};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::problems::Marginals;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Directory receiving `{label}.csv` and `{label}.json`.
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_label")]
    pub label: String,
    /// Write every `thin`-th record; the last record is always written.
    #[serde(default = "default_thin")]
    pub thin: usize,
    pub problem: ProblemSpec,
    pub solver: SolverSpec,
    #[serde(default)]
    pub reference: ReferenceSpec,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_label() -> String {
    "run".into()
}

fn default_thin() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    SkewToy {
        #[serde(default = "default_skew_d")]
        d: usize,
        #[serde(default = "default_skew_tau")]
        tau: f64,
    },
    L1BallToy {},
    BeckmannOt {
        #[serde(default = "default_p")]
        p: usize,
        #[serde(default = "default_marginals")]
        marginals: Marginals,
        #[serde(default = "default_tau1")]
        tau1: f64,
        /// Defaults to `0.1 / tau1`.
        #[serde(default)]
        tau2: Option<f64>,
    },
    GeometricMedian {
        n: usize,
        d: usize,
        /// Defaults to the run seed.
        #[serde(default)]
        seed: Option<u64>,
        /// Rows of the `n x (n - 1)` coupling matrix `Z`; the path graph when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        z: Option<Vec<Vec<f64>>>,
    },
}

fn default_skew_d() -> usize {
    10
}

fn default_skew_tau() -> f64 {
    0.1
}

fn default_p() -> usize {
    20
}

fn default_marginals() -> Marginals {
    Marginals::TwoPoints
}

fn default_tau1() -> f64 {
    1e-2
}

/// Default product `tau1 tau2` for the transport problem.
pub const OT_STEP_PRODUCT: f64 = 0.1;

impl ProblemSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemSpec::SkewToy { .. } => "skew_toy",
            ProblemSpec::L1BallToy {} => "l1_ball_toy",
            ProblemSpec::BeckmannOt { .. } => "beckmann_ot",
            ProblemSpec::GeometricMedian { .. } => "geometric_median",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverSpec {
    Km {
        theta: f64,
        iterations: usize,
    },
    FastKm {
        alpha: f64,
        #[serde(default)]
        eta: Option<f64>,
        #[serde(default)]
        theta: Option<f64>,
        sigma: f64,
        #[serde(default = "one")]
        step: f64,
        iterations: usize,
    },
    /// `alpha = 2`, `eta = 1/2`, `sigma = 1`.
    Ohm {
        iterations: usize,
    },
    FastKmCooled {
        alpha0: f64,
        eta: f64,
        sigma: f64,
        #[serde(default = "one")]
        step: f64,
        #[serde(default = "default_mode")]
        mode: CoolingMode,
        /// Defaults to `100 alpha0`.
        #[serde(default)]
        alpha_max: Option<f64>,
        /// Defaults to `iterations`.
        #[serde(default)]
        maxit: Option<usize>,
        iterations: usize,
    },
}

fn one() -> f64 {
    1.0
}

fn default_mode() -> CoolingMode {
    CoolingMode::Linear
}

/// Ratio `alpha_max / alpha0` used when no explicit maximum is given.
pub const COOLING_RATIO: f64 = 100.0;

impl SolverSpec {
    pub fn iterations(&self) -> usize {
        match *self {
            SolverSpec::Km { iterations, .. }
            | SolverSpec::FastKm { iterations, .. }
            | SolverSpec::Ohm { iterations }
            | SolverSpec::FastKmCooled { iterations, .. } => iterations,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SolverSpec::Km { .. } => "km",
            SolverSpec::FastKm { .. } => "fast_km",
            SolverSpec::Ohm { .. } => "ohm",
            SolverSpec::FastKmCooled { .. } => "fast_km_cooled",
        }
    }

    /// Schedule for the momentum solvers, `None` for plain KM.
    pub fn schedule(&self) -> Result<Option<ScheduleParams>> {
        let p = match *self {
            SolverSpec::Km { .. } => return Ok(None),
            SolverSpec::FastKm {
                alpha,
                eta,
                theta,
                sigma,
                step,
                ..
            } => match (eta, theta) {
                (Some(eta), None) => ScheduleParams::from_eta(alpha, eta, sigma)?,
                (None, Some(theta)) => ScheduleParams::new(alpha, theta, sigma)?,
                _ => {
                    return Err(BenchError::Config(
                        "solver: exactly one of `eta` and `theta` must be given".into(),
                    ))
                }
            }
            .with_step(step)?,
            SolverSpec::Ohm { .. } => ScheduleParams::from_eta(2.0, 0.5, 1.0)?,
            SolverSpec::FastKmCooled {
                alpha0,
                eta,
                sigma,
                step,
                mode,
                alpha_max,
                maxit,
                iterations,
            } => ScheduleParams::from_eta(alpha0, eta, sigma)?
                .with_step(step)?
                .with_cooling(Cooling {
                    mode,
                    alpha_max: alpha_max.unwrap_or(COOLING_RATIO * alpha0),
                    maxit: maxit.unwrap_or(iterations),
                })?,
        };
        Ok(Some(p))
    }
}

/// How the reference fixed point for gaps and energies is obtained.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// The closed-form solution when the problem has one, otherwise none.
    #[default]
    Auto,
    None,
    /// A long plain KM run.
    Km {
        #[serde(default = "default_ref_theta")]
        theta: f64,
        iterations: usize,
    },
}

fn default_ref_theta() -> f64 {
    0.9
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_toml_str(&text)
            .map_err(|e| match e {
                BenchError::Config(msg) => BenchError::Config(format!("{}: {msg}", path.display())),
                other => other,
            })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Semantic checks beyond the schema.
    pub fn check(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(BenchError::Config(format!(
                "schema_version: unsupported version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.thin == 0 {
            return Err(BenchError::Config("thin: must be at least 1".into()));
        }
        if self.label.is_empty() || self.label.contains(['/', '\\']) {
            return Err(BenchError::Config(format!(
                "label: must be a nonempty file stem, got {:?}",
                self.label
            )));
        }
        self.solver.schedule()?;
        Ok(())
    }
}
