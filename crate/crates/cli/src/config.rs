//! Experiment configuration: JSON schema, validation, and problem
//! construction. Invalid configurations map to exit code 2.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use illposed_core::problems::{
    build_autoconvolution, build_ode_parameter_id, build_quadratic,
    build_scalar_quadratic_operator, default_autoconv_signal, default_ode_coefficient,
    default_ode_source, default_spectrum, ProblemError, ProblemInstance,
};
use illposed_core::space::{SpaceError, Vector};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("problem construction failed: {0}")]
    Problem(#[from] ProblemError),
    #[error(
        "initial guess violates the start-quality requirement: x0 = x* + x0_offset must \
         lie in the ball (||x0 - x*|| = {dist}, radius = {radius}); shrink the offset or \
         enlarge the ball so that ||x0 - x*||^2 + (1+2b)^+/|1-L| J(x0) < rho^2 can hold"
    )]
    X0OutsideBall { dist: f64, radius: f64 },
    #[error("x0_offset has dimension {got}, problem has dimension {expected}")]
    X0Dimension { expected: usize, got: usize },
    #[error("unknown x0_offset preset {0:?}; only \"default\" is defined")]
    UnknownPreset(String),
    #[error("{what}")]
    Invalid { what: String },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

fn invalid(what: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { what: what.into() }
}

/// Problem selector: either a bare name (parameters defaulted, with an
/// optional top-level `dimension`) or an object with named parameters.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ProblemField {
    Name(String),
    Full(ProblemConfig),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    Quadratic {
        #[serde(default)]
        dimension: Option<usize>,
        #[serde(default)]
        spectrum: Option<Vec<f64>>,
        #[serde(default)]
        radius: Option<f64>,
    },
    ScalarQuadratic {
        #[serde(default)]
        radius: Option<f64>,
    },
    Autoconv {
        #[serde(default)]
        grid_size: Option<usize>,
        #[serde(default)]
        true_signal: Option<Vec<f64>>,
        #[serde(default)]
        radius: Option<f64>,
    },
    OdeParam {
        #[serde(default)]
        grid_size: Option<usize>,
        #[serde(default)]
        true_coefficient: Option<Vec<f64>>,
        #[serde(default)]
        source: Option<Vec<f64>>,
        #[serde(default)]
        radius: Option<f64>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum X0Offset {
    Preset(String),
    Explicit(Vec<f64>),
}

impl Default for X0Offset {
    fn default() -> Self {
        X0Offset::Preset("default".into())
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopConfig {
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_c0() -> f64 {
    1.0
}
fn default_kappa() -> f64 {
    0.5
}

impl Default for StopConfig {
    fn default() -> Self {
        StopConfig {
            c0: default_c0(),
            kappa: default_kappa(),
        }
    }
}

/// On-disk configuration. `data_noise_level`/`seed` are accepted as
/// singleton aliases of `noise_levels`/`seeds`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub problem: ProblemField,
    #[serde(default)]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub step_scale: Option<f64>,
    #[serde(default)]
    pub x0_offset: Option<X0Offset>,
    #[serde(default)]
    pub noise_levels: Option<Vec<f64>>,
    #[serde(default)]
    pub data_noise_level: Option<f64>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub stop: Option<StopConfig>,
    #[serde(default)]
    pub condition_samples: Option<usize>,
    #[serde(default)]
    pub condition_gamma: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub track_exact: Option<bool>,
    #[serde(default)]
    pub max_exact_iter: Option<usize>,
    #[serde(default)]
    pub rng: Option<String>,
    #[serde(default)]
    pub fault_injection: Option<String>,
}

/// Validated configuration with the problem instance built.
#[derive(Debug)]
pub struct Experiment {
    pub problem: ProblemInstance,
    pub x0: Vector,
    pub x0_offset: Vector,
    pub noise_levels: Vec<f64>,
    pub seeds: Vec<u64>,
    pub stop: StopConfig,
    pub condition_samples: usize,
    pub condition_gamma: f64,
    pub output_dir: Option<PathBuf>,
    pub track_exact: bool,
    pub max_exact_iter: Option<usize>,
    pub fault_injection: Option<String>,
}

pub const FAULT_TARGETS: [&str; 6] = [
    "descent",
    "error-bound",
    "noisy-recursion",
    "noisy-uniform",
    "summability",
    "divergence-recursion",
];

pub fn load(path: &Path) -> Result<Experiment, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let raw: RawConfig = serde_json::from_str(&text)?;
    validate(raw)
}

pub fn validate(raw: RawConfig) -> Result<Experiment, ConfigError> {
    if let Some(rng) = &raw.rng {
        if rng != "chacha8" {
            return Err(invalid(format!(
                "rng {rng:?} is not supported; the only generator is \"chacha8\""
            )));
        }
    }

    let mut problem = build_problem(&raw)?;

    if let Some(target_scale) = raw.step_scale {
        if !(target_scale.is_finite() && target_scale > 0.0) {
            return Err(invalid(format!(
                "step_scale must be positive and finite, got {target_scale}"
            )));
        }
        let factor = target_scale / problem.exact_functional.step_scale();
        problem.exact_functional = problem.exact_functional.rescaled(factor);
    }

    let noise_levels = match (&raw.noise_levels, raw.data_noise_level) {
        (Some(levels), None) => levels.clone(),
        (None, Some(level)) => vec![level],
        (None, None) => vec![1e-2],
        (Some(_), Some(_)) => {
            return Err(invalid(
                "give either noise_levels or data_noise_level, not both",
            ))
        }
    };
    if noise_levels.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(invalid("noise levels must be positive and finite"));
    }

    let seeds = match (&raw.seeds, raw.seed) {
        (Some(seeds), None) => seeds.clone(),
        (None, Some(seed)) => vec![seed],
        (None, None) => vec![1],
        (Some(_), Some(_)) => return Err(invalid("give either seeds or seed, not both")),
    };
    if seeds.is_empty() {
        return Err(invalid("seeds must be nonempty"));
    }

    let stop = raw.stop.clone().unwrap_or_default();
    if !(stop.c0.is_finite() && stop.c0 > 0.0) {
        return Err(invalid(format!("stop.c0 must be positive, got {}", stop.c0)));
    }
    if !(stop.kappa.is_finite() && 0.0 < stop.kappa && stop.kappa < 1.0) {
        return Err(invalid(format!(
            "stop.kappa must lie in (0, 1), got {}",
            stop.kappa
        )));
    }

    let x0_offset = match raw.x0_offset.clone().unwrap_or_default() {
        X0Offset::Preset(name) if name == "default" => problem.default_x0_offset.clone(),
        X0Offset::Preset(name) => return Err(ConfigError::UnknownPreset(name)),
        X0Offset::Explicit(entries) => {
            let v = Vector::new(entries)?;
            if v.dim() != problem.ball.dim() {
                return Err(ConfigError::X0Dimension {
                    expected: problem.ball.dim(),
                    got: v.dim(),
                });
            }
            v
        }
    };
    let x0 = problem.ball.center().add(&x0_offset);
    if !problem.ball.contains(&x0) {
        return Err(ConfigError::X0OutsideBall {
            dist: illposed_core::space::dist(&x0, problem.ball.center()),
            radius: problem.ball.radius(),
        });
    }

    if let Some(target) = &raw.fault_injection {
        if !FAULT_TARGETS.contains(&target.as_str()) {
            return Err(invalid(format!(
                "fault_injection {target:?} unknown; expected one of {FAULT_TARGETS:?}"
            )));
        }
    }

    Ok(Experiment {
        problem,
        x0,
        x0_offset,
        noise_levels,
        seeds,
        stop,
        condition_samples: raw.condition_samples.unwrap_or(2000),
        condition_gamma: raw.condition_gamma.unwrap_or(0.25),
        output_dir: raw.output_dir,
        track_exact: raw.track_exact.unwrap_or(true),
        max_exact_iter: raw.max_exact_iter,
        fault_injection: raw.fault_injection,
    })
}

fn build_problem(raw: &RawConfig) -> Result<ProblemInstance, ConfigError> {
    let config = match &raw.problem {
        ProblemField::Full(full) => full.clone(),
        ProblemField::Name(name) => match name.as_str() {
            "quadratic" => ProblemConfig::Quadratic {
                dimension: None,
                spectrum: None,
                radius: None,
            },
            "scalar-quadratic" => ProblemConfig::ScalarQuadratic { radius: None },
            "autoconv" => ProblemConfig::Autoconv {
                grid_size: None,
                true_signal: None,
                radius: None,
            },
            "ode-param" => ProblemConfig::OdeParam {
                grid_size: None,
                true_coefficient: None,
                source: None,
                radius: None,
            },
            other => {
                return Err(invalid(format!(
                    "unknown problem {other:?}; registry: quadratic, scalar-quadratic, \
                     autoconv, ode-param"
                )))
            }
        },
    };
    let instance = match config {
        ProblemConfig::Quadratic {
            dimension,
            spectrum,
            radius,
        } => {
            let dimension = dimension.or(raw.dimension).unwrap_or(8);
            let spectrum = spectrum.unwrap_or_else(|| default_spectrum(dimension));
            build_quadratic(dimension, &spectrum, radius.unwrap_or(2.0))?
        }
        ProblemConfig::ScalarQuadratic { radius } => {
            build_scalar_quadratic_operator(radius.unwrap_or(0.1))?
        }
        ProblemConfig::Autoconv {
            grid_size,
            true_signal,
            radius,
        } => {
            let grid_size = grid_size.or(raw.dimension).unwrap_or(16);
            let signal = match true_signal {
                Some(entries) => Vector::new(entries)?,
                None => default_autoconv_signal(grid_size),
            };
            build_autoconvolution(grid_size, &signal, radius.unwrap_or(0.5))?
        }
        ProblemConfig::OdeParam {
            grid_size,
            true_coefficient,
            source,
            radius,
        } => {
            let grid_size = grid_size.or(raw.dimension).unwrap_or(32);
            let coefficient = match true_coefficient {
                Some(entries) => Vector::new(entries)?,
                None => default_ode_coefficient(grid_size),
            };
            let source = match source {
                Some(entries) => Vector::new(entries)?,
                None => default_ode_source(grid_size),
            };
            build_ode_parameter_id(grid_size, &coefficient, &source, radius.unwrap_or(1.0))?
        }
    };
    Ok(instance)
}
