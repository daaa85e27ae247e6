//! Problem description read by `freeconv run`.

use std::collections::BTreeMap;

use serde::Deserialize;

use freeconv::rmt::Ensemble;
use freeconv::{FixedPointOptions, ScalarLaw};

use crate::CliError;

/// Smallest accepted grid resolution.
pub const MIN_RESOLUTION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Density,
    Brown,
    Compare,
    Selfcheck,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    Semicircle {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        variance: f64,
    },
    MarchenkoPastur {
        ratio: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Atomic { points: Vec<f64>, weights: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl LawSpec {
    pub fn build(&self) -> freeconv::Result<ScalarLaw> {
        match self {
            LawSpec::Semicircle { mean, variance } => ScalarLaw::semicircle(*mean, *variance),
            LawSpec::MarchenkoPastur { ratio, scale } => ScalarLaw::marchenko_pastur(*ratio, *scale),
            LawSpec::Atomic { points, weights } => ScalarLaw::atomic(points.clone(), weights.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Real axis `[min, max]`.
    pub re: [f64; 2],
    /// Imaginary axis, Brown only; defaults to `re`.
    pub im: Option<[f64; 2]>,
    /// Points along the real axis.
    pub points: usize,
    /// Points along the imaginary axis; defaults to `points`.
    pub im_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum EpsilonSpec {
    Scalar(f64),
    Schedule(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EnsembleSpec {
    Wigner {
        #[serde(default)]
        complex: bool,
    },
    Wishart { ratio: f64 },
}

impl EnsembleSpec {
    pub fn build(&self) -> Ensemble {
        match *self {
            EnsembleSpec::Wigner { complex } => Ensemble::Wigner { complex },
            EnsembleSpec::Wishart { ratio } => Ensemble::Wishart { ratio },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmtSpec {
    pub ensembles: BTreeMap<String, EnsembleSpec>,
    pub n: usize,
    #[serde(default = "one_trial")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one_trial() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub damping: Option<f64>,
    pub regularization: Option<f64>,
    pub anderson: Option<usize>,
}

impl SolverSpec {
    pub fn build(&self) -> FixedPointOptions {
        let d = FixedPointOptions::default();
        FixedPointOptions {
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            damping: self.damping.unwrap_or(d.damping),
            regularization: self.regularization.unwrap_or(d.regularization),
            anderson: self.anderson.unwrap_or(d.anderson),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub task: Task,
    pub expression: Option<String>,
    /// Pencil file, relative to the config file.
    pub pencil: Option<String>,
    #[serde(default)]
    pub variables: BTreeMap<String, LawSpec>,
    pub grid: Option<GridSpec>,
    pub epsilon: Option<EpsilonSpec>,
    pub rmt: Option<RmtSpec>,
    pub output: Option<String>,
    #[serde(default)]
    pub plot: bool,
    pub solver: Option<SolverSpec>,
}

impl ProblemConfig {
    /// Parses JSON, naming the offending key on failure.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ProblemConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("at `{path}`: {}", e.into_inner()))
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.task == Task::Selfcheck {
            return Ok(());
        }
        match (&self.expression, &self.pencil) {
            (None, None) => return bad("one of `expression` or `pencil` is required".into()),
            (Some(_), Some(_)) => return bad("give only one of `expression` and `pencil`".into()),
            _ => {}
        }
        if self.output.is_none() {
            return bad("`output` is required".into());
        }
        let Some(grid) = &self.grid else {
            return bad("`grid` is required".into());
        };
        if grid.points < MIN_RESOLUTION || grid.im_points.is_some_and(|n| n < MIN_RESOLUTION) {
            return bad(format!("`grid`: resolution must be at least {MIN_RESOLUTION}"));
        }
        for (name, law) in &self.variables {
            law.build()
                .map_err(|e| CliError::Config(format!("at `variables.{name}`: {e}")))?;
        }
        if self.task == Task::Compare {
            let Some(rmt) = &self.rmt else {
                return bad("compare needs `rmt`".into());
            };
            if rmt.trials == 0 {
                return bad("`rmt.trials` must be positive".into());
            }
            for name in self.variables.keys() {
                if !rmt.ensembles.contains_key(name) {
                    return bad(format!("`rmt.ensembles` has no entry for `{name}`"));
                }
            }
        }
        Ok(())
    }

    pub fn laws(&self) -> BTreeMap<String, ScalarLaw> {
        self.variables
            .iter()
            .map(|(k, v)| (k.clone(), v.build().expect("checked")))
            .collect()
    }

    pub fn solver(&self) -> FixedPointOptions {
        self.solver.map(|s| s.build()).unwrap_or_default()
    }
}
