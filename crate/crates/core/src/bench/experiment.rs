//! Single experiment runs: load a problem, run one optimizer under a budget,
//! and write a metrics table plus a JSON manifest.
//!
//! Output for a given manifest is byte-identical across runs: the manifest
//! carries no timestamps and every random draw comes from the recorded seeds.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{MetricsRow, CSV_HEADER};
use super::rstar::{RstarCache, RstarOptions};
use crate::data::{self, SplitSpec};
use crate::error::{Error, Result};
use crate::optimizer::{
    power_of_two_grid, run_pbqn_with, run_sg, run_sg_with, run_svrg, run_svrg_with, tune_baseline, PbqnConfig,
    SgConfig, StopReason, SvrgConfig, TuneResult,
};
use crate::problems::{FiniteSumProblem, LogisticProblem, QuadraticProblem};
use crate::{seeded_rng, RunRng};

/// `quad:<d>:<mu>:<L>:<N>` or `logistic:<n>:<d>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SyntheticSpec {
    Quadratic { d: usize, mu: f64, l: f64, n: usize },
    Logistic { n: usize, d: usize },
}

impl FromStr for SyntheticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || {
            Error::usage(format!(
                "bad synthetic spec {s:?}; expected quad:<d>:<mu>:<L>:<N> or logistic:<n>:<d>"
            ))
        };
        let int = |p: &str| p.parse::<usize>().map_err(|_| bad());
        let real = |p: &str| p.parse::<f64>().map_err(|_| bad());
        match parts.as_slice() {
            ["quad", d, mu, l, n] => Ok(Self::Quadratic {
                d: int(d)?,
                mu: real(mu)?,
                l: real(l)?,
                n: int(n)?,
            }),
            ["logistic", n, d] => Ok(Self::Logistic { n: int(n)?, d: int(d)? }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Quadratic { d, mu, l, n } => write!(f, "quad:{d}:{mu}:{l}:{n}"),
            Self::Logistic { n, d } => write!(f, "logistic:{n}:{d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Dataset(PathBuf),
    Synthetic(SyntheticSpec),
}

impl fmt::Display for ProblemSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Dataset(p) => write!(f, "{}", p.display()),
            Self::Synthetic(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum TrainProblem {
    Logistic(LogisticProblem),
    Quadratic(QuadraticProblem),
}

impl TrainProblem {
    pub fn as_dyn(&self) -> &dyn FiniteSumProblem {
        match self {
            Self::Logistic(p) => p,
            Self::Quadratic(p) => p,
        }
    }
}

/// A training objective with an optional held-out logistic set (`λ = 0`).
#[derive(Debug)]
pub struct LoadedProblem {
    pub name: String,
    pub source: String,
    pub train: TrainProblem,
    pub test: Option<LogisticProblem>,
    /// SHA-256 of the dataset file bytes, or of the synthetic spec and seed.
    pub input_hash: String,
    /// Registry mismatches and similar non-fatal notes.
    pub warnings: Vec<String>,
    cache: RstarCache,
}

impl LoadedProblem {
    /// Datasets are split with `split`; synthetic data is generated from
    /// `split.seed` and logistic sets are then split the same way.
    pub fn load(source: &ProblemSource, split: SplitSpec) -> Result<Self> {
        match source {
            ProblemSource::Dataset(path) => {
                let bytes = fs::read(path)?;
                let full = data::parse_sparse_reader(bytes.as_slice(), path, dataset_name(path))?;
                let warnings = data::check_against_registry(&full);
                let (train, test) = data::split(&full, split)?;
                Ok(Self {
                    name: full.name.clone(),
                    source: source.to_string(),
                    train: TrainProblem::Logistic(LogisticProblem::from_dataset(&train)),
                    test: Some(LogisticProblem::with_lambda(&test, 0.0)),
                    input_hash: sha256_hex(&bytes),
                    warnings,
                    cache: RstarCache::beside(path),
                })
            }
            ProblemSource::Synthetic(spec) => {
                let mut rng = seeded_rng(split.seed);
                let input_hash = sha256_hex(format!("{spec}#{}", split.seed).as_bytes());
                let (train, test) = match *spec {
                    SyntheticSpec::Quadratic { d, mu, l, n } => (
                        TrainProblem::Quadratic(QuadraticProblem::synthetic(d, mu, l, n, &mut rng)?),
                        None,
                    ),
                    SyntheticSpec::Logistic { n, d } => {
                        let full = data::synthetic_logistic(n, d, &mut rng)?;
                        let (tr, te) = data::split(&full, split)?;
                        (
                            TrainProblem::Logistic(LogisticProblem::from_dataset(&tr)),
                            Some(LogisticProblem::with_lambda(&te, 0.0)),
                        )
                    }
                };
                Ok(Self {
                    name: spec.to_string(),
                    source: source.to_string(),
                    train,
                    test,
                    input_hash,
                    warnings: Vec::new(),
                    cache: RstarCache::in_memory(),
                })
            }
        }
    }

    pub fn problem(&self) -> &dyn FiniteSumProblem {
        self.train.as_dyn()
    }

    /// Closed form for quadratics, cached full-batch L-BFGS otherwise.
    pub fn rstar(&self) -> Result<f64> {
        match &self.train {
            TrainProblem::Quadratic(q) => Ok(q.optimal_value()),
            TrainProblem::Logistic(p) => self.cache.get_or_compute(p, &RstarOptions::default()),
        }
    }
}

fn dataset_name(path: &Path) -> String {
    let stem = path.file_name().and_then(|s| s.to_str()).unwrap_or("dataset");
    stem.split('.').next().unwrap_or(stem).to_string()
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Pbqn,
    Sg,
    Svrg,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pbqn => "pbqn",
            Self::Sg => "sg",
            Self::Svrg => "svrg",
        })
    }
}

/// Steplength sweep over `2^j, j = −10..=10` for the baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneSettings {
    pub budget_fge: f64,
    /// Runs per grid point, seeded `seed, seed+1, ...`.
    pub seeds: usize,
}

impl Default for TuneSettings {
    fn default() -> Self {
        Self {
            budget_fge: 10.0,
            seeds: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub optimizer: OptimizerKind,
    pub pbqn: PbqnConfig,
    /// Constant steplength for SG / SVRG; required unless `tune` is set.
    pub alpha: Option<f64>,
    pub tune: Option<TuneSettings>,
    pub budget_fge: f64,
    pub seed: u64,
    pub split: SplitSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Pbqn,
            pbqn: PbqnConfig::default(),
            alpha: None,
            tune: None,
            budget_fge: 100.0,
            seed: 0,
            split: SplitSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub source: String,
    pub input_hash: String,
    pub config: ExperimentConfig,
    /// SHA-256 of the canonical JSON of source, input hash and config.
    pub manifest_hash: String,
    pub rstar: f64,
    pub alpha_used: Option<f64>,
    pub tune_scores: Option<Vec<(f64, f64)>>,
    pub stop: StopReason,
    pub rows: usize,
    pub final_fge: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub rows: Vec<MetricsRow>,
    pub manifest: Manifest,
}

/// Final full objective after a short run for every grid point and seed.
pub fn tune(loaded: &LoadedProblem, kind: OptimizerKind, base_seed: u64, settings: TuneSettings) -> Result<TuneResult> {
    if settings.seeds == 0 || !(settings.budget_fge > 0.0) {
        return Err(Error::usage("tuning needs a positive budget and at least one seed"));
    }
    let problem = loaded.problem();
    let x0 = vec![0.0; problem.dim()];
    let seeds: Vec<u64> = (0..settings.seeds as u64).map(|s| base_seed.wrapping_add(s)).collect();
    tune_baseline(&power_of_two_grid(), &seeds, |alpha, seed| {
        let mut rng = seeded_rng(seed);
        let traj = match kind {
            OptimizerKind::Sg => {
                let cfg = SgConfig {
                    alpha,
                    max_fge: settings.budget_fge,
                    monitor_train_loss: false,
                    ..Default::default()
                };
                run_sg(problem, &cfg, &x0, &mut rng)?
            }
            OptimizerKind::Svrg => {
                let cfg = SvrgConfig {
                    alpha,
                    max_fge: settings.budget_fge,
                    monitor_train_loss: false,
                    ..Default::default()
                };
                run_svrg(problem, &cfg, &x0, &mut rng)?
            }
            OptimizerKind::Pbqn => return Err(Error::usage("PBQN has no steplength to tune")),
        };
        Ok(if traj.stop == StopReason::Diverged {
            f64::INFINITY
        } else {
            problem.full_value(&traj.x)
        })
    })
}

pub fn run_experiment(loaded: &LoadedProblem, cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    if !(cfg.budget_fge > 0.0) {
        return Err(Error::usage("budget must be positive"));
    }
    let problem = loaded.problem();
    let rstar = loaded.rstar()?;
    let x0 = vec![0.0; problem.dim()];
    let mut rng: RunRng = seeded_rng(cfg.seed);
    let mut rows = Vec::new();
    let test = loaded.test.as_ref();
    let mut observe = |rec: &_, x: &[f64]| rows.push(MetricsRow::from_record(rec, problem, test, x, rstar));

    let mut tune_scores = None;
    let mut alpha_used = None;
    let traj = match cfg.optimizer {
        OptimizerKind::Pbqn => {
            let mut pc = cfg.pbqn;
            pc.stop.max_fge = cfg.budget_fge;
            run_pbqn_with(problem, &pc, &x0, &mut rng, &mut observe)?
        }
        kind => {
            let alpha = match (cfg.tune, cfg.alpha) {
                (Some(settings), _) => {
                    let t = tune(loaded, kind, cfg.seed, settings)?;
                    tune_scores = Some(t.scores);
                    t.best_alpha
                }
                (None, Some(a)) => a,
                (None, None) => return Err(Error::usage("SG and SVRG need --alpha or --tune")),
            };
            alpha_used = Some(alpha);
            if kind == OptimizerKind::Sg {
                let sc = SgConfig {
                    alpha,
                    max_fge: cfg.budget_fge,
                    ..Default::default()
                };
                run_sg_with(problem, &sc, &x0, &mut rng, &mut observe)?
            } else {
                let sc = SvrgConfig {
                    alpha,
                    max_fge: cfg.budget_fge,
                    ..Default::default()
                };
                run_svrg_with(problem, &sc, &x0, &mut rng, &mut observe)?
            }
        }
    };

    let manifest_hash = {
        let key = serde_json::to_string(&(&loaded.source, &loaded.input_hash, cfg))?;
        sha256_hex(key.as_bytes())
    };
    let manifest = Manifest {
        tool: format!("pbqn {}", env!("CARGO_PKG_VERSION")),
        source: loaded.source.clone(),
        input_hash: loaded.input_hash.clone(),
        config: cfg.clone(),
        manifest_hash,
        rstar,
        alpha_used,
        tune_scores,
        stop: traj.stop,
        rows: rows.len(),
        final_fge: traj.last().fge,
        warnings: loaded.warnings.clone(),
    };
    Ok(ExperimentOutcome { rows, manifest })
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`, creating it if needed.
pub fn write_outputs(outcome: &ExperimentOutcome, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let mut csv = String::with_capacity(96 * (outcome.rows.len() + 1));
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    for row in &outcome.rows {
        csv.push_str(&row.to_csv_line());
        csv.push('\n');
    }
    fs::write(&csv_path, csv)?;
    let mut json = serde_json::to_string_pretty(&outcome.manifest)?;
    json.push('\n');
    fs::write(&json_path, json)?;
    Ok((csv_path, json_path))
}
