use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pbqn::bench::{
    compute_rstar, perf_model_threshold, predicts_speedup, run_experiment, tune, write_outputs, ExperimentConfig,
    LoadedProblem, OptimizerKind, PerfModelInput, ProblemSource, RstarOptions, TuneSettings,
};
use pbqn::data::SplitSpec;
use pbqn::theory::{run_verification, CheckStatus, VerifySettings};
use pbqn::{CurvatureMode, Error, PbqnConfig};

#[derive(Parser)]
#[command(name = "pbqn", version, about = "Progressive-batching L-BFGS experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimizer and write a metrics CSV plus a JSON manifest.
    Run(RunArgs),
    /// Sweep the SG or SVRG steplength over 2^-10 .. 2^10.
    Tune(TuneArgs),
    /// Compute the reference optimum of the training objective.
    Rstar(ProblemArgs),
    /// Monte Carlo checks of the convergence bounds.
    Verify(VerifyArgs),
    /// Evaluate the parallel performance model.
    Perfmodel(PerfArgs),
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// LIBSVM-format dataset file.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    dataset: Option<PathBuf>,
    /// `quad:<d>:<mu>:<L>:<N>` or `logistic:<n>:<d>`.
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long, default_value_t = 0.9)]
    train_fraction: f64,
}

impl ProblemArgs {
    fn load(&self) -> pbqn::Result<LoadedProblem> {
        let source = match (&self.dataset, &self.synthetic) {
            (Some(p), _) => ProblemSource::Dataset(p.clone()),
            (None, Some(s)) => ProblemSource::Synthetic(s.parse()?),
            (None, None) => unreachable!("clap requires one source"),
        };
        let loaded = LoadedProblem::load(&source, self.split())?;
        for w in &loaded.warnings {
            eprintln!("warning: {w}");
        }
        Ok(loaded)
    }

    fn split(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            seed: self.split_seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Pbqn,
    Sg,
    Svrg,
}

impl From<OptimizerArg> for OptimizerKind {
    fn from(o: OptimizerArg) -> Self {
        match o {
            OptimizerArg::Pbqn => OptimizerKind::Pbqn,
            OptimizerArg::Sg => OptimizerKind::Sg,
            OptimizerArg::Svrg => OptimizerKind::Svrg,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Mb,
    Fo,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "pbqn")]
    optimizer: OptimizerArg,
    /// Curvature pairs from batch overlaps (mb) or a second pass over the same batch (fo).
    #[arg(long, value_enum, default_value = "mb")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.25)]
    overlap: f64,
    #[arg(long, default_value_t = 0.9)]
    theta: f64,
    /// Initial batch size.
    #[arg(long, default_value_t = 512)]
    s0: usize,
    #[arg(long, default_value_t = 1e-4)]
    c1: f64,
    #[arg(long, default_value_t = 10)]
    memory: usize,
    /// Cautious-update threshold.
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    /// Constant steplength for SG and SVRG.
    #[arg(long)]
    alpha: Option<f64>,
    /// Pick the SG / SVRG steplength by a short sweep first.
    #[arg(long)]
    tune: bool,
    #[arg(long, default_value_t = 10.0)]
    tune_budget_fge: f64,
    #[arg(long, default_value_t = 100.0)]
    budget_fge: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_enum)]
    optimizer: OptimizerArg,
    #[arg(long, default_value_t = 10.0)]
    budget_fge: f64,
    #[arg(long, default_value_t = 3)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.9)]
    theta: f64,
    #[arg(long, default_value_t = 5.0)]
    nu: f64,
    /// Divide every trial count by this factor.
    #[arg(long, default_value_t = 1)]
    reduce: usize,
}

#[derive(Args)]
struct PerfArgs {
    #[arg(long, default_value_t = 4.0)]
    cost_large: f64,
    #[arg(long, default_value_t = 3.0)]
    cost_small: f64,
    #[arg(long, default_value_t = 1.0)]
    batch_small: f64,
    #[arg(long, default_value_t = 4.0)]
    batch_large: f64,
    #[arg(long, default_value_t = 0.2)]
    efficiency: f64,
    #[arg(long, default_value_t = 1.0)]
    nodes: f64,
    /// PBQN iterations to target; with --iters-small, prints a prediction.
    #[arg(long, requires = "iters_small")]
    iters_large: Option<f64>,
    #[arg(long, requires = "iters_large")]
    iters_small: Option<f64>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("pbqn: {e}");
            ExitCode::from(if matches!(e, Error::Usage(_)) { 2 } else { 1 })
        }
    }
}

fn dispatch(cmd: Command) -> pbqn::Result<ExitCode> {
    match cmd {
        Command::Run(a) => run(a),
        Command::Tune(a) => {
            let loaded = a.problem.load()?;
            let settings = TuneSettings {
                budget_fge: a.budget_fge,
                seeds: a.seeds,
            };
            let t = tune(&loaded, a.optimizer.into(), a.seed, settings)?;
            for (alpha, score) in &t.scores {
                println!("alpha={alpha:e} score={score:e}");
            }
            println!("best_alpha={:e}", t.best_alpha);
            Ok(ExitCode::SUCCESS)
        }
        Command::Rstar(p) => {
            let loaded = p.load()?;
            let r = compute_rstar(loaded.problem(), &RstarOptions::default())?;
            println!(
                "rstar={:.17e} iterations={} grad_inf={:e}",
                r.value, r.iterations, r.grad_inf
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(a) => {
            let d = VerifySettings::default();
            let r = a.reduce.max(1);
            let settings = VerifySettings {
                theta: a.theta,
                nu: a.nu,
                linear_trials: d.linear_trials / r,
                descent_trials: d.descent_trials / r,
                sublinear_trials: d.sublinear_trials / r,
                seed: a.seed,
                ..d
            };
            let reports = run_verification(&settings)?;
            let mut failed = false;
            for rep in &reports {
                print!("{}", rep.to_kv_text());
                failed |= rep.status == CheckStatus::Fail;
            }
            Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::Perfmodel(a) => {
            let input = PerfModelInput {
                iters_large: a.iters_large.unwrap_or(1.0),
                iters_small: a.iters_small.unwrap_or(1.0),
                cost_large: a.cost_large,
                cost_small: a.cost_small,
                batch_small: a.batch_small,
                batch_large: a.batch_large,
                parallel_efficiency: a.efficiency,
                nodes: a.nodes,
            };
            println!("threshold={}", perf_model_threshold(&input)?);
            if a.iters_large.is_some() {
                println!("iteration_ratio={}", input.iters_large / input.iters_small);
                println!("pbqn_faster={}", predicts_speedup(&input)?);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run(a: RunArgs) -> pbqn::Result<ExitCode> {
    let loaded = a.problem.load()?;
    let mut pbqn = PbqnConfig::default();
    pbqn.controller.theta = a.theta;
    pbqn.controller.initial_size = a.s0;
    pbqn.linesearch.c1 = a.c1;
    pbqn.memory_size = a.memory;
    pbqn.curvature_eps = a.eps;
    pbqn.curvature_mode = match a.mode {
        ModeArg::Mb => CurvatureMode::MultiBatch {
            overlap_fraction: a.overlap,
        },
        ModeArg::Fo => CurvatureMode::FullOverlap,
    };
    let cfg = ExperimentConfig {
        optimizer: a.optimizer.into(),
        pbqn,
        alpha: a.alpha,
        tune: a.tune.then_some(TuneSettings {
            budget_fge: a.tune_budget_fge,
            ..Default::default()
        }),
        budget_fge: a.budget_fge,
        seed: a.seed,
        split: a.problem.split(),
    };
    let outcome = run_experiment(&loaded, &cfg)?;
    let stem = match (cfg.optimizer, a.mode) {
        (OptimizerKind::Pbqn, ModeArg::Mb) => "pbqn-mb".to_string(),
        (OptimizerKind::Pbqn, ModeArg::Fo) => "pbqn-fo".to_string(),
        (k, _) => k.to_string(),
    };
    let (csv, json) = write_outputs(&outcome, &a.out, &stem)?;
    let last = outcome.rows.last().expect("runs record their start");
    println!(
        "stop={:?} iterations={} fge={:.3} train_error={:e} test_loss={:e} test_acc={}",
        outcome.manifest.stop, last.k, last.fge, last.train_error, last.test_loss, last.test_acc
    );
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(ExitCode::SUCCESS)
}
