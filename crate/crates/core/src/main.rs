use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use sparse_obs::bp::{bp_marginal, bp_run, BpInit, BpOptions};
use sparse_obs::de::{de_run, DeParams};
use sparse_obs::exp::{run_experiment, write_outputs, ExperimentConfig, ExperimentKind, Manifest};
use sparse_obs::graph::{sample_graph, EnsembleParams, FactorGraph};
use sparse_obs::model::{model_from_json, sample_world_with, ObservationModel, World};
use sparse_obs::oracle::{Marginal, Posterior};
use sparse_obs::rng::seeded;
use sparse_obs::{Error, Result};

#[derive(Parser)]
#[command(name = "sparse-obs", version, about = "Inference experiments on sparse random observation systems")]
struct Cli {
    /// Worker threads for replica-parallel work.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a graph from G(n, floor(alpha n), gamma / n) and write its edge list.
    GenGraph {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample hidden symbols and observations on a graph; writes world JSON.
    SampleWorld {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Reveal probability; defaults to the model's theta.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact posterior marginals by enumeration; writes `var,symbol,value` CSV.
    Oracle(InferArgs),
    /// Belief-propagation marginals; writes `var,symbol,value` CSV.
    Bp {
        #[command(flatten)]
        infer: InferArgs,
        #[arg(long, default_value_t = 0.0)]
        damping: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        /// Also dump the final messages as CSV.
        #[arg(long)]
        messages: Option<PathBuf>,
    },
    /// Population dynamics; writes the per-generation history CSV.
    De {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Reveal probability; defaults to the model's theta.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        population: usize,
        #[arg(long, default_value_t = 30)]
        generations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the final population as CSV.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Factorization gap and mutual information against their bounds.
    ExpCorrelation(ExpArgs),
    /// Local update and boundary-factorized marginals against the exact posterior.
    ExpBpVsExact(ExpArgs),
    /// BP marginals on large graphs against the density-evolution population.
    ExpDeMatch(ExpArgs),
    /// Finite-difference entropy derivative against the single-site identity.
    ExpEntropyIdentity(ExpArgs),
    /// Neighbourhood shapes, size tails, residual edges and degree fits.
    ExpGraphStats(ExpArgs),
    /// Decile calibration of exact posteriors.
    ExpCalibration(ExpArgs),
    /// Re-run an experiment from its manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        /// Output CSV; defaults to the path recorded in the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// World JSON; when absent a world is sampled with `--seed`.
    #[arg(long)]
    world: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExpArgs {
    /// Experiment config JSON; defaults apply to every missing field.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn load_model(path: &Path) -> Result<ObservationModel> {
    model_from_json(&read_json(path)?)
}

fn load_graph(path: &Path) -> Result<FactorGraph> {
    FactorGraph::from_edge_list(&std::fs::read_to_string(path)?)
}

fn load_instance(args: &InferArgs) -> Result<(FactorGraph, ObservationModel, World)> {
    let g = load_graph(&args.graph)?;
    let model = load_model(&args.model)?;
    let world = match &args.world {
        Some(path) => serde_json::from_value(read_json(path)?)?,
        None => sample_world_with(&g, &model, model.theta(), &mut seeded(args.seed))?,
    };
    world.check(&g, &model)?;
    Ok((g, model, world))
}

fn marginals_csv(margs: &[Marginal]) -> String {
    let mut out = String::from("var,symbol,value\n");
    for (i, m) in margs.iter().enumerate() {
        for (x, v) in m.probs().iter().enumerate() {
            let _ = writeln!(out, "{i},{x},{v:.16e}");
        }
    }
    out
}

fn run_exp(kind: ExperimentKind, args: &ExpArgs, threads: usize) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path, Some(kind))?,
        None => ExperimentConfig::defaults(kind),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    let table = run_experiment(&cfg)?;
    match &cfg.output {
        Some(path) => {
            let manifest = write_outputs(&cfg, &table, path, threads)?;
            eprintln!("wrote {} and {}", path.display(), manifest.display());
        }
        None => print!("{}", table.to_csv()),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads;
    match cli.command {
        Command::GenGraph { n, alpha, gamma, seed, out } => {
            let g = sample_graph(&EnsembleParams::new(n, alpha, gamma)?, seed)?;
            emit(out.as_deref(), &g.to_edge_list())
        }
        Command::SampleWorld { graph, model, seed, theta, out } => {
            let g = load_graph(&graph)?;
            let model = load_model(&model)?;
            let theta = theta.unwrap_or(model.theta());
            if !(0.0..=1.0).contains(&theta) {
                return Err(Error::InvalidParams(format!("theta {theta} outside [0, 1]")));
            }
            let world = sample_world_with(&g, &model, theta, &mut seeded(seed))?;
            emit(out.as_deref(), &(serde_json::to_string_pretty(&world)? + "\n"))
        }
        Command::Oracle(args) => {
            let (g, model, world) = load_instance(&args)?;
            let post = Posterior::compute(&g, &model, &world)?;
            emit(args.out.as_deref(), &marginals_csv(&post.marginals()))
        }
        Command::Bp { infer, damping, tol, max_iter, messages } => {
            let (g, model, world) = load_instance(&infer)?;
            let opts = BpOptions { init: BpInit::Prior, damping, tol, max_iter };
            let out = bp_run(&g, &model, &world, &opts)?;
            let margs = (0..g.n()).map(|i| bp_marginal(&g, &model, &world, &out.messages, i)).collect::<Result<Vec<_>>>()?;
            if !out.converged {
                eprintln!("warning: not converged after {} sweeps (residual {:.3e})", out.iters, out.residual);
            }
            if let Some(path) = messages {
                emit(Some(&path), &out.messages.to_csv())?;
            }
            emit(infer.out.as_deref(), &marginals_csv(&margs))
        }
        Command::De { model, gamma, alpha, theta, population, generations, seed, tol, out, snapshot } => {
            let mut model = load_model(&model)?;
            if let Some(theta) = theta {
                model = model.with_theta(theta)?;
            }
            let run = de_run(&model, DeParams { gamma, alpha }, population, generations, seed, tol)?;
            if let Some(path) = snapshot {
                emit(Some(&path), &run.population.to_csv())?;
            }
            match run.stationary_at {
                Some(g) => eprintln!("stationary from generation {g}"),
                None => eprintln!("no stationarity detected in {generations} generations"),
            }
            emit(out.as_deref(), &run.history_csv())
        }
        Command::ExpCorrelation(args) => run_exp(ExperimentKind::CorrelationDecay, &args, threads),
        Command::ExpBpVsExact(args) => run_exp(ExperimentKind::BpVsExact, &args, threads),
        Command::ExpDeMatch(args) => run_exp(ExperimentKind::DeMatch, &args, threads),
        Command::ExpEntropyIdentity(args) => run_exp(ExperimentKind::EntropyIdentity, &args, threads),
        Command::ExpGraphStats(args) => run_exp(ExperimentKind::GraphStats, &args, threads),
        Command::ExpCalibration(args) => run_exp(ExperimentKind::Calibration, &args, threads),
        Command::Rerun { manifest, out } => {
            let m = Manifest::from_file(&manifest)?;
            let cfg = m.experiment_config()?;
            let path = out.unwrap_or_else(|| PathBuf::from(&m.output));
            let table = run_experiment(&cfg)?;
            let written = write_outputs(&cfg, &table, &path, threads)?;
            eprintln!("wrote {} and {}", path.display(), written.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(1);
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
