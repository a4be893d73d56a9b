use std::path::{Path, PathBuf};
use std::process::ExitCode;

use armab_bench::experiment::{run_experiment, ExperimentOutput};
use armab_bench::output::{meta_path, write_meta, write_records_file, write_trajectories_file, RunMeta, REFERENCE};
use armab_bench::runspec::{LearnerKind, RunSpec};
use armab_bench::stats::{mean, std_error};
use armab_bench::{BenchError, Result};
use armab_core::oracle::hindsight_baseline;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "armab", version, about = "Episodic adversarial restless bandit benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run specification (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the spec's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the spec's output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for Monte-Carlo rounds.
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    /// Arm and budget replication factor.
    #[arg(long)]
    scale: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute a run spec and write the regret CSV.
    Run(Common),
    /// Repeat a run over several learners or replication factors.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated learner ids.
        #[arg(long, value_delimiter = ',', conflicts_with = "rhos")]
        learners: Vec<LearnerKind>,
        /// Comma-separated replication factors.
        #[arg(long, value_delimiter = ',')]
        rhos: Vec<usize>,
    },
    /// Solve the hindsight LP only and print it as JSON.
    Oracle(Common),
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, usize::from)
}

/// Paths in the run spec resolve against its directory; `--out` against the working directory.
fn load_spec(common: &Common) -> Result<(RunSpec, PathBuf)> {
    let mut spec = RunSpec::load(&common.config)?;
    let base = common.config.parent().map_or_else(PathBuf::new, Path::to_path_buf);
    spec.output = spec.output.map(|p| base.join(p));
    spec.trajectories = spec.trajectories.map(|p| base.join(p));
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    if let Some(out) = &common.out {
        spec.output = Some(out.clone());
    }
    if common.scale.is_some() {
        spec.scale = common.scale;
    }
    spec.validate()?;
    Ok((spec, base))
}

fn meta(spec: &RunSpec, out: &ExperimentOutput) -> RunMeta {
    let sc = &out.scenario;
    let lp = &out.baseline.solution;
    RunMeta {
        scenario: spec.scenario.name(),
        learner: spec.learner.to_string(),
        mc_rounds: spec.mc_rounds,
        seed: spec.seed,
        num_arms: sc.num_arms(),
        num_states: sc.num_states(),
        budget: sc.budget,
        horizon: sc.horizon,
        episodes: sc.episodes,
        eta: sc.step_size(),
        epsilon: sc.epsilon,
        reference: REFERENCE,
        reward_normalization: spec.scenario.reward_normalization(),
        lp_value: out.baseline.total(),
        lp_gap: lp.gap,
        lp_converged: lp.converged,
        lp_iterations: lp.iterations,
        lambda_star: lp.lambda_star.clone(),
        degraded: out.degraded(),
    }
}

/// Runs one spec, writes its outputs and prints a summary line.
fn execute(spec: &RunSpec, base: &Path, workers: usize, label: &str) -> Result<bool> {
    let scenario = spec.build_scenario(base)?;
    let out = run_experiment(spec, scenario, workers)?;
    if let Some(path) = &spec.output {
        write_records_file(out.records(), path)?;
        write_meta(&meta(spec, &out), &meta_path(path))?;
    }
    if let (Some(path), Some(traj)) = (&spec.trajectories, &out.trajectories) {
        write_trajectories_file(traj, path)?;
    }
    let regret: Vec<f64> = out.rounds.iter().map(|r| r.final_regret()).collect();
    let reward: Vec<f64> = out.rounds.iter().map(|r| r.total_realized()).collect();
    println!(
        "{label}: rounds={} lp_value={:.4} reward={:.4}±{:.4} regret={:.4}±{:.4}{}",
        spec.mc_rounds,
        out.baseline.total(),
        mean(&reward),
        std_error(&reward),
        mean(&regret),
        std_error(&regret),
        if out.degraded() { " degraded" } else { "" }
    );
    Ok(out.degraded())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{suffix}"),
    };
    path.with_file_name(name)
}

fn oracle(spec: &RunSpec, base: &Path) -> Result<()> {
    let scenario = spec.build_scenario(base)?;
    let baseline = hindsight_baseline(&scenario, &spec.lp.config())?;
    let lp = &baseline.solution;
    let doc = serde_json::json!({
        "scenario": spec.scenario.name(),
        "reference": REFERENCE,
        "lp_value": baseline.total(),
        "lp_gap": lp.gap,
        "dual_bound": lp.dual_bound,
        "converged": lp.converged,
        "iterations": lp.iterations,
        "lambda_star": lp.lambda_star,
        "per_episode": baseline.per_episode,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| BenchError::json("oracle output", e))? + "\n";
    match &spec.output {
        Some(path) => std::fs::write(path, text).map_err(|e| BenchError::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(common) => {
            let (spec, base) = load_spec(&common)?;
            execute(&spec, &base, common.workers, spec.learner.id())
        }
        Command::Sweep { common, learners, rhos } => {
            let (spec, base) = load_spec(&common)?;
            let mut degraded = false;
            let mut variants = Vec::new();
            if rhos.is_empty() {
                let learners = if learners.is_empty() { LearnerKind::ALL.to_vec() } else { learners };
                for kind in learners {
                    variants.push((kind.id().to_string(), RunSpec { learner: kind, ..spec.clone() }));
                }
            } else {
                for rho in rhos {
                    variants.push((format!("rho{rho}"), RunSpec { scale: Some(rho), ..spec.clone() }));
                }
            }
            for (label, mut variant) in variants {
                variant.output = spec.output.as_deref().map(|p| with_suffix(p, &label));
                variant.trajectories = spec.trajectories.as_deref().map(|p| with_suffix(p, &label));
                degraded |= execute(&variant, &base, common.workers, &label)?;
            }
            Ok(degraded)
        }
        Command::Oracle(common) => {
            let (spec, base) = load_spec(&common)?;
            oracle(&spec, &base).map(|()| false)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("warning: at least one projection did not converge; affected rows are flagged");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
