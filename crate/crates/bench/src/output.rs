//! CSV and JSON writers.

use std::io::Write;
use std::path::{Path, PathBuf};

use armab_core::Trajectory;
use serde::Serialize;

use crate::error::{BenchError, Result};
use crate::experiment::RegretRecord;

pub const CSV_HEADER: [&str; 8] = ["round", "t", "realized", "oracle", "cum_regret", "proj_iters", "lp_gap", "flag"];

fn csv_error(path: &Path, e: csv::Error) -> BenchError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => BenchError::io(path, io),
        other => BenchError::Config(format!("{}: {other:?}", path.display())),
    }
}

/// Writes the regret records, header first, one row per `(round, t)` in the given order.
pub fn write_records<'a, W: Write>(records: impl IntoIterator<Item = &'a RegretRecord>, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_file<'a>(records: impl IntoIterator<Item = &'a RegretRecord>, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| BenchError::io(path, e))?;
    write_records(records, std::io::BufWriter::new(file)).map_err(|e| csv_error(path, e))
}

#[derive(Debug, Serialize)]
struct StepRow {
    t: usize,
    h: usize,
    n: usize,
    s: usize,
    a: u8,
    r: f64,
    s_next: usize,
}

/// `t,h,n,s,a,r,s_next`, with `t` and `h` 1-based.
pub fn write_trajectories<W: Write>(trajectories: &[Trajectory], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for traj in trajectories {
        for h in 0..traj.horizon {
            for n in 0..traj.num_arms {
                let step = traj.step(h, n);
                w.serialize(StepRow {
                    t: traj.episode,
                    h: h + 1,
                    n,
                    s: step.state,
                    a: u8::from(step.active),
                    r: step.reward,
                    s_next: step.next_state,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectories_file(trajectories: &[Trajectory], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| BenchError::io(path, e))?;
    write_trajectories(trajectories, std::io::BufWriter::new(file)).map_err(|e| csv_error(path, e))
}

/// Run metadata written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub scenario: String,
    pub learner: String,
    pub mc_rounds: usize,
    pub seed: u64,
    pub num_arms: usize,
    pub num_states: usize,
    pub budget: usize,
    pub horizon: usize,
    pub episodes: usize,
    pub eta: f64,
    pub epsilon: f64,
    pub reference: &'static str,
    pub reward_normalization: &'static str,
    pub lp_value: f64,
    pub lp_gap: f64,
    pub lp_converged: bool,
    pub lp_iterations: usize,
    pub lambda_star: Vec<f64>,
    pub degraded: bool,
}

pub const REFERENCE: &str = "oracle = <mu*, r^t> where mu* solves the relaxed occupancy LP (per-epoch budget \
     in expectation) under the true kernels and the summed schedule; it upper-bounds every feasible \
     policy, so cum_regret can only overstate regret against the best hard-budget policy";

/// `<out>.meta.json`
pub fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn write_meta(meta: &RunMeta, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(meta).map_err(|e| BenchError::json("run metadata", e))?;
    std::fs::write(path, text + "\n").map_err(|e| BenchError::io(path, e))
}
