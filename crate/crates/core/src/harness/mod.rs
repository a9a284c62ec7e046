//! Experiment orchestration for the prompt-bias toy study.
//!
//! A *cell* is one (objective, hidden size, bias strength) combination. For
//! each cell the learning rate is chosen by pilot runs, then `n_seeds`
//! independent runs are trained and evaluated on their test splits.
//!
//! Every run seed is a pinned hash of `(master_seed, objective id, h, bias
//! index, seed index)`, so results do not depend on scheduling.

mod config;
mod report;
mod sweep;

pub use config::{
    toy_objectives, SweepConfig, DEFAULT_BIAS_STRENGTHS, DEFAULT_HIDDEN_SIZES, DEFAULT_LR_GRID,
    DEFAULT_PILOT_SEEDS,
};
pub use report::{
    read_runs_csv, report, summarize, write_report, write_runs_csv, CellSummary, AGGREGATE_CSV, RUNS_CSV,
};
pub use sweep::{sweep, sweep_with_jobs, SweepSummary, LR_SEARCH_CSV, META_FILE};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bias_lab::{self, BiasConfig};
use crate::error::{Error, Result};
use crate::metrics::{accuracy, icc1};
use crate::mlp::{self, score_pairs, TrainConfig};
use crate::objectives::{ObjectiveKind, ObjectiveSpec};
use crate::rng::hash_words;

/// Environment variable holding the default worker count.
pub const JOBS_ENV: &str = "DAA_JOBS";

const RUN_TAG: u64 = 0x5255_4E00;
const PILOT_TAG: u64 = 0x5049_4C4F_5400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Diverged,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Ok => "ok",
            RunStatus::Diverged => "diverged",
        })
    }
}

impl FromStr for RunStatus {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(RunStatus::Ok),
            "diverged" => Ok(RunStatus::Diverged),
            other => Err(Error::Parse(format!("unknown status `{other}`"))),
        }
    }
}

/// Outcome of one training run. Metrics are `None` when undefined
/// (diverged run, or zero score variance for ICC₁).
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub objective: ObjectiveKind,
    pub h: usize,
    pub bias_strength: f64,
    pub lr: f64,
    pub seed: u64,
    pub status: RunStatus,
    pub test_accuracy: Option<f64>,
    pub test_icc1: Option<f64>,
    pub train_loss_final: Option<f64>,
}

/// Identifies a sweep cell. `bias_index` is the position of `bias_strength`
/// in the sweep's bias list and enters seed derivation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub objective: ObjectiveSpec,
    pub hidden: usize,
    pub bias_index: usize,
    pub bias_strength: f64,
}

/// Stable small integer for an objective kind, used in seed derivation.
pub fn objective_id(kind: ObjectiveKind) -> u64 {
    ObjectiveKind::ALL
        .iter()
        .position(|&k| k == kind)
        .expect("listed kind") as u64
}

/// Seed of run `seed_index` in `cell`.
pub fn run_seed(master_seed: u64, cell: &Cell, seed_index: u64) -> u64 {
    hash_words(&[
        master_seed,
        RUN_TAG,
        objective_id(cell.objective.kind),
        cell.hidden as u64,
        cell.bias_index as u64,
        seed_index,
    ])
}

/// Seed of pilot run `pilot_index` in `cell`; disjoint from run seeds by tag.
pub fn pilot_seed(master_seed: u64, cell: &Cell, pilot_index: u64) -> u64 {
    hash_words(&[
        master_seed,
        PILOT_TAG,
        objective_id(cell.objective.kind),
        cell.hidden as u64,
        cell.bias_index as u64,
        pilot_index,
    ])
}

/// Generates data, initializes and trains a scorer, and evaluates it on the
/// test split. Data and initialization use distinct streams derived from `seed`.
pub fn run_single(
    objective: &ObjectiveSpec,
    hidden: usize,
    bias_strength: f64,
    lr: f64,
    seed: u64,
    data: &BiasConfig,
    epochs: usize,
) -> Result<RunResult> {
    let data_cfg = BiasConfig {
        bias_strength,
        seed: hash_words(&[seed, 0]),
        ..*data
    };
    let dataset = bias_lab::generate(&data_cfg)?;
    let train_cfg = TrainConfig {
        objective: *objective,
        lr,
        epochs,
        seed: hash_words(&[seed, 1]),
    };
    let params = train_cfg.init_params(hidden)?;
    let outcome = mlp::train(params, &dataset, &train_cfg)?;

    let mut result = RunResult {
        objective: objective.kind,
        h: hidden,
        bias_strength,
        lr,
        seed,
        status: RunStatus::Diverged,
        test_accuracy: None,
        test_icc1: None,
        train_loss_final: None,
    };
    if outcome.diverged {
        return Ok(result);
    }
    let scored = score_pairs(&outcome.params, &dataset.test);
    let acc = accuracy(&scored)?;
    let icc = match icc1(&scored) {
        Ok(v) => Some(v),
        Err(Error::UndefinedStatistic(_)) => None,
        Err(e) => return Err(e),
    };
    let loss = outcome.final_train_loss();
    if !scored.iter().all(|s| s.r_w.is_finite() && s.r_l.is_finite()) {
        return Ok(result);
    }
    result.status = RunStatus::Ok;
    result.test_accuracy = Some(acc);
    result.test_icc1 = icc;
    result.train_loss_final = loss;
    Ok(result)
}

/// Mean pilot accuracy of one learning rate. Diverged pilots score 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrCandidate {
    pub lr: f64,
    pub mean_accuracy: f64,
    pub n_diverged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrSearch {
    pub best_lr: f64,
    pub candidates: Vec<LrCandidate>,
}

/// Picks the grid learning rate with the highest mean pilot test accuracy;
/// exact ties go to the smaller rate. Runs pilots on the current rayon pool.
pub fn lr_search(
    cell: &Cell,
    lr_grid: &[f64],
    n_pilot_seeds: usize,
    master_seed: u64,
    data: &BiasConfig,
    epochs: usize,
) -> Result<LrSearch> {
    if lr_grid.is_empty() {
        return Err(Error::Config("empty learning-rate grid".into()));
    }
    if n_pilot_seeds == 0 {
        return Err(Error::Config("lr search needs at least one pilot seed".into()));
    }
    let jobs: Vec<(usize, u64)> = (0..lr_grid.len())
        .flat_map(|i| (0..n_pilot_seeds as u64).map(move |s| (i, s)))
        .collect();
    let results: Vec<RunResult> = jobs
        .par_iter()
        .map(|&(i, s)| {
            run_single(
                &cell.objective,
                cell.hidden,
                cell.bias_strength,
                lr_grid[i],
                pilot_seed(master_seed, cell, s),
                data,
                epochs,
            )
        })
        .collect::<Result<_>>()?;

    let candidates: Vec<LrCandidate> = lr_grid
        .iter()
        .enumerate()
        .map(|(i, &lr)| {
            let runs = &results[i * n_pilot_seeds..(i + 1) * n_pilot_seeds];
            let n_diverged = runs.iter().filter(|r| r.status == RunStatus::Diverged).count();
            let total: f64 = runs.iter().map(|r| r.test_accuracy.unwrap_or(0.0)).sum();
            LrCandidate {
                lr,
                mean_accuracy: total / n_pilot_seeds as f64,
                n_diverged,
            }
        })
        .collect();

    let best = candidates
        .iter()
        .filter(|c| c.n_diverged < n_pilot_seeds)
        .fold(None::<&LrCandidate>, |best, c| match best {
            None => Some(c),
            Some(b) if c.mean_accuracy > b.mean_accuracy => Some(c),
            Some(b) if c.mean_accuracy == b.mean_accuracy && c.lr < b.lr => Some(c),
            keep => keep,
        })
        .ok_or_else(|| {
            Error::Config(format!(
                "every pilot diverged for {} h={} bias={}",
                cell.objective.kind, cell.hidden, cell.bias_strength
            ))
        })?;
    Ok(LrSearch {
        best_lr: best.lr,
        candidates,
    })
}
