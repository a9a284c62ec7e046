use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{read_runs_csv, write_report, write_runs_csv, CellSummary, RUNS_CSV};
use super::{lr_search, run_seed, run_single, Cell, RunResult, SweepConfig};
use crate::error::{Error, Result};
use crate::objectives::ObjectiveKind;

pub const LR_SEARCH_CSV: &str = "lr_search.csv";
pub const META_FILE: &str = "sweep_meta.toml";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub cells: Vec<CellSummary>,
    /// Runs taken over from an existing `runs.csv`.
    pub n_reused: usize,
    pub n_computed: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct LrRow {
    objective: String,
    h: usize,
    bias_strength: f64,
    lr: f64,
    pilot_mean_accuracy: f64,
    pilot_diverged: usize,
    chosen: bool,
}

type RunKey = (ObjectiveKind, usize, u64, u64);

fn run_key(r: &RunResult) -> RunKey {
    (r.objective, r.h, r.bias_strength.to_bits(), r.seed)
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)?;
    Ok(())
}

fn cells(config: &SweepConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for objective in &config.objectives {
        for &hidden in &config.hidden_sizes {
            for (bias_index, &bias_strength) in config.bias_strengths.iter().enumerate() {
                out.push(Cell {
                    objective: *objective,
                    hidden,
                    bias_index,
                    bias_strength,
                });
            }
        }
    }
    out
}

/// Learning-rate search rows of an earlier sweep into the same directory,
/// grouped by cell.
fn previous_lr_rows(dir: &Path) -> Result<HashMap<(ObjectiveKind, usize, u64), Vec<LrRow>>> {
    let path = dir.join(LR_SEARCH_CSV);
    let mut out: HashMap<_, Vec<LrRow>> = HashMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let mut rd = csv::Reader::from_path(path)?;
    for row in rd.deserialize::<LrRow>() {
        let row = row?;
        out.entry((row.objective.parse()?, row.h, row.bias_strength.to_bits()))
            .or_default()
            .push(row);
    }
    Ok(out)
}

/// Parameters that change results; a mismatch invalidates cached rows.
#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct SweepMeta {
    master_seed: u64,
    pilot_seeds: usize,
    epochs: usize,
    lr_grid: Vec<f64>,
    data: crate::bias_lab::BiasConfig,
    objectives: Vec<crate::objectives::ObjectiveSpec>,
}

impl SweepMeta {
    fn of(config: &SweepConfig) -> Self {
        Self {
            master_seed: config.master_seed,
            pilot_seeds: config.pilot_seeds,
            epochs: config.epochs,
            lr_grid: config.lr_grid.clone(),
            data: config.data,
            objectives: config.objectives.clone(),
        }
    }
}

fn meta_matches(dir: &Path, config: &SweepConfig) -> Result<bool> {
    let path = dir.join(META_FILE);
    if !path.exists() {
        return Ok(false);
    }
    let text = fs::read_to_string(path)?;
    Ok(toml::from_str::<SweepMeta>(&text).ok() == Some(SweepMeta::of(config)))
}

fn write_meta(dir: &Path, config: &SweepConfig) -> Result<()> {
    let text = toml::to_string(&SweepMeta::of(config))
        .map_err(|e| Error::Config(format!("cannot serialize sweep metadata: {e}")))?;
    fs::write(dir.join(META_FILE), text)?;
    Ok(())
}

/// Runs the full grid on the global rayon pool. See [`sweep_with_jobs`].
pub fn sweep(config: &SweepConfig) -> Result<SweepSummary> {
    run_sweep(config)
}

/// Runs the full grid with `jobs` worker threads.
///
/// For every cell: learning-rate search, `n_seeds` runs at the chosen rate,
/// then aggregation. Rows already present in `out_dir/runs.csv` from a sweep
/// with identical result-affecting settings are reused. Output rows are
/// sorted by (objective position, h, bias position, seed index), so files are
/// byte-identical for any `jobs`.
pub fn sweep_with_jobs(config: &SweepConfig, jobs: usize) -> Result<SweepSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_sweep(config))
}

fn run_sweep(config: &SweepConfig) -> Result<SweepSummary> {
    config.validate()?;
    let dir = config.out_dir.as_path();
    ensure_writable(dir)?;

    let resumable = meta_matches(dir, config)?;
    let mut previous: HashMap<RunKey, RunResult> = HashMap::new();
    let runs_path = dir.join(RUNS_CSV);
    if resumable && runs_path.exists() {
        for r in read_runs_csv(fs::File::open(&runs_path)?)? {
            previous.insert(run_key(&r), r);
        }
    }
    let mut cached_lrs = if resumable {
        previous_lr_rows(dir)?
    } else {
        HashMap::new()
    };

    let mut lr_rows = Vec::new();
    let mut all_runs: Vec<RunResult> = Vec::new();
    let mut n_reused = 0;
    let mut n_computed = 0;

    for cell in cells(config) {
        let kind = cell.objective.kind;
        let lr_key = (kind, cell.hidden, cell.bias_strength.to_bits());
        let cached = cached_lrs
            .remove(&lr_key)
            .filter(|rows| rows.iter().filter(|r| r.chosen).count() == 1);
        let lr = match cached {
            Some(rows) => {
                let lr = rows.iter().find(|r| r.chosen).map(|r| r.lr).unwrap_or(f64::NAN);
                lr_rows.extend(rows);
                lr
            }
            None => {
                let search = lr_search(
                    &cell,
                    &config.lr_grid,
                    config.pilot_seeds,
                    config.master_seed,
                    &config.data,
                    config.epochs,
                )?;
                for c in &search.candidates {
                    lr_rows.push(LrRow {
                        objective: kind.name().into(),
                        h: cell.hidden,
                        bias_strength: cell.bias_strength,
                        lr: c.lr,
                        pilot_mean_accuracy: c.mean_accuracy,
                        pilot_diverged: c.n_diverged,
                        chosen: c.lr == search.best_lr,
                    });
                }
                search.best_lr
            }
        };

        let seeds: Vec<u64> = (0..config.n_seeds as u64)
            .map(|i| run_seed(config.master_seed, &cell, i))
            .collect();
        let runs: Vec<RunResult> = seeds
            .par_iter()
            .map(|&seed| {
                let key = (kind, cell.hidden, cell.bias_strength.to_bits(), seed);
                match previous.get(&key) {
                    Some(r) if r.lr == lr => Ok((r.clone(), true)),
                    _ => run_single(
                        &cell.objective,
                        cell.hidden,
                        cell.bias_strength,
                        lr,
                        seed,
                        &config.data,
                        config.epochs,
                    )
                    .map(|r| (r, false)),
                }
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .map(|(r, reused)| {
                if reused {
                    n_reused += 1;
                } else {
                    n_computed += 1;
                }
                r
            })
            .collect();
        all_runs.extend(runs);
    }

    write_runs_csv(&all_runs, fs::File::create(&runs_path)?)?;
    let mut w = csv::Writer::from_path(dir.join(LR_SEARCH_CSV))?;
    for row in &lr_rows {
        w.serialize(row)?;
    }
    w.flush()?;
    write_meta(dir, config)?;
    let cells = write_report(dir, &all_runs)?;
    Ok(SweepSummary {
        cells,
        n_reused,
        n_computed,
    })
}
