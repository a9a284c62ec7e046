//! Per-run CSV I/O, per-cell aggregation and plot-data emission.
//!
//! `report` is a pure function of the per-run rows: aggregate and plot files
//! are rebuilt from `runs.csv` alone.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RunResult, RunStatus};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, AggregateStat};
use crate::objectives::ObjectiveKind;

pub const RUNS_CSV: &str = "runs.csv";
pub const AGGREGATE_CSV: &str = "aggregate.csv";

#[derive(Debug, Serialize, Deserialize)]
struct RunRow {
    objective: String,
    h: usize,
    bias_strength: f64,
    lr: f64,
    seed: u64,
    status: String,
    test_accuracy: Option<f64>,
    test_icc1: Option<f64>,
    train_loss_final: Option<f64>,
}

impl From<&RunResult> for RunRow {
    fn from(r: &RunResult) -> Self {
        Self {
            objective: r.objective.name().to_string(),
            h: r.h,
            bias_strength: r.bias_strength,
            lr: r.lr,
            seed: r.seed,
            status: r.status.to_string(),
            test_accuracy: r.test_accuracy,
            test_icc1: r.test_icc1,
            train_loss_final: r.train_loss_final,
        }
    }
}

impl TryFrom<RunRow> for RunResult {
    type Error = Error;
    fn try_from(r: RunRow) -> Result<Self> {
        Ok(Self {
            objective: r.objective.parse()?,
            h: r.h,
            bias_strength: r.bias_strength,
            lr: r.lr,
            seed: r.seed,
            status: r.status.parse()?,
            test_accuracy: r.test_accuracy,
            test_icc1: r.test_icc1,
            train_loss_final: r.train_loss_final,
        })
    }
}

pub fn write_runs_csv<W: Write>(runs: &[RunResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if runs.is_empty() {
        w.write_record([
            "objective",
            "h",
            "bias_strength",
            "lr",
            "seed",
            "status",
            "test_accuracy",
            "test_icc1",
            "train_loss_final",
        ])?;
    }
    for r in runs {
        w.serialize(RunRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_runs_csv<R: Read>(reader: R) -> Result<Vec<RunResult>> {
    let mut rd = csv::Reader::from_reader(reader);
    rd.deserialize::<RunRow>()
        .map(|row| RunResult::try_from(row?))
        .collect()
}

/// Aggregates of one (objective, h, bias) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub objective: ObjectiveKind,
    pub h: usize,
    pub bias_strength: f64,
    pub lr: f64,
    pub n_ok: usize,
    pub n_diverged: usize,
    /// `None` with fewer than two defined values.
    pub accuracy: Option<AggregateStat>,
    pub icc1: Option<AggregateStat>,
}

fn same_cell(a: &RunResult, b: &RunResult) -> bool {
    a.objective == b.objective && a.h == b.h && a.bias_strength == b.bias_strength && a.lr == b.lr
}

/// Groups runs by (objective, h, bias, lr) in order of first appearance.
/// Diverged runs are counted but excluded from the aggregates.
pub fn summarize(runs: &[RunResult]) -> Vec<CellSummary> {
    let mut keys: Vec<&RunResult> = Vec::new();
    for r in runs {
        if !keys.iter().any(|k| same_cell(k, r)) {
            keys.push(r);
        }
    }
    keys.into_iter()
        .map(|key| {
            let members: Vec<&RunResult> = runs.iter().filter(|r| same_cell(key, r)).collect();
            let ok: Vec<&&RunResult> = members.iter().filter(|r| r.status == RunStatus::Ok).collect();
            let accs: Vec<f64> = ok.iter().filter_map(|r| r.test_accuracy).collect();
            let iccs: Vec<f64> = ok.iter().filter_map(|r| r.test_icc1).collect();
            CellSummary {
                objective: key.objective,
                h: key.h,
                bias_strength: key.bias_strength,
                lr: key.lr,
                n_ok: ok.len(),
                n_diverged: members.len() - ok.len(),
                accuracy: aggregate(&accs).ok(),
                icc1: aggregate(&iccs).ok(),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct AggregateRow {
    objective: &'static str,
    h: usize,
    bias_strength: f64,
    lr: f64,
    n_ok: usize,
    n_diverged: usize,
    acc_mean: Option<f64>,
    acc_ci_low: Option<f64>,
    acc_ci_high: Option<f64>,
    icc1_mean: Option<f64>,
    icc1_ci_low: Option<f64>,
    icc1_ci_high: Option<f64>,
}

#[derive(Serialize)]
struct PlotRow {
    series: &'static str,
    x: usize,
    mean: f64,
    ci_low: f64,
    ci_high: f64,
    n: usize,
}

/// Plot-data file for one metric and bias regime: one series per
/// objective, hidden size on the x axis.
pub fn plot_file_name(metric: &str, bias_strength: f64) -> String {
    format!("plot_{metric}_bias{bias_strength}.csv")
}

/// Writes `aggregate.csv` and the plot-data files into `out_dir`.
pub fn write_report(out_dir: &Path, runs: &[RunResult]) -> Result<Vec<CellSummary>> {
    let cells = summarize(runs);

    let mut w = csv::Writer::from_path(out_dir.join(AGGREGATE_CSV))?;
    for c in &cells {
        w.serialize(AggregateRow {
            objective: c.objective.name(),
            h: c.h,
            bias_strength: c.bias_strength,
            lr: c.lr,
            n_ok: c.n_ok,
            n_diverged: c.n_diverged,
            acc_mean: c.accuracy.map(|a| a.mean),
            acc_ci_low: c.accuracy.map(|a| a.ci_low),
            acc_ci_high: c.accuracy.map(|a| a.ci_high),
            icc1_mean: c.icc1.map(|a| a.mean),
            icc1_ci_low: c.icc1.map(|a| a.ci_low),
            icc1_ci_high: c.icc1.map(|a| a.ci_high),
        })?;
    }
    w.flush()?;

    let mut biases: Vec<f64> = Vec::new();
    for c in &cells {
        if !biases.contains(&c.bias_strength) {
            biases.push(c.bias_strength);
        }
    }
    for bias in biases {
        for metric in ["accuracy", "icc1"] {
            let mut w = csv::Writer::from_path(out_dir.join(plot_file_name(metric, bias)))?;
            let mut rows: Vec<(usize, usize, &CellSummary)> = Vec::new();
            let order: Vec<ObjectiveKind> = {
                let mut seen = Vec::new();
                for c in &cells {
                    if !seen.contains(&c.objective) {
                        seen.push(c.objective);
                    }
                }
                seen
            };
            for c in cells.iter().filter(|c| c.bias_strength == bias) {
                let pos = order.iter().position(|&k| k == c.objective).unwrap_or(usize::MAX);
                rows.push((pos, c.h, c));
            }
            rows.sort_by_key(|&(pos, h, _)| (pos, h));
            for (_, _, c) in rows {
                let stat = if metric == "accuracy" { c.accuracy } else { c.icc1 };
                if let Some(s) = stat {
                    w.serialize(PlotRow {
                        series: c.objective.name(),
                        x: c.h,
                        mean: s.mean,
                        ci_low: s.ci_low,
                        ci_high: s.ci_high,
                        n: s.n_runs,
                    })?;
                }
            }
            w.flush()?;
        }
    }
    Ok(cells)
}

/// Rebuilds the aggregate and plot files of `out_dir` from its `runs.csv`.
pub fn report(out_dir: &Path) -> Result<Vec<CellSummary>> {
    let runs = read_runs_csv(std::fs::File::open(out_dir.join(RUNS_CSV))?)?;
    write_report(out_dir, &runs)
}
