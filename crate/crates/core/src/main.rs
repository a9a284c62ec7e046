use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use daa_core::bias_lab::{self, BiasConfig};
use daa_core::harness::{
    self, lr_search, run_seed, run_single, sweep_with_jobs, write_runs_csv, Cell, SweepConfig, JOBS_ENV,
};
use daa_core::objectives::{ObjectiveKind, ObjectiveSpec};
use daa_core::verify;

#[derive(Parser)]
#[command(
    name = "daa",
    version,
    about = "Direct alignment objectives and the prompt-bias toy experiment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one synthetic preference dataset and write it as CSV.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Data seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train and evaluate a single (objective, h, bias) cell.
    Run {
        #[command(flatten)]
        common: Common,
        /// Fixed learning rate; searched over the grid when omitted.
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Run the full objective × hidden × bias grid.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Run the identity and gradient self-checks.
    Verify,
    /// Rebuild aggregate and plot-data files from `<out>/runs.csv`.
    Report {
        #[arg(long, default_value = "sweep-out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// TOML sweep configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of seeds per cell.
    #[arg(long)]
    seeds: Option<usize>,
    /// Output directory (or file, for `generate`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Objectives, comma separated (e.g. dpo,ipo,asft).
    #[arg(long, value_delimiter = ',')]
    objective: Vec<ObjectiveKind>,
    /// Hidden sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Vec<usize>,
    /// Bias strengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    bias: Vec<f64>,
    /// Worker threads.
    #[arg(long, env = JOBS_ENV)]
    jobs: Option<usize>,
}

impl Common {
    fn sweep_config(&self) -> daa_core::Result<SweepConfig> {
        let mut cfg = match &self.config {
            Some(path) => SweepConfig::load(path)?,
            None => SweepConfig::default(),
        };
        if let Some(n) = self.seeds {
            cfg.n_seeds = n;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if !self.objective.is_empty() {
            cfg.objectives = self.objective.iter().map(|&k| ObjectiveSpec::new(k)).collect();
        }
        if !self.hidden.is_empty() {
            cfg.hidden_sizes = self.hidden.clone();
        }
        if !self.bias.is_empty() {
            cfg.bias_strengths = self.bias.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn jobs(&self) -> usize {
        self.jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

fn cmd_generate(common: &Common, seed: u64) -> daa_core::Result<()> {
    let cfg = common.sweep_config()?;
    let data = BiasConfig {
        bias_strength: cfg.bias_strengths[0],
        seed,
        ..cfg.data
    };
    let ds = bias_lab::generate(&data)?;
    match &common.out {
        Some(path) => ds.save_csv(path)?,
        None => ds.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_run(common: &Common, lr: Option<f64>) -> daa_core::Result<()> {
    let mut cfg = common.sweep_config()?;
    if common.seeds.is_none() {
        cfg.n_seeds = 1;
    }
    let objective = cfg.objectives[0];
    let cell = Cell {
        objective,
        hidden: cfg.hidden_sizes[0],
        bias_index: 0,
        bias_strength: cfg.bias_strengths[0],
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs())
        .build()
        .map_err(|e| daa_core::Error::Config(e.to_string()))?;
    let runs = pool.install(|| -> daa_core::Result<Vec<_>> {
        let lr = match lr {
            Some(lr) => lr,
            None => {
                lr_search(
                    &cell,
                    &cfg.lr_grid,
                    cfg.pilot_seeds,
                    cfg.master_seed,
                    &cfg.data,
                    cfg.epochs,
                )?
                .best_lr
            }
        };
        use rayon::prelude::*;
        (0..cfg.n_seeds as u64)
            .into_par_iter()
            .map(|i| {
                let seed = run_seed(cfg.master_seed, &cell, i);
                run_single(
                    &objective,
                    cell.hidden,
                    cell.bias_strength,
                    lr,
                    seed,
                    &cfg.data,
                    cfg.epochs,
                )
            })
            .collect()
    })?;
    match &common.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            write_runs_csv(&runs, File::create(dir.join(harness::RUNS_CSV))?)?;
            harness::write_report(dir, &runs)?;
        }
        None => write_runs_csv(&runs, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_sweep(common: &Common) -> daa_core::Result<()> {
    let cfg = common.sweep_config()?;
    let summary = sweep_with_jobs(&cfg, common.jobs())?;
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{} cells, {} runs computed, {} reused -> {}",
        summary.cells.len(),
        summary.n_computed,
        summary.n_reused,
        cfg.out_dir.display()
    )?;
    for c in &summary.cells {
        let fmt = |s: Option<daa_core::metrics::AggregateStat>| match s {
            Some(s) => format!("{:.4} [{:.4}, {:.4}]", s.mean, s.ci_low, s.ci_high),
            None => "-".to_string(),
        };
        writeln!(
            out,
            "{:<10} h={} bias={:<4} lr={:<6} acc {}  icc1 {}",
            c.objective.name(),
            c.h,
            c.bias_strength,
            c.lr,
            fmt(c.accuracy),
            fmt(c.icc1)
        )?;
    }
    Ok(())
}

fn cmd_verify() -> bool {
    let mut all = true;
    for r in verify::run_all() {
        println!(
            "[{}] {}: {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
        all &= r.passed;
    }
    all
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate { common, seed } => cmd_generate(common, *seed),
        Command::Run { common, lr } => cmd_run(common, *lr),
        Command::Sweep { common } => cmd_sweep(common),
        Command::Report { out } => harness::report(out).map(|cells| {
            println!("{} cells written to {}", cells.len(), out.display());
        }),
        Command::Verify => {
            return if cmd_verify() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
