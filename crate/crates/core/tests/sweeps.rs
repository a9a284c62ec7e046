use std::fs;
use std::path::Path;

use daa_core::bias_lab::BiasConfig;
use daa_core::harness::{
    self, lr_search, sweep_with_jobs, Cell, SweepConfig, AGGREGATE_CSV, LR_SEARCH_CSV, RUNS_CSV,
};
use daa_core::objectives::{ObjectiveKind, ObjectiveSpec};
use daa_core::Error;

fn small(out: &Path) -> SweepConfig {
    SweepConfig {
        objectives: [ObjectiveKind::Dpo, ObjectiveKind::CalDpo]
            .into_iter()
            .map(ObjectiveSpec::new)
            .collect(),
        hidden_sizes: vec![1, 3],
        bias_strengths: vec![0.0, 0.9],
        lr_grid: vec![0.3, 0.03],
        n_seeds: 4,
        pilot_seeds: 2,
        epochs: 20,
        data: BiasConfig {
            n_samples: 120,
            ..Default::default()
        },
        out_dir: out.to_path_buf(),
        ..SweepConfig::default()
    }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn output_is_independent_of_job_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    sweep_with_jobs(&small(a.path()), 1).unwrap();
    sweep_with_jobs(&small(b.path()), 4).unwrap();
    assert_eq!(files(a.path()), files(b.path()));
}

#[test]
fn resumed_sweep_reuses_rows_and_matches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let first = sweep_with_jobs(&cfg, 2).unwrap();
    let snapshot = files(dir.path());
    let second = sweep_with_jobs(&cfg, 2).unwrap();
    assert_eq!(second.n_computed, 0);
    assert_eq!(second.n_reused, first.n_computed);
    assert_eq!(second.cells, first.cells);
    assert_eq!(files(dir.path()), snapshot);

    let grown = SweepConfig {
        n_seeds: 6,
        ..cfg.clone()
    };
    let third = sweep_with_jobs(&grown, 2).unwrap();
    assert_eq!(third.n_reused, first.n_computed);
    assert_eq!(third.n_computed, 8 * 2);
}

#[test]
fn changed_settings_invalidate_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    sweep_with_jobs(&cfg, 1).unwrap();
    let changed = SweepConfig { epochs: 21, ..cfg };
    let s = sweep_with_jobs(&changed, 1).unwrap();
    assert_eq!(s.n_reused, 0);
}

#[test]
fn report_regenerates_from_runs() {
    let dir = tempfile::tempdir().unwrap();
    sweep_with_jobs(&small(dir.path()), 2).unwrap();
    let before = files(dir.path());
    for (name, _) in &before {
        if name != RUNS_CSV && name != LR_SEARCH_CSV && !name.ends_with(".toml") {
            fs::remove_file(dir.path().join(name)).unwrap();
        }
    }
    harness::report(dir.path()).unwrap();
    assert_eq!(files(dir.path()), before);
    let agg = fs::read_to_string(dir.path().join(AGGREGATE_CSV)).unwrap();
    assert!(agg.starts_with(
        "objective,h,bias_strength,lr,n_ok,n_diverged,acc_mean,acc_ci_low,acc_ci_high,icc1_mean,icc1_ci_low,icc1_ci_high\n"
    ));
}

#[test]
fn unwritable_out_dir_fails_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let cfg = SweepConfig {
        n_seeds: 1000,
        ..small(&blocker.join("sub"))
    };
    let start = std::time::Instant::now();
    let r = sweep_with_jobs(&cfg, 1);
    assert!(matches!(r, Err(Error::Io(_))), "{r:?}");
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn lr_choice_is_reproducible_for_biased_asft() {
    let cell = Cell {
        objective: ObjectiveSpec::new(ObjectiveKind::AsftAlign),
        hidden: 3,
        bias_index: 1,
        bias_strength: 0.9,
    };
    let data = BiasConfig {
        n_samples: 400,
        ..Default::default()
    };
    let grid = SweepConfig::default().lr_grid;
    let a = lr_search(&cell, &grid, 6, 0, &data, 40).unwrap();
    let b = lr_search(&cell, &grid, 6, 0, &data, 40).unwrap();
    assert_eq!(a, b);
    assert!(grid.contains(&a.best_lr));
    let best = a
        .candidates
        .iter()
        .map(|c| c.mean_accuracy)
        .fold(f64::MIN, f64::max);
    let chosen = a.candidates.iter().find(|c| c.lr == a.best_lr).unwrap();
    assert_eq!(chosen.mean_accuracy, best);
    assert!(a
        .candidates
        .iter()
        .filter(|c| c.mean_accuracy == best)
        .all(|c| c.lr >= a.best_lr));
}
