//! Runtime self-checks behind `daa verify`.
//!
//! Each check exercises an algebraic identity or compares analytic gradients
//! against central finite differences, and reports its worst observed error.

use std::time::Instant;

use crate::bias_lab::PreferencePair;
use crate::metrics::{icc1, ScoredPair};
use crate::mlp::{self, ScorerParams};
use crate::numeric::{log_sigmoid, sigmoid};
use crate::objectives::{
    asft_align_loss, odds_from_prob, orpo_align_loss, orpo_asft_gap, single_stage_loss, ObjectiveKind,
    ObjectiveSpec, ScorePair,
};
use crate::rng::SplitMix64;
use crate::toy_policy::{pair_loss, required_normalization, TabularPolicy};

pub const FD_STEP: f64 = 1e-6;
pub const FD_REL_TOL: f64 = 1e-4;
/// Denominator floor for relative errors of near-zero derivatives.
pub const FD_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

/// Central difference of `f` at `x` along coordinate `i`.
pub fn central_diff<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], i: usize, step: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += step;
    xm[i] -= step;
    (f(&xp) - f(&xm)) / (2.0 * step)
}

fn report(name: &'static str, worst: f64, tol: f64, extra: &str) -> CheckReport {
    CheckReport {
        name,
        passed: worst <= tol,
        detail: format!("worst {worst:.3e} (tol {tol:.0e}){extra}"),
    }
}

pub fn odds_lemmas() -> CheckReport {
    let n = 10_000;
    let (lo, hi) = (1e-6, 1.0 - 1e-6);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let p = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let r = odds_from_prob(p).unwrap_or(f64::NAN);
        worst = worst
            .max((log_sigmoid(r) - p.ln()).abs())
            .max((log_sigmoid(-r) - (-p).ln_1p()).abs());
    }
    report("odds lemmas", worst, 1e-9, "")
}

pub fn asft_decomposition(rng: &mut SplitMix64) -> CheckReport {
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let pw = rng.uniform(1e-6, 1.0 - 1e-6);
        let pl = rng.uniform(1e-6, 1.0 - 1e-6);
        let s = ScorePair::new(odds_from_prob(pw).unwrap(), odds_from_prob(pl).unwrap());
        let v = asft_align_loss(s, 1.0).map(|g| g.value).unwrap_or(f64::NAN);
        worst = worst.max((v - (-pw.ln() - (-pl).ln_1p())).abs());
    }
    report("ASFT decomposition", worst, 1e-9, "")
}

pub fn orpo_asft_relation(rng: &mut SplitMix64) -> CheckReport {
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..100_000 {
        let pw = rng.uniform(1e-6, 1.0 - 1e-6);
        let pl = rng.uniform(1e-6, 1.0 - 1e-6) * (1.0 - pw);
        let lambda = rng.uniform(0.0, 2.0);
        let asft = single_stage_loss(ObjectiveKind::AsftSingle, pw, pl, lambda)
            .unwrap()
            .value;
        let orpo = single_stage_loss(ObjectiveKind::OrpoSingle, pw, pl, lambda)
            .unwrap()
            .value;
        let gap = orpo_asft_gap(pw, pl).unwrap();
        worst = worst.max((orpo - (asft + lambda * gap)).abs());
        let s = ScorePair::new(odds_from_prob(pw).unwrap(), odds_from_prob(pl).unwrap());
        let oa = orpo_align_loss(s, 1.0).unwrap().value;
        let aa = asft_align_loss(s, 1.0).unwrap().value;
        if orpo > asft || oa > aa {
            violations += 1;
        }
    }
    let mut r = report(
        "ORPO-ASFT relation",
        worst,
        1e-9,
        &format!(", {violations} ordering violations"),
    );
    r.passed &= violations == 0;
    r
}

pub fn beta_one_recovery(rng: &mut SplitMix64) -> CheckReport {
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let s = ScorePair::new(rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0));
        let vanilla_orpo = -log_sigmoid(s.r_w - s.r_l);
        let vanilla_asft = -log_sigmoid(s.r_w) - log_sigmoid(-s.r_l);
        if orpo_align_loss(s, 1.0).unwrap().value != vanilla_orpo
            || asft_align_loss(s, 1.0).unwrap().value != vanilla_asft
        {
            mismatches += 1;
        }
    }
    CheckReport {
        name: "beta = 1 recovery",
        passed: mismatches == 0,
        detail: format!("{mismatches} mismatches of 10000"),
    }
}

pub fn scalar_gradients(rng: &mut SplitMix64) -> CheckReport {
    let mut worst: f64 = 0.0;
    for kind in ObjectiveKind::ALL.into_iter().filter(|k| k.is_pair_score_loss()) {
        for _ in 0..100 {
            let spec = ObjectiveSpec::new(kind)
                .with_beta(rng.uniform(0.2, 3.0))
                .with_gamma(rng.uniform(0.0, 1.0));
            let x = [rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)];
            let f = |v: &[f64]| spec.scalar_loss(ScorePair::new(v[0], v[1])).unwrap().value;
            let g = spec.scalar_loss(ScorePair::new(x[0], x[1])).unwrap();
            worst = worst
                .max(relative_error(g.d_r_w, central_diff(f, &x, 0, FD_STEP)))
                .max(relative_error(g.d_r_l, central_diff(f, &x, 1, FD_STEP)));
        }
    }
    report("scalar loss gradients", worst, FD_REL_TOL, "")
}

pub fn policy_gradients(rng: &mut SplitMix64) -> CheckReport {
    let mut worst: f64 = 0.0;
    let lengths = vec![1, 3, 2, 5];
    for kind in ObjectiveKind::ALL {
        let spec = ObjectiveSpec::new(kind)
            .with_beta(0.7)
            .with_gamma(0.2)
            .with_lambda(0.5);
        let normalize = required_normalization(kind).unwrap_or(false);
        for _ in 0..100 {
            let row: Vec<f64> = (0..4).map(|_| rng.uniform(-1.5, 1.5)).collect();
            let ref_row: Vec<f64> = (0..4).map(|_| rng.uniform(-1.5, 1.5)).collect();
            let reference = TabularPolicy::from_logits(vec![ref_row], lengths.clone()).unwrap();
            let eval = |v: &[f64]| {
                let p = TabularPolicy::from_logits(vec![v.to_vec()], lengths.clone()).unwrap();
                pair_loss(&spec, &p, &reference, 0, 0, 1, normalize)
                    .unwrap()
                    .value
            };
            let policy = TabularPolicy::from_logits(vec![row.clone()], lengths.clone()).unwrap();
            let g = pair_loss(&spec, &policy, &reference, 0, 0, 1, normalize).unwrap();
            for i in 0..4 {
                worst = worst.max(relative_error(g.grad[i], central_diff(eval, &row, i, FD_STEP)));
            }
        }
    }
    report("tabular policy gradients", worst, FD_REL_TOL, "")
}

pub fn mlp_gradients(rng: &mut SplitMix64) -> CheckReport {
    let mut worst: f64 = 0.0;
    for kind in ObjectiveKind::ALL.into_iter().filter(|k| k.is_pair_score_loss()) {
        let spec = ObjectiveSpec::new(kind);
        for h in [1, 3, 8] {
            let mut checked = 0;
            while checked < 100 {
                let params = mlp::init(h, rng.next_u64()).unwrap();
                let mut flat = params.to_vec();
                for v in flat.iter_mut().skip(2 * h).take(h) {
                    *v = rng.uniform(-0.5, 0.5);
                }
                let params = ScorerParams::from_slice(h, &flat).unwrap();
                let pair = PreferencePair {
                    x: rng.next_f64(),
                    y_w: rng.uniform(-1.0, 1.0),
                    y_l: rng.uniform(-1.0, 1.0),
                    b_x: 0.0,
                };
                if near_kink(&params, &pair) {
                    continue;
                }
                let (_, g) = mlp::backward(&params, &pair, &spec).unwrap();
                let g = g.to_vec();
                let eval = |v: &[f64]| {
                    let p = ScorerParams::from_slice(h, v).unwrap();
                    mlp::backward(&p, &pair, &spec).unwrap().0.value
                };
                for (i, gi) in g.iter().enumerate() {
                    worst = worst.max(relative_error(*gi, central_diff(eval, &flat, i, FD_STEP)));
                }
                checked += 1;
            }
        }
    }
    report("MLP backprop gradients", worst, FD_REL_TOL, "")
}

/// True when a hidden pre-activation is within finite-difference reach of the ReLU kink.
pub fn near_kink(params: &ScorerParams, pair: &PreferencePair) -> bool {
    [pair.y_w, pair.y_l].iter().any(|&y| {
        (0..params.hidden()).any(|j| {
            let pre = params.w1[j][0] * pair.x + params.w1[j][1] * y + params.b1[j];
            pre.abs() < 1e-4
        })
    })
}

pub fn icc_boundaries() -> CheckReport {
    let between: Vec<ScoredPair> = (0..10)
        .map(|i| {
            let b = (i as f64 * 0.731).sin();
            ScoredPair {
                x: i as f64,
                r_w: b,
                r_l: b,
            }
        })
        .collect();
    let within: Vec<ScoredPair> = (0..10)
        .map(|i| {
            let c = 0.1 + sigmoid(i as f64);
            ScoredPair {
                x: i as f64,
                r_w: c,
                r_l: -c,
            }
        })
        .collect();
    let hi = icc1(&between).unwrap_or(f64::NAN);
    let lo = icc1(&within).unwrap_or(f64::NAN);
    CheckReport {
        name: "ICC1 boundaries",
        passed: hi == 1.0 && lo == -1.0,
        detail: format!("between-only {hi}, within-only {lo}"),
    }
}

/// Runs every check with a fixed seed.
pub fn run_all() -> Vec<CheckReport> {
    let mut rng = SplitMix64::new(0x7E51_F1ED);
    let checks: [fn(&mut SplitMix64) -> CheckReport; 8] = [
        |_| odds_lemmas(),
        asft_decomposition,
        orpo_asft_relation,
        beta_one_recovery,
        scalar_gradients,
        policy_gradients,
        mlp_gradients,
        |_| icc_boundaries(),
    ];
    checks
        .into_iter()
        .map(|check| {
            let start = Instant::now();
            let mut r = check(&mut rng);
            r.detail
                .push_str(&format!(" [{:.2}s]", start.elapsed().as_secs_f64()));
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for r in run_all() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
