//! Loss values against constants evaluated at 40 significant digits.

use daa_core::objectives::{
    apo_zero_loss, asft_align_loss, cal_dpo_loss, dpo_loss, ipo_loss, nca_loss, odds_from_prob,
    orpo_align_loss, sft_loss, simpo_loss, single_stage_loss, tempered_align_grad,
};
use daa_core::toy_policy::TabularPolicy;
use daa_core::{ObjectiveKind, ScorePair};

const LN2: f64 = std::f64::consts::LN_2;

fn close(got: f64, want: f64, tol: f64) {
    assert!((got - want).abs() <= tol, "got {got:.17}, want {want:.17}");
}

#[test]
fn dpo_oracle() {
    // −log σ(2 · (0.7 − 0.2))
    let v = dpo_loss(ScorePair::new(0.7, 0.2), 2.0).unwrap().value;
    close(v, 0.313_261_687_518_222_8, 1e-15);
}

#[test]
fn ipo_oracle() {
    let v = ipo_loss(ScorePair::new(0.5, 0.2), 1.0).unwrap().value;
    close(v, 0.04, 1e-15);
}

#[test]
fn simpo_oracle() {
    let v = simpo_loss(-0.5, -1.0, 2.0, 0.5).unwrap().value;
    close(v, 0.474_076_984_180_106_7, 1e-15);
}

#[test]
fn asft_align_oracle() {
    let v = asft_align_loss(ScorePair::new(1.2, -0.4), 0.5).unwrap().value;
    close(v, 1.035_626_819_867_477_4, 1e-15);
}

#[test]
fn orpo_align_oracle() {
    let v = orpo_align_loss(ScorePair::new(2.0, 1.0), 1.0).unwrap().value;
    close(v, 0.313_261_687_518_222_8, 1e-15);
}

#[test]
fn nca_oracle() {
    let v = nca_loss(ScorePair::new(0.8, -0.3), 1.0).unwrap().value;
    close(v, 1.233_828_621_155_930_2, 1e-15);
}

#[test]
fn cal_dpo_oracle() {
    let v = cal_dpo_loss(ScorePair::new(0.2, 0.1), 1.0).unwrap().value;
    close(v, 1.094_396_660_073_570_8, 1e-15);
    let anchored = cal_dpo_loss(ScorePair::new(1.0, -1.0), 0.5).unwrap().value;
    close(anchored, 0.126_928_011_042_972_5, 1e-15);
    close(
        cal_dpo_loss(ScorePair::new(0.0, 0.0), 0.5).unwrap().value,
        LN2 + 2.0,
        1e-15,
    );
}

#[test]
fn apo_zero_limits() {
    assert_eq!(apo_zero_loss(ScorePair::new(0.5, 0.5), 3.0).unwrap().value, 0.0);
    close(
        apo_zero_loss(ScorePair::new(40.0, -40.0), 1.0).unwrap().value,
        -1.0,
        1e-15,
    );
}

#[test]
fn sft_and_odds_values() {
    close(sft_loss(-1.5).unwrap().value, 1.5, 0.0);
    close(sft_loss(-LN2).unwrap().value, LN2, 0.0);
    close(odds_from_prob(0.9).unwrap(), 2.197_224_577_336_219_6, 1e-14);
    assert_eq!(odds_from_prob(0.5).unwrap(), 0.0);
}

#[test]
fn single_stage_substitution() {
    let asft = single_stage_loss(ObjectiveKind::AsftSingle, 0.5, 0.5, 1.0)
        .unwrap()
        .value;
    let orpo = single_stage_loss(ObjectiveKind::OrpoSingle, 0.5, 0.5, 1.0)
        .unwrap()
        .value;
    close(asft, 3.0 * LN2, 1e-15);
    close(orpo, 2.0 * LN2, 1e-15);
}

#[test]
fn tempered_coefficients_small_beta() {
    let beta = 1e-8;
    let g = tempered_align_grad(ObjectiveKind::AsftAlign, ScorePair::new(0.4, -0.9), beta).unwrap();
    close(g.d_r_w / beta, -0.5, 1e-7);
    close(g.d_r_l / beta, 0.5, 1e-7);
}

#[test]
fn log_prob_matches_softmax_oracle() {
    let logits = vec![0.3, -1.1, 2.4, 0.05, -0.6];
    let p = TabularPolicy::from_logits(vec![logits.clone()], vec![1, 2, 3, 1, 4]).unwrap();
    let z: f64 = logits.iter().map(|l| l.exp()).sum();
    for (y, l) in logits.iter().enumerate() {
        close(p.log_prob(0, y, false).unwrap(), (l.exp() / z).ln(), 1e-12);
    }
}
