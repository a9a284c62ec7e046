use proptest::prelude::*;

use daa_core::metrics::{accuracy, icc1, ScoredPair};
use daa_core::objectives::{single_stage_loss, ObjectiveKind, ObjectiveSpec, ScorePair};
use daa_core::toy_policy::TabularPolicy;

const PAIRWISE: [ObjectiveKind; 3] = [ObjectiveKind::Dpo, ObjectiveKind::Ipo, ObjectiveKind::OrpoAlign];
const POINTWISE: [ObjectiveKind; 4] = [
    ObjectiveKind::AsftAlign,
    ObjectiveKind::Nca,
    ObjectiveKind::CalDpo,
    ObjectiveKind::ApoZero,
];

fn score() -> impl Strategy<Value = f64> {
    -4.0..4.0f64
}

fn scored_pairs(max: usize) -> impl Strategy<Value = Vec<ScoredPair>> {
    prop::collection::vec((score(), score(), score()), 3..max).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (b, a, c))| ScoredPair {
                x: i as f64,
                r_w: b + a,
                r_l: b + c,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn pairwise_losses_ignore_common_shift(rw in score(), rl in score(), c in -3.0..3.0f64, beta in 0.2..3.0f64) {
        for kind in PAIRWISE {
            let spec = ObjectiveSpec::new(kind).with_beta(beta);
            let a = spec.scalar_loss(ScorePair::new(rw, rl)).unwrap().value;
            let b = spec.scalar_loss(ScorePair::new(rw + c, rl + c)).unwrap().value;
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{kind}: {a} vs {b}");
        }
    }

    #[test]
    fn pointwise_losses_feel_common_shift(rw in score(), rl in score(), c in 0.5..3.0f64) {
        prop_assume!((rw - rl).abs() > 1e-3);
        for kind in POINTWISE {
            let spec = ObjectiveSpec::new(kind);
            let a = spec.scalar_loss(ScorePair::new(rw, rl)).unwrap().value;
            let b = spec.scalar_loss(ScorePair::new(rw + c, rl + c)).unwrap().value;
            prop_assert!((a - b).abs() > 1e-12, "{kind}: {a} vs {b}");
        }
    }

    #[test]
    fn losses_fall_with_chosen_and_rise_with_rejected(rw in -2.0..2.0f64, rl in -2.0..2.0f64) {
        for kind in [ObjectiveKind::Dpo, ObjectiveKind::AsftAlign, ObjectiveKind::ApoZero, ObjectiveKind::OrpoAlign] {
            let g = ObjectiveSpec::new(kind).scalar_loss(ScorePair::new(rw, rl)).unwrap();
            prop_assert!(g.d_r_w < 0.0 && g.d_r_l > 0.0, "{kind}: {g:?}");
        }
    }

    #[test]
    fn orpo_never_exceeds_asft_on_simplex(pw in 1e-6..0.999f64, frac in 1e-6..1.0f64, lambda in 0.0..2.0f64) {
        let pl = frac * (1.0 - pw);
        let a = single_stage_loss(ObjectiveKind::AsftSingle, pw, pl, lambda).unwrap().value;
        let o = single_stage_loss(ObjectiveKind::OrpoSingle, pw, pl, lambda).unwrap().value;
        prop_assert!(o <= a + 1e-12);
    }

    #[test]
    fn softmax_ignores_logit_shift(row in prop::collection::vec(-3.0..3.0f64, 2..6), c in -5.0..5.0f64) {
        let lengths = vec![1; row.len()];
        let shifted: Vec<f64> = row.iter().map(|v| v + c).collect();
        let p = TabularPolicy::from_logits(vec![row], lengths.clone()).unwrap();
        let q = TabularPolicy::from_logits(vec![shifted], lengths).unwrap();
        for (a, b) in p.probs(0).unwrap().iter().zip(q.probs(0).unwrap()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn icc_is_affine_invariant_and_bounded(pairs in scored_pairs(40), a in 0.1..5.0f64, sign in any::<bool>(), c in -10.0..10.0f64) {
        let a = if sign { a } else { -a };
        let base = icc1(&pairs).unwrap();
        prop_assert!((-1.0..=1.0).contains(&base));
        let moved: Vec<ScoredPair> = pairs
            .iter()
            .map(|p| ScoredPair { x: p.x, r_w: a * p.r_w + c, r_l: a * p.r_l + c })
            .collect();
        prop_assert!((icc1(&moved).unwrap() - base).abs() <= 1e-9);
    }

    #[test]
    fn accuracy_survives_monotone_maps(pairs in scored_pairs(40)) {
        let base = accuracy(&pairs).unwrap();
        let mapped: Vec<ScoredPair> = pairs
            .iter()
            .map(|p| ScoredPair { x: p.x, r_w: p.r_w.atan() * 3.0 + 1.0, r_l: p.r_l.atan() * 3.0 + 1.0 })
            .collect();
        prop_assert_eq!(accuracy(&mapped).unwrap(), base);
    }
}

#[test]
fn prompt_offsets_raise_icc() {
    let base: Vec<ScoredPair> = (0..40)
        .map(|i| {
            let d = if i % 2 == 0 { 0.7 } else { -0.7 };
            ScoredPair {
                x: i as f64,
                r_w: d,
                r_l: -d,
            }
        })
        .collect();
    let shifted: Vec<ScoredPair> = base
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let delta = if (i / 2) % 2 == 0 { 0.5 } else { -0.5 };
            ScoredPair {
                x: p.x,
                r_w: p.r_w + delta,
                r_l: p.r_l + delta,
            }
        })
        .collect();
    assert!(icc1(&shifted).unwrap() > icc1(&base).unwrap());
}
