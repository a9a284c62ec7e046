//! Direct alignment objectives over scalar scores.
//!
//! Every loss returns a [`LossGrad`]: the value together with its exact
//! partial derivatives with respect to the chosen and rejected scores. The
//! scores are whatever the caller binds them to: `r_ref` (policy/reference
//! log-ratio), `r_odds` (log-odds of the policy probability), a
//! length-normalized log-probability (SimPO), or the raw output of a scalar
//! scorer as in the toy experiment.
//!
//! ```text
//! DPO        -log σ(β(r_w - r_l))
//! IPO        (r_w - r_l - 1/(2β))²
//! SimPO      -log σ(β·lp_w - β·lp_l - γ)
//! ORPO-align -log σ(β r_w - β r_l)                       (odds scores)
//! ASFT-align -log σ(β r_w) - log σ(-β r_l)               (odds scores)
//! NCA        -log σ(β r_w) - ½ log σ(-β r_w) - ½ log σ(-β r_l)
//! Cal-DPO    -log σ(r_w - r_l) + (r_w - 1/(2β))² + (r_l + 1/(2β))²
//! APO-Zero   -σ(β r_w) + σ(β r_l)
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::numeric::{log_sigmoid, logit, sigmoid};

/// Probabilities closer than this to 0 or 1 have no usable odds score.
pub const ODDS_PROB_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    Dpo,
    Ipo,
    #[serde(rename = "simpo")]
    SimPo,
    OrpoAlign,
    AsftAlign,
    Nca,
    #[serde(rename = "cal-dpo")]
    CalDpo,
    #[serde(rename = "apo-zero")]
    ApoZero,
    Sft,
    OrpoSingle,
    AsftSingle,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 11] = [
        ObjectiveKind::Dpo,
        ObjectiveKind::Ipo,
        ObjectiveKind::SimPo,
        ObjectiveKind::OrpoAlign,
        ObjectiveKind::AsftAlign,
        ObjectiveKind::Nca,
        ObjectiveKind::CalDpo,
        ObjectiveKind::ApoZero,
        ObjectiveKind::Sft,
        ObjectiveKind::OrpoSingle,
        ObjectiveKind::AsftSingle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::Dpo => "dpo",
            ObjectiveKind::Ipo => "ipo",
            ObjectiveKind::SimPo => "simpo",
            ObjectiveKind::OrpoAlign => "orpo-align",
            ObjectiveKind::AsftAlign => "asft-align",
            ObjectiveKind::Nca => "nca",
            ObjectiveKind::CalDpo => "cal-dpo",
            ObjectiveKind::ApoZero => "apo-zero",
            ObjectiveKind::Sft => "sft",
            ObjectiveKind::OrpoSingle => "orpo-single",
            ObjectiveKind::AsftSingle => "asft-single",
        }
    }

    pub fn ranking_class(self) -> RankingClass {
        use ObjectiveKind::*;
        match self {
            Dpo | Ipo | SimPo | OrpoAlign | OrpoSingle => RankingClass::Pairwise,
            Nca | CalDpo | ApoZero | AsftAlign | AsftSingle => RankingClass::Pointwise,
            Sft => RankingClass::NotApplicable,
        }
    }

    pub fn score_class(self) -> ScoreClass {
        use ObjectiveKind::*;
        match self {
            Dpo | Ipo | Nca | CalDpo | ApoZero => ScoreClass::RefRatio,
            OrpoAlign | AsftAlign | OrpoSingle | AsftSingle => ScoreClass::OddsRatio,
            SimPo | Sft => ScoreClass::RawLogprob,
        }
    }

    /// Whether the kind scores a (chosen, rejected) pair of scalars directly,
    /// i.e. can drive the scalar scorer of the toy experiment.
    pub fn is_pair_score_loss(self) -> bool {
        !matches!(
            self,
            ObjectiveKind::Sft | ObjectiveKind::OrpoSingle | ObjectiveKind::AsftSingle
        )
    }

    pub fn is_single_stage(self) -> bool {
        matches!(self, ObjectiveKind::OrpoSingle | ObjectiveKind::AsftSingle)
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        let alias = match key.as_str() {
            "asft" => "asft-align",
            "orpo" => "orpo-align",
            "caldpo" => "cal-dpo",
            "apozero" | "apo" => "apo-zero",
            other => other,
        };
        ObjectiveKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == alias)
            .ok_or_else(|| Error::Config(format!("unknown objective `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RankingClass {
    Pairwise,
    Pointwise,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreClass {
    RefRatio,
    OddsRatio,
    RawLogprob,
}

/// A loss together with its hyperparameters.
///
/// `gamma` only affects SimPO and `lambda` only the single-stage kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub lambda: f64,
}

fn default_beta() -> f64 {
    1.0
}

impl ObjectiveSpec {
    /// Spec with β = 1, γ = 0, λ = 0.
    pub fn new(kind: ObjectiveKind) -> Self {
        Self {
            kind,
            beta: 1.0,
            gamma: 0.0,
            lambda: 0.0,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn ranking_class(&self) -> RankingClass {
        self.kind.ranking_class()
    }

    pub fn score_class(&self) -> ScoreClass {
        self.kind.score_class()
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != ObjectiveKind::Sft && !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!(
                "{}: beta must be positive and finite, got {}",
                self.kind, self.beta
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    /// Evaluates a pair-score loss on raw scalar scores.
    ///
    /// SimPO is evaluated as a margin loss without the log-probability sign
    /// check, since raw scorer outputs are unconstrained.
    pub fn scalar_loss(&self, s: ScorePair) -> Result<LossGrad> {
        let beta = self.beta;
        match self.kind {
            ObjectiveKind::Dpo => dpo_loss(s, beta),
            ObjectiveKind::Ipo => ipo_loss(s, beta),
            ObjectiveKind::SimPo => {
                check_pair(s)?;
                check_beta(beta)?;
                Ok(simpo_margin(s.r_w, s.r_l, beta, self.gamma))
            }
            ObjectiveKind::OrpoAlign => orpo_align_loss(s, beta),
            ObjectiveKind::AsftAlign => asft_align_loss(s, beta),
            ObjectiveKind::Nca => nca_loss(s, beta),
            ObjectiveKind::CalDpo => cal_dpo_loss(s, beta),
            ObjectiveKind::ApoZero => apo_zero_loss(s, beta),
            k => Err(Error::Config(format!("{k} is not a pair-score loss"))),
        }
    }
}

impl fmt::Display for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(beta={}", self.kind, self.beta)?;
        if self.kind == ObjectiveKind::SimPo {
            write!(f, ", gamma={}", self.gamma)?;
        }
        if self.kind.is_single_stage() {
            write!(f, ", lambda={}", self.lambda)?;
        }
        f.write_str(")")
    }
}

/// Scores of the chosen (`r_w`) and rejected (`r_l`) response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorePair {
    pub r_w: f64,
    pub r_l: f64,
}

impl ScorePair {
    pub fn new(r_w: f64, r_l: f64) -> Self {
        Self { r_w, r_l }
    }
}

/// Loss value and its partials with respect to the two inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub d_r_w: f64,
    pub d_r_l: f64,
}

fn check_pair(s: ScorePair) -> Result<()> {
    ensure_finite("r_w", s.r_w)?;
    ensure_finite("r_l", s.r_l)
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "beta must be positive and finite, got {beta}"
        )))
    }
}

/// −log σ(z) with d/dz.
#[inline]
fn neg_log_sigmoid(z: f64) -> (f64, f64) {
    (-log_sigmoid(z), -sigmoid(-z))
}

/// −log σ(z) of a score difference z = β r_w − β r_l.
#[inline]
fn logistic_pair(s: ScorePair, beta: f64, margin: f64) -> LossGrad {
    let (value, dz) = neg_log_sigmoid(beta * s.r_w - beta * s.r_l - margin);
    LossGrad {
        value,
        d_r_w: beta * dz,
        d_r_l: -beta * dz,
    }
}

pub fn dpo_loss(s: ScorePair, beta: f64) -> Result<LossGrad> {
    check_pair(s)?;
    check_beta(beta)?;
    Ok(logistic_pair(s, beta, 0.0))
}

pub fn ipo_loss(s: ScorePair, beta: f64) -> Result<LossGrad> {
    check_pair(s)?;
    check_beta(beta)?;
    let u = s.r_w - s.r_l - 1.0 / (2.0 * beta);
    Ok(LossGrad {
        value: u * u,
        d_r_w: 2.0 * u,
        d_r_l: -2.0 * u,
    })
}

fn simpo_margin(logp_w: f64, logp_l: f64, beta: f64, gamma: f64) -> LossGrad {
    logistic_pair(ScorePair::new(logp_w, logp_l), beta, gamma)
}

/// SimPO over length-normalized log-probabilities; partials are with respect
/// to `logp_w` and `logp_l`.
pub fn simpo_loss(logp_w: f64, logp_l: f64, beta: f64, gamma: f64) -> Result<LossGrad> {
    check_pair(ScorePair::new(logp_w, logp_l))?;
    check_beta(beta)?;
    ensure_finite("gamma", gamma)?;
    if logp_w > 0.0 || logp_l > 0.0 {
        return Err(Error::Domain(format!(
            "log-probabilities must be <= 0, got ({logp_w}, {logp_l})"
        )));
    }
    Ok(simpo_margin(logp_w, logp_l, beta, gamma))
}

/// Tempered ASFT alignment term on odds scores; β = 1 is vanilla ASFT.
pub fn asft_align_loss(s: ScorePair, beta: f64) -> Result<LossGrad> {
    check_pair(s)?;
    check_beta(beta)?;
    let (vw, dw) = neg_log_sigmoid(beta * s.r_w);
    let (vl, dl) = neg_log_sigmoid(-beta * s.r_l);
    Ok(LossGrad {
        value: vw + vl,
        d_r_w: beta * dw,
        d_r_l: -beta * dl,
    })
}

/// Tempered ORPO alignment term on odds scores; β = 1 is vanilla ORPO.
pub fn orpo_align_loss(s: ScorePair, beta: f64) -> Result<LossGrad> {
    check_pair(s)?;
    check_beta(beta)?;
    Ok(logistic_pair(s, beta, 0.0))
}

pub fn nca_loss(s: ScorePair, beta: f64) -> Result<LossGrad> {
    check_pair(s)?;
    check_beta(beta)?;
    let (a, da) = neg_log_sigmoid(beta * s.r_w);
    let (b, db) = neg_log_sigmoid(-beta * s.r_w);
    let (c, dc) = neg_log_sigmoid(-beta * s.r_l);
    Ok(LossGrad {
        value: a + 0.5 * b + 0.5 * c,
        d_r_w: beta * da - 0.5 * beta * db,
        d_r_l: -0.5 * beta * dc,
    })
}

/// Cal-DPO. The logistic term is unscaled; β only sets the calibration
/// anchors ±1/(2β).
pub fn cal_dpo_loss(s: ScorePair, beta: f64) -> Result<LossGrad> {
    check_pair(s)?;
    check_beta(beta)?;
    let anchor = 1.0 / (2.0 * beta);
    let (v, dz) = neg_log_sigmoid(s.r_w - s.r_l);
    let uw = s.r_w - anchor;
    let ul = s.r_l + anchor;
    Ok(LossGrad {
        value: v + uw * uw + ul * ul,
        d_r_w: dz + 2.0 * uw,
        d_r_l: -dz + 2.0 * ul,
    })
}

/// APO-Zero; the value lies in [−1, 1].
pub fn apo_zero_loss(s: ScorePair, beta: f64) -> Result<LossGrad> {
    check_pair(s)?;
    check_beta(beta)?;
    let sw = sigmoid(beta * s.r_w);
    let sl = sigmoid(beta * s.r_l);
    Ok(LossGrad {
        value: -sw + sl,
        d_r_w: -beta * sw * (1.0 - sw),
        d_r_l: beta * sl * (1.0 - sl),
    })
}

/// Negative log-likelihood of the chosen response. `d_r_l` is always zero.
pub fn sft_loss(logp_w: f64) -> Result<LossGrad> {
    ensure_finite("logp_w", logp_w)?;
    if logp_w > 0.0 {
        return Err(Error::Domain(format!(
            "log-probability must be <= 0, got {logp_w}"
        )));
    }
    Ok(LossGrad {
        value: -logp_w,
        d_r_w: -1.0,
        d_r_l: 0.0,
    })
}

/// Odds score `log π − log(1 − π)`.
pub fn odds_from_prob(p: f64) -> Result<f64> {
    if !(p > ODDS_PROB_MARGIN && p < 1.0 - ODDS_PROB_MARGIN) {
        return Err(Error::Domain(format!(
            "probability {p} is outside ({ODDS_PROB_MARGIN}, 1 - {ODDS_PROB_MARGIN})"
        )));
    }
    Ok(logit(p))
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in (0, 1), got {p}")))
    }
}

/// `log(π_w(1 − π_l) + π_l(1 − π_w))`, the term separating ORPO from ASFT.
/// Non-positive whenever `π_w + π_l ≤ 1`.
pub fn orpo_asft_gap(pi_w: f64, pi_l: f64) -> Result<f64> {
    check_prob("pi_w", pi_w)?;
    check_prob("pi_l", pi_l)?;
    Ok((pi_w * (1.0 - pi_l) + pi_l * (1.0 - pi_w)).ln())
}

/// Single-stage loss `−log π_w + λ·L_align(odds(π_w), odds(π_l))`.
///
/// The alignment term is evaluated through the odds scores at β = 1, not
/// through the closed-form decompositions, so those identities can be checked
/// against it. Partials are with respect to `pi_w` and `pi_l`.
///
/// `π_w + π_l ≤ 1` is not enforced: length-normalized probabilities can
/// exceed it, and only the ORPO ≤ ASFT ordering depends on it.
pub fn single_stage_loss(kind: ObjectiveKind, pi_w: f64, pi_l: f64, lambda: f64) -> Result<LossGrad> {
    check_prob("pi_w", pi_w)?;
    check_prob("pi_l", pi_l)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
    }
    let scores = ScorePair::new(odds_from_prob(pi_w)?, odds_from_prob(pi_l)?);
    let align = match kind {
        ObjectiveKind::OrpoSingle => orpo_align_loss(scores, 1.0)?,
        ObjectiveKind::AsftSingle => asft_align_loss(scores, 1.0)?,
        k => return Err(Error::Config(format!("{k} is not a single-stage kind"))),
    };
    // d r_odds / d π = 1 / (π(1 − π))
    let dw = 1.0 / (pi_w * (1.0 - pi_w));
    let dl = 1.0 / (pi_l * (1.0 - pi_l));
    Ok(LossGrad {
        value: -pi_w.ln() + lambda * align.value,
        d_r_w: -1.0 / pi_w + lambda * align.d_r_w * dw,
        d_r_l: lambda * align.d_r_l * dl,
    })
}

/// Gradient coefficients of the tempered odds-ratio alignment terms.
///
/// `d_r_w`/`d_r_l` multiply ∇r_odds(y_w) and ∇r_odds(y_l):
/// ASFT gives `−β(1 − σ(β r_w))` and `+β σ(β r_l)`; ORPO gives
/// `∓β(1 − σ(β(r_w − r_l)))`.
pub fn tempered_align_grad(kind: ObjectiveKind, s: ScorePair, beta: f64) -> Result<LossGrad> {
    match kind {
        ObjectiveKind::AsftAlign => asft_align_loss(s, beta),
        ObjectiveKind::OrpoAlign => orpo_align_loss(s, beta),
        k => Err(Error::Config(format!("{k} has no tempered odds-ratio form"))),
    }
}
