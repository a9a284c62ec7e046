//! Tabular categorical policies over a fixed response set.
//!
//! A [`TabularPolicy`] holds one logit row per prompt. Response `y` of prompt
//! `x` has probability `softmax(row_x)[y]` and a declared token length `|y|`;
//! the length-normalized log-probability is `log π(y|x) / |y|`. This is
//! enough to evaluate every sequence-level objective with exact gradients.

use std::fmt::Write as _;

use crate::error::{ensure_finite, Error, Result};
use crate::numeric::log_sum_exp;
use crate::objectives::{self, LossGrad, ObjectiveKind, ObjectiveSpec, ScorePair, ODDS_PROB_MARGIN};

pub const DEFAULT_RESPONSES: usize = 4;
const FORMAT_HEADER: &str = "tabular-policy v1";

#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    logits: Vec<Vec<f64>>,
    lengths: Vec<u32>,
}

/// Required length normalization for an objective kind.
///
/// Normalized: SimPO, ORPO, ASFT. Unnormalized: DPO, IPO, NCA, Cal-DPO,
/// APO-Zero. SFT accepts either.
pub fn required_normalization(kind: ObjectiveKind) -> Option<bool> {
    use ObjectiveKind::*;
    match kind {
        SimPo | OrpoAlign | AsftAlign | OrpoSingle | AsftSingle => Some(true),
        Dpo | Ipo | Nca | CalDpo | ApoZero => Some(false),
        Sft => None,
    }
}

/// Loss value and its gradient with respect to every logit of one prompt row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowLossGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl TabularPolicy {
    /// All-zero logits (uniform rows).
    pub fn uniform(n_prompts: usize, lengths: Vec<u32>) -> Result<Self> {
        let k = lengths.len();
        Self::from_logits(vec![vec![0.0; k]; n_prompts], lengths)
    }

    pub fn from_logits(logits: Vec<Vec<f64>>, lengths: Vec<u32>) -> Result<Self> {
        if lengths.len() < 2 {
            return Err(Error::Config("a policy needs at least two responses".into()));
        }
        if lengths.contains(&0) {
            return Err(Error::Config("response lengths must be >= 1".into()));
        }
        for (x, row) in logits.iter().enumerate() {
            if row.len() != lengths.len() {
                return Err(Error::Config(format!(
                    "prompt {x} has {} logits, expected {}",
                    row.len(),
                    lengths.len()
                )));
            }
            for &v in row {
                ensure_finite("logit", v)?;
            }
        }
        Ok(Self { logits, lengths })
    }

    pub fn n_prompts(&self) -> usize {
        self.logits.len()
    }

    pub fn n_responses(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[u32] {
        &self.lengths
    }

    pub fn row(&self, x: usize) -> Result<&[f64]> {
        self.logits
            .get(x)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Lookup(format!("unknown prompt id {x}")))
    }

    pub fn row_mut(&mut self, x: usize) -> Result<&mut [f64]> {
        self.logits
            .get_mut(x)
            .map(Vec::as_mut_slice)
            .ok_or_else(|| Error::Lookup(format!("unknown prompt id {x}")))
    }

    /// Deep copy used as the frozen reference policy.
    pub fn freeze(&self) -> TabularPolicy {
        self.clone()
    }

    fn check_response(&self, y: usize) -> Result<()> {
        if y < self.lengths.len() {
            Ok(())
        } else {
            Err(Error::Lookup(format!("unknown response id {y}")))
        }
    }

    /// Softmax of row `x`.
    pub fn probs(&self, x: usize) -> Result<Vec<f64>> {
        let row = self.row(x)?;
        let lse = log_sum_exp(row);
        Ok(row.iter().map(|v| (v - lse).exp()).collect())
    }

    /// `log π(y|x)`, divided by `|y|` when `normalize` is set.
    pub fn log_prob(&self, x: usize, y: usize, normalize: bool) -> Result<f64> {
        let row = self.row(x)?;
        self.check_response(y)?;
        let lp = row[y] - log_sum_exp(row);
        Ok(if normalize {
            lp / self.lengths[y] as f64
        } else {
            lp
        })
    }

    /// Gradient of `log_prob(x, y, normalize)` with respect to row `x`.
    fn log_prob_grad(&self, x: usize, y: usize, normalize: bool) -> Result<Vec<f64>> {
        let scale = if normalize {
            1.0 / self.lengths[y] as f64
        } else {
            1.0
        };
        let mut g = self.probs(x)?;
        for v in g.iter_mut() {
            *v = -*v * scale;
        }
        g[y] += scale;
        Ok(g)
    }

    /// Serializes to the versioned plain-text table
    /// `prompt<TAB>response<TAB>logit<TAB>length`.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{FORMAT_HEADER}\nprompts {} responses {}\n",
            self.n_prompts(),
            self.n_responses()
        );
        for (x, row) in self.logits.iter().enumerate() {
            for (y, v) in row.iter().enumerate() {
                let _ = writeln!(out, "{x}\t{y}\t{v:?}\t{}", self.lengths[y]);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(FORMAT_HEADER) {
            return Err(Error::Parse(format!("missing `{FORMAT_HEADER}` header")));
        }
        let dims: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Parse("missing dimensions line".into()))?
            .split_whitespace()
            .collect();
        let (n_prompts, n_responses) = match dims.as_slice() {
            ["prompts", p, "responses", r] => (parse_field::<usize>(p)?, parse_field::<usize>(r)?),
            _ => return Err(Error::Parse("malformed dimensions line".into())),
        };
        let mut logits = vec![vec![f64::NAN; n_responses]; n_prompts];
        let mut lengths = vec![0u32; n_responses];
        let mut seen = 0usize;
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::Parse(format!("expected 4 columns: `{line}`")));
            }
            let x: usize = parse_field(cols[0])?;
            let y: usize = parse_field(cols[1])?;
            if x >= n_prompts || y >= n_responses {
                return Err(Error::Parse(format!("id out of range: `{line}`")));
            }
            logits[x][y] = parse_field(cols[2])?;
            let len: u32 = parse_field(cols[3])?;
            if lengths[y] != 0 && lengths[y] != len {
                return Err(Error::Parse(format!("inconsistent length for response {y}")));
            }
            lengths[y] = len;
            seen += 1;
        }
        if seen != n_prompts * n_responses {
            return Err(Error::Parse(format!(
                "expected {} entries, found {seen}",
                n_prompts * n_responses
            )));
        }
        Self::from_logits(logits, lengths)
    }
}

fn parse_field<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("cannot parse `{s}`")))
}

/// `log π_θ(y|x) − log π_ref(y|x)` under the given normalization.
pub fn ref_ratio_score(
    policy: &TabularPolicy,
    reference: &TabularPolicy,
    x: usize,
    y: usize,
    normalize: bool,
) -> Result<f64> {
    if policy.lengths != reference.lengths {
        return Err(Error::Config(
            "policy and reference disagree on the response set".into(),
        ));
    }
    Ok(policy.log_prob(x, y, normalize)? - reference.log_prob(x, y, normalize)?)
}

/// Log-odds of the (possibly length-normalized) probability of `y`.
pub fn odds_ratio_score(policy: &TabularPolicy, x: usize, y: usize, normalize: bool) -> Result<f64> {
    let lp = policy.log_prob(x, y, normalize)?;
    odds_from_log_prob(lp)
}

/// `lp − log(1 − e^{lp})`, rejecting probabilities at the boundary.
fn odds_from_log_prob(lp: f64) -> Result<f64> {
    let p = lp.exp();
    if !(p > ODDS_PROB_MARGIN && p < 1.0 - ODDS_PROB_MARGIN) {
        return Err(Error::Domain(format!("probability {p} has no finite odds score")));
    }
    Ok(lp - (-lp.exp_m1()).ln())
}

/// Loss of `objective` on prompt `x` with responses `y_w` ≻ `y_l`, and its
/// exact gradient with respect to the logits of row `x`.
///
/// `normalize` must agree with [`required_normalization`]. The reference is
/// consulted only by the reference-ratio kinds.
pub fn pair_loss(
    objective: &ObjectiveSpec,
    policy: &TabularPolicy,
    reference: &TabularPolicy,
    x: usize,
    y_w: usize,
    y_l: usize,
    normalize: bool,
) -> Result<RowLossGrad> {
    objective.validate()?;
    if let Some(required) = required_normalization(objective.kind) {
        if required != normalize {
            return Err(Error::Config(format!(
                "{} requires normalize = {required}",
                objective.kind
            )));
        }
    }
    policy.check_response(y_w)?;
    policy.check_response(y_l)?;
    if y_w == y_l {
        return Err(Error::Config("chosen and rejected responses must differ".into()));
    }

    let lp_w = policy.log_prob(x, y_w, normalize)?;
    let lp_l = policy.log_prob(x, y_l, normalize)?;
    let g_w = policy.log_prob_grad(x, y_w, normalize)?;
    let g_l = policy.log_prob_grad(x, y_l, normalize)?;

    // (loss, dL/dlp_w, dL/dlp_l)
    let (value, c_w, c_l) = match objective.kind {
        ObjectiveKind::Dpo
        | ObjectiveKind::Ipo
        | ObjectiveKind::Nca
        | ObjectiveKind::CalDpo
        | ObjectiveKind::ApoZero => {
            let s = ScorePair::new(
                ref_ratio_score(policy, reference, x, y_w, normalize)?,
                ref_ratio_score(policy, reference, x, y_l, normalize)?,
            );
            let lg = objective.scalar_loss(s)?;
            (lg.value, lg.d_r_w, lg.d_r_l)
        }
        ObjectiveKind::SimPo => {
            let lg = objectives::simpo_loss(lp_w, lp_l, objective.beta, objective.gamma)?;
            (lg.value, lg.d_r_w, lg.d_r_l)
        }
        ObjectiveKind::OrpoAlign | ObjectiveKind::AsftAlign => {
            let s = ScorePair::new(odds_from_log_prob(lp_w)?, odds_from_log_prob(lp_l)?);
            let lg = objective.scalar_loss(s)?;
            // d r_odds / d lp = 1 / (1 − π)
            let jw = 1.0 / -lp_w.exp_m1();
            let jl = 1.0 / -lp_l.exp_m1();
            (lg.value, lg.d_r_w * jw, lg.d_r_l * jl)
        }
        ObjectiveKind::Sft => {
            let lg = objectives::sft_loss(lp_w)?;
            (lg.value, lg.d_r_w, 0.0)
        }
        ObjectiveKind::OrpoSingle | ObjectiveKind::AsftSingle => {
            let (pw, pl) = (lp_w.exp(), lp_l.exp());
            let lg: LossGrad = objectives::single_stage_loss(objective.kind, pw, pl, objective.lambda)?;
            // dπ / dlp = π
            (lg.value, lg.d_r_w * pw, lg.d_r_l * pl)
        }
    };

    let grad = g_w.iter().zip(&g_l).map(|(a, b)| c_w * a + c_l * b).collect();
    Ok(RowLossGrad { value, grad })
}

/// One gradient-descent step on row `x` of `policy`.
pub fn descent_step(
    objective: &ObjectiveSpec,
    policy: &mut TabularPolicy,
    reference: &TabularPolicy,
    x: usize,
    y_w: usize,
    y_l: usize,
    lr: f64,
) -> Result<f64> {
    let normalize = required_normalization(objective.kind).unwrap_or(false);
    let lg = pair_loss(objective, policy, reference, x, y_w, y_l, normalize)?;
    for (v, g) in policy.row_mut(x)?.iter_mut().zip(&lg.grad) {
        *v -= lr * g;
    }
    Ok(lg.value)
}
