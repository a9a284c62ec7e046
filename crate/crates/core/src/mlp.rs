//! The 2→h→1 ReLU scorer `r(x, y) = w2·relu(W1·[x, y] + b1) + b2`, its
//! backward pass, and a full-batch gradient-descent trainer.

use std::fmt::Write as _;

use crate::bias_lab::{PreferencePair, ToyDataset};
use crate::error::{ensure_finite, Error, Result};
use crate::metrics::{accuracy, ScoredPair};
use crate::objectives::{LossGrad, ObjectiveSpec, ScorePair};
use crate::rng::SplitMix64;

pub const MAX_HIDDEN: usize = 64;
const FORMAT_HEADER: &str = "scorer-params v1";

/// Scorer parameters. Also used to hold gradients of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerParams {
    /// h×2, row-major.
    pub w1: Vec<[f64; 2]>,
    pub b1: Vec<f64>,
    /// 1×h.
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl ScorerParams {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            w1: vec![[0.0; 2]; hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    pub fn hidden(&self) -> usize {
        self.b1.len()
    }

    /// Number of scalar parameters, `4h + 1`.
    pub fn n_params(&self) -> usize {
        4 * self.hidden() + 1
    }

    /// Flattened view in the order w1 (row-major), b1, w2, b2.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend(self.w1.iter().flatten());
        v.extend(&self.b1);
        v.extend(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn from_slice(hidden: usize, v: &[f64]) -> Result<Self> {
        if v.len() != 4 * hidden + 1 {
            return Err(Error::Config(format!(
                "expected {} parameters for hidden = {hidden}, got {}",
                4 * hidden + 1,
                v.len()
            )));
        }
        let h = hidden;
        Ok(Self {
            w1: (0..h).map(|j| [v[2 * j], v[2 * j + 1]]).collect(),
            b1: v[2 * h..3 * h].to_vec(),
            w2: v[3 * h..4 * h].to_vec(),
            b2: v[4 * h],
        })
    }

    pub fn is_finite(&self) -> bool {
        self.w1.iter().flatten().all(|v| v.is_finite())
            && self.b1.iter().all(|v| v.is_finite())
            && self.w2.iter().all(|v| v.is_finite())
            && self.b2.is_finite()
    }

    /// `self += alpha · other`.
    pub fn axpy(&mut self, alpha: f64, other: &ScorerParams) {
        for (a, b) in self.w1.iter_mut().zip(&other.w1) {
            a[0] += alpha * b[0];
            a[1] += alpha * b[1];
        }
        for (a, b) in self.b1.iter_mut().zip(&other.b1) {
            *a += alpha * b;
        }
        for (a, b) in self.w2.iter_mut().zip(&other.w2) {
            *a += alpha * b;
        }
        self.b2 += alpha * other.b2;
    }

    pub fn norm(&self) -> f64 {
        self.to_vec().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Versioned plain-text dump; floats use shortest round-trip formatting.
    pub fn to_text(&self) -> String {
        let mut out = format!("{FORMAT_HEADER}\nhidden {}\n", self.hidden());
        let line = |name: &str, vals: &mut dyn Iterator<Item = f64>| {
            let body: Vec<String> = vals.map(|v| format!("{v:?}")).collect();
            format!("{name} {}\n", body.join(" "))
        };
        out.push_str(&line("w1", &mut self.w1.iter().flatten().copied()));
        out.push_str(&line("b1", &mut self.b1.iter().copied()));
        out.push_str(&line("w2", &mut self.w2.iter().copied()));
        let _ = writeln!(out, "b2 {:?}", self.b2);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some(FORMAT_HEADER) {
            return Err(Error::Parse(format!("missing `{FORMAT_HEADER}` header")));
        }
        let mut field = |name: &str| -> Result<Vec<f64>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing `{name}` line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(Error::Parse(format!("expected `{name}` line, got `{line}`")));
            }
            parts
                .map(|p| {
                    p.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad number `{p}`")))
                })
                .collect()
        };
        let hidden = match field("hidden")?.as_slice() {
            [h] if *h >= 1.0 && h.fract() == 0.0 => *h as usize,
            _ => return Err(Error::Parse("bad hidden size".into())),
        };
        let mut flat = field("w1")?;
        flat.extend(field("b1")?);
        flat.extend(field("w2")?);
        flat.extend(field("b2")?);
        Self::from_slice(hidden, &flat).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn check_hidden(hidden: usize) -> Result<()> {
    if (1..=MAX_HIDDEN).contains(&hidden) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "hidden size must lie in 1..={MAX_HIDDEN}, got {hidden}"
        )))
    }
}

/// Glorot-uniform weights `U(−a, a)`, `a = sqrt(6 / (fan_in + fan_out))`; zero biases.
pub fn init(hidden: usize, seed: u64) -> Result<ScorerParams> {
    check_hidden(hidden)?;
    let mut rng = SplitMix64::new(seed);
    let a1 = (6.0 / (2 + hidden) as f64).sqrt();
    let a2 = (6.0 / (hidden + 1) as f64).sqrt();
    let mut p = ScorerParams::zeros(hidden);
    for row in p.w1.iter_mut() {
        row[0] = rng.uniform(-a1, a1);
        row[1] = rng.uniform(-a1, a1);
    }
    for w in p.w2.iter_mut() {
        *w = rng.uniform(-a2, a2);
    }
    Ok(p)
}

#[inline]
fn score(p: &ScorerParams, x: f64, y: f64) -> f64 {
    let mut out = p.b2;
    for j in 0..p.b1.len() {
        let pre = p.w1[j][0] * x + p.w1[j][1] * y + p.b1[j];
        if pre > 0.0 {
            out += p.w2[j] * pre;
        }
    }
    out
}

pub fn forward(params: &ScorerParams, x: f64, y: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    ensure_finite("y", y)?;
    Ok(score(params, x, y))
}

/// Accumulates `coef · ∂r(x, y)/∂θ` into `grad`. ReLU′(0) is taken as 0.
#[inline]
fn accumulate_branch(p: &ScorerParams, x: f64, y: f64, coef: f64, grad: &mut ScorerParams) {
    for j in 0..p.b1.len() {
        let pre = p.w1[j][0] * x + p.w1[j][1] * y + p.b1[j];
        if pre > 0.0 {
            grad.w2[j] += coef * pre;
            let back = coef * p.w2[j];
            grad.w1[j][0] += back * x;
            grad.w1[j][1] += back * y;
            grad.b1[j] += back;
        }
    }
    grad.b2 += coef;
}

/// Gradient of `coef · r(x, y)` with respect to every parameter.
pub fn score_grad(params: &ScorerParams, x: f64, y: f64) -> ScorerParams {
    let mut g = ScorerParams::zeros(params.hidden());
    accumulate_branch(params, x, y, 1.0, &mut g);
    g
}

/// Loss of one preference pair with `r_w = r(x, y_w)`, `r_l = r(x, y_l)`,
/// and its gradient: the sum of the two branch gradients weighted by
/// `∂L/∂r_w` and `∂L/∂r_l`.
pub fn backward(
    params: &ScorerParams,
    pair: &PreferencePair,
    objective: &ObjectiveSpec,
) -> Result<(LossGrad, ScorerParams)> {
    let mut grad = ScorerParams::zeros(params.hidden());
    let lg = backward_into(params, pair, objective, 1.0, &mut grad)?;
    Ok((lg, grad))
}

fn backward_into(
    params: &ScorerParams,
    pair: &PreferencePair,
    objective: &ObjectiveSpec,
    weight: f64,
    grad: &mut ScorerParams,
) -> Result<LossGrad> {
    ensure_finite("x", pair.x)?;
    ensure_finite("y_w", pair.y_w)?;
    ensure_finite("y_l", pair.y_l)?;
    let s = ScorePair::new(score(params, pair.x, pair.y_w), score(params, pair.x, pair.y_l));
    let lg = objective.scalar_loss(s)?;
    accumulate_branch(params, pair.x, pair.y_w, weight * lg.d_r_w, grad);
    accumulate_branch(params, pair.x, pair.y_l, weight * lg.d_r_l, grad);
    Ok(lg)
}

/// Mean loss over `pairs` and its gradient.
pub fn batch_loss(
    params: &ScorerParams,
    pairs: &[PreferencePair],
    objective: &ObjectiveSpec,
) -> Result<(f64, ScorerParams)> {
    if pairs.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    let w = 1.0 / pairs.len() as f64;
    let mut grad = ScorerParams::zeros(params.hidden());
    let mut total = 0.0;
    for p in pairs {
        total += backward_into(params, p, objective, w, &mut grad)?.value;
    }
    Ok((total * w, grad))
}

/// Scores both responses of every pair.
pub fn score_pairs(params: &ScorerParams, pairs: &[PreferencePair]) -> Vec<ScoredPair> {
    pairs
        .iter()
        .map(|p| ScoredPair {
            x: p.x,
            r_w: score(params, p.x, p.y_w),
            r_l: score(params, p.x, p.y_l),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub objective: ObjectiveSpec,
    pub lr: f64,
    pub epochs: usize,
    /// Seeds scorer initialization when the caller builds parameters via
    /// [`TrainConfig::init_params`]; the descent itself is deterministic.
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(objective: ObjectiveSpec, lr: f64) -> Self {
        Self {
            objective,
            lr,
            epochs: 100,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        if !self.objective.kind.is_pair_score_loss() {
            return Err(Error::Config(format!(
                "{} cannot train a scalar scorer",
                self.objective.kind
            )));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be >= 0, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        Ok(())
    }

    pub fn init_params(&self, hidden: usize) -> Result<ScorerParams> {
        init(hidden, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss at the parameters the step was taken from.
    pub train_loss: f64,
    /// Test accuracy after the step; `None` without a test split.
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ScorerParams,
    pub history: Vec<EpochRecord>,
    /// Set when the loss or the parameters became non-finite; training
    /// stops at that epoch and `params` holds the last finite iterate.
    pub diverged: bool,
}

impl TrainOutcome {
    pub fn final_train_loss(&self) -> Option<f64> {
        self.history.last().map(|r| r.train_loss)
    }
}

/// Full-batch gradient descent on the mean pair loss for `config.epochs` steps.
pub fn train(params: ScorerParams, dataset: &ToyDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.train.is_empty() {
        return Err(Error::Domain("training split is empty".into()));
    }
    let mut params = params;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss, grad) = batch_loss(&params, &dataset.train, &config.objective)?;
        if !loss.is_finite() || !grad.is_finite() {
            history.push(EpochRecord {
                epoch,
                train_loss: loss,
                test_accuracy: None,
            });
            return Ok(TrainOutcome {
                params,
                history,
                diverged: true,
            });
        }
        let mut next = params.clone();
        next.axpy(-config.lr, &grad);
        if !next.is_finite() {
            history.push(EpochRecord {
                epoch,
                train_loss: loss,
                test_accuracy: None,
            });
            return Ok(TrainOutcome {
                params,
                history,
                diverged: true,
            });
        }
        params = next;
        let test_accuracy = if dataset.test.is_empty() {
            None
        } else {
            Some(accuracy(&score_pairs(&params, &dataset.test))?)
        };
        history.push(EpochRecord {
            epoch,
            train_loss: loss,
            test_accuracy,
        });
    }
    Ok(TrainOutcome {
        params,
        history,
        diverged: false,
    })
}
