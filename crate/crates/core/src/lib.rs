//! Direct alignment objectives and the prompt-bias toy experiment.
//!
//! * [`objectives`]: closed-form losses over scalar scores (DPO, IPO, SimPO,
//!   NCA, Cal-DPO, APO-Zero, tempered ORPO/ASFT, SFT, single-stage ORPO/ASFT)
//!   with analytic partials.
//! * [`toy_policy`]: tabular categorical policies that realize sequence
//!   probabilities, length normalization, `r_ref` and `r_odds`.
//! * [`bias_lab`]: synthetic preference pairs with injected prompt bias.
//! * [`mlp`]: the 2→h→1 ReLU scorer and its full-batch trainer.
//! * [`metrics`]: accuracy, ICC₁ and cross-run aggregates.
//! * [`harness`]: learning-rate search, sweeps, CSV output.

pub mod bias_lab;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod mlp;
pub mod numeric;
pub mod objectives;
pub mod rng;
pub mod toy_policy;
pub mod verify;

pub use error::{Error, Result};
pub use objectives::{LossGrad, ObjectiveKind, ObjectiveSpec, ScorePair};
