//! Overflow-safe logistic helpers.
//!
//! Scaled scores `β·r` reach ±10³ during sweeps, so every log-sigmoid goes
//! through the branch below instead of `ln(1 / (1 + e^{-z}))`.

/// Logistic function σ(z) = 1 / (1 + e^{-z}).
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log σ(z), computed as −log1p(e^{−z}) for z ≥ 0 and z − log1p(e^{z}) otherwise.
#[inline]
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Log-odds of a probability: log π − log(1 − π).
#[inline]
pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// Numerically stable log Σ exp(v).
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}
