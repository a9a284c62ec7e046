//! Alignment accuracy, the ICC₁ prompt-bias statistic, and cross-run aggregation.
//!
//! ICC₁ for two candidates per prompt:
//!
//! ```text
//! b̂(x)  = (r_w + r_l) / 2
//! ICC₁  = 2 · Var_x[b̂] / Var_{x,y}[r] − 1
//! ```
//!
//! Both variances are **population** variances (divide by the number of
//! values). With that convention `Var_total = Var_x[b̂] + E_x[((r_w − r_l)/2)²]`
//! holds exactly, which is what keeps ICC₁ inside [−1, 1]. Mixing in a sample
//! (n − 1) variance on either side breaks the bound.

use crate::error::{Error, Result};

/// CI half-width multiplier for a 95% normal interval.
pub const Z_95: f64 = 1.96;

/// Model scores of the chosen and rejected response for one prompt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    /// Prompt key; pairs are treated as one group each.
    pub x: f64,
    pub r_w: f64,
    pub r_l: f64,
}

/// Fraction of pairs with `r_w > r_l`; ties count as failures.
pub fn accuracy(pairs: &[ScoredPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Domain("accuracy of an empty list".into()));
    }
    let hits = pairs.iter().filter(|p| p.r_w > p.r_l).count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// One-way ICC₁ with k = 2 candidates per prompt.
pub fn icc1(pairs: &[ScoredPair]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::Domain(format!(
            "icc1 needs at least 2 prompts, got {}",
            pairs.len()
        )));
    }
    if pairs.iter().any(|p| !p.r_w.is_finite() || !p.r_l.is_finite()) {
        return Err(Error::Domain("icc1 requires finite scores".into()));
    }
    let n = pairs.len() as f64;

    let mean_b = pairs.iter().map(|p| (p.r_w + p.r_l) / 2.0).sum::<f64>() / n;
    let var_b = pairs
        .iter()
        .map(|p| ((p.r_w + p.r_l) / 2.0 - mean_b).powi(2))
        .sum::<f64>()
        / n;

    // Accumulated per pair so that r_w == r_l reproduces var_b bit for bit.
    let mean_r = pairs.iter().map(|p| p.r_w + p.r_l).sum::<f64>() / (2.0 * n);
    let var_total = pairs
        .iter()
        .map(|p| (p.r_w - mean_r).powi(2) + (p.r_l - mean_r).powi(2))
        .sum::<f64>()
        / (2.0 * n);

    if var_total <= 0.0 {
        return Err(Error::UndefinedStatistic("icc1 with zero total variance".into()));
    }
    Ok(2.0 * var_b / var_total - 1.0)
}

/// Mean with a ±1.96·SE interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateStat {
    pub mean: f64,
    /// Sample standard deviation / √n.
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_runs: usize,
}

impl AggregateStat {
    /// Whether the two confidence intervals share no point.
    pub fn disjoint_from(&self, other: &AggregateStat) -> bool {
        self.ci_high < other.ci_low || other.ci_high < self.ci_low
    }
}

pub fn aggregate(values: &[f64]) -> Result<AggregateStat> {
    if values.len() < 2 {
        return Err(Error::Domain(format!(
            "aggregate needs at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let se = (ss / (n - 1.0)).sqrt() / n.sqrt();
    Ok(AggregateStat {
        mean,
        se,
        ci_low: mean - Z_95 * se,
        ci_high: mean + Z_95 * se,
        n_runs: values.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(x: f64, r_w: f64, r_l: f64) -> ScoredPair {
        ScoredPair { x, r_w, r_l }
    }

    #[test]
    fn accuracy_examples() {
        let all = [sp(0.0, 1.0, 0.0), sp(1.0, 0.5, -3.0)];
        assert_eq!(accuracy(&all).unwrap(), 1.0);
        let ties = [sp(0.0, 1.0, 1.0), sp(1.0, -2.0, -2.0)];
        assert_eq!(accuracy(&ties).unwrap(), 0.0);
        let mixed = [
            sp(0.0, 1.0, 0.0),
            sp(1.0, 2.0, 1.0),
            sp(2.0, 0.0, 1.0),
            sp(3.0, 5.0, 4.0),
        ];
        assert_eq!(accuracy(&mixed).unwrap(), 0.75);
        assert!(matches!(accuracy(&[]), Err(Error::Domain(_))));
    }

    #[test]
    fn icc_boundaries_are_exact() {
        let between: Vec<_> = (0..7)
            .map(|i| {
                let b = 0.37 * i as f64 - 1.1;
                sp(i as f64, b, b)
            })
            .collect();
        assert_eq!(icc1(&between).unwrap(), 1.0);
        let within: Vec<_> = (0..7)
            .map(|i| {
                let c = 0.21 * (i + 1) as f64;
                sp(i as f64, c, -c)
            })
            .collect();
        assert_eq!(icc1(&within).unwrap(), -1.0);
    }

    #[test]
    fn icc_errors() {
        assert!(matches!(icc1(&[sp(0.0, 1.0, 0.0)]), Err(Error::Domain(_))));
        let flat = [sp(0.0, 2.0, 2.0), sp(1.0, 2.0, 2.0)];
        assert!(matches!(icc1(&flat), Err(Error::UndefinedStatistic(_))));
    }

    #[test]
    fn aggregate_examples() {
        let c = aggregate(&[0.4; 5]).unwrap();
        assert_eq!((c.mean, c.se, c.ci_low, c.ci_high), (0.4, 0.0, 0.4, 0.4));
        let a = aggregate(&[0.0, 1.0]).unwrap();
        assert_eq!(a.mean, 0.5);
        assert!((a.se - 0.5).abs() < 1e-15);
        assert!((a.ci_high - a.mean - 1.96 * a.se).abs() < 1e-15);
        assert!(aggregate(&[1.0]).is_err());
    }

    #[test]
    fn disjoint_intervals() {
        let a = aggregate(&[0.0, 0.1, 0.05]).unwrap();
        let b = aggregate(&[1.0, 1.1, 1.05]).unwrap();
        assert!(a.disjoint_from(&b) && b.disjoint_from(&a));
        assert!(!a.disjoint_from(&a));
    }
}
