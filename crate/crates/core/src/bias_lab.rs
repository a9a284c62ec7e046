//! Synthetic preference data with an injected prompt-specific bias.
//!
//! Each sample draws a prompt `x ~ U(0,1)` and two base qualities
//! `s1, s2 ~ U(0,1)`. The base qualities are centered per prompt, then the
//! offset `b_x = bias_strength · 1[x < bias_threshold]` is added to both, and
//! a low-temperature Bradley–Terry draw decides which one is preferred.
//!
//! Sample `i` uses its own SplitMix64 substream, drawing in the order
//! `x, s1, s2, u_bt`. The train/test permutation uses a separate stream.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::sigmoid;
use crate::rng::{mix64, SplitMix64};

const SPLIT_STREAM_TAG: u64 = 0x5350_4C49_545F_3031; // "SPLIT_01"

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BiasConfig {
    pub n_samples: usize,
    pub bias_strength: f64,
    pub bias_threshold: f64,
    pub bt_temperature: f64,
    pub split_fraction: f64,
    pub seed: u64,
}

impl Default for BiasConfig {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            bias_strength: 0.0,
            bias_threshold: 0.5,
            bt_temperature: 1e-6,
            split_fraction: 0.8,
            seed: 0,
        }
    }
}

impl BiasConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::Config("n_samples must be >= 2".into()));
        }
        if !(self.bias_strength >= 0.0 && self.bias_strength.is_finite()) {
            return Err(Error::Config(format!(
                "bias_strength must be >= 0, got {}",
                self.bias_strength
            )));
        }
        if !(0.0..=1.0).contains(&self.bias_threshold) {
            return Err(Error::Config(format!(
                "bias_threshold must lie in [0,1], got {}",
                self.bias_threshold
            )));
        }
        if !(self.bt_temperature > 0.0 && self.bt_temperature.is_finite()) {
            return Err(Error::Config(format!(
                "bt_temperature must be positive, got {}",
                self.bt_temperature
            )));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Config(format!(
                "split_fraction must lie in (0,1), got {}",
                self.split_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreferencePair {
    /// Scalar prompt.
    pub x: f64,
    /// Observed score of the preferred response.
    pub y_w: f64,
    /// Observed score of the dispreferred response.
    pub y_l: f64,
    /// Injected baseline shared by both responses.
    pub b_x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDataset {
    pub train: Vec<PreferencePair>,
    pub test: Vec<PreferencePair>,
    pub config: BiasConfig,
}

/// Bradley–Terry draw between two candidates. Returns `(winner, loser)` as
/// 0-based indices: `(0, 1)` with probability `σ((y1 − y2)/temperature)`.
///
/// Consumes exactly one uniform draw, including at exact ties.
pub fn bt_label(y1: f64, y2: f64, temperature: f64, rng: &mut SplitMix64) -> (usize, usize) {
    debug_assert!(temperature > 0.0);
    let p_first = sigmoid((y1 - y2) / temperature);
    if rng.next_f64() < p_first {
        (0, 1)
    } else {
        (1, 0)
    }
}

/// Generates the pairs before splitting.
pub fn generate_pairs(config: &BiasConfig) -> Result<Vec<PreferencePair>> {
    config.validate()?;
    Ok((0..config.n_samples as u64)
        .map(|i| {
            let mut rng = SplitMix64::substream(config.seed, i);
            let x = rng.next_f64();
            let s1 = rng.next_f64();
            let s2 = rng.next_f64();
            let half = 0.5 * (s1 - s2);
            let b_x = if x < config.bias_threshold {
                config.bias_strength
            } else {
                0.0
            };
            let ys = [b_x + half, b_x - half];
            let (w, l) = bt_label(ys[0], ys[1], config.bt_temperature, &mut rng);
            PreferencePair {
                x,
                y_w: ys[w],
                y_l: ys[l],
                b_x,
            }
        })
        .collect())
}

/// Random partition into `round(fraction · n)` training items and the rest.
pub fn split<T: Clone>(items: &[T], fraction: f64, rng: &mut SplitMix64) -> Result<(Vec<T>, Vec<T>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction must lie in (0,1), got {fraction}"
        )));
    }
    let n = items.len();
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Config(format!(
            "split of {n} items at {fraction} leaves an empty side"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let train = order[..n_train].iter().map(|&i| items[i].clone()).collect();
    let test = order[n_train..].iter().map(|&i| items[i].clone()).collect();
    Ok((train, test))
}

/// Generates and splits a dataset; a pure function of `config`.
pub fn generate(config: &BiasConfig) -> Result<ToyDataset> {
    let pairs = generate_pairs(config)?;
    let mut rng = SplitMix64::new(config.seed ^ mix64(SPLIT_STREAM_TAG));
    let (train, test) = split(&pairs, config.split_fraction, &mut rng)?;
    Ok(ToyDataset {
        train,
        test,
        config: *config,
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    x: f64,
    y_w: f64,
    y_l: f64,
    b_x: f64,
    split: &'a str,
}

impl ToyDataset {
    /// Writes `x,y_w,y_l,b_x,split` rows, training rows first.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (split, pairs) in [("train", &self.train), ("test", &self.test)] {
            for p in pairs {
                w.serialize(CsvRow {
                    x: p.x,
                    y_w: p.y_w,
                    y_l: p.y_l,
                    b_x: p.b_x,
                    split,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_values() {
        let c = BiasConfig::default();
        assert_eq!(c.n_samples, 2000);
        assert_eq!(c.bias_threshold, 0.5);
        assert_eq!(c.bt_temperature, 1e-6);
        assert_eq!(c.split_fraction, 0.8);
    }

    #[test]
    fn split_sizes() {
        let ds = generate(&BiasConfig::default()).unwrap();
        assert_eq!((ds.train.len(), ds.test.len()), (1600, 400));
        let items: Vec<u32> = (0..10).collect();
        let (a, b) = split(&items, 0.8, &mut SplitMix64::new(1)).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        let (a2, b2) = split(&items, 0.8, &mut SplitMix64::new(1)).unwrap();
        assert_eq!((&a, &b), (&a2, &b2));
        let mut all: Vec<u32> = a2.into_iter().chain(b2).collect();
        all.sort_unstable();
        assert_eq!(all, items);
    }

    #[test]
    fn split_rejects_empty_side() {
        let items = [1, 2, 3];
        assert!(split(&items, 0.1, &mut SplitMix64::new(0)).is_err());
        assert!(split(&items, 0.95, &mut SplitMix64::new(0)).is_err());
        assert!(split(&items, 1.0, &mut SplitMix64::new(0)).is_err());
    }

    #[test]
    fn biased_midpoints() {
        let cfg = BiasConfig {
            bias_strength: 0.9,
            seed: 11,
            ..BiasConfig::default()
        };
        for p in generate_pairs(&cfg).unwrap() {
            let mid = 0.5 * (p.y_w + p.y_l);
            let expected = if p.x < 0.5 { 0.9 } else { 0.0 };
            assert!((mid - expected).abs() < 1e-12, "{p:?}");
            assert!(((p.y_w - p.b_x) + (p.y_l - p.b_x)).abs() < 1e-12);
            assert!(p.y_w >= p.y_l);
        }
    }

    #[test]
    fn unbiased_mean_midpoint_is_zero() {
        let pairs = generate_pairs(&BiasConfig::default()).unwrap();
        let mids: Vec<f64> = pairs.iter().map(|p| 0.5 * (p.y_w + p.y_l)).collect();
        assert!(pairs.iter().all(|p| p.b_x == 0.0));
        let n = mids.len() as f64;
        let mean = mids.iter().sum::<f64>() / n;
        let var = mids.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 3.0 * (var / n).sqrt() + 1e-15);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = BiasConfig {
            bias_strength: 0.9,
            seed: 99,
            ..BiasConfig::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = BiasConfig { seed: 100, ..cfg };
        assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn bt_label_saturates_and_ties_are_fair() {
        let mut rng = SplitMix64::new(5);
        for _ in 0..1000 {
            assert_eq!(bt_label(0.3, 0.1, 1e-6, &mut rng), (0, 1));
            assert_eq!(bt_label(0.1, 0.3, 1e-6, &mut rng), (1, 0));
        }
        let n = 100_000;
        let firsts = (0..n)
            .filter(|_| bt_label(0.2, 0.2, 1e-6, &mut rng) == (0, 1))
            .count();
        let freq = firsts as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.005, "{freq}");
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            BiasConfig {
                n_samples: 1,
                ..Default::default()
            },
            BiasConfig {
                bias_strength: -0.1,
                ..Default::default()
            },
            BiasConfig {
                bias_threshold: 1.5,
                ..Default::default()
            },
            BiasConfig {
                bt_temperature: 0.0,
                ..Default::default()
            },
            BiasConfig {
                split_fraction: 1.0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(matches!(generate(&c), Err(Error::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn csv_export_has_documented_columns() {
        let cfg = BiasConfig {
            n_samples: 10,
            ..Default::default()
        };
        let ds = generate(&cfg).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,y_w,y_l,b_x,split"));
        assert_eq!(lines.clone().count(), 10);
        assert_eq!(lines.filter(|l| l.ends_with(",test")).count(), 2);
    }
}
