//! Multinomial naive Bayes with additive smoothing.

use serde::{Deserialize, Serialize};

use super::TrainingSet;
use crate::error::{Error, Result};

pub const DEFAULT_SMOOTHING: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NbVariant {
    Multinomial,
}

/// Log-space parameters. A class absent from training has a log prior of
/// negative infinity (serialized as `null`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    #[serde(with = "neg_inf_as_null")]
    pub log_priors: Vec<f64>,
    /// `log_likelihoods[class][feature]` = log theta.
    pub log_likelihoods: Vec<Vec<f64>>,
    pub smoothing: f64,
    pub variant: NbVariant,
}

impl NbModel {
    /// `argmax_c log P(c) + sum_j x_j log theta_cj`, ties to the lowest index.
    pub fn predict(&self, row: &[f64]) -> u32 {
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for (c, (prior, theta)) in self.log_priors.iter().zip(&self.log_likelihoods).enumerate() {
            let score = prior + row.iter().zip(theta).map(|(x, t)| x * t).sum::<f64>();
            if score > best_score {
                best = c;
                best_score = score;
            }
        }
        best as u32
    }

    pub fn log_posteriors(&self, row: &[f64]) -> Vec<f64> {
        self.log_priors
            .iter()
            .zip(&self.log_likelihoods)
            .map(|(p, theta)| p + row.iter().zip(theta).map(|(x, t)| x * t).sum::<f64>())
            .collect()
    }
}

pub fn train_naive_bayes(set: &TrainingSet, smoothing: f64) -> Result<NbModel> {
    set.check_non_empty()?;
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(Error::Config(format!("smoothing {smoothing} must be non-negative")));
    }
    let d = set.num_features();
    let k = set.num_classes;
    let mut class_rows = vec![0u64; k];
    let mut sums = vec![vec![0.0f64; d]; k];
    for (row, &y) in set.features.iter().zip(&set.targets) {
        let c = y as usize;
        class_rows[c] += 1;
        for (s, &x) in sums[c].iter_mut().zip(row) {
            if x.is_nan() || x < 0.0 {
                return Err(Error::Domain(format!(
                    "multinomial naive Bayes needs non-negative features, got {x}"
                )));
            }
            *s += x;
        }
    }
    let n = set.len() as f64;
    let log_priors = class_rows
        .iter()
        .map(|&nc| if nc == 0 { f64::NEG_INFINITY } else { (nc as f64 / n).ln() })
        .collect();
    let log_likelihoods = sums
        .iter()
        .map(|s| {
            let denom = s.iter().sum::<f64>() + smoothing * d as f64;
            s.iter()
                .map(|&v| {
                    if denom > 0.0 {
                        ((v + smoothing) / denom).ln()
                    } else {
                        -(d as f64).ln()
                    }
                })
                .collect()
        })
        .collect();
    Ok(NbModel {
        log_priors,
        log_likelihoods,
        smoothing,
        variant: NbVariant::Multinomial,
    })
}

mod neg_inf_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| if x.is_finite() { Some(*x) } else { None })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::NEG_INFINITY)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> TrainingSet {
        TrainingSet {
            feature_names: vec!["a".into(), "b".into()],
            features: vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]],
            targets: vec![0, 0, 1, 1],
            num_classes: 2,
        }
    }

    #[test]
    fn hand_computed_thetas() {
        let m = train_naive_bayes(&toy(), 1.0).unwrap();
        let exp = |v: &[f64]| v.iter().map(|x| x.exp()).collect::<Vec<_>>();
        let t0 = exp(&m.log_likelihoods[0]);
        let t1 = exp(&m.log_likelihoods[1]);
        assert!((t0[0] - 0.75).abs() < 1e-12 && (t0[1] - 0.25).abs() < 1e-12);
        assert!((t1[0] - 0.25).abs() < 1e-12 && (t1[1] - 0.75).abs() < 1e-12);
        assert_eq!(m.log_priors[0], m.log_priors[1]);
        assert_eq!(m.predict(&[1.0, 0.0]), 0);
        assert_eq!(m.predict(&[0.0, 1.0]), 1);
    }

    #[test]
    fn zero_vector_uses_priors() {
        let mut set = toy();
        set.features.push(vec![0.0, 1.0]);
        set.targets.push(1);
        let m = train_naive_bayes(&set, 1.0).unwrap();
        assert_eq!(m.predict(&[0.0, 0.0]), 1);
    }

    #[test]
    fn posterior_tie_goes_to_lower_index() {
        let m = NbModel {
            log_priors: vec![f64::NEG_INFINITY, 0.5f64.ln(), 0.5f64.ln()],
            log_likelihoods: vec![vec![0.5f64.ln(); 2]; 3],
            smoothing: 1.0,
            variant: NbVariant::Multinomial,
        };
        assert_eq!(m.predict(&[0.3, 0.7]), 1);
    }

    #[test]
    fn negative_feature_rejected() {
        let mut set = toy();
        set.features[0][0] = -0.1;
        assert!(matches!(train_naive_bayes(&set, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn missing_class_prior_round_trips() {
        let mut set = toy();
        set.num_classes = 3;
        let m = train_naive_bayes(&set, 1.0).unwrap();
        assert_eq!(m.log_priors[2], f64::NEG_INFINITY);
        let json = serde_json::to_string(&m).unwrap();
        let back: NbModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
