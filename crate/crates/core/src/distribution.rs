//! Points on the three-label simplex and the transforms that produce them
//! from first-token scores.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::label::NliLabel;

/// Tolerance on the component sum of a [`LabelDistribution`].
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistributionError {
    #[error("distribution component {index} is invalid: {value}")]
    InvalidComponent { index: usize, value: f64 },
    #[error("distribution components sum to {0}, expected 1")]
    BadSum(f64),
    #[error("non-positive score {value} for label {label}; normalization needs strictly positive scores")]
    NonPositiveLogit { label: NliLabel, value: f64 },
    #[error("score for label {label} is not finite: {value}")]
    NonFiniteLogit { label: NliLabel, value: f64 },
    #[error("invalid metric configuration: {0}")]
    InvalidConfig(String),
}

/// A probability distribution over (Entailment, Neutral, Contradiction).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelDistribution {
    p: [f64; 3],
}

impl LabelDistribution {
    pub const UNIFORM: LabelDistribution = LabelDistribution { p: [1.0 / 3.0; 3] };

    pub fn new(p_entail: f64, p_neutral: f64, p_contra: f64) -> Result<Self, DistributionError> {
        Self::from_array([p_entail, p_neutral, p_contra])
    }

    pub fn from_array(p: [f64; 3]) -> Result<Self, DistributionError> {
        for (index, &value) in p.iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(DistributionError::InvalidComponent { index, value });
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(DistributionError::BadSum(sum));
        }
        Ok(LabelDistribution { p })
    }

    /// Divides non-negative weights by their sum. Accepts inputs that are
    /// only approximately normalized, e.g. rounded values read from disk.
    pub fn from_weights(w: [f64; 3]) -> Result<Self, DistributionError> {
        for (index, &value) in w.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(DistributionError::InvalidComponent { index, value });
            }
        }
        let sum: f64 = w.iter().sum();
        if sum <= 0.0 {
            return Err(DistributionError::BadSum(sum));
        }
        Ok(LabelDistribution {
            p: [w[0] / sum, w[1] / sum, w[2] / sum],
        })
    }

    /// Count-normalized distribution of a list of annotator labels.
    pub fn from_labels(labels: &[NliLabel]) -> Result<Self, DistributionError> {
        let mut counts = [0.0; 3];
        for l in labels {
            counts[l.index()] += 1.0;
        }
        Self::from_weights(counts)
    }

    pub fn one_hot(label: NliLabel) -> Self {
        let mut p = [0.0; 3];
        p[label.index()] = 1.0;
        LabelDistribution { p }
    }

    /// Unweighted mean of several distributions, renormalized to absorb
    /// rounding drift. Returns `None` for an empty input.
    pub fn mean<'a, I>(items: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a LabelDistribution>,
    {
        let mut acc = [0.0; 3];
        let mut n = 0usize;
        for d in items {
            for (a, v) in acc.iter_mut().zip(d.p) {
                *a += v;
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        let sum: f64 = acc.iter().sum();
        Some(LabelDistribution {
            p: [acc[0] / sum, acc[1] / sum, acc[2] / sum],
        })
    }

    pub fn p_entail(&self) -> f64 {
        self.p[0]
    }

    pub fn p_neutral(&self) -> f64 {
        self.p[1]
    }

    pub fn p_contra(&self) -> f64 {
        self.p[2]
    }

    pub fn get(&self, label: NliLabel) -> f64 {
        self.p[label.index()]
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.p
    }

    /// Most probable label; ties resolve in E < N < C order.
    pub fn argmax(&self) -> NliLabel {
        let mut best = 0;
        for i in 1..3 {
            if self.p[i] > self.p[best] {
                best = i;
            }
        }
        NliLabel::ALL[best]
    }

    /// Components clamped to `[eps, 1]` and renormalized. With `eps == 0`
    /// the distribution is returned unchanged.
    pub fn smoothed(&self, eps: f64) -> LabelDistribution {
        if eps <= 0.0 {
            return *self;
        }
        let c = self.p.map(|v| v.clamp(eps, 1.0));
        let sum: f64 = c.iter().sum();
        LabelDistribution { p: c.map(|v| v / sum) }
    }
}

impl AsRef<[f64]> for LabelDistribution {
    fn as_ref(&self) -> &[f64] {
        &self.p
    }
}

impl fmt::Display for LabelDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.4}, {:.4}, {:.4})", self.p[0], self.p[1], self.p[2])
    }
}

impl Serialize for LabelDistribution {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.p.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabelDistribution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let p = <[f64; 3]>::deserialize(d)?;
        LabelDistribution::from_array(p).map_err(serde::de::Error::custom)
    }
}

/// Raw per-label first-token scores in (E, N, C) order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct LogitTriple {
    l: [f64; 3],
}

impl LogitTriple {
    pub fn new(l_entail: f64, l_neutral: f64, l_contra: f64) -> Result<Self, DistributionError> {
        Self::try_from([l_entail, l_neutral, l_contra])
    }

    pub fn get(&self, label: NliLabel) -> f64 {
        self.l[label.index()]
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.l
    }

    pub fn all_positive(&self) -> bool {
        self.l.iter().all(|&v| v > 0.0)
    }
}

impl TryFrom<[f64; 3]> for LogitTriple {
    type Error = DistributionError;

    fn try_from(l: [f64; 3]) -> Result<Self, Self::Error> {
        for (i, &value) in l.iter().enumerate() {
            if !value.is_finite() {
                return Err(DistributionError::NonFiniteLogit {
                    label: NliLabel::ALL[i],
                    value,
                });
            }
        }
        Ok(LogitTriple { l })
    }
}

impl From<LogitTriple> for [f64; 3] {
    fn from(t: LogitTriple) -> Self {
        t.l
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Natural,
    Base2,
}

impl LogBase {
    pub fn ln_to_base(self, nats: f64) -> f64 {
        match self {
            LogBase::Natural => nats,
            LogBase::Base2 => nats / std::f64::consts::LN_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub log_base: LogBase,
    pub smoothing_epsilon: f64,
    pub softmax_temperature: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            log_base: LogBase::Natural,
            smoothing_epsilon: 1e-6,
            softmax_temperature: 1.0,
        }
    }
}

impl MetricConfig {
    pub fn with_temperature(tau: f64) -> Self {
        MetricConfig {
            softmax_temperature: tau,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DistributionError> {
        if !(self.softmax_temperature > 0.0 && self.softmax_temperature.is_finite()) {
            return Err(DistributionError::InvalidConfig(
                "softmax_temperature must be positive".into(),
            ));
        }
        if !(self.smoothing_epsilon > 0.0 && self.smoothing_epsilon <= 1e-2) {
            return Err(DistributionError::InvalidConfig(
                "smoothing_epsilon must lie in (0, 0.01]".into(),
            ));
        }
        Ok(())
    }
}

/// `p_i = l_i / sum(l)`; every score must be strictly positive.
pub fn normalize_positive(l: &LogitTriple) -> Result<LabelDistribution, DistributionError> {
    for label in NliLabel::ALL {
        let value = l.get(label);
        if value <= 0.0 {
            return Err(DistributionError::NonPositiveLogit { label, value });
        }
    }
    let sum: f64 = l.l.iter().sum();
    Ok(LabelDistribution {
        p: l.l.map(|v| v / sum),
    })
}

/// `p_i = exp(l_i / tau) / sum_j exp(l_j / tau)`, evaluated after subtracting
/// the maximum score. Larger `tau` flattens the result.
pub fn softmax_temperature(l: &LogitTriple, tau: f64) -> LabelDistribution {
    debug_assert!(tau > 0.0);
    softmax(l.l.map(|v| v / tau))
}

pub(crate) fn softmax(z: [f64; 3]) -> LabelDistribution {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - max).exp());
    let sum: f64 = e.iter().sum();
    LabelDistribution { p: e.map(|v| v / sum) }
}

/// Cartesian position of a distribution inside the triangle with
/// Entailment at (0, 0), Contradiction at (1, 0) and Neutral at the apex.
pub fn ternary_coordinates(p: &LabelDistribution) -> (f64, f64) {
    let x = p.p_neutral() * 0.5 + p.p_contra();
    let y = p.p_neutral() * (3f64.sqrt() / 2.0);
    (x, y)
}
