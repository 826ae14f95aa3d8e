//! Instance-level divergences between label distributions and the
//! corpus-level comparison measures (distance correlation, weighted F1).

use crate::distribution::{LabelDistribution, MetricConfig};
use crate::label::NliLabel;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("points have inconsistent dimensions")]
    DimensionMismatch,
}

fn plogq(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / q).ln()
    }
}

/// `KL(P || Q)` after clamping both sides to `[eps, 1]` and renormalizing.
pub fn kl_divergence(p: &LabelDistribution, q: &LabelDistribution, cfg: &MetricConfig) -> f64 {
    let p = p.smoothed(cfg.smoothing_epsilon).as_array();
    let q = q.smoothed(cfg.smoothing_epsilon).as_array();
    let nats: f64 = (0..3).map(|i| plogq(p[i], q[i])).sum();
    cfg.log_base.ln_to_base(nats.max(0.0))
}

/// Jensen-Shannon distance with mixture `M = (P + Q) / 2`.
///
/// The mixture is positive wherever either input is, so the raw
/// distributions are used without smoothing and the closed-form bound
/// `sqrt(log 2)` is attained exactly on disjoint supports.
pub fn jsd_distance(p: &LabelDistribution, q: &LabelDistribution, cfg: &MetricConfig) -> f64 {
    let p = p.as_array();
    let q = q.as_array();
    let m: [f64; 3] = std::array::from_fn(|i| 0.5 * (p[i] + q[i]));
    let kl_pm: f64 = (0..3).map(|i| plogq(p[i], m[i])).sum();
    let kl_qm: f64 = (0..3).map(|i| plogq(q[i], m[i])).sum();
    let js = cfg.log_base.ln_to_base(0.5 * (kl_pm + kl_qm)).max(0.0);
    js.sqrt()
}

pub fn tv_distance(p: &LabelDistribution, q: &LabelDistribution) -> f64 {
    let p = p.as_array();
    let q = q.as_array();
    0.5 * (0..3).map(|i| (p[i] - q[i]).abs()).sum::<f64>()
}

/// Shannon entropy of the raw distribution, `0 log 0 = 0`.
pub fn entropy(p: &LabelDistribution, cfg: &MetricConfig) -> f64 {
    let nats: f64 = p.as_array().iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
    cfg.log_base.ln_to_base(nats)
}

/// `-sum P_ref log Q'` where only the model side is smoothed, so a perfect
/// one-hot prediction scores (almost) zero.
pub fn cross_entropy(p_ref: &LabelDistribution, q_model: &LabelDistribution, cfg: &MetricConfig) -> f64 {
    let p = p_ref.as_array();
    let q = q_model.smoothed(cfg.smoothing_epsilon).as_array();
    let nats: f64 = (0..3).filter(|&i| p[i] > 0.0).map(|i| -p[i] * q[i].ln()).sum();
    cfg.log_base.ln_to_base(nats)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Double-centered pairwise distance matrix, row-major `n * n`.
fn centered_distances<P: AsRef<[f64]>>(pts: &[P]) -> Result<Vec<f64>, MetricError> {
    let n = pts.len();
    let dim = pts[0].as_ref().len();
    if pts.iter().any(|p| p.as_ref().len() != dim) {
        return Err(MetricError::DimensionMismatch);
    }
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = euclidean(pts[i].as_ref(), pts[j].as_ref());
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| d[i * n..(i + 1) * n].iter().sum::<f64>() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    // the matrix is symmetric, so column means equal row means
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] += grand - row_means[i] - row_means[j];
        }
    }
    Ok(d)
}

fn mean_product(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

/// Sample distance correlation between paired point sets of any fixed
/// dimension. Returns 0 when either side has zero distance variance.
pub fn distance_correlation_points<P: AsRef<[f64]>, Q: AsRef<[f64]>>(x: &[P], y: &[Q]) -> Result<f64, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(MetricError::TooFewPoints(x.len()));
    }
    let a = centered_distances(x)?;
    let b = centered_distances(y)?;
    let dcov2 = mean_product(&a, &b).max(0.0);
    let dvar_x = mean_product(&a, &a);
    let dvar_y = mean_product(&b, &b);
    if dvar_x <= 0.0 || dvar_y <= 0.0 {
        return Ok(0.0);
    }
    let r2 = dcov2 / (dvar_x * dvar_y).sqrt();
    Ok(r2.sqrt().min(1.0))
}

pub fn distance_correlation(x: &[LabelDistribution], y: &[LabelDistribution]) -> Result<f64, MetricError> {
    distance_correlation_points(x, y)
}

/// Support-weighted mean of per-class F1 over E, N, C.
pub fn weighted_f1(predicted: &[NliLabel], gold: &[NliLabel]) -> Result<f64, MetricError> {
    if predicted.len() != gold.len() {
        return Err(MetricError::LengthMismatch {
            left: predicted.len(),
            right: gold.len(),
        });
    }
    if gold.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mut tp = [0usize; 3];
    let mut fp = [0usize; 3];
    let mut fn_ = [0usize; 3];
    for (p, g) in predicted.iter().zip(gold) {
        if p == g {
            tp[p.index()] += 1;
        } else {
            fp[p.index()] += 1;
            fn_[g.index()] += 1;
        }
    }
    let n = gold.len() as f64;
    let mut total = 0.0;
    for i in 0..3 {
        let support = tp[i] + fn_[i];
        if support == 0 {
            continue;
        }
        let precision = if tp[i] + fp[i] == 0 {
            0.0
        } else {
            tp[i] as f64 / (tp[i] + fp[i]) as f64
        };
        let recall = tp[i] as f64 / support as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        total += support as f64 * f1;
    }
    Ok(total / n)
}
