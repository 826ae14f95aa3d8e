//! Linear soft-label classifier over hashed text features.
//!
//! A small, deterministic stand-in for fine-tuning a transformer on label
//! distributions: same targets, same loss, same evaluation protocol.

use std::collections::BTreeMap;
use std::hash::Hasher;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ablation::{FtBlock, FtScores};
use crate::dataset::NliInstance;
use crate::distribution::{LabelDistribution, MetricConfig};
use crate::label::NliLabel;
use crate::metrics::{cross_entropy, kl_divergence, weighted_f1, MetricError};
use crate::variability::word_tokens;

/// Default hashed feature space size.
pub const DEFAULT_DIM: usize = 1 << 18;

const FORMAT_TAG: &str = "hjd-proxy";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProxyError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("evaluation set is empty")]
    EmptyInput,
    #[error("non-finite loss at epoch {epoch}, batch {batch} (last finite loss {last_loss})")]
    NonFiniteLoss { epoch: usize, batch: usize, last_loss: f64 },
    #[error("uid {0} has no gold label")]
    UidMismatch(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("invalid classifier file: {0}")]
    Format(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Sparse feature vector: strictly increasing indices below `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

fn bucket(namespace: &str, gram: &str, dim: usize) -> usize {
    let mut h = fnv::FnvHasher::default();
    h.write(namespace.as_bytes());
    h.write_u8(0x1f);
    h.write(gram.as_bytes());
    (h.finish() % dim as u64) as usize
}

fn add_namespace(acc: &mut BTreeMap<usize, f64>, namespace: &str, grams: &[String], dim: usize) {
    let mut local: BTreeMap<usize, f64> = BTreeMap::new();
    for g in grams {
        *local.entry(bucket(namespace, g, dim)).or_insert(0.0) += 1.0;
    }
    let norm = local.values().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (k, v) in local {
            *acc.entry(k).or_insert(0.0) += v / norm;
        }
    }
}

fn unigrams_and_bigrams(tokens: &[String]) -> (Vec<String>, Vec<String>) {
    let bigrams = tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])).collect();
    (tokens.to_vec(), bigrams)
}

/// Hashed premise and hypothesis unigrams and bigrams in separate
/// namespaces, plus premise/hypothesis overlap features. Each namespace is
/// L2-normalized on its own.
pub fn featurize(instance: &NliInstance, dim: usize) -> FeatureVector {
    let p = word_tokens(&instance.premise);
    let h = word_tokens(&instance.hypothesis);
    let (p1, p2) = unigrams_and_bigrams(&p);
    let (h1, h2) = unigrams_and_bigrams(&h);
    let premise_words: std::collections::BTreeSet<&String> = p.iter().collect();
    let shared: Vec<String> = h.iter().filter(|w| premise_words.contains(w)).cloned().collect();
    let novel: Vec<String> = h.iter().filter(|w| !premise_words.contains(w)).cloned().collect();
    let frac = if h.is_empty() {
        0.0
    } else {
        shared.len() as f64 / h.len() as f64
    };
    let counts = vec![
        format!("shared={}", shared.len().min(10)),
        format!("novel={}", novel.len().min(10)),
        format!("frac={}", (frac * 10.0).floor() as usize),
    ];
    let mut acc = BTreeMap::new();
    add_namespace(&mut acc, "p1", &p1, dim);
    add_namespace(&mut acc, "p2", &p2, dim);
    add_namespace(&mut acc, "h1", &h1, dim);
    add_namespace(&mut acc, "h2", &h2, dim);
    add_namespace(&mut acc, "xs", &shared, dim);
    add_namespace(&mut acc, "xn", &novel, dim);
    add_namespace(&mut acc, "xc", &counts, dim);
    FeatureVector {
        dim,
        entries: acc.into_iter().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Decoupled: each step also shrinks weights by `lr · weight_decay`.
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.1,
            batch_size: 4,
            epochs: 5,
            weight_decay: 0.0,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), ProxyError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ProxyError::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(ProxyError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(ProxyError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(ProxyError::InvalidConfig("weight_decay must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub config: TrainingConfig,
    pub examples: usize,
    /// Mean cross-entropy over the full corpus after each epoch.
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyClassifier {
    dim: usize,
    /// Row-major `dim × 3`.
    weights: Vec<[f64; 3]>,
    bias: [f64; 3],
    pub training: Option<TrainingRecord>,
}

fn softmax3(z: [f64; 3]) -> [f64; 3] {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - max).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

/// `−Σ p log softmax(z)`, computed stably.
fn soft_ce(z: [f64; 3], p: &LabelDistribution) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    p.as_array()
        .iter()
        .zip(z)
        .map(|(pi, zi)| if *pi == 0.0 { 0.0 } else { -pi * (zi - lse) })
        .sum()
}

impl ProxyClassifier {
    /// All-zero parameters; predicts the uniform distribution.
    pub fn zeros(dim: usize) -> Self {
        ProxyClassifier {
            dim,
            weights: vec![[0.0; 3]; dim],
            bias: [0.0; 3],
            training: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bias(&self) -> [f64; 3] {
        self.bias
    }

    pub fn logits(&self, x: &FeatureVector) -> [f64; 3] {
        let mut z = self.bias;
        for &(j, v) in &x.entries {
            let w = &self.weights[j];
            for c in 0..3 {
                z[c] += w[c] * v;
            }
        }
        z
    }

    pub fn predict_features(&self, x: &FeatureVector) -> LabelDistribution {
        let [e, n, c] = softmax3(self.logits(x));
        LabelDistribution::from_weights([e, n, c]).expect("softmax output is a distribution")
    }

    pub fn predict_dist(&self, instance: &NliInstance) -> LabelDistribution {
        self.predict_features(&featurize(instance, self.dim))
    }

    /// Argmax with ties resolved E < N < C.
    pub fn predict_label(&self, instance: &NliInstance) -> NliLabel {
        self.predict_dist(instance).argmax()
    }

    fn mean_loss(&self, xs: &[FeatureVector], ys: &[LabelDistribution]) -> f64 {
        xs.iter().zip(ys).map(|(x, y)| soft_ce(self.logits(x), y)).sum::<f64>() / xs.len() as f64
    }

    fn apply_batch(&mut self, xs: &[&FeatureVector], ys: &[&LabelDistribution], cfg: &TrainingConfig) {
        let scale = cfg.learning_rate / xs.len() as f64;
        let mut grad_w: BTreeMap<usize, [f64; 3]> = BTreeMap::new();
        let mut grad_b = [0.0; 3];
        for (x, y) in xs.iter().zip(ys) {
            let q = softmax3(self.logits(x));
            let p = y.as_array();
            let g: [f64; 3] = std::array::from_fn(|c| q[c] - p[c]);
            for c in 0..3 {
                grad_b[c] += g[c];
            }
            for &(j, v) in &x.entries {
                let gw = grad_w.entry(j).or_insert([0.0; 3]);
                for c in 0..3 {
                    gw[c] += g[c] * v;
                }
            }
        }
        if cfg.weight_decay > 0.0 {
            let shrink = 1.0 - cfg.learning_rate * cfg.weight_decay;
            for w in &mut self.weights {
                for v in w.iter_mut() {
                    *v *= shrink;
                }
            }
            for b in &mut self.bias {
                *b *= shrink;
            }
        }
        for (j, g) in grad_w {
            for c in 0..3 {
                self.weights[j][c] -= scale * g[c];
            }
        }
        for c in 0..3 {
            self.bias[c] -= scale * grad_b[c];
        }
    }

    fn is_finite(&self) -> bool {
        self.bias.iter().all(|v| v.is_finite()) && self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
    }
}

/// Mini-batch gradient descent on mean soft cross-entropy. Example order is
/// reshuffled every epoch from `cfg.seed`; training is single-threaded so
/// equal inputs give bitwise-equal parameters.
pub fn train_soft(
    corpus: &[(NliInstance, LabelDistribution)],
    cfg: &TrainingConfig,
    dim: usize,
) -> Result<ProxyClassifier, ProxyError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(ProxyError::EmptyCorpus);
    }
    if dim == 0 {
        return Err(ProxyError::InvalidConfig("feature dimension must be positive".into()));
    }
    let xs: Vec<FeatureVector> = corpus.iter().map(|(i, _)| featurize(i, dim)).collect();
    let ys: Vec<LabelDistribution> = corpus.iter().map(|(_, d)| *d).collect();
    let mut model = ProxyClassifier::zeros(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut last_loss = model.mean_loss(&xs, &ys);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let bx: Vec<&FeatureVector> = chunk.iter().map(|&i| &xs[i]).collect();
            let by: Vec<&LabelDistribution> = chunk.iter().map(|&i| &ys[i]).collect();
            model.apply_batch(&bx, &by, cfg);
            if !model.bias.iter().all(|v| v.is_finite()) {
                return Err(ProxyError::NonFiniteLoss {
                    epoch,
                    batch: b,
                    last_loss,
                });
            }
        }
        let loss = model.mean_loss(&xs, &ys);
        if !loss.is_finite() || !model.is_finite() {
            return Err(ProxyError::NonFiniteLoss {
                epoch,
                batch: order.len().div_ceil(cfg.batch_size),
                last_loss,
            });
        }
        log::debug!("epoch {}: loss {loss:.6}", epoch + 1);
        losses.push(loss);
        last_loss = loss;
    }
    model.training = Some(TrainingRecord {
        config: *cfg,
        examples: corpus.len(),
        epoch_losses: losses,
    });
    Ok(model)
}

/// Pairs instances with their distributions; instances without one are
/// skipped.
pub fn soft_corpus(
    instances: &[NliInstance],
    distributions: &BTreeMap<String, LabelDistribution>,
) -> Vec<(NliInstance, LabelDistribution)> {
    instances
        .iter()
        .filter_map(|i| distributions.get(&i.uid).map(|d| (i.clone(), *d)))
        .collect()
}

/// Which labels the weighted F1 of an FT comparison is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum F1Target {
    /// The reference classifier's argmax labels.
    #[default]
    Reference,
    /// Gold labels supplied with the evaluation set.
    Gold,
}

fn compare_split(
    candidate: &ProxyClassifier,
    reference: &ProxyClassifier,
    split: &[NliInstance],
    cfg: &MetricConfig,
    gold: Option<&BTreeMap<String, NliLabel>>,
) -> Result<FtScores, ProxyError> {
    if split.is_empty() {
        return Err(ProxyError::EmptyInput);
    }
    let n = split.len() as f64;
    let mut kl = 0.0;
    let mut ce = 0.0;
    let mut predicted = Vec::with_capacity(split.len());
    let mut targets = Vec::with_capacity(split.len());
    for inst in split {
        let c = candidate.predict_dist(inst);
        let r = reference.predict_dist(inst);
        kl += kl_divergence(&c, &r, cfg);
        ce += cross_entropy(&r, &c, cfg);
        predicted.push(c.argmax());
        targets.push(match gold {
            None => r.argmax(),
            Some(g) => *g
                .get(&inst.uid)
                .ok_or_else(|| ProxyError::UidMismatch(inst.uid.clone()))?,
        });
    }
    Ok(FtScores {
        kl: kl / n,
        ce: ce / n,
        weighted_f1: weighted_f1(&predicted, &targets)?,
    })
}

/// KL(candidate || reference), CE(reference, candidate) and weighted F1 of
/// candidate argmax labels, per split. F1 is scored against the reference's
/// argmax unless gold labels are given.
pub fn evaluate_against_reference(
    name: &str,
    candidate: &ProxyClassifier,
    reference: &ProxyClassifier,
    dev: &[NliInstance],
    test: &[NliInstance],
    cfg: &MetricConfig,
    gold: Option<&BTreeMap<String, NliLabel>>,
) -> Result<FtBlock, ProxyError> {
    Ok(FtBlock {
        name: name.to_string(),
        dev: compare_split(candidate, reference, dev, cfg, gold)?,
        test: compare_split(candidate, reference, test, cfg, gold)?,
    })
}

pub fn evaluate_single_label(
    classifier: &ProxyClassifier,
    labeled: &[(NliInstance, NliLabel)],
) -> Result<f64, ProxyError> {
    if labeled.is_empty() {
        return Err(ProxyError::EmptyInput);
    }
    let predicted: Vec<NliLabel> = labeled.iter().map(|(i, _)| classifier.predict_label(i)).collect();
    let gold: Vec<NliLabel> = labeled.iter().map(|(_, l)| *l).collect();
    Ok(weighted_f1(&predicted, &gold)?)
}

#[derive(Serialize, Deserialize)]
struct StoredClassifier {
    format: String,
    version: u32,
    dim: usize,
    bias: [f64; 3],
    /// Nonzero rows only, ascending index.
    weights: Vec<(usize, [f64; 3])>,
    #[serde(default)]
    training: Option<TrainingRecord>,
}

impl ProxyClassifier {
    pub fn to_json(&self) -> String {
        let stored = StoredClassifier {
            format: FORMAT_TAG.into(),
            version: FORMAT_VERSION,
            dim: self.dim,
            bias: self.bias,
            weights: self
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| w.iter().any(|v| *v != 0.0))
                .map(|(j, w)| (j, *w))
                .collect(),
            training: self.training.clone(),
        };
        serde_json::to_string(&stored).expect("classifier serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ProxyError> {
        let s: StoredClassifier = serde_json::from_str(text).map_err(|e| ProxyError::Format(e.to_string()))?;
        if s.format != FORMAT_TAG || s.version != FORMAT_VERSION {
            return Err(ProxyError::Format(format!(
                "unsupported format {} v{}",
                s.format, s.version
            )));
        }
        if s.dim == 0 || s.dim > 1 << 24 {
            return Err(ProxyError::Format(format!("dimension {} out of range", s.dim)));
        }
        if !s.bias.iter().all(|v| v.is_finite()) {
            return Err(ProxyError::Format("non-finite bias".into()));
        }
        let mut model = ProxyClassifier::zeros(s.dim);
        model.bias = s.bias;
        let mut prev: Option<usize> = None;
        for (j, w) in s.weights {
            if j >= s.dim || prev.is_some_and(|p| p >= j) {
                return Err(ProxyError::Format(format!("weight index {j} out of order or range")));
            }
            if !w.iter().all(|v| v.is_finite()) {
                return Err(ProxyError::Format(format!("non-finite weight at {j}")));
            }
            model.weights[j] = w;
            prev = Some(j);
        }
        model.training = s.training;
        Ok(model)
    }
}
