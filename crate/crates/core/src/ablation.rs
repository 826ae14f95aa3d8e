//! Gradual replacement of human explanations, and comparison of one
//! collection of distributions against another.

use std::collections::BTreeMap;
use std::hash::Hasher;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::LlmClient;
use crate::dataset::{DatasetError, NliInstance};
use crate::distribution::{LabelDistribution, MetricConfig};
use crate::estimator::{estimate_batch, EstimatorConfig, EstimatorError, MjdEstimate};
use crate::explanation::{ExplanationPool, ExplanationRecord, ExplanationSet, ExplanationSource};
use crate::label::NliLabel;
use crate::metrics::{distance_correlation, jsd_distance, kl_divergence, tv_distance, MetricError};
use crate::selection::{rank_by_mode, SelectionMode};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AblationError {
    #[error("label {label} needs {needed} model explanations but only {available} are available")]
    InsufficientExplanations {
        label: NliLabel,
        needed: usize,
        available: usize,
    },
    #[error("no explanation with label {0} from another instance is available")]
    NoDonorAvailable(NliLabel),
    #[error("uid sets differ: {only_candidate} only in candidate, {only_target} only in target (e.g. {example})")]
    UidMismatch {
        only_candidate: usize,
        only_target: usize,
        example: String,
    },
    #[error("invalid rates: {0}")]
    BadRates(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplacementSource {
    Model,
    Noise,
}

impl ReplacementSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ReplacementSource::Model => "model",
            ReplacementSource::Noise => "noise",
        }
    }
}

impl std::str::FromStr for ReplacementSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "model" => Ok(ReplacementSource::Model),
            "noise" => Ok(ReplacementSource::Noise),
            _ => Err(format!("unknown replacement kind {s:?} (expected model or noise)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub rates: Vec<f64>,
    pub replacement_kind: ReplacementSource,
    pub mode: SelectionMode,
    pub seed: u64,
}

impl Default for AblationSpec {
    fn default() -> Self {
        AblationSpec {
            rates: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            replacement_kind: ReplacementSource::Model,
            mode: SelectionMode::Longest,
            seed: 0,
        }
    }
}

/// Rates must lie in [0, 1] and be strictly ascending.
pub fn validate_rates(rates: &[f64]) -> Result<(), AblationError> {
    if rates.is_empty() {
        return Err(AblationError::BadRates("no rates given".into()));
    }
    if let Some(r) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(AblationError::BadRates(format!("{r} is outside [0, 1]")));
    }
    if let Some(w) = rates.windows(2).find(|w| w[0] >= w[1]) {
        return Err(AblationError::BadRates(format!(
            "{} is not followed by a larger rate ({})",
            w[0], w[1]
        )));
    }
    Ok(())
}

impl AblationSpec {
    pub fn validate(&self) -> Result<(), AblationError> {
        validate_rates(&self.rates)
    }
}

/// Number of slots replaced at `rate` in a set of size `m`; halves round
/// away from zero.
pub fn replaced_count(rate: f64, m: usize) -> usize {
    ((rate * m as f64).round() as usize).min(m)
}

fn instance_rng(seed: u64, uid: &str) -> ChaCha8Rng {
    let mut h = fnv::FnvHasher::default();
    h.write(uid.as_bytes());
    ChaCha8Rng::seed_from_u64(seed ^ h.finish())
}

/// Seeded choice of `k` distinct slots out of `m`, ascending.
fn choose_slots(rng: &mut ChaCha8Rng, m: usize, k: usize) -> Vec<usize> {
    let mut slots = sample(rng, m, k).into_vec();
    slots.sort_unstable();
    slots
}

/// Replaces `round(rate·m)` seeded-random human slots by model explanations
/// of the same label. Within a label, replacement slots take the best
/// explanations under `mode` in slot order, each used once.
pub fn replace_with_model(
    human_set: &ExplanationSet,
    pool: &ExplanationPool,
    rate: f64,
    mode: SelectionMode,
    seed: u64,
) -> Result<ExplanationSet, AblationError> {
    let m = human_set.len();
    let mut rng = instance_rng(seed, &human_set.uid);
    let slots = choose_slots(&mut rng, m, replaced_count(rate, m));
    let mut needed = [0usize; 3];
    for &s in &slots {
        needed[human_set.explanations[s].label.index()] += 1;
    }
    let mut ranked: [Vec<&ExplanationRecord>; 3] = Default::default();
    for label in NliLabel::ALL {
        let available = pool.get(&human_set.uid, label);
        let k = needed[label.index()];
        if available.len() < k {
            return Err(AblationError::InsufficientExplanations {
                label,
                needed: k,
                available: available.len(),
            });
        }
        ranked[label.index()] = rank_by_mode(available, mode);
    }
    let mut next = [0usize; 3];
    let mut out = human_set.explanations.clone();
    for s in slots {
        let i = out[s].label.index();
        out[s] = ranked[i][next[i]].clone();
        next[i] += 1;
    }
    Ok(ExplanationSet::new(human_set.uid.clone(), out))
}

/// Replaces `round(rate·m)` seeded-random human slots by same-label
/// explanations drawn from other instances of `corpus_pool`, without
/// repetition inside the set. Replaced records keep their donor uid and are
/// marked as noise.
pub fn replace_with_noise(
    human_set: &ExplanationSet,
    corpus_pool: &ExplanationPool,
    rate: f64,
    seed: u64,
) -> Result<ExplanationSet, AblationError> {
    let m = human_set.len();
    let mut rng = instance_rng(seed, &human_set.uid);
    let slots = choose_slots(&mut rng, m, replaced_count(rate, m));
    let mut donors: [Vec<&ExplanationRecord>; 3] = Default::default();
    for r in corpus_pool.records().filter(|r| r.uid != human_set.uid) {
        donors[r.label.index()].push(r);
    }
    let mut out = human_set.explanations.clone();
    for s in slots {
        let label = out[s].label;
        let bucket = &mut donors[label.index()];
        if bucket.is_empty() {
            return Err(AblationError::NoDonorAvailable(label));
        }
        let pick = bucket.swap_remove(rng.random_range(0..bucket.len()));
        let mut rec = pick.clone();
        rec.source = ExplanationSource::Noise;
        out[s] = rec;
    }
    Ok(ExplanationSet::new(human_set.uid.clone(), out))
}

pub fn replace(
    human_set: &ExplanationSet,
    pool: &ExplanationPool,
    rate: f64,
    spec: &AblationSpec,
) -> Result<ExplanationSet, AblationError> {
    match spec.replacement_kind {
        ReplacementSource::Model => replace_with_model(human_set, pool, rate, spec.mode, spec.seed),
        ReplacementSource::Noise => replace_with_noise(human_set, pool, rate, spec.seed),
    }
}

/// Which side of the asymmetric KL the candidate takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `KL(candidate || target)`.
    #[default]
    CandidateFirst,
    /// `KL(target || candidate)`.
    TargetFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtScores {
    pub kl: f64,
    pub ce: f64,
    pub weighted_f1: f64,
}

/// Proxy fine-tuning comparison for one classifier configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtBlock {
    pub name: String,
    pub dev: FtScores,
    pub test: FtScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub instances: usize,
    pub kl: f64,
    pub jsd: f64,
    pub tvd: f64,
    pub dcorr: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ft: Vec<FtBlock>,
}

pub fn check_same_uids<A, B>(
    candidate: &BTreeMap<String, A>,
    target: &BTreeMap<String, B>,
) -> Result<(), AblationError> {
    let only_c: Vec<&String> = candidate.keys().filter(|k| !target.contains_key(*k)).collect();
    let only_t: Vec<&String> = target.keys().filter(|k| !candidate.contains_key(*k)).collect();
    if only_c.is_empty() && only_t.is_empty() {
        return Ok(());
    }
    Err(AblationError::UidMismatch {
        only_candidate: only_c.len(),
        only_target: only_t.len(),
        example: only_c
            .first()
            .or(only_t.first())
            .map(|s| s.to_string())
            .unwrap_or_default(),
    })
}

/// Instance means of KL, JSD and TVD, plus distance correlation over the
/// paired point sets, in uid order.
pub fn compare_to_target(
    candidate: &BTreeMap<String, LabelDistribution>,
    target: &BTreeMap<String, LabelDistribution>,
    cfg: &MetricConfig,
    direction: Direction,
) -> Result<MetricReport, AblationError> {
    check_same_uids(candidate, target)?;
    if candidate.is_empty() {
        return Err(MetricError::EmptyInput.into());
    }
    let pairs: Vec<(&LabelDistribution, &LabelDistribution)> =
        candidate.iter().map(|(uid, c)| (c, &target[uid])).collect();
    let n = pairs.len() as f64;
    let mut kl = 0.0;
    let mut jsd = 0.0;
    let mut tvd = 0.0;
    for (c, t) in &pairs {
        let (p, q) = match direction {
            Direction::CandidateFirst => (*c, *t),
            Direction::TargetFirst => (*t, *c),
        };
        kl += kl_divergence(p, q, cfg);
        jsd += jsd_distance(p, q, cfg);
        tvd += tv_distance(p, q);
    }
    let xs: Vec<LabelDistribution> = pairs.iter().map(|(c, _)| **c).collect();
    let ys: Vec<LabelDistribution> = pairs.iter().map(|(_, t)| **t).collect();
    Ok(MetricReport {
        instances: pairs.len(),
        kl: kl / n,
        jsd: jsd / n,
        tvd: tvd / n,
        dcorr: distance_correlation(&xs, &ys)?,
        ft: Vec::new(),
    })
}

#[derive(Deserialize)]
struct DistributionLine {
    uid: String,
    #[serde(default, rename = "final")]
    final_distribution: Option<[f64; 3]>,
    #[serde(default)]
    probs: Option<[f64; 3]>,
    #[serde(default)]
    distribution: Option<[f64; 3]>,
}

/// Reads `uid → distribution` from JSONL lines carrying the distribution
/// under `final` (estimates), `probs` (reference files) or `distribution`.
/// Sums within 1e-6 of one are renormalized.
pub fn parse_distribution_lines(text: &str) -> Result<BTreeMap<String, LabelDistribution>, DatasetError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| DatasetError::Parse {
            path: None,
            line: i + 1,
            message,
        };
        let d: DistributionLine = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        let raw = d
            .final_distribution
            .or(d.probs)
            .or(d.distribution)
            .ok_or_else(|| parse_err("no final, probs or distribution field".into()))?;
        let sum: f64 = raw.iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() > 1e-6 {
            return Err(parse_err(format!("{}: distribution sums to {sum}", d.uid)));
        }
        let dist = LabelDistribution::from_weights(raw).map_err(|e| parse_err(format!("{}: {e}", d.uid)))?;
        if out.insert(d.uid.clone(), dist).is_some() {
            return Err(DatasetError::DuplicateUid(d.uid));
        }
    }
    Ok(out)
}

pub fn load_distribution_file(path: &Path) -> Result<BTreeMap<String, LabelDistribution>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_distribution_lines(&text).map_err(|e| match e {
        DatasetError::Parse { line, message, .. } => DatasetError::Parse {
            path: Some(path.to_path_buf()),
            line,
            message,
        },
        other => other,
    })
}

pub fn estimates_to_map(estimates: &[MjdEstimate]) -> BTreeMap<String, LabelDistribution> {
    estimates
        .iter()
        .map(|e| (e.uid.clone(), e.final_distribution))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub system: String,
    pub rate: f64,
    pub kind: ReplacementSource,
    pub mode: SelectionMode,
    pub replaced: usize,
    pub slots: usize,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedInstance {
    pub uid: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct AblationSweep {
    pub rows: Vec<AblationRow>,
    /// Estimates per rate, in rate order.
    pub estimates: Vec<(f64, Vec<MjdEstimate>)>,
    /// Instances left out because some rate could not be built or estimated.
    pub excluded: Vec<ExcludedInstance>,
}

/// For each rate: replace, estimate, and compare against `target`.
/// Instances are compared only if every rate could be built and estimated
/// for them, so all rows share one uid set.
#[allow(clippy::too_many_arguments)]
pub fn run_ablation(
    system: &str,
    instances: &[NliInstance],
    human_sets: &BTreeMap<String, ExplanationSet>,
    pool: &ExplanationPool,
    spec: &AblationSpec,
    target: &BTreeMap<String, LabelDistribution>,
    client: &LlmClient,
    est_cfg: &EstimatorConfig,
) -> Result<AblationSweep, AblationError> {
    spec.validate()?;
    let mut sweep = AblationSweep::default();
    let mut kept: Vec<NliInstance> = Vec::new();
    let mut sets_by_rate: Vec<BTreeMap<String, ExplanationSet>> = vec![BTreeMap::new(); spec.rates.len()];
    for inst in instances {
        let (Some(human), true) = (human_sets.get(&inst.uid), target.contains_key(&inst.uid)) else {
            continue;
        };
        let built: Result<Vec<ExplanationSet>, AblationError> = spec
            .rates
            .iter()
            .map(|&rate| replace(human, pool, rate, spec))
            .collect();
        match built {
            Ok(sets) => {
                for (slot, set) in sets_by_rate.iter_mut().zip(sets) {
                    slot.insert(inst.uid.clone(), set);
                }
                kept.push(inst.clone());
            }
            Err(e) => {
                log::warn!("{}: excluded from ablation: {e}", inst.uid);
                sweep.excluded.push(ExcludedInstance {
                    uid: inst.uid.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    let mut per_rate = Vec::new();
    for sets in &sets_by_rate {
        let batch = estimate_batch(&kept, sets, client, est_cfg)?;
        for inc in batch.incomplete {
            if !sweep.excluded.iter().any(|e| e.uid == inc.uid) {
                sweep.excluded.push(ExcludedInstance {
                    uid: inc.uid,
                    reason: inc.reason,
                });
            }
        }
        per_rate.push(batch.estimates);
    }
    let usable: Vec<&NliInstance> = kept
        .iter()
        .filter(|i| !sweep.excluded.iter().any(|e| e.uid == i.uid))
        .collect();
    let target: BTreeMap<String, LabelDistribution> = usable.iter().map(|i| (i.uid.clone(), target[&i.uid])).collect();
    for ((&rate, est), sets) in spec.rates.iter().zip(per_rate).zip(&sets_by_rate) {
        let candidate: BTreeMap<String, LabelDistribution> = estimates_to_map(&est)
            .into_iter()
            .filter(|(u, _)| target.contains_key(u))
            .collect();
        let report = compare_to_target(&candidate, &target, &est_cfg.metric, Direction::CandidateFirst)?;
        let (replaced, slots) = target.keys().map(|u| &sets[u]).fold((0, 0), |(r, s), set| {
            (r + replaced_count(rate, set.len()), s + set.len())
        });
        sweep.rows.push(AblationRow {
            system: system.to_string(),
            rate,
            kind: spec.replacement_kind,
            mode: spec.mode,
            replaced,
            slots,
            report,
        });
        sweep.estimates.push((rate, est));
    }
    Ok(sweep)
}

const FT_TSV_COLUMNS: [&str; 6] = ["KL(dev)", "KL(test)", "CE(dev)", "CE(test)", "F1(dev)", "F1(test)"];

/// Tab-separated report with a header row. FT columns are emitted per named
/// block when any row carries one.
pub fn report_tsv(rows: &[AblationRow]) -> String {
    let ft_names: Vec<String> = {
        let mut names: Vec<String> = Vec::new();
        for b in rows.iter().flat_map(|r| &r.report.ft) {
            if !names.contains(&b.name) {
                names.push(b.name.clone());
            }
        }
        names
    };
    let mut header: Vec<String> = [
        "system", "rate", "kind", "mode", "replaced", "KL", "JSD", "TVD", "D.Corr",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for n in &ft_names {
        header.extend(FT_TSV_COLUMNS.iter().map(|c| format!("{n}:{c}")));
    }
    let mut out = header.join("\t");
    out.push('\n');
    for r in rows {
        let m = &r.report;
        let mut cells = vec![
            r.system.clone(),
            format!("{:.2}", r.rate),
            r.kind.as_str().to_string(),
            r.mode.to_string(),
            format!("{}/{}", r.replaced, r.slots),
            format!("{:.6}", m.kl),
            format!("{:.6}", m.jsd),
            format!("{:.6}", m.tvd),
            format!("{:.6}", m.dcorr),
        ];
        for n in &ft_names {
            match m.ft.iter().find(|b| &b.name == n) {
                Some(b) => cells.extend(
                    [
                        b.dev.kl,
                        b.test.kl,
                        b.dev.ce,
                        b.test.ce,
                        b.dev.weighted_f1,
                        b.test.weighted_f1,
                    ]
                    .iter()
                    .map(|v| format!("{v:.6}")),
                ),
                None => cells.extend(std::iter::repeat_n(String::from("-"), FT_TSV_COLUMNS.len())),
            }
        }
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}

/// Single-row TSV for a plain comparison.
pub fn metric_report_tsv(system: &str, report: &MetricReport) -> String {
    let mut header = vec![
        "system".to_string(),
        "KL".into(),
        "JSD".into(),
        "TVD".into(),
        "D.Corr".into(),
    ];
    let mut cells = vec![
        system.to_string(),
        format!("{:.6}", report.kl),
        format!("{:.6}", report.jsd),
        format!("{:.6}", report.tvd),
        format!("{:.6}", report.dcorr),
    ];
    for b in &report.ft {
        header.extend(FT_TSV_COLUMNS.iter().map(|c| format!("{}:{c}", b.name)));
        cells.extend(
            [
                b.dev.kl,
                b.test.kl,
                b.dev.ce,
                b.test.ce,
                b.dev.weighted_f1,
                b.test.weighted_f1,
            ]
            .iter()
            .map(|v| format!("{v:.6}")),
        );
    }
    format!("{}\n{}\n", header.join("\t"), cells.join("\t"))
}
