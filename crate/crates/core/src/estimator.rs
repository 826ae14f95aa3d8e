//! Model judgment distribution estimation from first-token option scores.
//!
//! For an explanation set of size m, every nonempty ordered subset of the
//! explanations is combined with each of the six option mappings. Each
//! configuration yields one distribution; distributions are averaged within
//! each subset size n, and the per-n means are averaged with equal weight.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, BackendResponse, CompletionRequest, LlmClient};
use crate::dataset::NliInstance;
use crate::distribution::{
    normalize_positive, softmax_temperature, DistributionError, LabelDistribution, LogitTriple, MetricConfig,
};
use crate::explanation::{ExplanationRecord, ExplanationSet};
use crate::prompt::{build_mcqa_prompt, OptionMapping, OPTION_LETTERS};

/// Largest explanation set accepted by [`enumerate_configurations`].
pub const MAX_EXPLANATIONS: usize = 8;

/// Default number of first-token alternatives requested from the backend.
pub const DEFAULT_TOP_K: u32 = 5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimatorError {
    #[error("explanation set of size {0} exceeds the limit of {MAX_EXPLANATIONS}")]
    TooManyExplanations(usize),
    #[error("option token {0} missing from first-token scores")]
    MissingOptionToken(char),
    #[error("transform failed: {0}")]
    Transform(#[from] DistributionError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{uid}: {failed} of {total} configurations failed (first: {first_error})")]
    Incomplete {
        uid: String,
        failed: usize,
        total: usize,
        first_error: String,
    },
}

/// One prompt variant: which explanations appear, in which order, under
/// which letter-to-label binding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Configuration {
    pub option_mapping: OptionMapping,
    /// Sorted indices into the explanation set.
    pub explanation_subset: Vec<usize>,
    /// The subset's indices in prompt order.
    pub ordering: Vec<usize>,
}

impl Configuration {
    pub fn new(option_mapping: OptionMapping, ordering: Vec<usize>) -> Self {
        let mut explanation_subset = ordering.clone();
        explanation_subset.sort_unstable();
        Configuration {
            option_mapping,
            explanation_subset,
            ordering,
        }
    }

    pub fn n(&self) -> usize {
        self.ordering.len()
    }

    /// Compact form such as `NEC|2,0`.
    pub fn code(&self) -> String {
        let order: Vec<String> = self.ordering.iter().map(usize::to_string).collect();
        format!("{}|{}", self.option_mapping.code(), order.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EstimationPlan {
    pub m: usize,
    pub configurations: Vec<Configuration>,
}

impl EstimationPlan {
    pub fn len(&self) -> usize {
        self.configurations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configurations.is_empty()
    }
}

fn combinations(m: usize, n: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, m: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            go(i + 1, m, n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, m, n, &mut Vec::with_capacity(n), &mut out);
    out
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

/// All configurations for a set of size m, ordered by subset size, then
/// subset, then ordering, then option mapping (all lexicographic).
pub fn enumerate_configurations(m: usize) -> Result<EstimationPlan, EstimatorError> {
    if m > MAX_EXPLANATIONS {
        return Err(EstimatorError::TooManyExplanations(m));
    }
    let mut configurations = Vec::new();
    if m == 0 {
        configurations.extend(
            OptionMapping::all()
                .into_iter()
                .map(|om| Configuration::new(om, Vec::new())),
        );
    }
    for n in 1..=m {
        for subset in combinations(m, n) {
            for ordering in permutations(&subset) {
                for om in OptionMapping::all() {
                    configurations.push(Configuration::new(om, ordering.clone()));
                }
            }
        }
    }
    Ok(EstimationPlan { m, configurations })
}

/// Per-label scores from the first-token entries. A letter matches entries
/// spelled `A` or ` A`; when both occur the larger score is kept.
pub fn extract_label_scores(response: &BackendResponse, mapping: OptionMapping) -> Result<LogitTriple, EstimatorError> {
    let mut by_label = [0.0; 3];
    for (i, letter) in OPTION_LETTERS.iter().enumerate() {
        let bare = letter.to_string();
        let spaced = format!(" {letter}");
        let best = response
            .first_token_logprobs
            .iter()
            .filter(|t| t.token == bare || t.token == spaced)
            .map(|t| t.logprob)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
            .ok_or(EstimatorError::MissingOptionToken(*letter))?;
        by_label[mapping.label_for_letter(i).index()] = best;
    }
    let [e, n, c] = by_label;
    Ok(LogitTriple::new(e, n, c)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TransformPreference {
    #[default]
    Auto,
    Normalize,
    Softmax,
}

impl FromStr for TransformPreference {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(TransformPreference::Auto),
            "normalize" => Ok(TransformPreference::Normalize),
            "softmax" => Ok(TransformPreference::Softmax),
            _ => Err(format!("unknown transform {s:?} (expected auto, normalize or softmax)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Normalize,
    Softmax,
}

impl TransformKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TransformKind::Normalize => "normalize",
            TransformKind::Softmax => "softmax",
        }
    }
}

/// Auto uses normalization when all three scores are positive and
/// temperature softmax otherwise. Forcing normalization on non-positive
/// scores is an error.
pub fn transform(
    scores: &LogitTriple,
    cfg: &MetricConfig,
    preference: TransformPreference,
) -> Result<(LabelDistribution, TransformKind), DistributionError> {
    let kind = match preference {
        TransformPreference::Auto if scores.all_positive() => TransformKind::Normalize,
        TransformPreference::Auto | TransformPreference::Softmax => TransformKind::Softmax,
        TransformPreference::Normalize => TransformKind::Normalize,
    };
    let dist = match kind {
        TransformKind::Normalize => normalize_positive(scores)?,
        TransformKind::Softmax => softmax_temperature(scores, cfg.softmax_temperature),
    };
    Ok((dist, kind))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub model_name: String,
    pub metric: MetricConfig,
    pub transform: TransformPreference,
    pub top_k: u32,
    /// When set, configurations are dispatched in a seeded random order.
    /// Results are identical either way.
    pub dispatch_shuffle_seed: Option<u64>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            model_name: "mock-model".into(),
            metric: MetricConfig::default(),
            transform: TransformPreference::Auto,
            top_k: DEFAULT_TOP_K,
            dispatch_shuffle_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawOutcome {
    pub configuration: Configuration,
    pub scores: LogitTriple,
    pub distribution: LabelDistribution,
    pub kind: TransformKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MjdEstimate {
    pub uid: String,
    pub final_distribution: LabelDistribution,
    pub per_n_means: BTreeMap<usize, LabelDistribution>,
    /// In plan order.
    pub raw: Vec<RawOutcome>,
}

impl MjdEstimate {
    /// `normalize` or `softmax` when every configuration used the same
    /// transform, `mixed` otherwise.
    pub fn transform_label(&self) -> &'static str {
        let mut kinds = self.raw.iter().map(|r| r.kind);
        match kinds.next() {
            Some(first) if kinds.all(|k| k == first) => first.as_str(),
            Some(_) => "mixed",
            None => "none",
        }
    }

    pub fn to_record(&self, tau: f64) -> MjdRecord {
        MjdRecord {
            uid: self.uid.clone(),
            final_distribution: self.final_distribution,
            per_n: self.per_n_means.clone(),
            transform: self.transform_label().to_string(),
            tau,
            plan_size: self.raw.len(),
        }
    }
}

/// Serialized form of an estimate, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MjdRecord {
    pub uid: String,
    #[serde(rename = "final")]
    pub final_distribution: LabelDistribution,
    pub per_n: BTreeMap<usize, LabelDistribution>,
    pub transform: String,
    pub tau: f64,
    pub plan_size: usize,
}

/// Groups per-configuration distributions by subset size, averages within
/// each group, then averages the group means with equal weight.
pub fn aggregate(raw: &[RawOutcome]) -> Option<(LabelDistribution, BTreeMap<usize, LabelDistribution>)> {
    let mut groups: BTreeMap<usize, Vec<&LabelDistribution>> = BTreeMap::new();
    for r in raw {
        groups.entry(r.configuration.n()).or_default().push(&r.distribution);
    }
    let per_n: BTreeMap<usize, LabelDistribution> = groups
        .into_iter()
        .map(|(n, ds)| LabelDistribution::mean(ds).map(|d| (n, d)))
        .collect::<Option<_>>()?;
    let final_distribution = LabelDistribution::mean(per_n.values())?;
    Some((final_distribution, per_n))
}

pub fn configuration_request(
    instance: &NliInstance,
    set: &ExplanationSet,
    configuration: &Configuration,
    cfg: &EstimatorConfig,
) -> CompletionRequest {
    let ordered: Vec<&ExplanationRecord> = configuration.ordering.iter().map(|&i| &set.explanations[i]).collect();
    CompletionRequest::scoring(
        &cfg.model_name,
        build_mcqa_prompt(instance, &ordered, configuration.option_mapping),
        cfg.top_k,
    )
}

fn score_one(
    instance: &NliInstance,
    set: &ExplanationSet,
    configuration: &Configuration,
    client: &LlmClient,
    cfg: &EstimatorConfig,
) -> Result<RawOutcome, EstimatorError> {
    let response = client.complete(&configuration_request(instance, set, configuration, cfg))?;
    let scores = extract_label_scores(&response, configuration.option_mapping)?;
    let (distribution, kind) = transform(&scores, &cfg.metric, cfg.transform)?;
    Ok(RawOutcome {
        configuration: configuration.clone(),
        scores,
        distribution,
        kind,
    })
}

/// Runs the full plan for one instance. Aggregation always proceeds in plan
/// order, so dispatch order cannot change the result. If any configuration
/// fails the instance is reported incomplete.
pub fn estimate_mjd(
    instance: &NliInstance,
    set: &ExplanationSet,
    client: &LlmClient,
    cfg: &EstimatorConfig,
) -> Result<MjdEstimate, EstimatorError> {
    let plan = enumerate_configurations(set.len())?;
    let mut dispatch: Vec<usize> = (0..plan.len()).collect();
    if let Some(seed) = cfg.dispatch_shuffle_seed {
        dispatch.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let results = client.run_parallel(&dispatch, |&i| {
        score_one(instance, set, &plan.configurations[i], client, cfg)
    });
    let mut slots: Vec<Option<Result<RawOutcome, EstimatorError>>> = (0..plan.len()).map(|_| None).collect();
    for (i, r) in dispatch.into_iter().zip(results) {
        slots[i] = Some(r);
    }
    let mut raw = Vec::with_capacity(plan.len());
    let mut failures = Vec::new();
    for slot in slots {
        match slot.expect("every configuration dispatched") {
            Ok(r) => raw.push(r),
            Err(e) => failures.push(e),
        }
    }
    if let Some(first) = failures.first() {
        if let EstimatorError::Backend(e @ BackendError::Auth(_)) = first {
            return Err(EstimatorError::Backend(e.clone()));
        }
        return Err(EstimatorError::Incomplete {
            uid: instance.uid.clone(),
            failed: failures.len(),
            total: plan.len(),
            first_error: first.to_string(),
        });
    }
    let (final_distribution, per_n_means) = aggregate(&raw).expect("plan is never empty");
    Ok(MjdEstimate {
        uid: instance.uid.clone(),
        final_distribution,
        per_n_means,
        raw,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncompleteInstance {
    pub uid: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct EstimationBatch {
    pub estimates: Vec<MjdEstimate>,
    pub incomplete: Vec<IncompleteInstance>,
}

/// Estimates every instance that has an explanation set; instances are
/// processed in the given order. Authentication failures abort the batch.
pub fn estimate_batch(
    instances: &[NliInstance],
    sets: &BTreeMap<String, ExplanationSet>,
    client: &LlmClient,
    cfg: &EstimatorConfig,
) -> Result<EstimationBatch, EstimatorError> {
    let mut batch = EstimationBatch::default();
    for inst in instances {
        let empty = ExplanationSet::new(inst.uid.clone(), Vec::new());
        let set = sets.get(&inst.uid).unwrap_or(&empty);
        match estimate_mjd(inst, set, client, cfg) {
            Ok(e) => batch.estimates.push(e),
            Err(e @ EstimatorError::Backend(BackendError::Auth(_))) => return Err(e),
            Err(e) => {
                log::warn!("estimation incomplete for {}: {e}", inst.uid);
                batch.incomplete.push(IncompleteInstance {
                    uid: inst.uid.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(batch)
}
