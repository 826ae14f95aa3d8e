//! Building per-instance explanation sets from a pool of model
//! explanations, and swapping validated model explanations into human sets.

use std::collections::HashMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::explanation::{ExplanationPool, ExplanationRecord, ExplanationSet, ExplanationSource};
use crate::label::NliLabel;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SelectionError {
    #[error("no explanation with label {0} is available")]
    MissingLabelCoverage(NliLabel),
    #[error("label {label} needs {needed} explanations but only {available} are available")]
    InsufficientExplanations {
        label: NliLabel,
        needed: usize,
        available: usize,
    },
    #[error("label-guided selection needs at least one guidance label")]
    MissingGuidance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Model output order.
    First,
    /// Most whitespace tokens; ties go to the lower rank.
    #[default]
    Longest,
}

impl FromStr for SelectionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "first" => Ok(SelectionMode::First),
            "longest" => Ok(SelectionMode::Longest),
            _ => Err(format!("unknown selection mode {s:?} (expected first or longest)")),
        }
    }
}

impl std::fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SelectionMode::First => "first",
            SelectionMode::Longest => "longest",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    LabelFree,
    #[default]
    LabelGuided,
}

impl FromStr for SelectionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.replace('-', "_").as_str() {
            "label_free" => Ok(SelectionStrategy::LabelFree),
            "label_guided" => Ok(SelectionStrategy::LabelGuided),
            _ => Err(format!(
                "unknown selection strategy {s:?} (expected label_free or label_guided)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionSpec {
    pub strategy: SelectionStrategy,
    pub mode: SelectionMode,
    pub guidance_labels: Option<Vec<NliLabel>>,
}

impl SelectionSpec {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if self.strategy == SelectionStrategy::LabelGuided && self.guidance_labels.as_ref().is_none_or(|g| g.is_empty())
        {
            return Err(SelectionError::MissingGuidance);
        }
        Ok(())
    }
}

/// Among candidates of maximal token length, the one with the lowest rank.
pub fn tie_break<'a>(candidates: &[&'a ExplanationRecord]) -> Option<&'a ExplanationRecord> {
    candidates
        .iter()
        .copied()
        .min_by(|a, b| b.token_length().cmp(&a.token_length()).then(a.rank.cmp(&b.rank)))
}

/// Records ordered by preference under `mode`.
pub fn rank_by_mode(records: &[ExplanationRecord], mode: SelectionMode) -> Vec<&ExplanationRecord> {
    let mut v: Vec<&ExplanationRecord> = records.iter().collect();
    match mode {
        SelectionMode::First => v.sort_by_key(|r| r.rank),
        SelectionMode::Longest => v.sort_by(|a, b| b.token_length().cmp(&a.token_length()).then(a.rank.cmp(&b.rank))),
    }
    v
}

/// One explanation per label, in E, N, C order.
pub fn select_label_free(
    pool: &ExplanationPool,
    uid: &str,
    mode: SelectionMode,
) -> Result<ExplanationSet, SelectionError> {
    let mut out = Vec::with_capacity(3);
    for label in NliLabel::ALL {
        let best = rank_by_mode(pool.get(uid, label), mode)
            .into_iter()
            .next()
            .ok_or(SelectionError::MissingLabelCoverage(label))?;
        out.push(best.clone());
    }
    Ok(ExplanationSet::new(uid, out))
}

/// For a label appearing k times in `guidance`, the top k explanations of
/// that label under `mode`. Output follows guidance order.
pub fn select_label_guided(
    pool: &ExplanationPool,
    uid: &str,
    guidance: &[NliLabel],
    mode: SelectionMode,
) -> Result<ExplanationSet, SelectionError> {
    if guidance.is_empty() {
        return Err(SelectionError::MissingGuidance);
    }
    let mut needed = [0usize; 3];
    for l in guidance {
        needed[l.index()] += 1;
    }
    let mut ranked: [Vec<&ExplanationRecord>; 3] = Default::default();
    for label in NliLabel::ALL {
        let available = pool.get(uid, label);
        let k = needed[label.index()];
        if available.len() < k {
            return Err(SelectionError::InsufficientExplanations {
                label,
                needed: k,
                available: available.len(),
            });
        }
        ranked[label.index()] = rank_by_mode(available, mode);
    }
    let mut next = [0usize; 3];
    let out = guidance
        .iter()
        .map(|l| {
            let i = l.index();
            next[i] += 1;
            ranked[i][next[i] - 1].clone()
        })
        .collect();
    Ok(ExplanationSet::new(uid, out))
}

pub fn select(pool: &ExplanationPool, uid: &str, spec: &SelectionSpec) -> Result<ExplanationSet, SelectionError> {
    match spec.strategy {
        SelectionStrategy::LabelFree => select_label_free(pool, uid, spec.mode),
        SelectionStrategy::LabelGuided => {
            select_label_guided(pool, uid, spec.guidance_labels.as_deref().unwrap_or(&[]), spec.mode)
        }
    }
}

/// A human validator's judgment of one model explanation, keyed by
/// (uid, label, rank).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawValidation")]
pub struct ValidationRecord {
    pub uid: String,
    pub rank: u32,
    pub label: NliLabel,
    pub faithful: bool,
    #[serde(rename = "reasonable")]
    pub supports_reasonable_label: bool,
    pub annotator_label: Option<NliLabel>,
}

#[derive(Deserialize)]
struct RawValidation {
    uid: String,
    rank: u32,
    label: NliLabel,
    faithful: bool,
    reasonable: bool,
    #[serde(default)]
    annotator_label: Option<NliLabel>,
}

impl TryFrom<RawValidation> for ValidationRecord {
    type Error = String;

    fn try_from(r: RawValidation) -> Result<Self, String> {
        if r.reasonable && r.annotator_label.is_none() {
            return Err(format!(
                "{} rank {}: reasonable explanations need an annotator_label",
                r.uid, r.rank
            ));
        }
        Ok(ValidationRecord {
            uid: r.uid,
            rank: r.rank,
            label: r.label,
            faithful: r.faithful,
            supports_reasonable_label: r.reasonable,
            annotator_label: r.annotator_label,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplacementKind {
    Greedy,
    Representative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preference {
    Preferred,
    Unpreferred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacementStrategy {
    pub kind: ReplacementKind,
    pub preference: Preference,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplacementOutcome {
    pub set: ExplanationSet,
    pub replaced: usize,
}

impl ReplacementOutcome {
    pub fn rate(&self) -> f64 {
        if self.set.is_empty() {
            0.0
        } else {
            self.replaced as f64 / self.set.len() as f64
        }
    }
}

/// Model explanations of `uid` usable under `preference`, relabeled and in
/// ascending (rank, original label) order. Unfaithful or unvalidated
/// explanations are never usable.
pub fn partition_candidates(
    pool: &ExplanationPool,
    uid: &str,
    validations: &[ValidationRecord],
    preference: Preference,
) -> Vec<ExplanationRecord> {
    let index: HashMap<(&str, NliLabel, u32), &ValidationRecord> = validations
        .iter()
        .map(|v| ((v.uid.as_str(), v.label, v.rank), v))
        .collect();
    let mut out: Vec<(u32, NliLabel, ExplanationRecord)> = Vec::new();
    for r in pool.records_for(uid) {
        let Some(v) = index.get(&(uid, r.label, r.rank)) else {
            continue;
        };
        if !v.faithful {
            continue;
        }
        match (preference, v.supports_reasonable_label) {
            (Preference::Preferred, true) => {
                let mut rec = r.clone();
                rec.label = v.annotator_label.unwrap_or(r.label);
                out.push((r.rank, r.label, rec));
            }
            (Preference::Unpreferred, false) => out.push((r.rank, r.label, r.clone())),
            _ => {}
        }
    }
    out.sort_by_key(|a| (a.0, a.1));
    out.into_iter().map(|(_, _, r)| r).collect()
}

/// Replaces human explanations by validated model explanations of the same
/// label. Greedy replaces as many as can be label-matched, each model
/// explanation used once; representative replaces at most one human
/// explanation per attested label. The label multiset never changes.
pub fn apply_validation_replacement(
    human_set: &ExplanationSet,
    pool: &ExplanationPool,
    validations: &[ValidationRecord],
    strategy: ReplacementStrategy,
) -> ReplacementOutcome {
    let candidates = partition_candidates(pool, &human_set.uid, validations, strategy.preference);
    let mut used = vec![false; candidates.len()];
    let mut label_done = [false; 3];
    let mut replaced = 0;
    let mut out = Vec::with_capacity(human_set.len());
    for h in &human_set.explanations {
        let allowed = match strategy.kind {
            ReplacementKind::Greedy => true,
            ReplacementKind::Representative => !label_done[h.label.index()],
        };
        let pick = if allowed {
            candidates
                .iter()
                .enumerate()
                .position(|(i, c)| !used[i] && c.label == h.label)
        } else {
            None
        };
        match pick {
            Some(i) => {
                used[i] = true;
                label_done[h.label.index()] = true;
                replaced += 1;
                out.push(candidates[i].clone());
            }
            None => out.push(h.clone()),
        }
    }
    ReplacementOutcome {
        set: ExplanationSet::new(human_set.uid.clone(), out),
        replaced,
    }
}

/// Groups human explanation records into per-instance sets, preserving the
/// order in which records appear.
pub fn human_sets(records: &[ExplanationRecord]) -> Vec<ExplanationSet> {
    let mut order: Vec<String> = Vec::new();
    let mut by_uid: HashMap<String, Vec<ExplanationRecord>> = HashMap::new();
    for r in records.iter().filter(|r| r.source == ExplanationSource::Human) {
        if !by_uid.contains_key(&r.uid) {
            order.push(r.uid.clone());
        }
        by_uid.entry(r.uid.clone()).or_default().push(r.clone());
    }
    order
        .into_iter()
        .map(|uid| {
            let ex = by_uid.remove(&uid).unwrap_or_default();
            ExplanationSet::new(uid, ex)
        })
        .collect()
}
