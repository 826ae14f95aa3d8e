use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::label::NliLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplanationSource {
    Human,
    Model,
    Noise,
}

/// One explanation for one label of one instance. `rank` is the 1-based
/// position in the generating model's output list, or the annotator index
/// for human explanations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawExplanation")]
pub struct ExplanationRecord {
    pub uid: String,
    pub label: NliLabel,
    pub text: String,
    pub source: ExplanationSource,
    pub rank: u32,
}

#[derive(Deserialize)]
struct RawExplanation {
    uid: String,
    label: NliLabel,
    text: String,
    source: ExplanationSource,
    rank: u32,
}

impl TryFrom<RawExplanation> for ExplanationRecord {
    type Error = String;

    fn try_from(r: RawExplanation) -> Result<Self, Self::Error> {
        ExplanationRecord::new(r.uid, r.label, r.text, r.source, r.rank)
    }
}

impl ExplanationRecord {
    pub fn new(
        uid: impl Into<String>,
        label: NliLabel,
        text: impl Into<String>,
        source: ExplanationSource,
        rank: u32,
    ) -> Result<Self, String> {
        let uid = uid.into();
        let text = text.into();
        if uid.is_empty() {
            return Err("explanation uid must be nonempty".into());
        }
        if text.trim().is_empty() {
            return Err(format!("explanation text for {uid} must be nonempty"));
        }
        if rank == 0 {
            return Err(format!("explanation rank for {uid} must be >= 1"));
        }
        Ok(ExplanationRecord {
            uid,
            label,
            text,
            source,
            rank,
        })
    }

    /// Whitespace-delimited token count.
    pub fn token_length(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

/// An ordered explanation set attached to one target instance. Records may
/// come from other instances (noise replacement), so the set carries its
/// own uid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationSet {
    pub uid: String,
    pub explanations: Vec<ExplanationRecord>,
}

impl ExplanationSet {
    pub fn new(uid: impl Into<String>, explanations: Vec<ExplanationRecord>) -> Self {
        ExplanationSet {
            uid: uid.into(),
            explanations,
        }
    }

    pub fn len(&self) -> usize {
        self.explanations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.explanations.is_empty()
    }

    pub fn labels(&self) -> Vec<NliLabel> {
        self.explanations.iter().map(|e| e.label).collect()
    }

    /// Label multiset as (E, N, C) counts.
    pub fn label_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for e in &self.explanations {
            c[e.label.index()] += 1;
        }
        c
    }
}

/// uid -> label -> explanations ordered by rank.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExplanationPool {
    entries: BTreeMap<String, BTreeMap<NliLabel, Vec<ExplanationRecord>>>,
}

impl ExplanationPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records<I: IntoIterator<Item = ExplanationRecord>>(records: I) -> Self {
        let mut pool = Self::new();
        pool.extend(records);
        pool
    }

    pub fn extend<I: IntoIterator<Item = ExplanationRecord>>(&mut self, records: I) {
        for r in records {
            let list = self
                .entries
                .entry(r.uid.clone())
                .or_default()
                .entry(r.label)
                .or_default();
            list.push(r);
            list.sort_by_key(|e| e.rank);
        }
    }

    pub fn get(&self, uid: &str, label: NliLabel) -> &[ExplanationRecord] {
        self.entries
            .get(uid)
            .and_then(|m| m.get(&label))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn contains_uid(&self, uid: &str) -> bool {
        self.entries.contains_key(uid)
    }

    pub fn uids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// All records of one instance in (label, rank) order.
    pub fn records_for(&self, uid: &str) -> Vec<&ExplanationRecord> {
        self.entries
            .get(uid)
            .map(|m| m.values().flatten().collect())
            .unwrap_or_default()
    }

    /// All records in deterministic (uid, label, rank) order.
    pub fn records(&self) -> impl Iterator<Item = &ExplanationRecord> {
        self.entries.values().flat_map(|m| m.values().flatten())
    }

    pub fn len(&self) -> usize {
        self.records().count()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
