//! Line-delimited JSON corpora: instances, multi-annotator labels,
//! explanations and reference distributions, plus overlap alignment and
//! seeded dev/test splitting.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::distribution::LabelDistribution;
use crate::explanation::ExplanationRecord;
use crate::label::NliLabel;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}line {line}: {message}", .path.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
    Parse {
        path: Option<PathBuf>,
        line: usize,
        message: String,
    },
    #[error("duplicate uid {0:?}")]
    DuplicateUid(String),
    #[error("no uid is shared by every source")]
    EmptyIntersection,
    #[error("empty input")]
    EmptyInput,
    #[error("dev fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
}

impl DatasetError {
    fn with_path(self, path: &Path) -> Self {
        match self {
            DatasetError::Parse {
                path: None,
                line,
                message,
            } => DatasetError::Parse {
                path: Some(path.to_path_buf()),
                line,
                message,
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance")]
pub struct NliInstance {
    pub uid: String,
    pub premise: String,
    pub hypothesis: String,
}

#[derive(Deserialize)]
struct RawInstance {
    uid: String,
    premise: String,
    hypothesis: String,
}

impl TryFrom<RawInstance> for NliInstance {
    type Error = String;

    fn try_from(r: RawInstance) -> Result<Self, String> {
        NliInstance::new(r.uid, r.premise, r.hypothesis)
    }
}

impl NliInstance {
    pub fn new(
        uid: impl Into<String>,
        premise: impl Into<String>,
        hypothesis: impl Into<String>,
    ) -> Result<Self, String> {
        let (uid, premise, hypothesis) = (uid.into(), premise.into(), hypothesis.into());
        if uid.is_empty() {
            return Err("uid must be nonempty".into());
        }
        if premise.trim().is_empty() {
            return Err(format!("premise of {uid} must be nonempty"));
        }
        if hypothesis.trim().is_empty() {
            return Err(format!("hypothesis of {uid} must be nonempty"));
        }
        Ok(NliInstance {
            uid,
            premise,
            hypothesis,
        })
    }
}

/// An instance with a single gold label, for classifier evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledInstance {
    #[serde(flatten)]
    pub instance: NliInstance,
    pub label: NliLabel,
}

pub fn load_labeled_instances(path: &Path) -> Result<Vec<LabeledInstance>, DatasetError> {
    let items: Vec<LabeledInstance> = read_jsonl(path)?;
    ensure_unique(items.iter().map(|i| i.instance.uid.as_str()))?;
    Ok(items)
}

/// Labels from several annotators of one source (e.g. 4 for VariErr, 5 for MNLI).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLabels")]
pub struct LabelRecord {
    pub uid: String,
    pub labels: Vec<NliLabel>,
    pub source: String,
}

#[derive(Deserialize)]
struct RawLabels {
    uid: String,
    labels: Vec<NliLabel>,
    source: String,
}

impl TryFrom<RawLabels> for LabelRecord {
    type Error = String;

    fn try_from(r: RawLabels) -> Result<Self, String> {
        if r.uid.is_empty() {
            return Err("uid must be nonempty".into());
        }
        if r.labels.is_empty() || r.labels.len() > 100 {
            return Err(format!(
                "{} must carry between 1 and 100 labels, got {}",
                r.uid,
                r.labels.len()
            ));
        }
        Ok(LabelRecord {
            uid: r.uid,
            labels: r.labels,
            source: r.source,
        })
    }
}

impl LabelRecord {
    /// Count-normalized label distribution.
    pub fn distribution(&self) -> LabelDistribution {
        LabelDistribution::from_labels(&self.labels).expect("label record is nonempty")
    }

    /// Most frequent label, ties broken in E < N < C order.
    pub fn majority(&self) -> NliLabel {
        self.distribution().argmax()
    }
}

/// A reference (human judgment) distribution. On disk `probs` may be
/// rounded; sums within 1e-6 of one are renormalized on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawReference")]
pub struct ReferenceDistributionRecord {
    pub uid: String,
    #[serde(rename = "probs")]
    pub distribution: LabelDistribution,
    #[serde(rename = "count")]
    pub annotator_count: u32,
}

#[derive(Deserialize)]
struct RawReference {
    uid: String,
    probs: [f64; 3],
    count: u32,
}

impl TryFrom<RawReference> for ReferenceDistributionRecord {
    type Error = String;

    fn try_from(r: RawReference) -> Result<Self, String> {
        if r.uid.is_empty() {
            return Err("uid must be nonempty".into());
        }
        if r.count == 0 {
            return Err(format!("{}: count must be >= 1", r.uid));
        }
        let sum: f64 = r.probs.iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() > 1e-6 {
            return Err(format!("{}: probs sum to {sum}", r.uid));
        }
        let distribution = LabelDistribution::from_weights(r.probs).map_err(|e| format!("{}: {e}", r.uid))?;
        Ok(ReferenceDistributionRecord {
            uid: r.uid,
            distribution,
            annotator_count: r.count,
        })
    }
}

/// Parses line-delimited JSON. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line).map_err(|e| DatasetError::Parse {
            path: None,
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_jsonl(&text).map_err(|e| e.with_path(path))
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut s = String::new();
    for item in items {
        s.push_str(&serde_json::to_string(item).expect("record serialization cannot fail"));
        s.push('\n');
    }
    s
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(to_jsonl(items).as_bytes()).map_err(io)
}

fn ensure_unique<'a, I: IntoIterator<Item = &'a str>>(uids: I) -> Result<(), DatasetError> {
    let mut seen = HashSet::new();
    for uid in uids {
        if !seen.insert(uid) {
            return Err(DatasetError::DuplicateUid(uid.to_string()));
        }
    }
    Ok(())
}

pub fn parse_instances(text: &str) -> Result<Vec<NliInstance>, DatasetError> {
    let instances: Vec<NliInstance> = parse_jsonl(text)?;
    ensure_unique(instances.iter().map(|i| i.uid.as_str()))?;
    Ok(instances)
}

pub fn load_instances(path: &Path) -> Result<Vec<NliInstance>, DatasetError> {
    let instances: Vec<NliInstance> = read_jsonl(path)?;
    ensure_unique(instances.iter().map(|i| i.uid.as_str()))?;
    Ok(instances)
}

/// Loads label records grouped by their `source` field. A uid may appear
/// once per source.
pub fn load_label_records(path: &Path) -> Result<BTreeMap<String, Vec<LabelRecord>>, DatasetError> {
    group_label_records(read_jsonl(path)?)
}

pub fn group_label_records(records: Vec<LabelRecord>) -> Result<BTreeMap<String, Vec<LabelRecord>>, DatasetError> {
    let mut by_source: BTreeMap<String, Vec<LabelRecord>> = BTreeMap::new();
    for r in records {
        by_source.entry(r.source.clone()).or_default().push(r);
    }
    for records in by_source.values() {
        ensure_unique(records.iter().map(|r| r.uid.as_str()))?;
    }
    Ok(by_source)
}

pub fn load_reference_distributions(path: &Path) -> Result<Vec<ReferenceDistributionRecord>, DatasetError> {
    let records: Vec<ReferenceDistributionRecord> = read_jsonl(path)?;
    ensure_unique(records.iter().map(|r| r.uid.as_str()))?;
    Ok(records)
}

pub fn load_explanations(path: &Path) -> Result<Vec<ExplanationRecord>, DatasetError> {
    read_jsonl(path)
}

/// Every input restricted to the uids that all of them share.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedCorpus {
    pub instances: Vec<NliInstance>,
    pub label_sources: BTreeMap<String, BTreeMap<String, LabelRecord>>,
    pub references: BTreeMap<String, ReferenceDistributionRecord>,
    pub explanations: Vec<ExplanationRecord>,
    /// uids removed from each source by the intersection, keyed by source name.
    pub dropped: BTreeMap<String, Vec<String>>,
}

impl AlignedCorpus {
    pub fn uids(&self) -> Vec<&str> {
        self.instances.iter().map(|i| i.uid.as_str()).collect()
    }
}

/// Restricts all sources to their common uid set. Instance order is kept.
/// `explanations == None` means no explanation source takes part.
pub fn align_overlap(
    instances: &[NliInstance],
    label_sources: &BTreeMap<String, Vec<LabelRecord>>,
    reference: &[ReferenceDistributionRecord],
    explanations: Option<&[ExplanationRecord]>,
) -> Result<AlignedCorpus, DatasetError> {
    let mut sets: Vec<(String, BTreeSet<&str>)> = vec![
        ("instances".into(), instances.iter().map(|i| i.uid.as_str()).collect()),
        ("reference".into(), reference.iter().map(|r| r.uid.as_str()).collect()),
    ];
    for (name, records) in label_sources {
        sets.push((
            format!("labels:{name}"),
            records.iter().map(|r| r.uid.as_str()).collect(),
        ));
    }
    if let Some(ex) = explanations {
        sets.push(("explanations".into(), ex.iter().map(|r| r.uid.as_str()).collect()));
    }
    let mut common = sets[0].1.clone();
    for (_, s) in &sets[1..] {
        common = common.intersection(s).copied().collect();
    }
    if common.is_empty() {
        return Err(DatasetError::EmptyIntersection);
    }
    let dropped = sets
        .iter()
        .map(|(name, s)| (name.clone(), s.difference(&common).map(|u| u.to_string()).collect()))
        .collect();
    Ok(AlignedCorpus {
        instances: instances
            .iter()
            .filter(|i| common.contains(i.uid.as_str()))
            .cloned()
            .collect(),
        label_sources: label_sources
            .iter()
            .map(|(name, records)| {
                let kept = records
                    .iter()
                    .filter(|r| common.contains(r.uid.as_str()))
                    .map(|r| (r.uid.clone(), r.clone()))
                    .collect();
                (name.clone(), kept)
            })
            .collect(),
        references: reference
            .iter()
            .filter(|r| common.contains(r.uid.as_str()))
            .map(|r| (r.uid.clone(), r.clone()))
            .collect(),
        explanations: explanations
            .unwrap_or(&[])
            .iter()
            .filter(|r| common.contains(r.uid.as_str()))
            .cloned()
            .collect(),
        dropped,
    })
}

/// Seeded shuffle, then the first `ceil(f * N)` uids form the dev split and
/// the rest the test split.
pub fn split_dev_test(
    uids: &[String],
    dev_fraction: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>), DatasetError> {
    if uids.is_empty() {
        return Err(DatasetError::EmptyInput);
    }
    if !(dev_fraction > 0.0 && dev_fraction < 1.0) {
        return Err(DatasetError::BadFraction(dev_fraction));
    }
    let mut shuffled = uids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_dev = ((dev_fraction * uids.len() as f64).ceil() as usize).min(uids.len());
    let test = shuffled.split_off(n_dev);
    Ok((shuffled, test))
}
