//! Model explanation generation: one prompt per (instance, label), output
//! parsed into ranked explanation records.

use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, CompletionRequest, LlmClient};
use crate::dataset::NliInstance;
use crate::explanation::{ExplanationRecord, ExplanationSource};
use crate::label::NliLabel;

pub use crate::prompt::build_generation_prompt;

/// Token budget for generation requests.
pub const GENERATION_MAX_TOKENS: u32 = 512;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenerationError {
    #[error("no enumerated explanation items found in completion")]
    NoItemsFound,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

fn enumerator() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:\d{1,3}[.)]|[-•])\s*(.*)$").expect("valid regex"))
}

/// Splits a completion into list items. Items start at lines opening with
/// `1.`, `2)`, `-` or `•`; unmarked lines before the first item are
/// dropped, unmarked lines after an item continue it until a blank line.
pub fn parse_explanation_list(raw: &str) -> Result<Vec<String>, GenerationError> {
    let mut items: Vec<String> = Vec::new();
    let mut open = false;
    for line in raw.lines() {
        if let Some(c) = enumerator().captures(line) {
            items.push(c[1].trim().to_string());
            open = true;
        } else if line.trim().is_empty() {
            open = false;
        } else if open {
            let last = items.last_mut().expect("open item exists");
            if !last.is_empty() {
                last.push(' ');
            }
            last.push_str(line.trim());
        }
    }
    items.retain(|s| !s.is_empty());
    if items.is_empty() {
        return Err(GenerationError::NoItemsFound);
    }
    Ok(items)
}

/// Turns parsed items into records with contiguous ranks, dropping exact
/// duplicates after their first occurrence.
pub fn items_to_records(uid: &str, label: NliLabel, items: &[String]) -> Vec<ExplanationRecord> {
    let mut seen = HashSet::new();
    items
        .iter()
        .filter(|t| seen.insert(t.as_str()))
        .enumerate()
        .filter_map(|(i, t)| ExplanationRecord::new(uid, label, t.clone(), ExplanationSource::Model, i as u32 + 1).ok())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub uid: String,
    pub label: NliLabel,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenerationOutcome {
    pub records: Vec<ExplanationRecord>,
    pub failures: Vec<GenerationFailure>,
}

fn generate_one(
    instance: &NliInstance,
    label: NliLabel,
    client: &LlmClient,
    model_name: &str,
) -> Result<Vec<ExplanationRecord>, GenerationError> {
    let request = CompletionRequest::generation(
        model_name,
        build_generation_prompt(instance, label),
        GENERATION_MAX_TOKENS,
    );
    let response = client.complete(&request)?;
    let items = parse_explanation_list(&response.text)?;
    Ok(items_to_records(&instance.uid, label, &items))
}

/// One backend call per (instance, label). Failures are recorded per pair
/// and do not abort the batch; authentication errors do, since every later
/// call would fail the same way. Output order is instance order, then label
/// order, regardless of completion order.
pub fn generate_explanations(
    instances: &[NliInstance],
    labels: &[NliLabel],
    client: &LlmClient,
    model_name: &str,
) -> Result<GenerationOutcome, BackendError> {
    let jobs: Vec<(&NliInstance, NliLabel)> = instances
        .iter()
        .flat_map(|i| labels.iter().map(move |&l| (i, l)))
        .collect();
    let results = client.run_parallel(&jobs, |(inst, label)| generate_one(inst, *label, client, model_name));
    let mut outcome = GenerationOutcome::default();
    for ((inst, label), result) in jobs.into_iter().zip(results) {
        match result {
            Ok(records) => outcome.records.extend(records),
            Err(GenerationError::Backend(e @ BackendError::Auth(_))) => return Err(e),
            Err(e) => {
                log::warn!("generation failed for {} / {}: {e}", inst.uid, label);
                outcome.failures.push(GenerationFailure {
                    uid: inst.uid.clone(),
                    label,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(outcome)
}
