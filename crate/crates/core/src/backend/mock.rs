//! Deterministic offline backend.
//!
//! Multiple-choice prompts are scored per label from a hash of the
//! instance plus a push from every embedded comment towards the label it
//! supports. The push grows with the comment's lexical overlap with the
//! premise and hypothesis, so comments copied from unrelated instances move
//! the distribution less. A fixed preference for early option letters
//! imitates position bias. Generation prompts yield a numbered list of
//! 4 to 6 templated explanations.

use std::collections::HashSet;

use sha2::{Digest, Sha256};

use super::{Backend, BackendError, BackendResponse, CompletionRequest, TokenLogprob};
use crate::label::NliLabel;
use crate::prompt::{parse_generation_prompt, parse_mcqa_prompt, ParsedGeneration, ParsedMcqa, OPTION_LETTERS};

const LETTER_BIAS: [f64; 3] = [0.3, 0.15, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MockBackend {
    seed: u64,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        MockBackend { seed }
    }
}

impl Backend for MockBackend {
    fn id(&self) -> String {
        format!("mock:seed={}", self.seed)
    }

    fn complete(&self, request: &CompletionRequest) -> Result<BackendResponse, BackendError> {
        Ok(mock_response(request, self.seed))
    }
}

fn hash_u64(seed: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

/// Uniform in [0, 1).
fn hash_unit(seed: u64, parts: &[&str]) -> f64 {
    (hash_u64(seed, parts) >> 11) as f64 / (1u64 << 53) as f64
}

const STOPWORDS: &[&str] = &[
    "the",
    "and",
    "that",
    "this",
    "with",
    "for",
    "are",
    "was",
    "were",
    "not",
    "but",
    "its",
    "his",
    "her",
    "their",
    "there",
    "they",
    "from",
    "has",
    "have",
    "had",
    "been",
    "which",
    "who",
    "what",
    "when",
    "where",
    "would",
    "could",
    "does",
    "did",
    "context",
    "statement",
    "true",
    "false",
    "because",
    "also",
    "than",
    "then",
    "into",
    "any",
    "all",
    "only",
    "may",
    "might",
    "can",
    "cannot",
    "about",
    "says",
    "say",
    "said",
    "whether",
];

fn content_words(s: &str) -> HashSet<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.chars().count() >= 3)
        .map(str::to_lowercase)
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .collect()
}

fn mcqa_scores(p: &ParsedMcqa, seed: u64) -> [f64; 3] {
    let instance_words = content_words(&format!("{} {}", p.premise, p.hypothesis));
    let mut by_label = [0.0; 3];
    for label in NliLabel::ALL {
        by_label[label.index()] = 2.0 * hash_unit(seed, &["base", &p.premise, &p.hypothesis, label.code()]) - 1.0;
    }
    for (text, label) in &p.comments {
        let words = content_words(text);
        let relevance = if words.is_empty() {
            0.0
        } else {
            words.intersection(&instance_words).count() as f64 / words.len() as f64
        };
        let jitter = hash_unit(seed, &["comment", &p.premise, text]);
        by_label[label.index()] += 0.4 + 2.6 * relevance + 0.2 * jitter;
    }
    std::array::from_fn(|letter| by_label[p.mapping.label_for_letter(letter).index()] + LETTER_BIAS[letter])
}

fn log_softmax(s: [f64; 3]) -> [f64; 3] {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    s.map(|v| (v - lse).min(0.0))
}

fn mcqa_response(p: &ParsedMcqa, seed: u64) -> BackendResponse {
    let logprobs = log_softmax(mcqa_scores(p, seed));
    let mut entries: Vec<TokenLogprob> = (0..3)
        .map(|i| TokenLogprob {
            token: OPTION_LETTERS[i].to_string(),
            logprob: logprobs[i],
        })
        .collect();
    // highest first, ties in letter order
    entries.sort_by(|a, b| b.logprob.total_cmp(&a.logprob));
    BackendResponse {
        text: entries[0].token.clone(),
        first_token_logprobs: entries,
    }
}

fn lower_first(s: &str) -> String {
    let s = s.trim().trim_end_matches(['.', '!', '?']);
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_lowercase().chain(c).collect(),
        None => String::new(),
    }
}

fn upper_first(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn templates(label: NliLabel) -> &'static [&'static str] {
    match label {
        NliLabel::Entailment => &[
            "The context states that {p}, so {h} follows directly.",
            "{H} is a restatement of part of the context.",
            "If {p}, then it must be the case that {h}.",
            "The situation described, where {p}, already includes that {h}.",
            "Nothing in the context conflicts with {h}, and the described events guarantee it.",
            "The premise supports {h} because it describes that {p}.",
            "Given that {p}, the claim {h} is necessarily true.",
        ],
        NliLabel::Neutral => &[
            "The context does not mention whether {h}.",
            "{H} may or may not hold; the context only says that {p}.",
            "It is possible that {h}, but nothing confirms it.",
            "The context describes that {p} without giving information about whether {h}.",
            "Additional facts would be needed to decide if {h}.",
            "Knowing that {p} leaves open whether {h}.",
            "The claim {h} goes beyond what is described.",
        ],
        NliLabel::Contradiction => &[
            "The context states that {p}, which rules out that {h}.",
            "{H} cannot hold if {p}.",
            "The claim {h} conflicts with the described situation.",
            "Since {p}, it is not the case that {h}.",
            "The context describes the opposite of {h}.",
            "Both {p} and {h} cannot be true at once.",
            "The premise excludes {h} because {p}.",
        ],
    }
}

fn generation_response(g: &ParsedGeneration, seed: u64) -> BackendResponse {
    let k = 4 + (hash_u64(seed, &["count", &g.premise, &g.hypothesis, g.label.code()]) % 3) as usize;
    let p = lower_first(&g.premise);
    let h = lower_first(&g.hypothesis);
    let mut order: Vec<(u64, &str)> = templates(g.label)
        .iter()
        .map(|t| (hash_u64(seed, &["order", &g.premise, &g.hypothesis, t]), *t))
        .collect();
    order.sort();
    let items: Vec<String> = order
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, (_, t))| {
            let body = t.replace("{p}", &p).replace("{h}", &h).replace("{H}", &upper_first(&h));
            format!("{}. {}", i + 1, body)
        })
        .collect();
    BackendResponse {
        text: items.join("\n"),
        first_token_logprobs: vec![TokenLogprob {
            token: "1".into(),
            logprob: -0.01,
        }],
    }
}

/// Deterministic response for `request` under `seed`.
pub fn mock_response(request: &CompletionRequest, seed: u64) -> BackendResponse {
    let content = request.messages.last().map(|m| m.content.as_str()).unwrap_or("");
    if let Some(p) = parse_mcqa_prompt(content) {
        return mcqa_response(&p, seed);
    }
    if let Some(g) = parse_generation_prompt(content) {
        return generation_response(&g, seed);
    }
    BackendResponse {
        text: "I cannot comply.".into(),
        first_token_logprobs: vec![TokenLogprob {
            token: "I".into(),
            logprob: -0.05,
        }],
    }
}
