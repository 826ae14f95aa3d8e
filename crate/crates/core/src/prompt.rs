//! Prompt templates for explanation generation and multiple-choice
//! judgment elicitation, plus the inverse parsers the mock backend uses to
//! recover the fields it scores.

use serde::{Deserialize, Serialize};

use crate::backend::ChatMessage;
use crate::dataset::NliInstance;
use crate::explanation::ExplanationRecord;
use crate::label::NliLabel;

const GENERATION_HEAD: &str = "You are an expert in Natural Language Inference (NLI). Please list all possible explanations for why the following statement is ";
const GENERATION_TAIL: &str = " given the context below without introductory phrases.";

const MCQA_ORIGINAL_HEAD: &str = "Please determine whether the following Statement is true (entailment), undetermined (neutral), or false (contradiction) given the Context below and select ONE of the listed options and start your answer with a single letter.";
const MCQA_COMMENTS_HEAD: &str = "Please carefully and fairly base your selection on the comments below to determine whether the following Statement is true (entailment), undetermined (neutral), or false (contradiction) given the Context below and select ONE of the listed options and start your answer with a single letter.";

const CHOOSE: &str = ", so I choose ";

pub const OPTION_LETTERS: [char; 3] = ['A', 'B', 'C'];

/// Bijection from option letters A, B, C to labels; `labels()[i]` is the
/// label printed after letter `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OptionMapping([NliLabel; 3]);

impl OptionMapping {
    pub const IDENTITY: OptionMapping =
        OptionMapping([NliLabel::Entailment, NliLabel::Neutral, NliLabel::Contradiction]);

    pub fn new(labels: [NliLabel; 3]) -> Option<Self> {
        let mut seen = [false; 3];
        for l in labels {
            if std::mem::replace(&mut seen[l.index()], true) {
                return None;
            }
        }
        Some(OptionMapping(labels))
    }

    /// The six mappings in lexicographic order of the label permutation;
    /// the identity comes first.
    pub fn all() -> [OptionMapping; 6] {
        use NliLabel::*;
        [
            OptionMapping([Entailment, Neutral, Contradiction]),
            OptionMapping([Entailment, Contradiction, Neutral]),
            OptionMapping([Neutral, Entailment, Contradiction]),
            OptionMapping([Neutral, Contradiction, Entailment]),
            OptionMapping([Contradiction, Entailment, Neutral]),
            OptionMapping([Contradiction, Neutral, Entailment]),
        ]
    }

    pub fn labels(&self) -> [NliLabel; 3] {
        self.0
    }

    pub fn label_for_letter(&self, letter_index: usize) -> NliLabel {
        self.0[letter_index]
    }

    pub fn letter_for(&self, label: NliLabel) -> char {
        let i = self.0.iter().position(|&l| l == label).expect("mapping is a bijection");
        OPTION_LETTERS[i]
    }

    /// Compact form such as `ENC`.
    pub fn code(&self) -> String {
        self.0.iter().map(|l| l.code()).collect()
    }
}

fn user(content: String) -> Vec<ChatMessage> {
    vec![ChatMessage {
        role: "user".into(),
        content,
    }]
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn build_generation_prompt(instance: &NliInstance, label: NliLabel) -> Vec<ChatMessage> {
    user(format!(
        "{GENERATION_HEAD}{}{GENERATION_TAIL}\nContext: {}\nStatement: {}\nAnswer:",
        label.relationship(),
        instance.premise,
        instance.hypothesis
    ))
}

/// Multiple-choice prompt. With no explanations this is the plain
/// question; otherwise each explanation becomes a numbered comment ending
/// with the label it supports, in the given order.
pub fn build_mcqa_prompt(
    instance: &NliInstance,
    explanations: &[&ExplanationRecord],
    mapping: OptionMapping,
) -> Vec<ChatMessage> {
    let mut s = String::new();
    s.push_str(if explanations.is_empty() {
        MCQA_ORIGINAL_HEAD
    } else {
        MCQA_COMMENTS_HEAD
    });
    s.push_str(&format!(
        "\nContext: {}\nStatement: {}",
        instance.premise, instance.hypothesis
    ));
    for (i, e) in explanations.iter().enumerate() {
        s.push_str(&format!(
            "\nComment {}: {}{CHOOSE}{}",
            i + 1,
            one_line(&e.text),
            e.label.name()
        ));
    }
    let l = mapping.labels();
    s.push_str(&format!(
        "\nA. {}\nB. {}\nC. {}.\nAnswer:",
        l[0].name(),
        l[1].name(),
        l[2].name()
    ));
    user(s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedGeneration {
    pub label: NliLabel,
    pub premise: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedMcqa {
    pub premise: String,
    pub hypothesis: String,
    pub comments: Vec<(String, NliLabel)>,
    pub mapping: OptionMapping,
}

fn split_context(body: &str) -> Option<(String, &str)> {
    let rest = body.strip_prefix("\nContext: ")?;
    let (premise, rest) = rest.split_once("\nStatement: ")?;
    Some((premise.to_string(), rest))
}

/// Recovers the fields of a prompt produced by [`build_generation_prompt`].
pub fn parse_generation_prompt(content: &str) -> Option<ParsedGeneration> {
    let rest = content.strip_prefix(GENERATION_HEAD)?;
    let (relationship, rest) = rest.split_once(GENERATION_TAIL)?;
    let label = NliLabel::ALL.into_iter().find(|l| l.relationship() == relationship)?;
    let (premise, rest) = split_context(rest)?;
    let hypothesis = rest.strip_suffix("\nAnswer:")?;
    Some(ParsedGeneration {
        label,
        premise,
        hypothesis: hypothesis.to_string(),
    })
}

/// Recovers the fields of a prompt produced by [`build_mcqa_prompt`].
pub fn parse_mcqa_prompt(content: &str) -> Option<ParsedMcqa> {
    let (with_comments, rest) = if let Some(r) = content.strip_prefix(MCQA_COMMENTS_HEAD) {
        (true, r)
    } else {
        (false, content.strip_prefix(MCQA_ORIGINAL_HEAD)?)
    };
    let (premise, rest) = split_context(rest)?;
    let rest = rest.strip_suffix(".\nAnswer:")?;
    let mut lines: Vec<&str> = rest.split('\n').collect();
    if lines.len() < 4 {
        return None;
    }
    let options = lines.split_off(lines.len() - 3);
    let mut labels = [NliLabel::Entailment; 3];
    for (i, line) in options.iter().enumerate() {
        let name = line.strip_prefix(&format!("{}. ", OPTION_LETTERS[i]))?;
        labels[i] = NliLabel::ALL.into_iter().find(|l| l.name() == name)?;
    }
    let mapping = OptionMapping::new(labels)?;
    // first line is the hypothesis; comment lines follow it
    let hypothesis = lines[0].to_string();
    let mut comments = Vec::new();
    for (i, line) in lines[1..].iter().enumerate() {
        let body = line.strip_prefix(&format!("Comment {}: ", i + 1))?;
        let (text, label) = body.rsplit_once(CHOOSE)?;
        let label = NliLabel::ALL.into_iter().find(|l| l.name() == label)?;
        comments.push((text.to_string(), label));
    }
    if with_comments == comments.is_empty() {
        return None;
    }
    Some(ParsedMcqa {
        premise,
        hypothesis,
        comments,
        mapping,
    })
}
