use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the three NLI labels. The declaration order (E < N < C) is the
/// canonical component order of every distribution and the tie-break order
/// for argmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NliLabel {
    #[serde(rename = "E")]
    Entailment,
    #[serde(rename = "N")]
    Neutral,
    #[serde(rename = "C")]
    Contradiction,
}

impl NliLabel {
    pub const ALL: [NliLabel; 3] = [NliLabel::Entailment, NliLabel::Neutral, NliLabel::Contradiction];

    pub fn index(self) -> usize {
        match self {
            NliLabel::Entailment => 0,
            NliLabel::Neutral => 1,
            NliLabel::Contradiction => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<NliLabel> {
        NliLabel::ALL.get(i).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            NliLabel::Entailment => "E",
            NliLabel::Neutral => "N",
            NliLabel::Contradiction => "C",
        }
    }

    /// Option text used in multiple-choice prompts.
    pub fn name(self) -> &'static str {
        match self {
            NliLabel::Entailment => "Entailment",
            NliLabel::Neutral => "Neutral",
            NliLabel::Contradiction => "Contradiction",
        }
    }

    /// Relationship phrase used in the explanation generation prompt.
    pub fn relationship(self) -> &'static str {
        match self {
            NliLabel::Entailment => "true (entailment)",
            NliLabel::Neutral => "undetermined (neutral)",
            NliLabel::Contradiction => "false (contradiction)",
        }
    }
}

impl fmt::Display for NliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown NLI label {0:?} (expected E, N or C)")]
pub struct UnknownLabel(pub String);

impl FromStr for NliLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "e" | "entailment" => Ok(NliLabel::Entailment),
            "n" | "neutral" => Ok(NliLabel::Neutral),
            "c" | "contradiction" => Ok(NliLabel::Contradiction),
            _ => Err(UnknownLabel(s.to_string())),
        }
    }
}

/// Parses a comma separated label list such as `E,E,N,C`.
pub fn parse_label_list(s: &str) -> Result<Vec<NliLabel>, UnknownLabel> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(NliLabel::from_str)
        .collect()
}
