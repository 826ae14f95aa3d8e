use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hjd_core::ablation::Direction;
use hjd_core::backend::BackendKind;
use hjd_core::label::NliLabel;
use hjd_core::selection::{Preference, ReplacementKind, SelectionMode, SelectionStrategy};

#[derive(Debug, Parser)]
#[command(
    name = "hjd",
    version,
    about = "Estimate and evaluate model judgment distributions for NLI"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand; each wins over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSONL response cache.
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_backend)]
    pub backend: Option<BackendKind>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    s.parse().map_err(|e: hjd_core::backend::BackendError| e.to_string())
}

fn parse_label(s: &str) -> Result<NliLabel, String> {
    s.parse().map_err(|e: hjd_core::label::UnknownLabel| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate model explanations for every instance and label.
    Generate(GenerateArgs),
    /// Build explanation sets from the model explanation pool.
    Select(SelectArgs),
    /// Estimate model judgment distributions.
    Estimate(EstimateArgs),
    /// Compare a distribution file against a target.
    Evaluate(EvaluateArgs),
    /// Replacement-rate sweep against a target.
    Ablate(AblateArgs),
    /// Within-instance explanation variability.
    Variability(VariabilityArgs),
    /// Train a proxy classifier on soft labels.
    TrainProxy(TrainProxyArgs),
    /// Compare a proxy classifier with a reference classifier.
    EvalProxy(EvalProxyArgs),
    /// Barycentric coordinates as CSV plus an SVG scatter.
    ExportTernary(ExportTernaryArgs),
    /// Run every stage on the configured corpus.
    Pipeline,
    /// Print config diagnostics and exit nonzero if there are any.
    CheckConfig,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Labels to generate for (default: all three).
    #[arg(long, value_delimiter = ',', value_parser = parse_label)]
    pub labels: Vec<NliLabel>,
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    /// Model explanation pool (default: <out>/model_explanations.jsonl).
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long)]
    pub strategy: Option<SelectionStrategy>,
    #[arg(long)]
    pub mode: Option<SelectionMode>,
    /// `human` or a label source name from the labels file.
    #[arg(long)]
    pub guidance: Option<String>,
    /// Replace human explanations with validated model explanations instead.
    #[arg(long, value_parser = parse_replacement_kind)]
    pub validated: Option<ReplacementKind>,
    #[arg(long, value_parser = parse_preference, default_value = "preferred")]
    pub preference: Preference,
}

fn parse_replacement_kind(s: &str) -> Result<ReplacementKind, String> {
    match s {
        "greedy" => Ok(ReplacementKind::Greedy),
        "representative" => Ok(ReplacementKind::Representative),
        other => Err(format!(
            "unknown replacement kind {other:?} (expected greedy or representative)"
        )),
    }
}

fn parse_preference(s: &str) -> Result<Preference, String> {
    match s {
        "preferred" => Ok(Preference::Preferred),
        "unpreferred" => Ok(Preference::Unpreferred),
        other => Err(format!(
            "unknown preference {other:?} (expected preferred or unpreferred)"
        )),
    }
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// `human`, `none`, or a JSONL file of explanation sets.
    #[arg(long, default_value = "human")]
    pub sets: String,
    /// Output name; defaults to the sets argument or file stem.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub candidate: PathBuf,
    /// Target distributions (default: the configured reference file).
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long)]
    pub name: Option<String>,
    /// FT blocks written by eval-proxy to attach to the report.
    #[arg(long)]
    pub ft: Vec<PathBuf>,
    #[arg(long, value_parser = parse_direction, default_value = "candidate-first")]
    pub direction: Direction,
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    match s {
        "candidate-first" => Ok(Direction::CandidateFirst),
        "target-first" => Ok(Direction::TargetFirst),
        other => Err(format!(
            "unknown direction {other:?} (expected candidate-first or target-first)"
        )),
    }
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    /// Model explanation pool (default: <out>/model_explanations.jsonl).
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Target distributions (default: <out>/mjd_human.jsonl, estimated if absent).
    #[arg(long)]
    pub target: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VariabilityArgs {
    /// `name=path` explanation set files; human explanations are always included.
    #[arg(long)]
    pub sets: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainProxyArgs {
    /// Distribution file used as soft labels.
    #[arg(long)]
    pub soft_labels: PathBuf,
    #[arg(long)]
    pub name: String,
}

#[derive(Debug, Clone, Args)]
pub struct EvalProxyArgs {
    #[arg(long)]
    pub candidate: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub name: String,
}

#[derive(Debug, Clone, Args)]
pub struct ExportTernaryArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub name: Option<String>,
}
