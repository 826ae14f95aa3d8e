//! TOML run configuration and its validation.

use std::path::{Path, PathBuf};

use hjd_core::ablation::{validate_rates, ReplacementSource};
use hjd_core::backend::BackendKind;
use hjd_core::distribution::{LogBase, MetricConfig};
use hjd_core::estimator::{EstimatorConfig, TransformPreference, DEFAULT_TOP_K};
use hjd_core::proxy::{F1Target, TrainingConfig, DEFAULT_DIM};
use hjd_core::selection::{SelectionMode, SelectionStrategy};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub backend: BackendConfig,
    pub metric: MetricSection,
    pub selection: SelectionSection,
    pub ablation: AblationSection,
    pub training: TrainingSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub instances: Option<PathBuf>,
    pub human_explanations: Option<PathBuf>,
    /// Multi-annotator label records; the `source` field names each set.
    pub labels: Option<PathBuf>,
    /// Reference (human judgment) distributions.
    pub reference: Option<PathBuf>,
    pub validations: Option<PathBuf>,
    /// Held-out instances with gold labels for classifier evaluation.
    pub eval_instances: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            instances: None,
            human_explanations: None,
            labels: None,
            reference: None,
            validations: None,
            eval_instances: None,
            cache: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    /// Falls back to the kind environment variable, then to mock.
    pub kind: Option<BackendKind>,
    /// Overrides the URL environment variable when set.
    pub url: Option<String>,
    pub model: String,
    pub top_k: u32,
    pub concurrency: usize,
    pub max_attempts: u32,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: None,
            url: None,
            model: "mock-model".into(),
            top_k: DEFAULT_TOP_K,
            concurrency: 4,
            max_attempts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSection {
    pub log_base: LogBase,
    pub smoothing_epsilon: f64,
    pub softmax_temperature: f64,
    pub transform: TransformPreference,
}

impl Default for MetricSection {
    fn default() -> Self {
        let m = MetricConfig::default();
        MetricSection {
            log_base: m.log_base,
            smoothing_epsilon: m.smoothing_epsilon,
            softmax_temperature: m.softmax_temperature,
            transform: TransformPreference::Auto,
        }
    }
}

impl MetricSection {
    pub fn metric_config(&self) -> MetricConfig {
        MetricConfig {
            log_base: self.log_base,
            smoothing_epsilon: self.smoothing_epsilon,
            softmax_temperature: self.softmax_temperature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    pub strategy: SelectionStrategy,
    pub mode: SelectionMode,
    /// Label source whose annotations guide label-guided selection:
    /// `human` (labels of the human explanations) or a `source` name from
    /// the labels file.
    pub guidance_source: Option<String>,
}

impl Default for SelectionSection {
    fn default() -> Self {
        SelectionSection {
            strategy: SelectionStrategy::LabelGuided,
            mode: SelectionMode::Longest,
            guidance_source: Some("human".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    pub rates: Vec<f64>,
    pub kinds: Vec<ReplacementSource>,
    pub mode: SelectionMode,
}

impl Default for AblationSection {
    fn default() -> Self {
        AblationSection {
            rates: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            kinds: vec![ReplacementSource::Model, ReplacementSource::Noise],
            mode: SelectionMode::Longest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
    pub dim: usize,
    pub dev_fraction: f64,
    pub f1_target: F1Target,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainingConfig::default();
        TrainingSection {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            weight_decay: t.weight_decay,
            dim: DEFAULT_DIM,
            dev_fraction: 0.5,
            f1_target: F1Target::Reference,
        }
    }
}

impl RunConfig {
    pub fn training_config(&self) -> TrainingConfig {
        TrainingConfig {
            learning_rate: self.training.learning_rate,
            batch_size: self.training.batch_size,
            epochs: self.training.epochs,
            weight_decay: self.training.weight_decay,
            seed: self.seed,
        }
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            model_name: self.backend.model.clone(),
            metric: self.metric.metric_config(),
            transform: self.metric.transform,
            top_k: self.backend.top_k,
            dispatch_shuffle_seed: None,
        }
    }

    /// Parses TOML text. Relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: Option<&Path>) -> Result<Self, String> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        if let Some(base) = base {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_toml(&text, Some(base)).map_err(|e| format!("{}: {e}", path.display()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        for slot in [
            &mut p.instances,
            &mut p.human_explanations,
            &mut p.labels,
            &mut p.reference,
            &mut p.validations,
            &mut p.eval_instances,
            &mut p.cache,
        ]
        .into_iter()
        .flatten()
        {
            fix(slot);
        }
        fix(&mut p.out_dir);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Every problem found in `cfg`; empty when the config is usable.
pub fn validate_config(cfg: &RunConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut diag = |field: &str, message: String| {
        out.push(Diagnostic {
            field: field.into(),
            message,
        })
    };
    let p = &cfg.paths;
    for (field, path) in [
        ("paths.instances", &p.instances),
        ("paths.human_explanations", &p.human_explanations),
        ("paths.labels", &p.labels),
        ("paths.reference", &p.reference),
        ("paths.validations", &p.validations),
        ("paths.eval_instances", &p.eval_instances),
    ] {
        if let Some(path) = path {
            if !path.is_file() {
                diag(field, format!("{} does not exist", path.display()));
            }
        }
    }
    let m = &cfg.metric;
    if !(m.softmax_temperature > 0.0 && m.softmax_temperature.is_finite()) {
        diag(
            "metric.softmax_temperature",
            "softmax_temperature must be positive".into(),
        );
    }
    if !(m.smoothing_epsilon > 0.0 && m.smoothing_epsilon <= 0.01) {
        diag(
            "metric.smoothing_epsilon",
            "smoothing_epsilon must lie in (0, 0.01]".into(),
        );
    }
    if cfg.selection.strategy == SelectionStrategy::LabelGuided && cfg.selection.guidance_source.is_none() {
        diag(
            "selection.guidance_source",
            "label_guided selection needs a guidance_source".into(),
        );
    }
    if let Err(e) = validate_rates(&cfg.ablation.rates) {
        diag("ablation.rates", e.to_string());
    }
    if cfg.ablation.kinds.is_empty() {
        diag("ablation.kinds", "at least one replacement kind is required".into());
    }
    if cfg.backend.top_k < 3 {
        diag(
            "backend.top_k",
            "top_k must be at least 3 so every option letter can appear".into(),
        );
    }
    if cfg.backend.concurrency == 0 {
        diag("backend.concurrency", "concurrency must be at least 1".into());
    }
    if cfg.backend.max_attempts == 0 {
        diag("backend.max_attempts", "max_attempts must be at least 1".into());
    }
    if cfg.backend.model.trim().is_empty() {
        diag("backend.model", "model name must be nonempty".into());
    }
    if let Err(e) = cfg.training_config().validate() {
        diag("training", e.to_string());
    }
    if cfg.training.dim == 0 || cfg.training.dim > 1 << 24 {
        diag("training.dim", "dim must lie in [1, 2^24]".into());
    }
    if !(cfg.training.dev_fraction > 0.0 && cfg.training.dev_fraction < 1.0) {
        diag(
            "training.dev_fraction",
            "dev_fraction must lie strictly between 0 and 1".into(),
        );
    }
    out
}
