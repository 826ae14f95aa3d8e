use hjd_core::ablation::AblationError;
use hjd_core::backend::BackendError;
use hjd_core::dataset::DatasetError;
use hjd_core::estimator::EstimatorError;
use hjd_core::generation::GenerationError;
use hjd_core::proxy::ProxyError;
use hjd_core::selection::SelectionError;
use hjd_core::variability::VariabilityError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Input(#[from] DatasetError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Estimation(#[from] EstimatorError),
    #[error(transparent)]
    Ablation(#[from] AblationError),
    #[error(transparent)]
    Variability(#[from] VariabilityError),
    #[error(transparent)]
    Proxy(#[from] ProxyError),
    #[error("{path}: {source}")]
    Output {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<GenerationError> for CliError {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::Backend(b) => CliError::Backend(b),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Input(_) => "input",
            CliError::Backend(_) => "backend",
            CliError::Selection(_) => "selection",
            CliError::Estimation(_) => "estimation",
            CliError::Ablation(_) => "ablation",
            CliError::Variability(_) => "variability",
            CliError::Proxy(_) => "proxy",
            CliError::Output { .. } => "output",
        }
    }

    /// Process exit status; 2 is left to argument parsing errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Input(_) => 4,
            CliError::Backend(_) => 5,
            CliError::Selection(_) => 6,
            CliError::Estimation(_) => 7,
            CliError::Ablation(_) => 8,
            CliError::Variability(_) => 9,
            CliError::Proxy(_) => 10,
            CliError::Output { .. } => 11,
        }
    }
}
