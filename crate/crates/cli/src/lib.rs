//! Pipeline driver: configuration, dataset handling, model persistence, and
//! the subcommand implementations behind the `dbel` binary.

use std::path::{Path, PathBuf};

pub mod commands;
pub mod config;
pub mod dataset;
pub mod persist;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("layout: {0}")]
    Layout(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Pipeline(#[from] dbel::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit code: 0 success, 2 usage/config, 3 data/layout,
    /// 4 numeric divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Layout(_) | CliError::Io { .. } => 3,
            CliError::Pipeline(e) => match e {
                dbel::Error::Divergence(_) => 4,
                dbel::Error::Argument(_) => 2,
                _ => 3,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// One dispatchable pipeline action; mirrors the binary's subcommands.
#[derive(Clone, Debug)]
pub enum Action {
    Enhance,
    Train,
    Features,
    TrainEnsemble,
    Evaluate,
    Pca,
    Predict(Vec<PathBuf>),
}

/// Loads the configuration (honoring the `DBEL_SEED` override) and runs one
/// action. `predict` writes its CSV to standard output.
pub fn run(config_path: &Path, action: &Action) -> CliResult<()> {
    let cfg = RunConfig::load(config_path)?;
    match action {
        Action::Enhance => commands::enhance(&cfg),
        Action::Train => commands::train(&cfg),
        Action::Features => commands::features(&cfg),
        Action::TrainEnsemble => commands::train_ensemble(&cfg),
        Action::Evaluate => commands::evaluate(&cfg),
        Action::Pca => commands::pca(&cfg),
        Action::Predict(images) => {
            if images.is_empty() {
                return Err(CliError::Usage("predict needs at least one image".into()));
            }
            let stdout = std::io::stdout();
            commands::predict(&cfg, images, &mut stdout.lock())
        }
    }
}
