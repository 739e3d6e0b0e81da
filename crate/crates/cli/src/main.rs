use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dbel_cli::Action;

/// Malaria-screening pipeline: wavelet enhancement, boosted CNN training,
/// deep-feature export, classifier ensembling, and evaluation.
#[derive(Parser)]
#[command(name = "dbel", version, about, max_term_width = 100)]
struct Cli {
    /// Run configuration file (key = value lines).
    #[arg(short, long, default_value = "dbel.conf", global = true)]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Wavelet-enhance the raw dataset into half-resolution grayscale images.
    Enhance,
    /// Train the network on the enhanced dataset (donor pretraining included).
    Train,
    /// Export deep features of every split as CSV.
    Features,
    /// Fit the SVM / MLP / AdaBoost ensemble on the training features.
    TrainEnsemble,
    /// Score the test split with the head, each classifier, and the vote.
    Evaluate,
    /// Project the test-split features onto their top three principal components.
    Pca,
    /// Classify raw images end to end; writes CSV to standard output.
    Predict {
        /// Raw (unenhanced) image files.
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let action = match cli.command {
        Command::Enhance => Action::Enhance,
        Command::Train => Action::Train,
        Command::Features => Action::Features,
        Command::TrainEnsemble => Action::TrainEnsemble,
        Command::Evaluate => Action::Evaluate,
        Command::Pca => Action::Pca,
        Command::Predict { images } => Action::Predict(images),
    };
    match dbel_cli::run(&cli.config, &action) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
