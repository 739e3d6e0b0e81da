//! Run configuration: a plain-text file of `key = value` lines with `#`
//! comments. Unknown keys are rejected so typos cannot silently fall back
//! to defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use dbel::brstm::BrstmConfig;

use crate::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Raw dataset root: `parasitized/` + `uninfected/` class directories,
    /// or a flat folder of images for `enhance`.
    pub data_root: PathBuf,
    /// Every artifact this run produces lives under here.
    pub output_dir: PathBuf,
    pub network: BrstmConfig,
    /// Fraction of each class held out for the test split.
    pub test_ratio: f64,
    /// Fraction of the remaining train+val pool held out for validation.
    pub val_ratio: f64,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub mlp_hidden: usize,
    pub mlp_epochs: usize,
    pub mlp_learning_rate: f64,
    pub adaboost_rounds: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_root: PathBuf::from("data"),
            output_dir: PathBuf::from("run"),
            network: BrstmConfig::default(),
            test_ratio: 0.30,
            val_ratio: 0.20,
            svm_lambda: 1e-4,
            svm_epochs: 30,
            mlp_hidden: 64,
            mlp_epochs: 300,
            mlp_learning_rate: 0.05,
            adaboost_rounds: 50,
        }
    }
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("bad value `{value}` for key `{key}`")))
}

fn parse_list<T: FromStr + Copy + Default, const N: usize>(
    key: &str,
    value: &str,
) -> CliResult<[T; N]> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(CliError::Config(format!(
            "key `{key}` needs {N} comma-separated values, got {}",
            parts.len()
        )));
    }
    let mut out = [T::default(); N];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = parse_one(key, part)?;
    }
    Ok(out)
}

impl RunConfig {
    /// Parses a config file and applies the `DBEL_SEED` environment
    /// override. Missing keys keep their defaults.
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RunConfig::from_text(&text)?;
        if let Ok(seed) = std::env::var("DBEL_SEED") {
            cfg.network.seed = seed.trim().parse().map_err(|_| {
                CliError::Config(format!("DBEL_SEED must be an unsigned integer, got `{seed}`"))
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_text(text: &str) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            let (key, value) = (key.trim(), value.trim());
            cfg.apply(key, value)?;
        }
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> CliResult<()> {
        let net = &mut self.network;
        match key {
            "data_root" => self.data_root = PathBuf::from(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "input_height" => net.input_height = parse_one(key, value)?,
            "input_width" => net.input_width = parse_one(key, value)?,
            "stem_width" => net.stem_width = parse_one(key, value)?,
            "squeezed_widths" => {
                net.squeezed_widths = parse_list(key, value)?;
                net.boosted_widths = net.squeezed_widths.map(|w| 4 * w);
            }
            "branch_kernel" => net.branch_kernel = parse_one(key, value)?,
            "branch_dilations" => net.branch_dilations = parse_list(key, value)?,
            "reduce_width" => net.reduce_width = parse_one(key, value)?,
            "head_widths" => net.head_widths = parse_list(key, value)?,
            "dropout" => net.dropout_rates = parse_list(key, value)?,
            "seed" => net.seed = parse_one(key, value)?,
            "epochs" => net.epochs = parse_one(key, value)?,
            "batch_size" => net.batch_size = parse_one(key, value)?,
            "learning_rate" => net.learning_rate = parse_one(key, value)?,
            "momentum" => net.momentum = parse_one(key, value)?,
            "donor_epochs" => net.donor_epochs = parse_one(key, value)?,
            "test_ratio" => self.test_ratio = parse_one(key, value)?,
            "val_ratio" => self.val_ratio = parse_one(key, value)?,
            "svm_lambda" => self.svm_lambda = parse_one(key, value)?,
            "svm_epochs" => self.svm_epochs = parse_one(key, value)?,
            "mlp_hidden" => self.mlp_hidden = parse_one(key, value)?,
            "mlp_epochs" => self.mlp_epochs = parse_one(key, value)?,
            "mlp_learning_rate" => self.mlp_learning_rate = parse_one(key, value)?,
            "adaboost_rounds" => self.adaboost_rounds = parse_one(key, value)?,
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        for (name, ratio) in [("test_ratio", self.test_ratio), ("val_ratio", self.val_ratio)] {
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(CliError::Config(format!(
                    "{name} must lie strictly between 0 and 1, got {ratio}"
                )));
            }
        }
        if !(self.svm_lambda > 0.0) || !self.svm_lambda.is_finite() {
            return Err(CliError::Config(format!(
                "svm_lambda must be positive, got {}",
                self.svm_lambda
            )));
        }
        if !(self.mlp_learning_rate > 0.0) || !self.mlp_learning_rate.is_finite() {
            return Err(CliError::Config(format!(
                "mlp_learning_rate must be positive, got {}",
                self.mlp_learning_rate
            )));
        }
        for (name, n) in [
            ("svm_epochs", self.svm_epochs),
            ("mlp_hidden", self.mlp_hidden),
            ("mlp_epochs", self.mlp_epochs),
            ("adaboost_rounds", self.adaboost_rounds),
        ] {
            if n == 0 {
                return Err(CliError::Config(format!("{name} must be at least 1")));
            }
        }
        self.network
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }
}
