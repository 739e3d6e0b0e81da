//! The seven pipeline commands. Every artifact lands under the configured
//! output directory:
//!
//! ```text
//! enhanced/              half-resolution grayscale PGMs (per class or flat)
//! model/                 manifest.json + weights.bin
//! train_log.json         per-epoch losses and accuracies
//! features_<split>.csv   deep features, header f0..fN,label
//! ensemble.json          SVM + MLP + AdaBoost coefficients
//! eval_<system>.json     metrics report + AUCs   (system: head, svm, mlp,
//! roc_<system>.csv       fpr,tpr points           adaboost, ensemble)
//! pr_<system>.csv        recall,precision points
//! pca.csv / pca.json     top-3 feature projection
//! ```

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use dbel::brstm::{self, BrstmModel, LabeledSet, build_model, pretrain_donor, transplant_auxiliary};
use dbel::ensemble::{
    EnsembleModel, FeatureMatrix, MarginClassifier, ensemble_predict, train_adaboost, train_mlp,
    train_svm,
};
use dbel::metrics::{self, CurveData, MetricsReport};
use dbel::preprocess::{self, ImageF};
use serde::Serialize;

use crate::config::RunConfig;
use crate::dataset::{self, DatasetIndex, Split};
use crate::persist;
use crate::{CliError, CliResult};

/// Forward-pass chunk size; keeps activation memory flat on large splits.
const CHUNK: usize = 64;

fn enhanced_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.join("enhanced")
}

fn model_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.join("model")
}

fn ensemble_path(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.join("ensemble.json")
}

fn features_path(cfg: &RunConfig, split: Split) -> PathBuf {
    cfg.output_dir.join(format!("features_{}.csv", split.as_str()))
}

/// Ingest the enhanced images and apply the configured stratified split.
fn split_index(cfg: &RunConfig) -> CliResult<DatasetIndex> {
    let index = dataset::ingest_dataset(&enhanced_dir(cfg))?;
    dataset::split_dataset(&index, cfg.test_ratio, cfg.val_ratio, cfg.network.seed)
}

fn output_name(seen: &mut HashSet<String>, input: &Path) -> CliResult<String> {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| CliError::Layout(format!("{} has no usable file name", input.display())))?;
    let name = format!("{stem}.pgm");
    if !seen.insert(name.clone()) {
        return Err(CliError::Layout(format!(
            "output name collision: two inputs enhance to `{name}`"
        )));
    }
    Ok(name)
}

fn enhance_one(input: &Path, output: &Path) -> CliResult<()> {
    let raw = preprocess::io::load_image(input)?;
    let enhanced: ImageF<f32> = preprocess::enhance(&raw);
    preprocess::io::save_pgm(&enhanced, output)?;
    Ok(())
}

/// Wavelet-enhances `data_root` into the output directory, mirroring the
/// class layout when one is present and treating the root as a flat image
/// folder otherwise.
pub fn enhance(cfg: &RunConfig) -> CliResult<()> {
    let out_root = enhanced_dir(cfg);
    let mut written = 0usize;
    if dataset::has_class_layout(&cfg.data_root)? {
        let index = dataset::ingest_dataset(&cfg.data_root)?;
        for (class, label) in dataset::CLASS_DIRS {
            let dir = out_root.join(class);
            std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            let mut seen = HashSet::new();
            for record in index.records.iter().filter(|r| r.label == label) {
                let name = output_name(&mut seen, &record.path)?;
                enhance_one(&record.path, &dir.join(name))?;
                written += 1;
            }
        }
    } else {
        let (files, _) = dataset::list_images_flat(&cfg.data_root)?;
        std::fs::create_dir_all(&out_root).map_err(|e| CliError::io(&out_root, e))?;
        let mut seen = HashSet::new();
        for file in &files {
            let name = output_name(&mut seen, file)?;
            enhance_one(file, &out_root.join(name))?;
            written += 1;
        }
    }
    println!("enhanced {written} image(s) into {}", out_root.display());
    Ok(())
}

/// Donor pretraining, auxiliary-branch transplant, and the main training
/// run; writes the model directory and the train log.
pub fn train(cfg: &RunConfig) -> CliResult<()> {
    let index = split_index(cfg)?;
    let net = &cfg.network;
    let train_set = dataset::load_labeled(&index, Split::Train, net.input_height, net.input_width)?;
    let val_set = dataset::load_labeled(&index, Split::Val, net.input_height, net.input_width)?;

    let mut model = build_model::<f32>(net, net.seed)?;
    if net.donor_epochs > 0 {
        let (donor, _) = pretrain_donor(&train_set, net, net.seed)?;
        model = transplant_auxiliary(model, &donor)?;
    }
    let log = brstm::train(&mut model, &train_set, &val_set)?;

    let log_bytes = persist::to_json_bytes(&log);
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))?;
    persist::write_file(&cfg.output_dir.join("train_log.json"), &log_bytes)?;
    persist::save_network(&model, &model_dir(cfg), Some(persist::digest(&log_bytes)))?;

    let best = log.entries.iter().find(|e| e.epoch == log.best_epoch);
    let val_acc = best.map(|e| e.val_accuracy * 100.0).unwrap_or(0.0);
    println!(
        "trained {} epoch(s) on {} samples; kept epoch {} (validation accuracy {val_acc:.1}%)",
        log.entries.len(),
        train_set.len(),
        log.best_epoch,
    );
    Ok(())
}

/// Deep features of one set, with the set's labels attached.
fn extract_matrix(
    model: &BrstmModel<f32>,
    set: &LabeledSet<f32>,
) -> CliResult<FeatureMatrix<f32>> {
    let width = model.config().feature_width();
    let mut data = Vec::with_capacity(set.len() * width);
    let all: Vec<usize> = (0..set.len()).collect();
    for chunk in all.chunks(CHUNK) {
        let features = model.extract_features(&set.batch(chunk))?;
        data.extend_from_slice(features.data());
    }
    Ok(FeatureMatrix::new(set.len(), width, data, set.labels().to_vec())?)
}

/// Softmax-head labels and positive-class probabilities of one set.
fn head_predictions(
    model: &BrstmModel<f32>,
    set: &LabeledSet<f32>,
) -> CliResult<(Vec<u8>, Vec<f64>)> {
    let mut labels = Vec::with_capacity(set.len());
    let mut scores = Vec::with_capacity(set.len());
    let all: Vec<usize> = (0..set.len()).collect();
    for chunk in all.chunks(CHUNK) {
        let (chunk_labels, probs) = model.predict(&set.batch(chunk))?;
        labels.extend(chunk_labels);
        scores.extend((0..chunk.len()).map(|i| probs.at(i, 1, 0, 0) as f64));
    }
    Ok((labels, scores))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::Pipeline(dbel::Error::Format(format!("{}: {e}", path.display())))
}

fn write_feature_csv(path: &Path, features: &FeatureMatrix<f32>) -> CliResult<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<String> = (0..features.dim()).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..features.len() {
        let mut record: Vec<String> =
            features.row(i).iter().map(|v| v.to_string()).collect();
        record.push(features.labels()[i].to_string());
        w.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub(crate) fn read_feature_csv(path: &Path) -> CliResult<FeatureMatrix<f32>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let fields = headers.len();
    if fields < 2 || &headers[fields - 1] != "label" {
        return Err(CliError::Pipeline(dbel::Error::Format(format!(
            "{}: expected header f0..f{{n}},label",
            path.display()
        ))));
    }
    let dim = fields - 1;
    for (i, name) in headers.iter().take(dim).enumerate() {
        if name != format!("f{i}") {
            return Err(CliError::Pipeline(dbel::Error::Format(format!(
                "{}: header column {i} is `{name}`, expected `f{i}`",
                path.display()
            ))));
        }
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != fields {
            return Err(CliError::Pipeline(dbel::Error::Format(format!(
                "{}: row {} has {} fields, expected {fields}",
                path.display(),
                row + 2,
                record.len()
            ))));
        }
        for value in record.iter().take(dim) {
            data.push(value.parse::<f32>().map_err(|_| {
                CliError::Pipeline(dbel::Error::Format(format!(
                    "{}: row {}: bad feature value `{value}`",
                    path.display(),
                    row + 2
                )))
            })?);
        }
        let label = &record[dim];
        labels.push(label.parse::<u8>().ok().filter(|&l| l <= 1).ok_or_else(|| {
            CliError::Pipeline(dbel::Error::Format(format!(
                "{}: row {}: bad label `{label}`",
                path.display(),
                row + 2
            )))
        })?);
    }
    let rows = labels.len();
    Ok(FeatureMatrix::new(rows, dim, data, labels)?)
}

/// Exports the deep features of every split as CSV.
pub fn features(cfg: &RunConfig) -> CliResult<()> {
    let model = persist::load_network(&model_dir(cfg))?;
    let index = split_index(cfg)?;
    let net = &cfg.network;
    for split in [Split::Train, Split::Val, Split::Test] {
        let set = dataset::load_labeled(&index, split, net.input_height, net.input_width)?;
        let matrix = extract_matrix(&model, &set)?;
        let path = features_path(cfg, split);
        write_feature_csv(&path, &matrix)?;
        println!("wrote {} rows to {}", matrix.len(), path.display());
    }
    Ok(())
}

/// Fits the three classifiers on the training features and saves them.
pub fn train_ensemble(cfg: &RunConfig) -> CliResult<()> {
    let features = read_feature_csv(&features_path(cfg, Split::Train))?;
    let seed = cfg.network.seed;
    let svm = train_svm(&features, cfg.svm_lambda, cfg.svm_epochs, seed)?;
    let mlp = train_mlp(&features, cfg.mlp_hidden, cfg.mlp_epochs, cfg.mlp_learning_rate, seed)?;
    let adaboost = train_adaboost(&features, cfg.adaboost_rounds)?;
    let model = EnsembleModel::new(svm, mlp, adaboost)?;

    let votes = ensemble_predict(&model, &features)?;
    let correct = votes
        .iter()
        .zip(features.labels())
        .filter(|(p, y)| p.label == **y)
        .count();
    persist::save_ensemble(&model, &ensemble_path(cfg))?;
    println!(
        "ensemble fitted; training vote accuracy {:.1}% ({} boosting rounds kept)",
        100.0 * correct as f64 / features.len() as f64,
        model.adaboost().rounds(),
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalSummary {
    report: MetricsReport,
    roc_auc: f64,
    pr_auc: f64,
}

fn write_curve_csv(path: &Path, curve: &CurveData, header: [&str; 2]) -> CliResult<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for &(x, y) in &curve.points {
        w.write_record(&[x.to_string(), y.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_evaluation(
    cfg: &RunConfig,
    system: &str,
    truth: &[u8],
    labels: &[u8],
    scores: &[f64],
) -> CliResult<MetricsReport> {
    let report = metrics::report(metrics::confusion(truth, labels)?)?;
    let roc = metrics::roc_curve(scores, truth)?;
    let pr = metrics::pr_curve(scores, truth)?;
    let summary = EvalSummary { report, roc_auc: roc.auc, pr_auc: pr.auc };
    persist::write_file(
        &cfg.output_dir.join(format!("eval_{system}.json")),
        &persist::to_json_bytes(&summary),
    )?;
    write_curve_csv(
        &cfg.output_dir.join(format!("roc_{system}.csv")),
        &roc,
        ["fpr", "tpr"],
    )?;
    write_curve_csv(
        &cfg.output_dir.join(format!("pr_{system}.csv")),
        &pr,
        ["recall", "precision"],
    )?;
    println!(
        "{system}: accuracy {:.2}%, F {:.3}, sensitivity {:.3}, specificity {:.3}, ROC AUC {:.3}",
        report.accuracy, report.f_score, report.sensitivity, report.specificity, roc.auc
    );
    Ok(report)
}

/// Labels plus normalized scores from one margin classifier.
fn margin_outputs<C: MarginClassifier>(
    classifier: &C,
    matrix: &FeatureMatrix<f32>,
) -> CliResult<(Vec<u8>, Vec<f64>)> {
    let margins = classifier.predict_margin(matrix)?;
    let labels = margins.iter().map(|&(_, l)| l).collect();
    let scores = margins.iter().map(|&(s, _)| classifier.normalized_score(s)).collect();
    Ok((labels, scores))
}

/// Scores the test split with the network head, each classifier, and the
/// majority vote; writes a report and both curves for each.
pub fn evaluate(cfg: &RunConfig) -> CliResult<()> {
    let model = persist::load_network(&model_dir(cfg))?;
    let ensemble = persist::load_ensemble(&ensemble_path(cfg))?;
    let index = split_index(cfg)?;
    let net = &cfg.network;
    let test = dataset::load_labeled(&index, Split::Test, net.input_height, net.input_width)?;
    let truth = test.labels().to_vec();

    let (head_labels, head_scores) = head_predictions(&model, &test)?;
    write_evaluation(cfg, "head", &truth, &head_labels, &head_scores)?;

    let matrix = extract_matrix(&model, &test)?;
    let (labels, scores) = margin_outputs(ensemble.svm(), &matrix)?;
    write_evaluation(cfg, "svm", &truth, &labels, &scores)?;
    let (labels, scores) = margin_outputs(ensemble.mlp(), &matrix)?;
    write_evaluation(cfg, "mlp", &truth, &labels, &scores)?;
    let (labels, scores) = margin_outputs(ensemble.adaboost(), &matrix)?;
    write_evaluation(cfg, "adaboost", &truth, &labels, &scores)?;

    let votes = ensemble_predict(&ensemble, &matrix)?;
    let labels: Vec<u8> = votes.iter().map(|v| v.label).collect();
    let scores: Vec<f64> = votes.iter().map(|v| v.score).collect();
    write_evaluation(cfg, "ensemble", &truth, &labels, &scores)?;
    Ok(())
}

/// Projects the test-split features onto their top three principal
/// components.
pub fn pca(cfg: &RunConfig) -> CliResult<()> {
    let model = persist::load_network(&model_dir(cfg))?;
    let index = split_index(cfg)?;
    let net = &cfg.network;
    let test = dataset::load_labeled(&index, Split::Test, net.input_height, net.input_width)?;
    let matrix = extract_matrix(&model, &test)?;
    let projection = metrics::pca_top3(&matrix)?;

    let path = cfg.output_dir.join("pca.csv");
    let file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["pc1", "pc2", "pc3", "label"]).map_err(|e| csv_error(&path, e))?;
    for (coords, label) in projection.coordinates.iter().zip(&projection.labels) {
        w.write_record(&[
            coords[0].to_string(),
            coords[1].to_string(),
            coords[2].to_string(),
            label.to_string(),
        ])
        .map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    persist::write_file(
        &cfg.output_dir.join("pca.json"),
        &persist::to_json_bytes(&projection),
    )?;
    println!(
        "projected {} samples; explained variance {:.3} / {:.3} / {:.3}",
        projection.coordinates.len(),
        projection.explained[0],
        projection.explained[1],
        projection.explained[2],
    );
    Ok(())
}

/// Classifies raw images end to end (enhancement included) and writes one
/// CSV row per image: vote label plus every system's normalized score.
pub fn predict(cfg: &RunConfig, images: &[PathBuf], out: &mut dyn Write) -> CliResult<()> {
    let model = persist::load_network(&model_dir(cfg))?;
    let ensemble = persist::load_ensemble(&ensemble_path(cfg))?;
    let net = &cfg.network;

    let mut enhanced = Vec::with_capacity(images.len());
    for path in images {
        let raw = preprocess::io::load_image(path)?;
        let img: ImageF<f32> = preprocess::enhance(&raw);
        if img.height() != net.input_height || img.width() != net.input_width {
            return Err(CliError::Pipeline(dbel::Error::Data(format!(
                "{}: enhances to {}x{}, the network expects {}x{} (raw input {}x{})",
                path.display(),
                img.height(),
                img.width(),
                net.input_height,
                net.input_width,
                2 * net.input_height,
                2 * net.input_width,
            ))));
        }
        enhanced.push(img);
    }
    let n = enhanced.len();
    let set = LabeledSet::new(enhanced, vec![0u8; n])?;
    let all: Vec<usize> = (0..n).collect();
    let batch = set.batch(&all);
    let (_, probs) = model.predict(&batch)?;
    let matrix = extract_matrix(&model, &set)?;
    let votes = ensemble_predict(&ensemble, &matrix)?;

    let mut w = csv::Writer::from_writer(out);
    let stdout_err = |e| csv_error(Path::new("<stdout>"), e);
    w.write_record(["path", "label", "head", "svm", "mlp", "adaboost", "ensemble"])
        .map_err(stdout_err)?;
    for (i, (path, vote)) in images.iter().zip(&votes).enumerate() {
        w.write_record(&[
            path.display().to_string(),
            vote.label.to_string(),
            (probs.at(i, 1, 0, 0) as f64).to_string(),
            ensemble.svm().normalized_score(vote.svm.0).to_string(),
            ensemble.mlp().normalized_score(vote.mlp.0).to_string(),
            ensemble.adaboost().normalized_score(vote.adaboost.0).to_string(),
            vote.score.to_string(),
        ])
        .map_err(stdout_err)?;
    }
    w.flush().map_err(|e| CliError::io("<stdout>", e))
}
