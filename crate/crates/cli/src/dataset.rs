//! Dataset ingestion and stratified splitting.
//!
//! Class membership comes from the two directory names (`parasitized` = the
//! positive class, `uninfected` = negative, matched case-insensitively).
//! Records are kept in lexicographic path order; the split shuffle is the
//! only seeded step, so (files, ratios, seed) fully determine every tag.

use std::path::{Path, PathBuf};

use dbel::brstm::LabeledSet;
use dbel::preprocess::{self, ImageF};
use rand::seq::SliceRandom;

use crate::{CliError, CliResult};

pub const CLASS_DIRS: [(&str, u8); 2] = [("parasitized", 1), ("uninfected", 0)];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SampleRecord {
    pub path: PathBuf,
    pub label: u8,
    /// `None` until [`split_dataset`] assigns a tag.
    pub split: Option<Split>,
}

#[derive(Clone, Debug)]
pub struct DatasetIndex {
    /// In lexicographic path order.
    pub records: Vec<SampleRecord>,
    pub split_seed: Option<u64>,
    /// Unreadable files skipped during ingestion.
    pub excluded: usize,
}

impl DatasetIndex {
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0usize; 2];
        for r in &self.records {
            counts[r.label as usize] += 1;
        }
        counts
    }

    /// Indices of the records tagged with `split`, in index order.
    pub fn members(&self, split: Split) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.split == Some(split))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Finds a direct subdirectory by case-insensitive name.
fn find_class_dir(root: &Path, name: &str) -> CliResult<Option<PathBuf>> {
    let entries = std::fs::read_dir(root).map_err(|e| CliError::io(root, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(root, e))?;
        let file_name = entry.file_name();
        if file_name.to_string_lossy().to_lowercase() == name
            && entry.path().is_dir()
        {
            return Ok(Some(entry.path()));
        }
    }
    Ok(None)
}

/// Whether `root` carries the class-directory layout. One class directory
/// without the other still counts, so ingestion can report which one is
/// missing instead of treating the root as a flat image folder.
pub fn has_class_layout(root: &Path) -> CliResult<bool> {
    for (name, _) in CLASS_DIRS {
        if find_class_dir(root, name)?.is_some() {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Regular files under `dir` that look like readable images, sorted, plus
/// the count of files that were skipped with a warning.
fn readable_images(dir: &Path) -> CliResult<(Vec<PathBuf>, usize)> {
    let mut files = Vec::new();
    let mut excluded = 0usize;
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        match preprocess::io::probe_dimensions(&path) {
            Ok(_) => files.push(path),
            Err(e) => {
                eprintln!("warning: skipping unreadable image {}: {e}", path.display());
                excluded += 1;
            }
        }
    }
    files.sort();
    Ok((files, excluded))
}

/// Scans `root`'s two class directories into an unsplit index.
pub fn ingest_dataset(root: &Path) -> CliResult<DatasetIndex> {
    let mut records = Vec::new();
    let mut excluded = 0usize;
    for (name, label) in CLASS_DIRS {
        let dir = find_class_dir(root, name)?.ok_or_else(|| {
            CliError::Layout(format!(
                "missing class directory `{name}` under {}",
                root.display()
            ))
        })?;
        let (files, skipped) = readable_images(&dir)?;
        if files.is_empty() {
            return Err(CliError::Layout(format!(
                "class directory {} contains no readable images",
                dir.display()
            )));
        }
        excluded += skipped;
        records.extend(files.into_iter().map(|path| SampleRecord {
            path,
            label,
            split: None,
        }));
    }
    if excluded > 0 {
        eprintln!("warning: excluded {excluded} unreadable file(s)");
    }
    records.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(DatasetIndex { records, split_seed: None, excluded })
}

/// A flat folder of images (no class structure), for batch enhancement.
pub fn list_images_flat(dir: &Path) -> CliResult<(Vec<PathBuf>, usize)> {
    let (files, excluded) = readable_images(dir)?;
    if files.is_empty() {
        return Err(CliError::Layout(format!(
            "{} contains no readable images",
            dir.display()
        )));
    }
    if excluded > 0 {
        eprintln!("warning: excluded {excluded} unreadable file(s)");
    }
    Ok((files, excluded))
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Stratified split: per class, `test_ratio` of the samples go to test
/// (size rounded half-up), then `val_ratio` of the remainder to validation
/// (same rounding), the rest to train. Class proportions therefore match
/// the ratios within one sample.
pub fn split_dataset(
    index: &DatasetIndex,
    test_ratio: f64,
    val_ratio: f64,
    seed: u64,
) -> CliResult<DatasetIndex> {
    for (name, ratio) in [("test", test_ratio), ("val", val_ratio)] {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(CliError::Config(format!(
                "{name} ratio must lie strictly between 0 and 1, got {ratio}"
            )));
        }
    }
    let counts = index.class_counts();
    if counts.iter().any(|&c| c == 0) {
        return Err(CliError::Layout(format!(
            "both classes must be present, got {} parasitized / {} uninfected",
            counts[1], counts[0]
        )));
    }
    let mut records = index.records.clone();
    let mut rng = dbel::rng::stream(seed, dbel::rng::STREAM_SPLIT);
    // Fixed label order keeps the rng consumption deterministic.
    for label in [0u8, 1u8] {
        let mut members: Vec<usize> = records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == label)
            .map(|(i, _)| i)
            .collect();
        members.shuffle(&mut rng);
        let n = members.len();
        let test_n = round_half_up(n as f64 * test_ratio);
        let val_n = round_half_up((n - test_n) as f64 * val_ratio);
        for (rank, &i) in members.iter().enumerate() {
            records[i].split = Some(if rank < test_n {
                Split::Test
            } else if rank < test_n + val_n {
                Split::Val
            } else {
                Split::Train
            });
        }
    }
    Ok(DatasetIndex {
        records,
        split_seed: Some(seed),
        excluded: index.excluded,
    })
}

/// Loads every record of one split as a labeled grayscale image set,
/// checking each image against the expected extents.
pub fn load_labeled(
    index: &DatasetIndex,
    split: Split,
    height: usize,
    width: usize,
) -> CliResult<LabeledSet<f32>> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for &i in &index.members(split) {
        let record = &index.records[i];
        let raw = preprocess::io::load_image(&record.path)?;
        let img: ImageF<f32> = preprocess::to_grayscale(&raw);
        if img.height() != height || img.width() != width {
            return Err(CliError::Pipeline(dbel::Error::Data(format!(
                "{} is {}x{}, the network expects {height}x{width}",
                record.path.display(),
                img.height(),
                img.width()
            ))));
        }
        images.push(img);
        labels.push(record.label);
    }
    if images.is_empty() {
        return Err(CliError::Pipeline(dbel::Error::Data(format!(
            "split `{}` is empty",
            split.as_str()
        ))));
    }
    Ok(LabeledSet::new(images, labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dbel::preprocess::io::save_pgm;

    /// Writes a tiny valid PGM image for each name under `dir/<class>/`.
    fn seed_dataset(root: &Path, per_class: usize) {
        for (class, _) in CLASS_DIRS {
            let dir = root.join(class);
            std::fs::create_dir_all(&dir).unwrap();
            for i in 0..per_class {
                let img = ImageF::new(4, 4, vec![0.5f32; 16]).unwrap();
                save_pgm(&img, &dir.join(format!("cell_{i:03}.pgm"))).unwrap();
            }
        }
    }

    #[test]
    fn ingest_orders_lexicographically() {
        let tmp = tempfile::tempdir().unwrap();
        seed_dataset(tmp.path(), 5);
        let index = ingest_dataset(tmp.path()).unwrap();
        assert_eq!(index.records.len(), 10);
        assert_eq!(index.class_counts(), [5, 5]);
        let paths: Vec<_> = index.records.iter().map(|r| r.path.clone()).collect();
        let mut sorted = paths.clone();
        sorted.sort();
        assert_eq!(paths, sorted);
        // parasitized sorts before uninfected, and carries label 1.
        assert_eq!(index.records[0].label, 1);
        assert_eq!(index.excluded, 0);
    }

    #[test]
    fn ingest_requires_both_class_directories() {
        let tmp = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(tmp.path().join("parasitized")).unwrap();
        let err = ingest_dataset(tmp.path()).unwrap_err();
        assert!(matches!(err, CliError::Layout(_)), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn ingest_rejects_empty_class_directory() {
        let tmp = tempfile::tempdir().unwrap();
        seed_dataset(tmp.path(), 2);
        std::fs::remove_dir_all(tmp.path().join("uninfected")).unwrap();
        std::fs::create_dir_all(tmp.path().join("uninfected")).unwrap();
        assert!(matches!(
            ingest_dataset(tmp.path()),
            Err(CliError::Layout(_))
        ));
    }

    #[test]
    fn ingest_excludes_unreadable_files_with_count() {
        let tmp = tempfile::tempdir().unwrap();
        seed_dataset(tmp.path(), 3);
        std::fs::write(tmp.path().join("parasitized/broken.png"), b"not an image").unwrap();
        let index = ingest_dataset(tmp.path()).unwrap();
        assert_eq!(index.records.len(), 6);
        assert_eq!(index.excluded, 1);
    }

    #[test]
    fn ingest_accepts_capitalized_class_directories() {
        let tmp = tempfile::tempdir().unwrap();
        for class in ["Parasitized", "Uninfected"] {
            let dir = tmp.path().join(class);
            std::fs::create_dir_all(&dir).unwrap();
            let img = ImageF::new(4, 4, vec![0.5f32; 16]).unwrap();
            save_pgm(&img, &dir.join("a.pgm")).unwrap();
        }
        let index = ingest_dataset(tmp.path()).unwrap();
        assert_eq!(index.class_counts(), [1, 1]);
    }

    fn toy_index(per_class: usize) -> DatasetIndex {
        let mut records = Vec::new();
        for (class, label) in CLASS_DIRS {
            for i in 0..per_class {
                records.push(SampleRecord {
                    path: PathBuf::from(format!("{class}/cell_{i:05}.png")),
                    label,
                    split: None,
                });
            }
        }
        records.sort_by(|a, b| a.path.cmp(&b.path));
        DatasetIndex { records, split_seed: None, excluded: 0 }
    }

    #[test]
    fn nih_counts_split_4134_per_class() {
        let index = toy_index(13_779);
        let split = split_dataset(&index, 0.30, 0.20, 9).unwrap();
        for label in [0u8, 1u8] {
            let of = |tag| {
                split
                    .records
                    .iter()
                    .filter(|r| r.label == label && r.split == Some(tag))
                    .count()
            };
            assert_eq!(of(Split::Test), 4134);
            assert_eq!(of(Split::Val), 1929);
            assert_eq!(of(Split::Train), 7716);
        }
    }

    #[test]
    fn split_is_disjoint_exhaustive_and_deterministic() {
        let index = toy_index(101);
        let a = split_dataset(&index, 0.30, 0.20, 7).unwrap();
        let b = split_dataset(&index, 0.30, 0.20, 7).unwrap();
        let c = split_dataset(&index, 0.30, 0.20, 8).unwrap();
        assert!(a.records.iter().all(|r| r.split.is_some()));
        let tags = |idx: &DatasetIndex| -> Vec<Option<Split>> {
            idx.records.iter().map(|r| r.split).collect()
        };
        assert_eq!(tags(&a), tags(&b));
        assert_ne!(tags(&a), tags(&c));
        // Paths never move; only tags change.
        assert!(a.records.iter().zip(&index.records).all(|(x, y)| x.path == y.path));
    }

    #[test]
    fn split_sizes_stay_within_one_sample_of_the_ratios() {
        for per_class in [7usize, 10, 33, 100, 137, 500] {
            let split = split_dataset(&toy_index(per_class), 0.30, 0.20, 3).unwrap();
            for label in [0u8, 1u8] {
                let count = |tag| {
                    split
                        .records
                        .iter()
                        .filter(|r| r.label == label && r.split == Some(tag))
                        .count() as f64
                };
                let n = per_class as f64;
                assert!((count(Split::Test) - n * 0.30).abs() <= 1.0);
                let pool = n - count(Split::Test);
                assert!((count(Split::Val) - pool * 0.20).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn split_rejects_degenerate_ratios() {
        let index = toy_index(10);
        assert!(matches!(
            split_dataset(&index, 1.0, 0.2, 0),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            split_dataset(&index, 0.3, 0.0, 0),
            Err(CliError::Config(_))
        ));
    }
}
