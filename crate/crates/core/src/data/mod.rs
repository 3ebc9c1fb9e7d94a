//! Dataset loading, filtering, splitting, and tensor preparation.

mod synth;

pub use synth::{synth_generate, SynthConfig};

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::{absolute_features, hflip, modified_features, rasterize_sized, LandmarkGrid};
use crate::landmarks::{LandmarkSet, Point, FRAME_SIZE, LANDMARK_COUNT};
use crate::scalar::Scalar;

/// Canonical emotion vocabulary; every kept record's label must be one of these.
pub const EMOTION_LABELS: [&str; 8] = [
    "anger",
    "contempt",
    "disgust",
    "fear",
    "happiness",
    "neutral",
    "sadness",
    "surprise",
];

/// Errors raised while loading or transforming datasets.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate image id {0:?}")]
    DuplicateImageId(String),
    #[error("class {label:?} has {available} records, need more than {requested} for the split")]
    InsufficientClassCount {
        label: String,
        available: usize,
        requested: usize,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One labeled face: identity, canonical label, submitter, and 68 landmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord<T> {
    pub image_id: String,
    pub label: String,
    pub submitter: String,
    pub landmarks: LandmarkSet<T>,
}

/// Records plus the ascending label vocabulary actually present.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T> {
    records: Vec<DatasetRecord<T>>,
    class_labels: Vec<String>,
}

impl<T> LabeledDataset<T> {
    /// Builds a dataset, deriving `class_labels` as the sorted set of labels present.
    pub fn new(records: Vec<DatasetRecord<T>>) -> Self {
        let mut class_labels: Vec<String> =
            records.iter().map(|r| r.label.clone()).collect();
        class_labels.sort();
        class_labels.dedup();
        Self {
            records,
            class_labels,
        }
    }

    pub fn records(&self) -> &[DatasetRecord<T>] {
        &self.records
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Index of `label` in the ascending vocabulary, if present.
    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.class_labels.iter().position(|l| l == label)
    }

    /// Record counts per class, aligned with `class_labels`.
    pub fn counts_per_class(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.class_labels.len()];
        for record in &self.records {
            if let Some(i) = self.class_index(&record.label) {
                counts[i] += 1;
            }
        }
        counts
    }
}

/// Rows dropped during loading, by rejection reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DropCounts {
    pub submitter: usize,
    pub label: usize,
    pub missing_landmarks: usize,
}

/// Filtering policy applied while loading a legend.
#[derive(Debug, Clone)]
pub struct LoadConfig {
    /// Submitters whose rows are discarded outright.
    pub excluded_submitters: Vec<String>,
    /// Only rows with these canonical labels are kept.
    pub kept_labels: Vec<String>,
}

impl Default for LoadConfig {
    fn default() -> Self {
        Self {
            excluded_submitters: vec!["jhamski".to_string(), "628".to_string()],
            kept_labels: vec!["happiness".to_string(), "neutral".to_string()],
        }
    }
}

/// One row of a landmark table: image id, label column, and coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkRow<T> {
    pub image_id: String,
    pub label: String,
    pub landmarks: LandmarkSet<T>,
}

fn canonical(label: &str) -> String {
    label.trim().to_lowercase()
}

/// Parses landmark CSV text: header row, then `image_id,label,x0,y0,…,x67,y67`.
pub fn parse_landmark_rows<T: Scalar>(text: &str) -> Result<Vec<LandmarkRow<T>>, DataError> {
    let mut lines = text.lines().enumerate();
    let Some(_) = lines.next() else {
        return Err(DataError::Parse {
            line: 1,
            message: "missing header row".to_string(),
        });
    };
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = 2 + 2 * LANDMARK_COUNT;
        if fields.len() != expected {
            return Err(DataError::Parse {
                line: line_no,
                message: format!("expected {expected} fields, found {}", fields.len()),
            });
        }
        let image_id = fields[0].trim().to_string();
        if image_id.is_empty() {
            return Err(DataError::Parse {
                line: line_no,
                message: "empty image id".to_string(),
            });
        }
        let label = canonical(fields[1]);
        let mut points = Vec::with_capacity(LANDMARK_COUNT);
        for pair in fields[2..].chunks_exact(2) {
            let x = parse_coord(pair[0], line_no)?;
            let y = parse_coord(pair[1], line_no)?;
            points.push(Point {
                x: T::from_f64(x),
                y: T::from_f64(y),
            });
        }
        let landmarks = LandmarkSet::new(points).map_err(|e| DataError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        rows.push(LandmarkRow {
            image_id,
            label,
            landmarks,
        });
    }
    Ok(rows)
}

fn parse_coord(field: &str, line_no: usize) -> Result<f64, DataError> {
    field.trim().parse::<f64>().map_err(|_| DataError::Parse {
        line: line_no,
        message: format!("bad coordinate {:?}", field.trim()),
    })
}

/// Reads a landmark CSV file; see [`parse_landmark_rows`].
pub fn read_landmark_rows<T: Scalar>(path: &Path) -> Result<Vec<LandmarkRow<T>>, DataError> {
    parse_landmark_rows(&std::fs::read_to_string(path)?)
}

/// Joins legend text (`submitter,image_id,label` after a header) with landmark rows.
///
/// Rows are rejected in order: excluded submitter, unkept label, then missing
/// landmarks; each rejection bumps the matching [`DropCounts`] field. Kept rows
/// must carry a label from [`EMOTION_LABELS`]. Duplicate image ids in either
/// table are an error.
pub fn parse_legend<T: Scalar>(
    legend: &str,
    landmark_rows: Vec<LandmarkRow<T>>,
    config: &LoadConfig,
) -> Result<(LabeledDataset<T>, DropCounts), DataError> {
    let mut by_id: HashMap<String, LandmarkSet<T>> = HashMap::new();
    for row in landmark_rows {
        if by_id.insert(row.image_id.clone(), row.landmarks).is_some() {
            return Err(DataError::DuplicateImageId(row.image_id));
        }
    }

    let mut lines = legend.lines().enumerate();
    let Some(_) = lines.next() else {
        return Err(DataError::Parse {
            line: 1,
            message: "missing header row".to_string(),
        });
    };

    let mut seen_ids: HashMap<String, ()> = HashMap::new();
    let mut records = Vec::new();
    let mut drops = DropCounts::default();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(DataError::Parse {
                line: line_no,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let submitter = fields[0].trim().to_string();
        let image_id = fields[1].trim().to_string();
        if image_id.is_empty() {
            return Err(DataError::Parse {
                line: line_no,
                message: "empty image id".to_string(),
            });
        }
        if seen_ids.insert(image_id.clone(), ()).is_some() {
            return Err(DataError::DuplicateImageId(image_id));
        }
        let label = canonical(fields[2]);

        if config.excluded_submitters.iter().any(|s| *s == submitter) {
            drops.submitter += 1;
            continue;
        }
        if !config.kept_labels.iter().any(|l| *l == label) {
            drops.label += 1;
            continue;
        }
        let Some(landmarks) = by_id.remove(&image_id) else {
            drops.missing_landmarks += 1;
            continue;
        };
        if !EMOTION_LABELS.contains(&label.as_str()) {
            return Err(DataError::Parse {
                line: line_no,
                message: format!("label {label:?} is not a recognized emotion"),
            });
        }
        records.push(DatasetRecord {
            image_id,
            label,
            submitter,
            landmarks,
        });
    }
    Ok((LabeledDataset::new(records), drops))
}

/// Loads a legend CSV and landmark CSV pair from disk; see [`parse_legend`].
pub fn load_legend<T: Scalar>(
    legend_path: &Path,
    landmarks_path: &Path,
    config: &LoadConfig,
) -> Result<(LabeledDataset<T>, DropCounts), DataError> {
    let rows = read_landmark_rows(landmarks_path)?;
    parse_legend(&std::fs::read_to_string(legend_path)?, rows, config)
}

/// Splits off `val_per_class` records per class, seeded, without replacement.
///
/// Every class must have strictly more than `val_per_class` records so the
/// training half keeps at least one. Both halves preserve record order and
/// inherit the parent vocabulary.
pub fn stratified_split<T: Scalar>(
    ds: &LabeledDataset<T>,
    val_per_class: usize,
    seed: u64,
) -> Result<(LabeledDataset<T>, LabeledDataset<T>), DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_validation = vec![false; ds.len()];
    for label in ds.class_labels() {
        let mut indices: Vec<usize> = ds
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == *label)
            .map(|(i, _)| i)
            .collect();
        if indices.len() <= val_per_class {
            return Err(DataError::InsufficientClassCount {
                label: label.clone(),
                available: indices.len(),
                requested: val_per_class,
            });
        }
        indices.shuffle(&mut rng);
        for &i in &indices[..val_per_class] {
            in_validation[i] = true;
        }
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (i, record) in ds.records.iter().enumerate() {
        if in_validation[i] {
            val.push(record.clone());
        } else {
            train.push(record.clone());
        }
    }
    let train = LabeledDataset {
        records: train,
        class_labels: ds.class_labels.clone(),
    };
    let val = LabeledDataset {
        records: val,
        class_labels: ds.class_labels.clone(),
    };
    Ok((train, val))
}

/// How landmarks are turned into model inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// All 68 coordinates scaled to the unit square (length 136).
    Absolute,
    /// Part geometry relative to anchors (length 114).
    Modified,
    /// Binary occupancy grid, optionally doubled with horizontal flips.
    Raster { grid_size: usize, augment_flip: bool },
}

impl Representation {
    /// Raster at the native frame resolution without augmentation.
    pub fn raster() -> Self {
        Representation::Raster {
            grid_size: FRAME_SIZE,
            augment_flip: false,
        }
    }
}

/// Model-ready inputs paired with class indices into the source vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorSet<T> {
    Vectors(Vec<(Vec<T>, usize)>),
    Grids(Vec<(LandmarkGrid, usize)>),
}

impl<T> TensorSet<T> {
    pub fn len(&self) -> usize {
        match self {
            TensorSet::Vectors(v) => v.len(),
            TensorSet::Grids(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Converts every record to the chosen representation.
///
/// Class indices are positions in the dataset's ascending vocabulary. Raster
/// with `augment_flip` appends a horizontal flip of every grid, same labels,
/// after the originals.
pub fn build_tensors<T: Scalar>(
    ds: &LabeledDataset<T>,
    representation: Representation,
) -> Result<TensorSet<T>, DataError> {
    if ds.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let class_of = |record: &DatasetRecord<T>| {
        ds.class_index(&record.label).expect("label in vocabulary")
    };
    match representation {
        Representation::Absolute => {
            let mut out = Vec::with_capacity(ds.len());
            for record in &ds.records {
                out.push((absolute_features(&record.landmarks).values, class_of(record)));
            }
            Ok(TensorSet::Vectors(out))
        }
        Representation::Modified => {
            let mut out = Vec::with_capacity(ds.len());
            for record in &ds.records {
                out.push((
                    modified_features(&record.landmarks).values,
                    class_of(record),
                ));
            }
            Ok(TensorSet::Vectors(out))
        }
        Representation::Raster {
            grid_size,
            augment_flip,
        } => {
            let mut out = Vec::with_capacity(ds.len() * if augment_flip { 2 } else { 1 });
            for record in &ds.records {
                out.push((
                    rasterize_sized(&record.landmarks, grid_size),
                    class_of(record),
                ));
            }
            if augment_flip {
                for i in 0..ds.len() {
                    let (grid, class) = &out[i];
                    out.push((hflip(grid), *class));
                }
            }
            Ok(TensorSet::Grids(out))
        }
    }
}

/// Serializes a legend CSV (`submitter,image_id,label` with header).
pub fn legend_csv<T: Scalar>(ds: &LabeledDataset<T>) -> String {
    let mut out = String::from("submitter,image_id,label\n");
    for record in &ds.records {
        let _ = writeln!(
            out,
            "{},{},{}",
            record.submitter, record.image_id, record.label
        );
    }
    out
}

/// Serializes a landmark CSV (`image_id,label,x0,y0,…,x67,y67` with header).
pub fn landmarks_csv<T: Scalar>(ds: &LabeledDataset<T>) -> String {
    let mut header = String::from("image_id,label");
    for i in 0..LANDMARK_COUNT {
        let _ = write!(header, ",x{i},y{i}");
    }
    header.push('\n');
    let mut out = header;
    for record in &ds.records {
        let _ = write!(out, "{},{}", record.image_id, record.label);
        for p in record.landmarks.points() {
            let _ = write!(out, ",{},{}", p.x.to_f64(), p.y.to_f64());
        }
        out.push('\n');
    }
    out
}

/// Writes both CSVs for a dataset; see [`legend_csv`] and [`landmarks_csv`].
pub fn write_dataset_csvs<T: Scalar>(
    ds: &LabeledDataset<T>,
    legend_path: &Path,
    landmarks_path: &Path,
) -> Result<(), DataError> {
    std::fs::write(legend_path, legend_csv(ds))?;
    std::fs::write(landmarks_path, landmarks_csv(ds))?;
    Ok(())
}
