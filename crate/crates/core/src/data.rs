//! Datasets: CSV and skeleton JSON formats, synthetic generators, splits and
//! feature normalisation.
//!
//! CSV files are comma-separated UTF-8 with a header row. One column must be
//! named `label` and hold integers; every other column is a feature:
//!
//! ```text
//! x0,x1,label
//! 0.5,-1.25,1
//! 2,0.125,-1
//! ```
//!
//! Skeleton files are JSON documents of the form
//!
//! ```text
//! {"videos": [{"label": 3, "frames": [[[x, y, z], ...joints], ...frames]}]}
//! ```
//!
//! with a constant joint count and coordinate dimension (2 or 3) within each
//! video.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::skeleton::{video_descriptor, SkeletonError, SkeletonSequence, VideoDescriptor};

/// Name of the label column in CSV files.
pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("no `label` column in header")]
    MissingLabel,
    #[error("no feature columns")]
    NoFeatures,
    #[error("dataset is empty")]
    Empty,
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged { line: u64, expected: usize, found: usize },
    #[error("line {line}, column `{column}`: cannot parse `{value}`")]
    Parse { line: u64, column: String, value: String },
    #[error("line {line}, column `{column}`: non-finite value `{value}`")]
    NonFinite { line: u64, column: String, value: String },
    #[error("video {video}: {source}")]
    Skeleton { video: usize, source: SkeletonError },
    #[error("videos disagree on shape: video {video} has {found}, expected {expected}")]
    SkeletonShape { video: usize, expected: String, found: String },
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("row {0}: unit-sum normalisation needs non-negative entries with positive sum")]
    BadUnitSumRow(usize),
    #[error("normaliser expects {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Features and integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<i64>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<i64>, feature_names: Option<Vec<String>>) -> Result<Self> {
        if x.rows() == 0 {
            return Err(DataError::Empty);
        }
        if x.cols() == 0 {
            return Err(DataError::NoFeatures);
        }
        if y.len() != x.rows() {
            return Err(DataError::Invalid(format!("{} rows but {} labels", x.rows(), y.len())));
        }
        if !x.all_finite() {
            return Err(DataError::Invalid("non-finite feature value".into()));
        }
        let feature_names = match feature_names {
            Some(names) if names.len() == x.cols() => names,
            Some(names) => {
                return Err(DataError::Invalid(format!(
                    "{} feature names for {} columns",
                    names.len(),
                    x.cols()
                )))
            }
            None => (0..x.cols()).map(|j| format!("x{j}")).collect(),
        };
        Ok(Self { x, y, feature_names })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Distinct labels in ascending order.
    pub fn classes(&self) -> Vec<i64> {
        let mut c = self.y.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// True when every label is −1 or +1.
    pub fn is_binary(&self) -> bool {
        self.y.iter().all(|&l| l == 1 || l == -1)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let d = self.dim();
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            data.extend_from_slice(self.x.row(i));
        }
        Dataset {
            x: Matrix::from_vec(indices.len(), d, data).expect("consistent shape"),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    read_csv(File::open(path)?)
}

pub fn read_csv(reader: impl std::io::Read) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let label_at = header
        .iter()
        .position(|h| h.trim() == LABEL_COLUMN)
        .ok_or(DataError::MissingLabel)?;
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_at)
        .map(|(_, h)| h.trim().to_string())
        .collect();
    if names.is_empty() {
        return Err(DataError::NoFeatures);
    }
    let mut data = Vec::new();
    let mut y = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(DataError::Ragged {
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        for (i, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            let column = || header[i].to_string();
            if i == label_at {
                let label = cell.parse::<i64>().map_err(|_| DataError::Parse {
                    line,
                    column: column(),
                    value: cell.to_string(),
                })?;
                y.push(label);
            } else {
                let v = cell.parse::<f64>().map_err(|_| DataError::Parse {
                    line,
                    column: column(),
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(DataError::NonFinite {
                        line,
                        column: column(),
                        value: cell.to_string(),
                    });
                }
                data.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(DataError::Empty);
    }
    let x = Matrix::from_vec(y.len(), names.len(), data).expect("consistent shape");
    Dataset::new(x, y, Some(names))
}

/// Writes features in order followed by the label column. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv(dataset: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header: Vec<&str> = dataset.feature_names.iter().map(String::as_str).collect();
    header.push(LABEL_COLUMN);
    w.write_record(&header)?;
    let mut fields = Vec::with_capacity(dataset.dim() + 1);
    for (row, label) in dataset.x.iter_rows().zip(&dataset.y) {
        fields.clear();
        fields.extend(row.iter().map(|v| v.to_string()));
        fields.push(label.to_string());
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_csv(dataset, std::io::BufWriter::new(file))
}

/// A skeleton sequence with its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub label: i64,
    pub sequence: SkeletonSequence,
}

#[derive(Deserialize)]
struct SkeletonFile {
    videos: Vec<VideoRecord>,
}

#[derive(Deserialize)]
struct VideoRecord {
    label: i64,
    frames: Vec<Vec<Vec<f64>>>,
}

pub fn load_skeletons(path: impl AsRef<Path>) -> Result<Vec<LabeledSequence>> {
    let file: SkeletonFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    parse_videos(file)
}

pub fn parse_skeletons(text: &str) -> Result<Vec<LabeledSequence>> {
    parse_videos(serde_json::from_str(text)?)
}

fn parse_videos(file: SkeletonFile) -> Result<Vec<LabeledSequence>> {
    if file.videos.is_empty() {
        return Err(DataError::Empty);
    }
    file.videos
        .into_iter()
        .enumerate()
        .map(|(video, v)| {
            let sequence =
                SkeletonSequence::new(&v.frames).map_err(|source| DataError::Skeleton { video, source })?;
            Ok(LabeledSequence {
                label: v.label,
                sequence,
            })
        })
        .collect()
}

/// One descriptor row per video. All videos must share joint count and
/// coordinate dimension.
pub fn featurize(videos: &[LabeledSequence], chunks: usize) -> Result<Dataset> {
    let first = videos.first().ok_or(DataError::Empty)?;
    let (joints, dim) = (first.sequence.n_joints(), first.sequence.dim());
    let mut data = Vec::new();
    for (video, v) in videos.iter().enumerate() {
        let s = &v.sequence;
        if (s.n_joints(), s.dim()) != (joints, dim) {
            return Err(DataError::SkeletonShape {
                video,
                expected: format!("{joints} joints x {dim}"),
                found: format!("{} joints x {}", s.n_joints(), s.dim()),
            });
        }
        let d = video_descriptor(s, chunks).map_err(|source| DataError::Skeleton { video, source })?;
        data.extend(d.values);
    }
    let names = VideoDescriptor::feature_names(joints, chunks, dim);
    let x = Matrix::from_vec(videos.len(), names.len(), data).expect("consistent shape");
    Dataset::new(x, videos.iter().map(|v| v.label).collect(), Some(names))
}

fn linspace(start: f64, end: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (end - start) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |i| start + step * i as f64)
}

fn shuffled(x: Vec<[f64; 2]>, y: Vec<i64>, rng: &mut ChaCha8Rng) -> (Vec<[f64; 2]>, Vec<i64>) {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.shuffle(rng);
    (order.iter().map(|&i| x[i]).collect(), order.iter().map(|&i| y[i]).collect())
}

fn two_column(points: Vec<[f64; 2]>, y: Vec<i64>) -> Result<Dataset> {
    let x = Matrix::from_rows(&points).expect("two columns");
    Dataset::new(x, y, Some(vec!["x0".into(), "x1".into()]))
}

/// Two interleaving unit half-circles. The upper moon is centred at the
/// origin and labelled −1; the lower one is centred at (1, 0.5) and labelled
/// +1. `noise` is the standard deviation of isotropic Gaussian jitter.
pub fn make_two_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(DataError::Invalid("two-moons needs at least 2 points".into()));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(DataError::Invalid(format!("noise must be non-negative, got {noise}")));
    }
    let n_outer = n / 2;
    let n_inner = n - n_outer;
    let mut points = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for t in linspace(0.0, std::f64::consts::PI, n_outer) {
        points.push([t.cos(), t.sin()]);
        y.push(-1);
    }
    for t in linspace(0.0, std::f64::consts::PI, n_inner) {
        points.push([1.0 - t.cos(), 0.5 - t.sin()]);
        y.push(1);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut points, y) = shuffled(points, y, &mut rng);
    if noise > 0.0 {
        let normal = Normal::new(0.0, noise).expect("valid std");
        for p in &mut points {
            p[0] += normal.sample(&mut rng);
            p[1] += normal.sample(&mut rng);
        }
    }
    two_column(points, y)
}

/// Four Gaussian blobs centred at (±1, ±1). Blobs in the first and third
/// quadrants are labelled +1, the other two −1.
pub fn make_xor_gaussians(n: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if n < 4 {
        return Err(DataError::Invalid("xor-gaussians needs at least 4 points".into()));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(DataError::Invalid(format!("spread must be non-negative, got {spread}")));
    }
    const CENTRES: [[f64; 2]; 4] = [[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = (spread > 0.0).then(|| Normal::new(0.0, spread).expect("valid std"));
    let mut points = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let c = CENTRES[i % 4];
        let mut p = c;
        if let Some(normal) = &normal {
            p[0] += normal.sample(&mut rng);
            p[1] += normal.sample(&mut rng);
        }
        points.push(p);
        y.push(if c[0] * c[1] > 0.0 { 1 } else { -1 });
    }
    let (points, y) = shuffled(points, y, &mut rng);
    two_column(points, y)
}

/// How to divide a dataset into train and test parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

/// Seeded train/test split. Both parts keep the original row order.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let f = spec.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(DataError::BadFraction(f));
    }
    let n = dataset.len();
    if n < 2 {
        return Err(DataError::Invalid("need at least 2 rows to split".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    if spec.stratified {
        for class in dataset.classes() {
            let mut idx: Vec<usize> = (0..n).filter(|&i| dataset.y[i] == class).collect();
            idx.shuffle(&mut rng);
            let take = (f * idx.len() as f64).round() as usize;
            train.extend_from_slice(&idx[..take]);
        }
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let take = ((f * n as f64).round() as usize).clamp(1, n - 1);
        train.extend_from_slice(&idx[..take]);
    }
    train.sort_unstable();
    let mut in_train = vec![false; n];
    for &i in &train {
        in_train[i] = true;
    }
    let test: Vec<usize> = (0..n).filter(|&i| !in_train[i]).collect();
    if train.is_empty() || test.is_empty() {
        return Err(DataError::Invalid("split leaves one side empty".into()));
    }
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormalizeMode {
    #[default]
    None,
    MinMaxPerDim,
    UnitSumRows,
}

impl std::str::FromStr for NormalizeMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" | "None" => Ok(NormalizeMode::None),
            "minmax" | "MinMaxPerDim" => Ok(NormalizeMode::MinMaxPerDim),
            "unitsum" | "UnitSumRows" => Ok(NormalizeMode::UnitSumRows),
            other => Err(format!("unknown normalisation `{other}` (expected none, minmax or unitsum)")),
        }
    }
}

/// A feature transform fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mode: NormalizeMode,
    /// Per-dimension training minimum (min-max mode only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub min: Vec<f64>,
    /// Per-dimension training maximum (min-max mode only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub max: Vec<f64>,
}

impl Normalizer {
    pub fn fit(x: &Matrix, mode: NormalizeMode) -> Result<Self> {
        let (min, max) = match mode {
            NormalizeMode::MinMaxPerDim => {
                let mut lo = vec![f64::INFINITY; x.cols()];
                let mut hi = vec![f64::NEG_INFINITY; x.cols()];
                for row in x.iter_rows() {
                    for (d, &v) in row.iter().enumerate() {
                        lo[d] = lo[d].min(v);
                        hi[d] = hi[d].max(v);
                    }
                }
                (lo, hi)
            }
            _ => (Vec::new(), Vec::new()),
        };
        Ok(Self { mode, min, max })
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = x.clone();
        match self.mode {
            NormalizeMode::None => {}
            NormalizeMode::MinMaxPerDim => {
                if x.cols() != self.min.len() {
                    return Err(DataError::DimensionMismatch {
                        expected: self.min.len(),
                        found: x.cols(),
                    });
                }
                for i in 0..out.rows() {
                    for (d, v) in out.row_mut(i).iter_mut().enumerate() {
                        let range = self.max[d] - self.min[d];
                        *v = if range > 0.0 {
                            ((*v - self.min[d]) / range).clamp(0.0, 1.0)
                        } else {
                            0.0
                        };
                    }
                }
            }
            NormalizeMode::UnitSumRows => {
                for i in 0..out.rows() {
                    let row = out.row_mut(i);
                    let sum: f64 = row.iter().sum();
                    if row.iter().any(|v| *v < 0.0) || !(sum > 0.0 && sum.is_finite()) {
                        return Err(DataError::BadUnitSumRow(i));
                    }
                    for v in row.iter_mut() {
                        *v /= sum;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn apply_dataset(&self, dataset: &Dataset) -> Result<Dataset> {
        Ok(Dataset {
            x: self.apply(&dataset.x)?,
            y: dataset.y.clone(),
            feature_names: dataset.feature_names.clone(),
        })
    }
}

/// Fits a normaliser on `dataset` and returns the transformed copy.
pub fn normalize(dataset: &Dataset, mode: NormalizeMode) -> Result<(Dataset, Normalizer)> {
    let n = Normalizer::fit(&dataset.x, mode)?;
    Ok((n.apply_dataset(dataset)?, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_bitwise() {
        let x = Matrix::from_rows(&[[0.1, -1.0 / 3.0], [1e-300, 12345.678901234567]]).unwrap();
        let d = Dataset::new(x, vec![1, -1], Some(vec!["a".into(), "b".into()])).unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, d);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("a,b,label\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn csv_label_column_may_come_first() {
        let d = read_csv("label,f\n1,0.5\n-1,2\n".as_bytes()).unwrap();
        assert_eq!(d.y, vec![1, -1]);
        assert_eq!(d.x.as_slice(), &[0.5, 2.0]);
        assert_eq!(d.feature_names, vec!["f"]);
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(matches!(read_csv("a,b\n1,2\n".as_bytes()), Err(DataError::MissingLabel)));
        assert!(matches!(read_csv("a,label\nNaN,1\n".as_bytes()), Err(DataError::NonFinite { .. })));
        assert!(matches!(read_csv("a,label\nfoo,1\n".as_bytes()), Err(DataError::Parse { .. })));
        assert!(matches!(read_csv("a,label\n1,1,3\n".as_bytes()), Err(DataError::Ragged { .. })));
        assert!(matches!(read_csv("a,label\n".as_bytes()), Err(DataError::Empty)));
    }

    #[test]
    fn skeleton_json_parses() {
        let text = r#"{"videos":[{"label":2,"frames":[[[0,1],[2,3]],[[4,5],[6,7]]]}]}"#;
        let v = parse_skeletons(text).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].label, 2);
        assert_eq!(v[0].sequence.n_frames(), 2);
        assert_eq!(v[0].sequence.joint(1, 1), &[6.0, 7.0]);
    }

    #[test]
    fn skeleton_joint_count_change_is_rejected() {
        let text = r#"{"videos":[{"label":0,"frames":[[[0,1],[2,3]],[[4,5]]]}]}"#;
        assert!(matches!(parse_skeletons(text), Err(DataError::Skeleton { video: 0, .. })));
    }

    #[test]
    fn two_moons_noise_free_on_circles() {
        let d = make_two_moons(101, 0.0, 3).unwrap();
        for (p, &l) in d.x.iter_rows().zip(&d.y) {
            let (cx, cy) = if l == -1 { (0.0, 0.0) } else { (1.0, 0.5) };
            let r = ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt();
            assert!((r - 1.0).abs() < 1e-12);
        }
        let pos = d.y.iter().filter(|&&l| l == 1).count() as i64;
        assert!((2 * pos - 101).abs() <= 1);
    }

    #[test]
    fn xor_without_spread_is_four_points() {
        let d = make_xor_gaussians(40, 0.0, 1).unwrap();
        let mut distinct: Vec<(i64, i64)> = d.x.iter_rows().map(|p| (p[0] as i64, p[1] as i64)).collect();
        distinct.sort_unstable();
        distinct.dedup();
        assert_eq!(distinct.len(), 4);
        for (p, &l) in d.x.iter_rows().zip(&d.y) {
            assert_eq!(l, if p[0] * p[1] > 0.0 { 1 } else { -1 });
        }
    }

    #[test]
    fn minmax_constant_dim_and_clamping() {
        let train = Matrix::from_rows(&[[1.0, 5.0], [3.0, 5.0]]).unwrap();
        let n = Normalizer::fit(&train, NormalizeMode::MinMaxPerDim).unwrap();
        assert_eq!(n.apply(&train).unwrap().as_slice(), &[0.0, 0.0, 1.0, 0.0]);
        let test = Matrix::from_rows(&[[4.0, 7.0], [-2.0, 1.0]]).unwrap();
        assert_eq!(n.apply(&test).unwrap().as_slice(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn unit_sum_rows() {
        let x = Matrix::from_rows(&[[1.0, 3.0]]).unwrap();
        let n = Normalizer::fit(&x, NormalizeMode::UnitSumRows).unwrap();
        assert_eq!(n.apply(&x).unwrap().as_slice(), &[0.25, 0.75]);
        let bad = Matrix::from_rows(&[[1.0, -3.0]]).unwrap();
        assert!(matches!(n.apply(&bad), Err(DataError::BadUnitSumRow(0))));
        let zero = Matrix::from_rows(&[[0.0, 0.0]]).unwrap();
        assert!(matches!(n.apply(&zero), Err(DataError::BadUnitSumRow(0))));
    }
}
