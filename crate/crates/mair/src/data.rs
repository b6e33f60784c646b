//! Dataset generation and ingestion.
//!
//! Synthetic 2-D benchmark distributions stand in for full-size image
//! datasets; small file-based datasets load from CSV (features then an
//! integer label per row) or the big-endian IDX image/label format. Image
//! bytes scale by 1/255 with no standardization so an epsilon expressed in
//! pixel units keeps its meaning.

use std::fmt::Write as _;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::{self, tag};

/// Train/test membership of one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// An immutable labeled dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// n x d input matrix.
    pub inputs: Matrix,
    /// n class indices, each `< classes`.
    pub labels: Vec<usize>,
    pub classes: usize,
    /// Per-coordinate domain box for image-like data.
    pub domain_box: Option<(f64, f64)>,
    /// Per-row split tags, parallel to `labels`.
    pub split: Vec<Split>,
}

impl Dataset {
    pub fn new(
        inputs: Matrix,
        labels: Vec<usize>,
        classes: usize,
        domain_box: Option<(f64, f64)>,
        split: Vec<Split>,
    ) -> Result<Self> {
        if inputs.rows == 0 {
            return Err(Error::Input("dataset is empty".into()));
        }
        if labels.len() != inputs.rows || split.len() != inputs.rows {
            return Err(Error::Input(format!(
                "{} rows but {} labels and {} split tags",
                inputs.rows,
                labels.len(),
                split.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::Input(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        Ok(Self {
            inputs,
            labels,
            classes,
            domain_box,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.inputs.row(i)
    }

    pub fn indices_of(&self, which: Split) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.split[i] == which)
            .collect()
    }

    /// Retags every row by a deterministic hash of `(seed, index)`;
    /// `test_fraction` of rows land in the test split.
    pub fn resplit(&mut self, seed: u64, test_fraction: f64) {
        for i in 0..self.len() {
            let h = rng::derive_seed(seed, &[tag::SPLIT, i as u64]);
            let u = (h >> 11) as f64 / (1u64 << 53) as f64;
            self.split[i] = if u < test_fraction {
                Split::Test
            } else {
                Split::Train
            };
        }
    }
}

/// Global scale of the synthetic generators: shapes are built at the
/// conventional unit scale (noise included) and then multiplied by this
/// factor, so the default threat radius 0.15 is geometrically meaningful.
pub const SYNTH_SCALE: f64 = 0.5;

/// Synthetic benchmark families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Three well-separated Gaussian blobs (three classes).
    GaussianBlobs,
    /// The interleaved two-moons benchmark (two classes).
    TwoMoons,
    /// Two concentric rings (two classes).
    ConcentricRings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n_per_class: usize,
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_class == 0 {
            return Err(Error::Config("need at least one point per class".into()));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::Config(format!(
                "noise must be >= 0, got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

const BLOB_CENTERS: [(f64, f64); 3] = [(0.0, 0.0), (3.0, 0.0), (0.0, 3.0)];

/// Generates a class-balanced 2-D dataset, deterministic in the seed, with
/// an 80/20 train/test split derived from the same seed. All coordinates
/// (noise included) are multiplied by [`SYNTH_SCALE`].
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut stream = rng::stream(spec.seed, &[tag::DATA, spec.kind as u64]);
    let normal = Normal::new(0.0, 1.0).map_err(|e| Error::Config(e.to_string()))?;
    let noise = |s: &mut rand_chacha::ChaCha8Rng| -> (f64, f64) {
        if spec.noise == 0.0 {
            (0.0, 0.0)
        } else {
            (spec.noise * normal.sample(s), spec.noise * normal.sample(s))
        }
    };

    let n = spec.n_per_class;
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    match spec.kind {
        SyntheticKind::GaussianBlobs => {
            for (c, center) in BLOB_CENTERS.iter().enumerate() {
                for _ in 0..n {
                    let (dx, dy) = noise(&mut stream);
                    points.push((center.0 + dx, center.1 + dy));
                    labels.push(c);
                }
            }
        }
        SyntheticKind::TwoMoons => {
            for i in 0..n {
                let t = std::f64::consts::PI * i as f64 / (n - 1).max(1) as f64;
                let (dx, dy) = noise(&mut stream);
                points.push((t.cos() + dx, t.sin() + dy));
                labels.push(0);
            }
            for i in 0..n {
                let t = std::f64::consts::PI * i as f64 / (n - 1).max(1) as f64;
                let (dx, dy) = noise(&mut stream);
                points.push((1.0 - t.cos() + dx, 0.5 - t.sin() + dy));
                labels.push(1);
            }
        }
        SyntheticKind::ConcentricRings => {
            for (c, radius) in [1.0, 2.0].iter().enumerate() {
                for i in 0..n {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    let (dx, dy) = noise(&mut stream);
                    points.push((radius * t.cos() + dx, radius * t.sin() + dy));
                    labels.push(c);
                }
            }
        }
    }

    let classes = match spec.kind {
        SyntheticKind::GaussianBlobs => 3,
        _ => 2,
    };
    let data: Vec<f64> = points
        .iter()
        .flat_map(|&(x, y)| [SYNTH_SCALE * x, SYNTH_SCALE * y])
        .collect();
    let rows = points.len();
    let mut dataset = Dataset::new(
        Matrix::new(rows, 2, data)?,
        labels,
        classes,
        None,
        vec![Split::Train; rows],
    )?;
    dataset.resplit(spec.seed, 0.2);
    Ok(dataset)
}

/// CSV layout: optional header, then one row per instance with
/// `features` real values followed by an integer label.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CsvSchema {
    pub features: usize,
    pub classes: usize,
}

/// Loads a CSV dataset. A first line that fails numeric parsing is treated
/// as a header. All rows land in the train split; use
/// [`Dataset::resplit`] to carve out a test set.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, schema)
}

fn parse_csv(text: &str, schema: &CsvSchema) -> Result<Dataset> {
    if schema.features == 0 || schema.classes < 2 {
        return Err(Error::Config(
            "schema needs >= 1 feature and >= 2 classes".into(),
        ));
    }
    let mut data: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if lineno == 0 => continue, // header
            Err(e) => {
                return Err(Error::Input(format!(
                    "line {}: cannot parse '{line}': {e}",
                    lineno + 1
                )))
            }
        };
        if values.len() != schema.features + 1 {
            return Err(Error::Input(format!(
                "line {}: expected {} fields, found {}",
                lineno + 1,
                schema.features + 1,
                values.len()
            )));
        }
        let label = values[schema.features];
        if label.fract() != 0.0 || label < 0.0 {
            return Err(Error::Input(format!(
                "line {}: label {label} is not a class index",
                lineno + 1
            )));
        }
        let label = label as usize;
        if label >= schema.classes {
            return Err(Error::Input(format!(
                "line {}: label {label} out of range for {} classes",
                lineno + 1,
                schema.classes
            )));
        }
        data.extend_from_slice(&values[..schema.features]);
        labels.push(label);
    }
    let rows = labels.len();
    if rows == 0 {
        return Err(Error::Input("CSV contains no data rows".into()));
    }
    Dataset::new(
        Matrix::new(rows, schema.features, data)?,
        labels,
        schema.classes,
        None,
        vec![Split::Train; rows],
    )
}

/// Serializes a dataset as CSV with full round-trip precision.
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..dataset.len() {
        for v in dataset.row(i) {
            write!(out, "{v},").expect("string write");
        }
        writeln!(out, "{}", dataset.labels[i]).expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_be_u32(buf: &[u8], pos: &mut usize, what: &str) -> Result<u32> {
    if *pos + 4 > buf.len() {
        return Err(Error::Parse {
            offset: *pos as u64,
            message: format!("unexpected end of file while reading {what}"),
        });
    }
    let v = u32::from_be_bytes([buf[*pos], buf[*pos + 1], buf[*pos + 2], buf[*pos + 3]]);
    *pos += 4;
    Ok(v)
}

/// Loads an IDX image/label pair. Pixels scale to `[0, 1]`, images flatten
/// to rows, and the domain box is set to the unit interval.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let img = std::fs::read(images_path)?;
    let mut pos = 0usize;
    let magic = read_be_u32(&img, &mut pos, "image magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: format!("bad image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        });
    }
    let count = read_be_u32(&img, &mut pos, "image count")? as usize;
    let rows = read_be_u32(&img, &mut pos, "image rows")? as usize;
    let cols = read_be_u32(&img, &mut pos, "image cols")? as usize;
    let dim = rows * cols;
    if img.len() - pos != count * dim {
        return Err(Error::Parse {
            offset: pos as u64,
            message: format!(
                "expected {} pixel bytes for {count} images of {rows}x{cols}, found {}",
                count * dim,
                img.len() - pos
            ),
        });
    }
    let data: Vec<f64> = img[pos..].iter().map(|&b| b as f64 / 255.0).collect();

    let lab = std::fs::read(labels_path)?;
    let mut lpos = 0usize;
    let lmagic = read_be_u32(&lab, &mut lpos, "label magic")?;
    if lmagic != IDX_LABELS_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: format!("bad label magic {lmagic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        });
    }
    let lcount = read_be_u32(&lab, &mut lpos, "label count")? as usize;
    if lcount != count {
        return Err(Error::Parse {
            offset: lpos as u64,
            message: format!("{count} images but {lcount} labels"),
        });
    }
    if lab.len() - lpos != lcount {
        return Err(Error::Parse {
            offset: lpos as u64,
            message: format!("expected {lcount} label bytes, found {}", lab.len() - lpos),
        });
    }
    let labels: Vec<usize> = lab[lpos..].iter().map(|&b| b as usize).collect();
    let classes = labels.iter().copied().max().unwrap_or(0) + 1;

    Dataset::new(
        Matrix::new(count, dim, data)?,
        labels,
        classes.max(2),
        Some((0.0, 1.0)),
        vec![Split::Train; count],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: SyntheticKind, n: usize, noise: f64, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            kind,
            n_per_class: n,
            noise,
            seed,
        }
    }

    #[test]
    fn zero_noise_blobs_collapse_to_class_means() {
        let ds = generate(&spec(SyntheticKind::GaussianBlobs, 5, 0.0, 3)).unwrap();
        for i in 0..ds.len() {
            let c = ds.labels[i];
            assert_eq!(
                ds.row(i),
                &[
                    SYNTH_SCALE * BLOB_CENTERS[c].0,
                    SYNTH_SCALE * BLOB_CENTERS[c].1
                ]
            );
        }
    }

    #[test]
    fn generation_is_deterministic_bitwise() {
        let a = generate(&spec(SyntheticKind::TwoMoons, 100, 0.1, 9)).unwrap();
        let b = generate(&spec(SyntheticKind::TwoMoons, 100, 0.1, 9)).unwrap();
        assert_eq!(a, b);
        let c = generate(&spec(SyntheticKind::TwoMoons, 100, 0.1, 10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generated_datasets_are_class_balanced() {
        for kind in [
            SyntheticKind::GaussianBlobs,
            SyntheticKind::TwoMoons,
            SyntheticKind::ConcentricRings,
        ] {
            let ds = generate(&spec(kind, 40, 0.2, 4)).unwrap();
            let mut counts = vec![0usize; ds.classes];
            for &y in &ds.labels {
                counts[y] += 1;
            }
            assert!(counts.iter().all(|&c| c == 40), "{kind:?}: {counts:?}");
        }
    }

    #[test]
    fn split_is_deterministic_and_roughly_sized() {
        let ds = generate(&spec(SyntheticKind::TwoMoons, 500, 0.1, 7)).unwrap();
        let test = ds.indices_of(Split::Test);
        let frac = test.len() as f64 / ds.len() as f64;
        assert!((0.12..=0.28).contains(&frac), "test fraction {frac}");
        let again = generate(&spec(SyntheticKind::TwoMoons, 500, 0.1, 7)).unwrap();
        assert_eq!(ds.split, again.split);
    }

    #[test]
    fn csv_parse_examples() {
        let schema = CsvSchema {
            features: 2,
            classes: 2,
        };
        let ds = parse_csv("0.1,0.2,1\n0.3,0.4,0\n", &schema).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.row(0), &[0.1, 0.2]);
        assert_eq!(ds.labels, vec![1, 0]);

        let single = parse_csv("0.1,0.2,1\n", &schema).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.row(0), &[0.1, 0.2]);
        assert_eq!(single.labels, vec![1]);

        // Optional header is skipped.
        let with_header = parse_csv("x1,x2,label\n0.1,0.2,1\n", &schema).unwrap();
        assert_eq!(with_header.len(), 1);

        // Labels out of range are schema errors.
        assert!(parse_csv("0.1,0.2,7\n", &schema).is_err());
        // Non-header garbage in a later row is an error.
        assert!(parse_csv("0.1,0.2,1\nfoo,bar,baz\n", &schema).is_err());
    }

    #[test]
    fn csv_roundtrip_preserves_values_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let ds = generate(&spec(SyntheticKind::TwoMoons, 50, 0.17, 21)).unwrap();
        save_csv(&ds, &path).unwrap();
        let schema = CsvSchema {
            features: 2,
            classes: 2,
        };
        let back = load_csv(&path, &schema).unwrap();
        // Default float formatting round-trips f64 exactly.
        assert_eq!(ds.inputs, back.inputs);
        assert_eq!(ds.labels, back.labels);
    }

    fn idx_image_bytes(images: &[[u8; 4]]) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        buf.extend_from_slice(&(images.len() as u32).to_be_bytes());
        buf.extend_from_slice(&2u32.to_be_bytes());
        buf.extend_from_slice(&2u32.to_be_bytes());
        for img in images {
            buf.extend_from_slice(img);
        }
        buf
    }

    fn idx_label_bytes(labels: &[u8]) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        buf.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        buf.extend_from_slice(labels);
        buf
    }

    #[test]
    fn idx_load_flattens_and_scales() {
        let dir = tempfile::tempdir().unwrap();
        let ipath = dir.path().join("images.idx");
        let lpath = dir.path().join("labels.idx");
        std::fs::write(
            &ipath,
            idx_image_bytes(&[[0, 128, 255, 64], [1, 2, 3, 4], [255, 255, 0, 0]]),
        )
        .unwrap();
        std::fs::write(&lpath, idx_label_bytes(&[0, 1, 1])).unwrap();

        let ds = load_idx(&ipath, &lpath).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 4);
        assert_eq!(ds.domain_box, Some((0.0, 1.0)));
        assert_eq!(ds.row(0)[2], 1.0); // byte 255 maps to exactly 1.0
        assert_eq!(ds.row(0)[0], 0.0);
        assert!(ds.inputs.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn idx_bad_magic_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let ipath = dir.path().join("images.idx");
        let lpath = dir.path().join("labels.idx");
        let mut bytes = idx_image_bytes(&[[0, 0, 0, 0]]);
        bytes[3] = 0x99;
        std::fs::write(&ipath, &bytes).unwrap();
        std::fs::write(&lpath, idx_label_bytes(&[0])).unwrap();
        match load_idx(&ipath, &lpath) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("magic")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn idx_truncated_pixels_report_offset() {
        let dir = tempfile::tempdir().unwrap();
        let ipath = dir.path().join("images.idx");
        let lpath = dir.path().join("labels.idx");
        let bytes = idx_image_bytes(&[[7, 7, 7, 7]]);
        std::fs::write(&ipath, &bytes[..bytes.len() - 2]).unwrap();
        std::fs::write(&lpath, idx_label_bytes(&[0])).unwrap();
        match load_idx(&ipath, &lpath) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 16),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
