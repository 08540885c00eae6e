//! Labeled probability datasets: ingestion, validation, splitting and
//! serialization.
//!
//! Labels are 1-based everywhere (class `1..=N`). Probabilities are taken as
//! given; rows are never renormalized.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Significant digits used when writing probabilities to CSV.
pub const CSV_SIGNIFICANT_DIGITS: usize = 12;

/// An M×N matrix of class probabilities with one ground-truth label and one
/// identifier per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    ids: Vec<String>,
    labels: Vec<usize>,
    probs: Vec<f64>,
    num_classes: usize,
}

impl LabeledDataset {
    /// Builds a dataset from per-row probability vectors, validating every
    /// invariant. Row numbers in errors are 1-based.
    pub fn new(ids: Vec<String>, labels: Vec<usize>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_classes = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != num_classes) {
            let bad = rows.iter().position(|r| r.len() != num_classes).unwrap();
            return Err(Error::row(
                bad + 1,
                format!(
                    "expected {num_classes} probabilities, found {}",
                    rows[bad].len()
                ),
            ));
        }
        let probs = rows.into_iter().flatten().collect();
        Self::from_flat(ids, labels, probs, num_classes)
    }

    /// Builds a dataset from a row-major probability buffer.
    pub fn from_flat(
        ids: Vec<String>,
        labels: Vec<usize>,
        probs: Vec<f64>,
        num_classes: usize,
    ) -> Result<Self> {
        let m = labels.len();
        if m == 0 {
            return Err(Error::InvalidDataset("dataset has no instances".into()));
        }
        if num_classes < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 classes, found {num_classes}"
            )));
        }
        if ids.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                actual: ids.len(),
            });
        }
        if probs.len() != m * num_classes {
            return Err(Error::InvalidDataset(format!(
                "probability buffer has {} values, expected {}x{}",
                probs.len(),
                m,
                num_classes
            )));
        }
        let mut seen = HashSet::with_capacity(m);
        for (row, id) in ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(Error::row(row + 1, format!("duplicate id {id:?}")));
            }
        }
        for (row, &label) in labels.iter().enumerate() {
            if label < 1 || label > num_classes {
                return Err(Error::row(
                    row + 1,
                    format!("label {label} outside 1..={num_classes}"),
                ));
            }
        }
        for (i, &p) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::row(
                    i / num_classes + 1,
                    format!("p_{} = {p} outside [0, 1]", i % num_classes + 1),
                ));
            }
        }
        Ok(Self {
            ids,
            labels,
            probs,
            num_classes,
        })
    }

    pub fn num_instances(&self) -> usize {
        self.labels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// 1-based labels.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.probs[m * self.num_classes..(m + 1) * self.num_classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks_exact(self.num_classes)
    }

    /// Number of labeled instances per class, indexed by `class - 1`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y - 1] += 1;
        }
        counts
    }

    /// Rows at the given 0-based indices, in the order given.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let n = self.num_classes;
        let mut probs = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            probs.extend_from_slice(self.row(i));
        }
        Self {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            probs,
            num_classes: n,
        }
    }

    /// Content hash over ids, labels and the exact bit patterns of the
    /// probabilities.
    pub fn fingerprint(&self) -> DatasetFingerprint {
        let mut hasher = Sha256::new();
        hasher.update((self.num_instances() as u64).to_le_bytes());
        hasher.update((self.num_classes as u64).to_le_bytes());
        for id in &self.ids {
            hasher.update(id.as_bytes());
            hasher.update([0u8]);
        }
        for &y in &self.labels {
            hasher.update((y as u64).to_le_bytes());
        }
        for &p in &self.probs {
            hasher.update(p.to_bits().to_le_bytes());
        }
        DatasetFingerprint {
            num_instances: self.num_instances(),
            num_classes: self.num_classes,
            content_hash: hex::encode(hasher.finalize()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub num_instances: usize,
    pub num_classes: usize,
    pub content_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidConfig(format!("unknown format {other:?}"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonRecord {
    id: String,
    label: usize,
    probs: Vec<f64>,
}

pub fn load_dataset(path: impl AsRef<Path>, format: Format) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    match format {
        Format::Csv => read_csv(reader),
        Format::Json => read_json(reader),
    }
}

/// Parses the `id,label,p_1,...,p_N` layout.
pub fn read_csv(reader: impl std::io::Read) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("header: {e}")))?
        .clone();
    if header.len() < 4 || &header[0] != "id" || &header[1] != "label" {
        return Err(Error::Parse(
            "header must be id,label,p_1,...,p_N with N >= 2".into(),
        ));
    }
    let num_classes = header.len() - 2;
    for (j, name) in header.iter().skip(2).enumerate() {
        if name != format!("p_{}", j + 1) {
            return Err(Error::Parse(format!(
                "header column {} is {name:?}, expected \"p_{}\"",
                j + 3,
                j + 1
            )));
        }
    }

    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut probs = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::row(row, e.to_string()))?;
        if record.len() != header.len() {
            return Err(Error::row(
                row,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        ids.push(record[0].to_string());
        let label = record[1]
            .parse::<usize>()
            .map_err(|_| Error::row(row, format!("label {:?} is not an integer", &record[1])))?;
        labels.push(label);
        for field in record.iter().skip(2) {
            let p = field
                .parse::<f64>()
                .map_err(|_| Error::row(row, format!("probability {field:?} is not a number")))?;
            probs.push(p);
        }
    }
    LabeledDataset::from_flat(ids, labels, probs, num_classes)
}

pub fn read_json(reader: impl std::io::Read) -> Result<LabeledDataset> {
    let records: Vec<JsonRecord> =
        serde_json::from_reader(reader).map_err(|e| Error::Parse(e.to_string()))?;
    let mut ids = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    let mut rows = Vec::with_capacity(records.len());
    for r in records {
        ids.push(r.id);
        labels.push(r.label);
        rows.push(r.probs);
    }
    LabeledDataset::new(ids, labels, rows)
}

pub fn save_dataset(ds: &LabeledDataset, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        Format::Csv => write_csv(ds, &mut out),
        Format::Json => write_json(ds, &mut out),
    }
    .map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn write_csv(ds: &LabeledDataset, out: &mut impl Write) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((1..=ds.num_classes()).map(|j| format!("p_{j}")));
    wtr.write_record(&header)?;
    for (m, row) in ds.rows().enumerate() {
        let mut record = vec![ds.ids[m].clone(), ds.labels[m].to_string()];
        record.extend(
            row.iter()
                .map(|&p| format_significant(p, CSV_SIGNIFICANT_DIGITS)),
        );
        wtr.write_record(&record)?;
    }
    wtr.flush()
}

/// JSON output keeps full `f64` precision, so a JSON round trip is exact.
fn write_json(ds: &LabeledDataset, out: &mut impl Write) -> std::io::Result<()> {
    let records: Vec<JsonRecord> = ds
        .rows()
        .enumerate()
        .map(|(m, row)| JsonRecord {
            id: ds.ids[m].clone(),
            label: ds.labels[m],
            probs: row.to_vec(),
        })
        .collect();
    serde_json::to_writer(&mut *out, &records)?;
    writeln!(out)
}

/// Writes `id,label,prediction` rows in dataset order.
pub fn save_predictions(
    ds: &LabeledDataset,
    preds: &[usize],
    path: impl AsRef<Path>,
) -> Result<()> {
    if preds.len() != ds.num_instances() {
        return Err(Error::LengthMismatch {
            expected: ds.num_instances(),
            actual: preds.len(),
        });
    }
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let write = || -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(BufWriter::new(file));
        wtr.write_record(["id", "label", "prediction"])?;
        for ((id, label), pred) in ds.ids.iter().zip(&ds.labels).zip(preds) {
            wtr.write_record([id.as_str(), &label.to_string(), &pred.to_string()])?;
        }
        wtr.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Formats `x` with `digits` significant digits in plain decimal notation,
/// trimming trailing zeros.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// A seeded partition of a dataset into an optimization part and a
/// development part.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub optimization_set: LabeledDataset,
    pub dev_set: LabeledDataset,
    pub seed: u64,
    pub dev_fraction: f64,
}

/// Shuffles row indices with a seeded ChaCha8 stream and takes the first
/// `ceil(M * (1 - dev_fraction))` as the optimization part. Both parts keep
/// the parent's row order.
pub fn split_dataset(ds: &LabeledDataset, dev_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if !(dev_fraction > 0.0 && dev_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "dev fraction must lie in (0, 1), got {dev_fraction}"
        )));
    }
    let m = ds.num_instances();
    // The epsilon absorbs representation error in products like 100 * 0.95.
    let opt_size = ((m as f64) * (1.0 - dev_fraction) - 1e-9).ceil() as usize;
    if opt_size >= m || opt_size == 0 {
        return Err(Error::InvalidDataset(format!(
            "{m} instances cannot be split with dev fraction {dev_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let (opt, dev) = order.split_at_mut(opt_size);
    opt.sort_unstable();
    dev.sort_unstable();
    Ok(DatasetSplit {
        optimization_set: ds.subset(opt),
        dev_set: ds.subset(dev),
        seed,
        dev_fraction,
    })
}
