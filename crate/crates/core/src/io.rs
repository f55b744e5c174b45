//! File formats: binary dense matrices, feature and label CSVs, and dataset
//! directories.
//!
//! Binary matrix layout: the 8-byte magic [`MATRIX_MAGIC`], row count and
//! column count as little-endian `u64`, then `rows · cols` little-endian
//! `f64` values in row-major order.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::eval::ClusterLabels;
use crate::graph::{AffinityMatrix, FeatureMatrix};
use crate::sbm::MultimodalDataset;

pub const MATRIX_MAGIC: [u8; 8] = *b"SFMAT\x00\x01\x00";

pub fn write_matrix<W: Write>(mut w: W, m: &DMatrix<f64>) -> Result<()> {
    w.write_all(&MATRIX_MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            w.write_all(&m[(r, c)].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<DMatrix<f64>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if magic != MATRIX_MAGIC {
        return Err(Error::Format("not a binary matrix file (bad magic)".into()));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows =
        usize::try_from(u64::from_le_bytes(word)).map_err(|_| Error::Format("row count overflow".into()))?;
    r.read_exact(&mut word)?;
    let cols =
        usize::try_from(u64::from_le_bytes(word)).map_err(|_| Error::Format("column count overflow".into()))?;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("matrix size overflow".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(Error::Format(format!(
            "expected {} bytes of matrix data for {rows}x{cols}, found {}",
            len * 8,
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn write_matrix_file(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_matrix(BufWriter::new(File::create(path)?), m)
}

pub fn read_matrix_file(path: &Path) -> Result<DMatrix<f64>> {
    read_matrix(BufReader::new(File::open(path)?))
}

/// Numeric CSV, one sample per row. A first line with any non-numeric field
/// is taken as a header.
pub fn read_feature_csv<R: Read>(r: R) -> Result<FeatureMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => rows.push(values),
            Err(_) if line == 0 => continue,
            Err(e) => return Err(Error::Format(format!("line {}: {e}", line + 1))),
        }
    }
    let d = rows
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Format("no data rows".into()))?;
    if let Some(bad) = rows.iter().position(|r| r.len() != d) {
        return Err(Error::Format(format!(
            "row {bad} has {} fields, expected {d}",
            rows[bad].len()
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    FeatureMatrix::new(DMatrix::from_row_slice(rows.len(), d, &flat))
}

pub fn read_feature_csv_file(path: &Path) -> Result<FeatureMatrix> {
    read_feature_csv(File::open(path)?)
}

/// One label per line under a `label` header.
pub fn write_labels<W: Write>(w: W, labels: &ClusterLabels) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["label"])?;
    for l in labels.assignments() {
        out.write_record([l.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a single-column label file, with or without a header. Labels must
/// be nonnegative integers; `k` is one more than the largest.
pub fn read_labels<R: Read>(r: R) -> Result<ClusterLabels> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let field = record.get(0).unwrap_or("");
        match field.parse::<usize>() {
            Ok(v) => labels.push(v),
            Err(_) if line == 0 => continue,
            Err(e) => return Err(Error::Format(format!("label line {}: {e}", line + 1))),
        }
    }
    ClusterLabels::from_assignments(labels)
}

fn numbered_files(dir: &Path, prefix: &str, suffix: &str) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(index) = name
            .strip_prefix(prefix)
            .and_then(|rest| rest.strip_suffix(suffix))
            .and_then(|idx| idx.parse::<usize>().ok())
        {
            found.push((index, path));
        }
    }
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

/// Writes `labels.csv`, `affinity_<i>.bin` per modality and
/// `provenance.json`.
pub fn export_dataset(dir: &Path, data: &MultimodalDataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_labels(BufWriter::new(File::create(dir.join("labels.csv"))?), &data.labels)?;
    for (i, a) in data.affinities.iter().enumerate() {
        write_matrix_file(&dir.join(format!("affinity_{i}.bin")), a.weights())?;
    }
    let mut prov = BufWriter::new(File::create(dir.join("provenance.json"))?);
    serde_json::to_writer_pretty(&mut prov, &data.provenance())?;
    prov.write_all(b"\n")?;
    prov.flush()?;
    Ok(())
}

/// Graphs read back from a dataset directory.
#[derive(Debug, Clone)]
pub struct AffinityDataset {
    pub affinities: Vec<AffinityMatrix>,
    pub labels: Option<ClusterLabels>,
    pub provenance: Option<serde_json::Value>,
}

/// Reads `affinity_<i>.bin` in index order plus optional `labels.csv` and
/// `provenance.json`.
pub fn import_affinity_dir(dir: &Path) -> Result<AffinityDataset> {
    let files = numbered_files(dir, "affinity_", ".bin")?;
    if files.is_empty() {
        return Err(Error::Format(format!("no affinity_<i>.bin files in {}", dir.display())));
    }
    let affinities = files
        .iter()
        .map(|p| AffinityMatrix::new(read_matrix_file(p)?))
        .collect::<Result<Vec<_>>>()?;
    let (labels, provenance) = optional_extras(dir)?;
    Ok(AffinityDataset {
        affinities,
        labels,
        provenance,
    })
}

/// Feature views read from a directory.
#[derive(Debug, Clone)]
pub struct FeatureDataset {
    pub views: Vec<FeatureMatrix>,
    pub labels: Option<ClusterLabels>,
}

/// Reads `view_<i>.csv` in index order plus optional `labels.csv`.
pub fn import_feature_dir(dir: &Path) -> Result<FeatureDataset> {
    let files = numbered_files(dir, "view_", ".csv")?;
    if files.is_empty() {
        return Err(Error::Format(format!("no view_<i>.csv files in {}", dir.display())));
    }
    let views = files
        .iter()
        .map(|p| read_feature_csv_file(p))
        .collect::<Result<Vec<_>>>()?;
    let n = views[0].n();
    if let Some(v) = views.iter().find(|v| v.n() != n) {
        return Err(Error::DimensionMismatch {
            what: "feature view rows",
            expected: n,
            found: v.n(),
        });
    }
    let (labels, _) = optional_extras(dir)?;
    Ok(FeatureDataset { views, labels })
}

fn optional_extras(dir: &Path) -> Result<(Option<ClusterLabels>, Option<serde_json::Value>)> {
    let labels_path = dir.join("labels.csv");
    let labels = if labels_path.exists() {
        Some(read_labels(File::open(labels_path)?)?)
    } else {
        None
    };
    let prov_path = dir.join("provenance.json");
    let provenance = if prov_path.exists() {
        Some(serde_json::from_reader(BufReader::new(File::open(prov_path)?))?)
    } else {
        None
    };
    Ok((labels, provenance))
}
