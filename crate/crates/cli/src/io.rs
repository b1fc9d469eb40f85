//! Feature, label, logit and model files.
//!
//! Binary features: `DMLPFEAT`, u32 LE version (1), u64 LE rows, u32 LE dim,
//! then `rows·dim` little-endian f32 values in row-major order.

use std::fs;
use std::path::{Path, PathBuf};

use dmlp_core::eac::LinearClassifier;
use dmlp_core::{FeatureMatrix, HardLabels, Matrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"DMLPFEAT";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 4;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("byte {offset}: {msg}")]
    Binary { offset: usize, msg: String },
    #[error("line {line}: {msg}")]
    Text { line: usize, msg: String },
    #[error(transparent)]
    Core(#[from] dmlp_core::Error),
}

impl FormatError {
    fn binary(offset: usize, msg: impl Into<String>) -> Self {
        FormatError::Binary {
            offset,
            msg: msg.into(),
        }
    }

    fn text(line: usize, msg: impl Into<String>) -> Self {
        FormatError::Text { line, msg: msg.into() }
    }
}

/// Attaches the file path to a parse error.
#[derive(Debug, Error)]
#[error("{path}: {source}")]
pub struct FileError {
    pub path: PathBuf,
    #[source]
    pub source: FormatError,
}

pub type FileResult<T> = Result<T, FileError>;

fn read(path: &Path) -> FileResult<Vec<u8>> {
    fs::read(path).map_err(|source| FileError {
        path: path.to_owned(),
        source: FormatError::Io {
            path: path.to_owned(),
            source,
        },
    })
}

fn write(path: &Path, bytes: &[u8]) -> FileResult<()> {
    fs::write(path, bytes).map_err(|source| FileError {
        path: path.to_owned(),
        source: FormatError::Io {
            path: path.to_owned(),
            source,
        },
    })
}

fn at(path: &Path) -> impl Fn(FormatError) -> FileError + '_ {
    move |source| FileError {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFormat {
    Binary,
    Csv,
}

impl FeatureFormat {
    /// `.csv` files are text, everything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => FeatureFormat::Csv,
            _ => FeatureFormat::Binary,
        }
    }
}

pub fn decode_features_binary(bytes: &[u8]) -> Result<FeatureMatrix, FormatError> {
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::binary(
            bytes.len(),
            format!("header needs {HEADER_LEN} bytes"),
        ));
    }
    if &bytes[..8] != MAGIC {
        return Err(FormatError::binary(0, "bad magic, expected DMLPFEAT"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(FormatError::binary(8, format!("unsupported version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let dim = u32::from_le_bytes(bytes[20..24].try_into().unwrap()) as usize;
    let rows = usize::try_from(rows).map_err(|_| FormatError::binary(12, "row count overflows"))?;
    if rows == 0 || dim == 0 {
        return Err(FormatError::binary(12, format!("empty matrix {rows}x{dim}")));
    }
    let payload = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| FormatError::binary(12, "dimensions overflow"))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() < payload {
        return Err(FormatError::binary(
            bytes.len(),
            format!(
                "truncated payload: {rows}x{dim} needs {payload} bytes, found {}",
                body.len()
            ),
        ));
    }
    if body.len() > payload {
        return Err(FormatError::binary(
            HEADER_LEN + payload,
            "trailing bytes after payload",
        ));
    }
    let mut data = Vec::with_capacity(rows * dim);
    for (k, chunk) in body.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(FormatError::binary(HEADER_LEN + 4 * k, "non-finite value"));
        }
        data.push(v as f64);
    }
    Ok(FeatureMatrix::new(Matrix::from_vec(rows, dim, data)?)?)
}

pub fn encode_features_binary(m: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.rows() * m.dim());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.dim() as u32).to_le_bytes());
    for &v in m.matrix().as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn parse_features_csv(text: &str) -> Result<FeatureMatrix, FormatError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                let v: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|_| FormatError::text(i + 1, format!("bad number {tok:?}")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(FormatError::text(i + 1, "non-finite value"))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(FormatError::text(
                    i + 1,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(FormatError::text(1, "no rows"));
    }
    Ok(FeatureMatrix::new(Matrix::from_rows(&rows)?)?)
}

fn format_rows(m: &Matrix) -> String {
    let mut out = String::new();
    for row in m.iter_rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn load_features(path: &Path, format: FeatureFormat) -> FileResult<FeatureMatrix> {
    let bytes = read(path)?;
    match format {
        FeatureFormat::Binary => decode_features_binary(&bytes).map_err(at(path)),
        FeatureFormat::Csv => {
            let text = std::str::from_utf8(&bytes).map_err(|_| at(path)(FormatError::text(1, "not UTF-8")))?;
            parse_features_csv(text).map_err(at(path))
        }
    }
}

pub fn write_features(path: &Path, m: &FeatureMatrix, format: FeatureFormat) -> FileResult<()> {
    match format {
        FeatureFormat::Binary => write(path, &encode_features_binary(m)),
        FeatureFormat::Csv => write(path, format_rows(m.matrix()).as_bytes()),
    }
}

/// One decimal class index per line. `classes` defaults to `max + 1`.
pub fn parse_labels(text: &str, classes: Option<usize>) -> Result<HardLabels, FormatError> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: usize = line
            .parse()
            .map_err(|_| FormatError::text(i + 1, format!("bad class index {line:?}")))?;
        if let Some(c) = classes {
            if v >= c {
                return Err(FormatError::text(i + 1, format!("class {v} outside [0, {c})")));
            }
        }
        values.push(v);
    }
    let c = classes.unwrap_or_else(|| values.iter().max().map_or(1, |m| m + 1));
    Ok(HardLabels::new(values, c)?)
}

/// Rows of 0/1 values with exactly one 1 each.
pub fn parse_one_hot_csv(text: &str) -> Result<HardLabels, FormatError> {
    let mut values = Vec::new();
    let mut classes = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        match classes {
            None => classes = Some(cells.len()),
            Some(c) if c != cells.len() => {
                return Err(FormatError::text(
                    i + 1,
                    format!("expected {c} columns, found {}", cells.len()),
                ))
            }
            _ => {}
        }
        let mut hot = None;
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| FormatError::text(i + 1, format!("bad number {cell:?}")))?;
            if v == 1.0 && hot.is_none() {
                hot = Some(j);
            } else if v != 0.0 {
                return Err(FormatError::text(i + 1, "row is not one-hot"));
            }
        }
        values.push(hot.ok_or_else(|| FormatError::text(i + 1, "row is not one-hot"))?);
    }
    Ok(HardLabels::new(values, classes.unwrap_or(1))?)
}

/// Reads either a labels text file or, when lines contain commas, a one-hot
/// CSV.
pub fn load_labels(path: &Path, classes: Option<usize>) -> FileResult<HardLabels> {
    let bytes = read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|_| at(path)(FormatError::text(1, "not UTF-8")))?;
    let labels = if text.lines().any(|l| l.contains(',')) {
        parse_one_hot_csv(text).map_err(at(path))?
    } else {
        parse_labels(text, classes).map_err(at(path))?
    };
    match classes {
        Some(c) if c != labels.classes() => {
            let widened = c.max(labels.classes());
            Ok(HardLabels::new(labels.into_vec(), widened).map_err(|e| at(path)(e.into()))?)
        }
        _ => Ok(labels),
    }
}

pub fn write_labels(path: &Path, labels: &HardLabels) -> FileResult<()> {
    let mut out = String::with_capacity(labels.len() * 3);
    for v in labels.as_slice() {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    write(path, out.as_bytes())
}

/// Logits as CSV with shortest round-trip float formatting.
pub fn write_matrix_csv(path: &Path, m: &Matrix) -> FileResult<()> {
    write(path, format_rows(m).as_bytes())
}

pub fn load_matrix_csv(path: &Path) -> FileResult<Matrix> {
    let bytes = read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|_| at(path)(FormatError::text(1, "not UTF-8")))?;
    Ok(parse_features_csv(text).map_err(at(path))?.into_matrix())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub dim: usize,
    pub classes: usize,
    /// `dim` rows of `classes` weights.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl ModelFile {
    pub fn from_classifier(clf: &LinearClassifier) -> Self {
        ModelFile {
            version: 1,
            dim: clf.dim(),
            classes: clf.classes(),
            weights: clf.weights.iter_rows().map(<[f64]>::to_vec).collect(),
            bias: clf.bias.clone(),
        }
    }

    pub fn into_classifier(self) -> Result<LinearClassifier, FormatError> {
        if self.version != 1 {
            return Err(FormatError::text(
                1,
                format!("unsupported model version {}", self.version),
            ));
        }
        let weights = if self.weights.is_empty() {
            Matrix::zeros(0, self.classes)
        } else {
            Matrix::from_rows(&self.weights)?
        };
        if weights.shape() != (self.dim, self.classes) {
            return Err(FormatError::text(1, "model weights do not match declared shape"));
        }
        Ok(LinearClassifier::new(weights, self.bias)?)
    }
}

pub fn save_model(path: &Path, clf: &LinearClassifier) -> FileResult<()> {
    let json = serde_json::to_string_pretty(&ModelFile::from_classifier(clf)).expect("model serializes");
    write(path, json.as_bytes())
}

pub fn load_model(path: &Path) -> FileResult<LinearClassifier> {
    let bytes = read(path)?;
    let model: ModelFile =
        serde_json::from_slice(&bytes).map_err(|e| at(path)(FormatError::text(e.line(), e.to_string())))?;
    model.into_classifier().map_err(at(path))
}
