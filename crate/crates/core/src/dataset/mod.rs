//! Numeric datasets: matrices with missing-cell masks, label vectors, CSV
//! ingestion and deterministic train/test splitting.

mod csv_io;
mod split;

pub use csv_io::{
    labels_to_csv, load_csv, matrix_to_csv, parse_labels, parse_matrix, read_labels, read_matrix,
    write_labels, write_matrix, LabelColumn, LoadOptions,
};
pub use split::{split_dataset, DataSplit, SplitMix64, SplitSpec};

use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: non-numeric value {value:?}")]
    NonNumeric {
        line: usize,
        column: usize,
        value: String,
    },
    #[error("line {line}: missing label value")]
    MissingLabel { line: usize },
    #[error("line {line}: label {value} is not a non-negative integer class id")]
    InvalidClass { line: usize, value: f64 },
    #[error("unknown label column {0:?}")]
    UnknownLabelColumn(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("dataset has {0} rows, at least 2 are required to split")]
    TooFewRows(usize),
    #[error("test fraction {0} is outside (0, 1)")]
    InvalidFraction(f64),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

/// Dense row-major matrix with a per-cell missing mask.
///
/// Missing cells hold `0.0` in `values` so that structural equality is
/// well-defined; read them through [`Matrix::get`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
    image_shape: Option<(usize, usize)>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(DataError::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(DataError::Shape(format!(
                "non-finite value at row {}, column {}",
                i / cols.max(1),
                i % cols.max(1)
            )));
        }
        Ok(Self {
            rows,
            cols,
            missing: vec![false; values.len()],
            values,
            image_shape: None,
        })
    }

    /// Builds a matrix where `None` marks a missing cell.
    pub fn from_cells(rows: usize, cols: usize, cells: Vec<Option<f64>>) -> Result<Self> {
        if cells.len() != rows * cols {
            return Err(DataError::Shape(format!(
                "{} cells cannot fill a {rows}x{cols} matrix",
                cells.len()
            )));
        }
        let missing: Vec<bool> = cells.iter().map(Option::is_none).collect();
        let values: Vec<f64> = cells.iter().map(|c| c.unwrap_or(0.0)).collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(DataError::Shape(format!(
                "non-finite value at row {}, column {}",
                i / cols.max(1),
                i % cols.max(1)
            )));
        }
        Ok(Self {
            rows,
            cols,
            values,
            missing,
            image_shape: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(DataError::Shape(format!(
                "row {bad} has {} columns, expected {cols}",
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn with_image_shape(mut self, shape: Option<(usize, usize)>) -> Result<Self> {
        if let Some((h, w)) = shape {
            if h * w != self.cols {
                return Err(DataError::Shape(format!(
                    "image shape {h}x{w} does not match {} columns",
                    self.cols
                )));
            }
        }
        self.image_shape = shape;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn image_shape(&self) -> Option<(usize, usize)> {
        self.image_shape
    }

    /// Raw row-major storage; missing cells read as `0.0`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = row * self.cols + col;
        if self.missing[i] {
            None
        } else {
            Some(self.values[i])
        }
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[row * self.cols + col]
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |r| self.row(r))
    }

    /// Rows in the given order; image metadata is kept.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        let mut missing = Vec::with_capacity(indices.len() * self.cols);
        for &r in indices {
            values.extend_from_slice(self.row(r));
            missing.extend_from_slice(&self.missing[r * self.cols..(r + 1) * self.cols]);
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            values,
            missing,
            image_shape: self.image_shape,
        }
    }

    /// Column projection; image metadata is dropped since the result is no
    /// longer an image.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.cols) {
            return Err(DataError::Shape(format!(
                "column {bad} out of range for {} columns",
                self.cols
            )));
        }
        let mut values = Vec::with_capacity(self.rows * columns.len());
        let mut missing = Vec::with_capacity(self.rows * columns.len());
        for r in 0..self.rows {
            for &c in columns {
                values.push(self.values[r * self.cols + c]);
                missing.push(self.missing[r * self.cols + c]);
            }
        }
        Ok(Self {
            rows: self.rows,
            cols: columns.len(),
            values,
            missing,
            image_shape: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    Classification,
}

impl TaskKind {
    pub fn label_kind(self) -> LabelKind {
        match self {
            TaskKind::Regression => LabelKind::Continuous,
            TaskKind::Classification => LabelKind::Categorical,
        }
    }
}

/// Targets for one matrix. Categorical values are non-negative integer class
/// ids stored as `f64`; `class_set` lists the distinct ids in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelVector {
    kind: LabelKind,
    values: Vec<f64>,
    class_set: Vec<u32>,
}

impl LabelVector {
    pub fn continuous(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(DataError::Shape(format!("non-finite label at index {i}")));
        }
        Ok(Self {
            kind: LabelKind::Continuous,
            values,
            class_set: Vec::new(),
        })
    }

    pub fn categorical(values: Vec<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if class_id(v).is_none() {
                return Err(DataError::InvalidClass {
                    line: i + 1,
                    value: v,
                });
            }
        }
        let mut class_set: Vec<u32> = values.iter().map(|&v| v as u32).collect();
        class_set.sort_unstable();
        class_set.dedup();
        Ok(Self {
            kind: LabelKind::Categorical,
            values,
            class_set,
        })
    }

    pub fn from_classes(classes: &[u32]) -> Self {
        let mut class_set = classes.to_vec();
        class_set.sort_unstable();
        class_set.dedup();
        Self {
            kind: LabelKind::Categorical,
            values: classes.iter().map(|&c| f64::from(c)).collect(),
            class_set,
        }
    }

    pub fn new(kind: LabelKind, values: Vec<f64>) -> Result<Self> {
        match kind {
            LabelKind::Continuous => Self::continuous(values),
            LabelKind::Categorical => Self::categorical(values),
        }
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn class_set(&self) -> &[u32] {
        &self.class_set
    }

    /// Class ids; only meaningful for categorical labels.
    pub fn classes(&self) -> impl Iterator<Item = u32> + '_ {
        self.values.iter().map(|&v| v as u32)
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let values: Vec<f64> = indices.iter().map(|&i| self.values[i]).collect();
        match self.kind {
            LabelKind::Continuous => Self {
                kind: LabelKind::Continuous,
                values,
                class_set: Vec::new(),
            },
            LabelKind::Categorical => {
                let classes: Vec<u32> = values.iter().map(|&v| v as u32).collect();
                Self::from_classes(&classes)
            }
        }
    }
}

pub(crate) fn class_id(v: f64) -> Option<u32> {
    (v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX)).then_some(v as u32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: LabelVector,
    pub task_kind: TaskKind,
    pub column_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        labels: LabelVector,
        task_kind: TaskKind,
        column_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(DataError::Shape(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if labels.kind() != task_kind.label_kind() {
            return Err(DataError::Shape(format!(
                "{task_kind:?} task requires {:?} labels",
                task_kind.label_kind()
            )));
        }
        Ok(Self {
            features,
            labels,
            task_kind,
            column_names,
        })
    }

    pub fn rows(&self) -> usize {
        self.features.rows()
    }
}
