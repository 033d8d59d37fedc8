use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, LabelKind, LabelVector, Matrix, Result, TaskKind};

/// Which source column holds the label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub label_column: LabelColumn,
    pub task_kind: TaskKind,
    pub has_header: bool,
}

/// Loads a source dataset. Empty feature fields become missing cells; the
/// label column is removed from the features.
pub fn load_csv(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .from_reader(file);

    let header: Option<Vec<String>> = if opts.has_header {
        Some(reader.headers()?.iter().map(|h| h.trim().to_string()).collect())
    } else {
        None
    };

    let mut width = header.as_ref().map(Vec::len);
    let mut label_idx = resolve_label(&opts.label_column, header.as_deref(), width)?;
    let mut cells: Vec<Option<f64>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut rows = 0usize;

    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        let expected = match width {
            Some(w) => w,
            None => {
                width = Some(record.len());
                label_idx = resolve_label(&opts.label_column, None, width)?;
                record.len()
            }
        };
        if record.len() != expected {
            return Err(DataError::RaggedRow {
                line,
                expected,
                found: record.len(),
            });
        }
        for (column, field) in record.iter().enumerate() {
            let value = parse_cell(field, line, column)?;
            if column == label_idx {
                let v = value.ok_or(DataError::MissingLabel { line })?;
                if opts.task_kind == TaskKind::Classification && super::class_id(v).is_none() {
                    return Err(DataError::InvalidClass { line, value: v });
                }
                labels.push(v);
            } else {
                cells.push(value);
            }
        }
        rows += 1;
    }

    let cols = width.map_or(0, |w| w.saturating_sub(1));
    let features = Matrix::from_cells(rows, cols, cells)?;
    let labels = LabelVector::new(opts.task_kind.label_kind(), labels)?;
    let column_names = header.map(|h| {
        h.into_iter()
            .enumerate()
            .filter(|&(i, _)| i != label_idx)
            .map(|(_, n)| n)
            .collect()
    });
    Dataset::new(features, labels, opts.task_kind, column_names)
}

fn resolve_label(
    column: &LabelColumn,
    header: Option<&[String]>,
    width: Option<usize>,
) -> Result<usize> {
    match column {
        LabelColumn::Index(i) => match width {
            Some(w) if *i >= w => Err(DataError::UnknownLabelColumn(i.to_string())),
            _ => Ok(*i),
        },
        LabelColumn::Name(name) => header
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| DataError::UnknownLabelColumn(name.clone())),
    }
}

fn parse_cell(field: &str, line: usize, column: usize) -> Result<Option<f64>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(DataError::NonNumeric {
            line,
            column,
            value: field.to_string(),
        }),
    }
}

/// Splits protocol-file text into lines. A single trailing newline does not
/// start a new row, so an empty line before it is a row of one missing cell.
fn data_lines(text: &str) -> Vec<&str> {
    if text.is_empty() {
        return Vec::new();
    }
    let body = text.strip_suffix('\n').unwrap_or(text);
    body.split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect()
}

/// Parses a header-less numeric CSV as produced by [`matrix_to_csv`].
pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let lines = data_lines(text);
    let cols = lines.first().map_or(0, |l| l.split(',').count());
    let mut cells = Vec::with_capacity(lines.len() * cols);
    for (i, line) in lines.iter().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(DataError::RaggedRow {
                line: i + 1,
                expected: cols,
                found: fields.len(),
            });
        }
        for (column, field) in fields.iter().enumerate() {
            cells.push(parse_cell(field, i + 1, column)?);
        }
    }
    Matrix::from_cells(lines.len(), cols, cells)
}

/// Parses one label per line.
pub fn parse_labels(text: &str, kind: LabelKind) -> Result<LabelVector> {
    let mut values = Vec::new();
    for (i, line) in data_lines(text).iter().enumerate() {
        if line.contains(',') {
            return Err(DataError::RaggedRow {
                line: i + 1,
                expected: 1,
                found: line.split(',').count(),
            });
        }
        let v = parse_cell(line, i + 1, 0)?.ok_or(DataError::MissingLabel { line: i + 1 })?;
        values.push(v);
    }
    LabelVector::new(kind, values).map_err(|e| match e {
        DataError::InvalidClass { line, value } => DataError::InvalidClass { line, value },
        other => other,
    })
}

/// Shortest round-trip decimal rendering; empty field for missing cells.
pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::with_capacity(m.rows() * m.cols() * 8);
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            if c > 0 {
                out.push(',');
            }
            if let Some(v) = m.get(r, c) {
                let _ = write!(out, "{v}");
            }
        }
        out.push('\n');
    }
    out
}

pub fn labels_to_csv(y: &LabelVector) -> String {
    let mut out = String::with_capacity(y.len() * 8);
    for v in y.values() {
        let _ = writeln!(out, "{v}");
    }
    out
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    parse_matrix(&read_text(path.as_ref())?)
}

pub fn read_labels(path: impl AsRef<Path>, kind: LabelKind) -> Result<LabelVector> {
    parse_labels(&read_text(path.as_ref())?, kind)
}

pub fn write_matrix(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &matrix_to_csv(m))
}

pub fn write_labels(y: &LabelVector, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &labels_to_csv(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn opts(label: LabelColumn, task_kind: TaskKind, has_header: bool) -> LoadOptions {
        LoadOptions {
            label_column: label,
            task_kind,
            has_header,
        }
    }

    #[test]
    fn loads_three_rows_with_label_column_two() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "d.csv", "1,2,10\n3,4,20\n5,6,30\n");
        let ds = load_csv(&p, &opts(LabelColumn::Index(2), TaskKind::Regression, false)).unwrap();
        assert_eq!((ds.features.rows(), ds.features.cols()), (3, 2));
        assert_eq!(ds.features.values(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(ds.labels.values(), &[10.0, 20.0, 30.0]);
    }

    #[test]
    fn header_and_named_label() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "d.csv", "a,label,b\n1,0,2\n3,1,4\n");
        let ds = load_csv(
            &p,
            &opts(LabelColumn::Name("label".into()), TaskKind::Classification, true),
        )
        .unwrap();
        assert_eq!(ds.column_names.as_deref(), Some(&["a".to_string(), "b".to_string()][..]));
        assert_eq!(ds.labels.class_set(), &[0, 1]);
        let err = load_csv(
            &p,
            &opts(LabelColumn::Name("nope".into()), TaskKind::Classification, true),
        )
        .unwrap_err();
        assert!(matches!(err, DataError::UnknownLabelColumn(_)));
    }

    #[test]
    fn empty_feature_field_is_missing() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "d.csv", "1,,5\n3,4,6\n");
        let ds = load_csv(&p, &opts(LabelColumn::Index(2), TaskKind::Regression, false)).unwrap();
        assert!(ds.features.is_missing(0, 1));
        assert!(!ds.features.is_missing(1, 1));
    }

    #[test]
    fn non_numeric_field_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "d.csv", "1,2,3\n4,abc,6\n");
        let err =
            load_csv(&p, &opts(LabelColumn::Index(2), TaskKind::Regression, false)).unwrap_err();
        match err {
            DataError::NonNumeric { line, column, value } => {
                assert_eq!((line, column, value.as_str()), (2, 1, "abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_row_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "d.csv", "1,2,3\n4,5\n");
        let err =
            load_csv(&p, &opts(LabelColumn::Index(2), TaskKind::Regression, false)).unwrap_err();
        assert!(matches!(err, DataError::RaggedRow { line: 2, expected: 3, found: 2 }));
    }

    #[test]
    fn missing_label_and_unknown_index() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "d.csv", "1,2,\n");
        let err =
            load_csv(&p, &opts(LabelColumn::Index(2), TaskKind::Regression, false)).unwrap_err();
        assert!(matches!(err, DataError::MissingLabel { line: 1 }));
        let err =
            load_csv(&p, &opts(LabelColumn::Index(7), TaskKind::Regression, false)).unwrap_err();
        assert!(matches!(err, DataError::UnknownLabelColumn(_)));
    }

    #[test]
    fn writes_plain_rows() {
        let m = Matrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(matrix_to_csv(&m), "1,2\n3,4\n");
        let m = Matrix::from_cells(1, 3, vec![Some(1.0), None, Some(2.5)]).unwrap();
        assert_eq!(matrix_to_csv(&m), "1,,2.5\n");
    }

    #[test]
    fn point_one_survives_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = Matrix::new(1, 1, vec![0.1]).unwrap();
        write_matrix(&m, &p).unwrap();
        assert_eq!(read_matrix(&p).unwrap().values()[0].to_bits(), 0.1f64.to_bits());
    }

    #[test]
    fn single_column_missing_cell_round_trips() {
        let m = Matrix::from_cells(3, 1, vec![Some(1.0), None, None]).unwrap();
        assert_eq!(parse_matrix(&matrix_to_csv(&m)).unwrap(), m);
    }

    #[test]
    fn labels_parse_and_reject_commas() {
        let y = parse_labels("1\n2\n", LabelKind::Categorical).unwrap();
        assert_eq!(y.class_set(), &[1, 2]);
        assert!(parse_labels("1,2\n", LabelKind::Continuous).is_err());
        assert!(parse_labels("1\n\n3\n", LabelKind::Continuous).is_err());
    }

    fn arb_matrix() -> impl Strategy<Value = Matrix> {
        (0usize..8, 1usize..6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(
                prop_oneof![
                    1 => Just(None),
                    6 => any::<f64>().prop_filter("finite", |v| v.is_finite()).prop_map(Some),
                ],
                r * c,
            )
            .prop_map(move |cells| Matrix::from_cells(r, c, cells).unwrap())
        })
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(m in arb_matrix()) {
            let parsed = parse_matrix(&matrix_to_csv(&m)).unwrap();
            prop_assert_eq!(parsed.rows(), m.rows());
            if m.rows() > 0 {
                prop_assert_eq!(parsed.cols(), m.cols());
                for r in 0..m.rows() {
                    for c in 0..m.cols() {
                        prop_assert_eq!(
                            parsed.get(r, c).map(f64::to_bits),
                            m.get(r, c).map(f64::to_bits)
                        );
                    }
                }
            }
        }
    }
}
