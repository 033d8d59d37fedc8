use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{SubmissionOutput, WorkspaceMeta};
use crate::challenge::{ChallengeType, PreparedChallenge};
use crate::dataset::{parse_labels, parse_matrix, Matrix};
use crate::loss::{parse_loss, MAX_SOURCE_BYTES};

#[derive(Debug, Error)]
pub enum CollectError {
    #[error("protocol violation: {0}")]
    Violation(String),
    #[error("output is {bytes} bytes, the cap is {cap}")]
    TooLarge { bytes: u64, cap: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn violation(msg: impl Into<String>) -> CollectError {
    CollectError::Violation(msg.into())
}

/// Total size of regular files below `dir`. Symlinks are not followed.
fn tree_size(dir: &Path) -> Result<u64, CollectError> {
    let io = |source| CollectError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut total = 0;
    for entry in fs::read_dir(dir).map_err(io)? {
        let entry = entry.map_err(io)?;
        let meta = entry.path().symlink_metadata().map_err(io)?;
        if meta.is_dir() {
            total += tree_size(&entry.path())?;
        } else {
            total += meta.len();
        }
    }
    Ok(total)
}

fn read_output(out_dir: &Path, name: &str) -> Result<String, CollectError> {
    let path = out_dir.join(name);
    match path.symlink_metadata() {
        Ok(m) if m.is_file() => {}
        Ok(_) => return Err(violation(format!("output/{name} is not a regular file"))),
        Err(_) => return Err(violation(format!("missing output/{name}"))),
    }
    let bytes = fs::read(&path).map_err(|source| CollectError::Io { path, source })?;
    String::from_utf8(bytes).map_err(|_| violation(format!("output/{name} is not valid UTF-8")))
}

fn read_transformed(
    out_dir: &Path,
    name: &str,
    expected_rows: usize,
    require_flat: bool,
) -> Result<Matrix, CollectError> {
    let m = parse_matrix(&read_output(out_dir, name)?)
        .map_err(|e| violation(format!("output/{name}: {e}")))?;
    if m.rows() != expected_rows {
        if expected_rows > 0 && m.rows() > expected_rows && m.rows() % expected_rows == 0 {
            let block = m.rows() / expected_rows;
            let shape = format!("({expected_rows}, {block}, {})", m.cols());
            if require_flat {
                return Err(violation(format!(
                    "ValueError: output/{name} has shape {shape}; each sample must be a \
                     1-dimensional vector (one row per sample, {expected_rows} rows)"
                )));
            }
            return Err(violation(format!(
                "output/{name} looks like per-sample blocks of shape {shape}; expected {expected_rows} rows"
            )));
        }
        return Err(violation(format!(
            "output/{name} has {} rows, expected {expected_rows}",
            m.rows()
        )));
    }
    if m.cols() == 0 {
        return Err(violation(format!("output/{name} has no columns")));
    }
    Ok(m)
}

fn parse_columns(text: &str, n_features: usize) -> Result<Vec<usize>, CollectError> {
    let mut cols = Vec::new();
    for token in text.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
        let c: usize = token
            .parse()
            .map_err(|_| violation(format!("output/columns.csv: {token:?} is not a column index")))?;
        if c >= n_features {
            return Err(violation(format!(
                "output/columns.csv: column {c} is out of range for {n_features} features"
            )));
        }
        cols.push(c);
    }
    cols.sort_unstable();
    cols.dedup();
    if cols.is_empty() {
        return Err(violation("output/columns.csv selects no columns"));
    }
    Ok(cols)
}

/// Reads the output files the challenge type calls for and checks their
/// shape against the trusted challenge data (never the guest-writable
/// `meta.json`).
pub fn collect_outputs(
    workspace: &Path,
    prepared: &PreparedChallenge,
    output_cap: usize,
) -> Result<SubmissionOutput, CollectError> {
    let out_dir = workspace.join("output");
    if !out_dir.symlink_metadata().is_ok_and(|m| m.is_dir()) {
        return Err(violation("output/ directory is missing"));
    }
    let bytes = tree_size(&out_dir)?;
    if bytes > output_cap as u64 {
        return Err(CollectError::TooLarge { bytes, cap: output_cap });
    }
    let meta = WorkspaceMeta::of(prepared);
    use ChallengeType as T;
    match prepared.challenge_type {
        T::RegressionModel | T::ClassificationModel => {
            let text = read_output(&out_dir, "predictions.csv")?;
            let y = parse_labels(&text, prepared.task_kind.label_kind())
                .map_err(|e| violation(format!("output/predictions.csv: {e}")))?;
            if y.len() != meta.n_test {
                return Err(violation(format!(
                    "output/predictions.csv has {} rows, expected {}",
                    y.len(),
                    meta.n_test
                )));
            }
            Ok(SubmissionOutput::Predictions(y))
        }
        T::DimensionalityReduction | T::DataImputation | T::FeatureEngineering => {
            let flat = prepared.private.constraints.require_flat_vectors;
            let x_train = read_transformed(&out_dir, "x_train_out.csv", meta.n_train, flat)?;
            let x_test = read_transformed(&out_dir, "x_test_out.csv", meta.n_test, flat)?;
            if x_train.cols() != x_test.cols() {
                return Err(violation(format!(
                    "x_train_out.csv has {} columns but x_test_out.csv has {}",
                    x_train.cols(),
                    x_test.cols()
                )));
            }
            Ok(SubmissionOutput::TransformedData { x_train, x_test })
        }
        T::FeatureSelection => {
            let text = read_output(&out_dir, "columns.csv")?;
            Ok(SubmissionOutput::ColumnSelection(parse_columns(&text, meta.n_features)?))
        }
        T::LossSpecification => {
            let text = read_output(&out_dir, "loss.expr")?;
            let expr = text.trim();
            if expr.len() > MAX_SOURCE_BYTES {
                return Err(violation(format!(
                    "output/loss.expr is {} bytes, the limit is {MAX_SOURCE_BYTES}",
                    expr.len()
                )));
            }
            parse_loss(expr).map_err(|e| violation(format!("output/loss.expr: {e}")))?;
            Ok(SubmissionOutput::LossExpression(expr.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_parse_sorted_distinct() {
        assert_eq!(parse_columns("0,3,7", 8).unwrap(), vec![0, 3, 7]);
        assert_eq!(parse_columns("7\n3\n3\n0\n", 8).unwrap(), vec![0, 3, 7]);
    }

    #[test]
    fn columns_out_of_range() {
        assert!(matches!(parse_columns("0,8", 8), Err(CollectError::Violation(_))));
        assert!(matches!(parse_columns("", 8), Err(CollectError::Violation(_))));
        assert!(matches!(parse_columns("a", 8), Err(CollectError::Violation(_))));
        assert!(matches!(parse_columns("-1", 8), Err(CollectError::Violation(_))));
    }
}
