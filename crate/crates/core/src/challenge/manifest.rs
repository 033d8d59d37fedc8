//! `challenge.toml` loading.
//!
//! ```toml
//! schema = 1
//! id = "housing"
//! title = "Predict housing prices"
//! challenge_type = "regression_model"
//! description_file = "description.md"    # or inline `description`
//! baseline = "baseline/submission.py"
//! quiz = "quiz.toml"                      # optional
//! runner_command = "python3 {entry}"      # optional
//! entry_file = "submission.py"            # optional
//!
//! [dataset]
//! path = "data.csv"
//! label_column = "price"                  # header name or 0-based index
//! has_header = true                       # optional, default false
//! task_kind = "regression"
//! image_shape = [8, 8]                    # optional
//!
//! [split]
//! test_fraction = 0.25
//! seed = 7
//! shuffle = true                          # optional
//!
//! [constraints]                           # optional, all keys optional
//! max_output_dims = 20
//! require_flat_vectors = true
//! require_no_missing_output = false
//! wall_clock_s = 20
//! memory_mb = 512
//! console_cap_bytes = 65536
//!
//! [pipeline]                              # required unless a model challenge
//! training_seed = 0
//! reference_model = { kind = "knn_classifier", k = 3 }
//!
//! [metrics]
//! metrics = ["mse"]
//! primary = "mse"
//! direction = "minimize"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{ChallengeError, ChallengeSpec, ChallengeType, ConstraintSet, DatasetSource, MetricSet};
use crate::dataset::{LabelColumn, SplitSpec, TaskKind};
use crate::metrics::{Direction, MetricId};
use crate::pipeline::PipelineConfig;

pub const SCHEMA_VERSION: i64 = 1;
pub const MANIFEST_FILE: &str = "challenge.toml";
const DEFAULT_RUNNER: &str = "python3 {entry}";
const DEFAULT_ENTRY: &str = "submission.py";

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    schema: Option<i64>,
    id: Option<String>,
    title: Option<String>,
    challenge_type: Option<String>,
    description: Option<String>,
    description_file: Option<String>,
    baseline: Option<String>,
    quiz: Option<String>,
    runner_command: Option<String>,
    entry_file: Option<String>,
    dataset: Option<RawDataset>,
    split: Option<RawSplit>,
    constraints: Option<ConstraintSet>,
    pipeline: Option<PipelineConfig>,
    metrics: Option<RawMetrics>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    path: Option<String>,
    label_column: Option<LabelColumn>,
    #[serde(default)]
    has_header: bool,
    task_kind: Option<TaskKind>,
    image_shape: Option<(usize, usize)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSplit {
    test_fraction: Option<f64>,
    seed: Option<u64>,
    shuffle: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetrics {
    metrics: Option<Vec<String>>,
    primary: Option<String>,
    direction: Option<String>,
}

fn resolve(dir: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

fn metric(name: &str) -> Result<MetricId, ChallengeError> {
    MetricId::parse(name).ok_or_else(|| ChallengeError::UnknownMetric(name.to_string()))
}

/// Reads a manifest, resolves its paths relative to the manifest directory
/// and applies defaults. Accepts either the manifest file or its directory.
pub fn load_challenge(manifest_path: impl AsRef<Path>) -> Result<ChallengeSpec, ChallengeError> {
    let mut path = manifest_path.as_ref().to_path_buf();
    if path.is_dir() {
        path = path.join(MANIFEST_FILE);
    }
    let text = fs::read_to_string(&path).map_err(|source| ChallengeError::Io {
        path: path.clone(),
        source,
    })?;
    let dir = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    parse_manifest(&text, &dir)
}

pub(crate) fn parse_manifest(text: &str, dir: &Path) -> Result<ChallengeSpec, ChallengeError> {
    let raw: RawManifest =
        toml::from_str(text).map_err(|e| ChallengeError::Malformed(e.message().to_string()))?;

    let schema = raw.schema.ok_or(ChallengeError::MissingKey("schema"))?;
    if schema != SCHEMA_VERSION {
        return Err(ChallengeError::UnsupportedSchema(schema));
    }
    let id = raw.id.ok_or(ChallengeError::MissingKey("id"))?;
    if id.is_empty()
        || !id
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
    {
        return Err(ChallengeError::Invalid(format!(
            "id {id:?} must be a non-empty lowercase slug"
        )));
    }
    let title = raw.title.ok_or(ChallengeError::MissingKey("title"))?;
    let type_name = raw
        .challenge_type
        .ok_or(ChallengeError::MissingKey("challenge_type"))?;
    let challenge_type = ChallengeType::parse(&type_name)
        .ok_or(ChallengeError::UnknownChallengeType(type_name))?;

    let description_markdown = match (raw.description, raw.description_file) {
        (Some(text), _) => text,
        (None, Some(file)) => {
            let p = resolve(dir, &file);
            fs::read_to_string(&p).map_err(|source| ChallengeError::Io { path: p, source })?
        }
        (None, None) => return Err(ChallengeError::MissingKey("description")),
    };

    let ds = raw.dataset.ok_or(ChallengeError::MissingKey("dataset"))?;
    let dataset_path = resolve(dir, &ds.path.ok_or(ChallengeError::MissingKey("dataset.path"))?);
    let dataset = DatasetSource {
        label_column: ds
            .label_column
            .ok_or(ChallengeError::MissingKey("dataset.label_column"))?,
        has_header: ds.has_header,
        task_kind: ds
            .task_kind
            .ok_or(ChallengeError::MissingKey("dataset.task_kind"))?,
        image_shape: ds.image_shape,
        path: dataset_path,
    };
    if !dataset.path.is_file() {
        return Err(ChallengeError::DanglingPath {
            key: "dataset.path",
            path: dataset.path,
        });
    }

    let split = raw.split.ok_or(ChallengeError::MissingKey("split"))?;
    let split = SplitSpec {
        test_fraction: split
            .test_fraction
            .ok_or(ChallengeError::MissingKey("split.test_fraction"))?,
        seed: split.seed.ok_or(ChallengeError::MissingKey("split.seed"))?,
        shuffle: split.shuffle.unwrap_or(true),
    };

    let m = raw.metrics.ok_or(ChallengeError::MissingKey("metrics"))?;
    let metrics = m
        .metrics
        .ok_or(ChallengeError::MissingKey("metrics.metrics"))?
        .iter()
        .map(|s| metric(s))
        .collect::<Result<Vec<_>, _>>()?;
    let primary = metric(&m.primary.ok_or(ChallengeError::MissingKey("metrics.primary"))?)?;
    let direction = match m
        .direction
        .ok_or(ChallengeError::MissingKey("metrics.direction"))?
        .as_str()
    {
        "minimize" => Direction::Minimize,
        "maximize" => Direction::Maximize,
        other => return Err(ChallengeError::UnknownDirection(other.to_string())),
    };
    if !metrics.contains(&primary) {
        return Err(ChallengeError::Invalid(format!(
            "primary metric {} is not listed in metrics",
            primary.name()
        )));
    }
    if primary.direction() != direction {
        return Err(ChallengeError::Invalid(format!(
            "{} must be {:?}d, not {:?}d",
            primary.name(),
            primary.direction(),
            direction
        )));
    }

    let baseline = raw.baseline.ok_or(ChallengeError::MissingKey("baseline"))?;

    Ok(ChallengeSpec {
        id,
        title,
        description_markdown,
        challenge_type,
        dataset,
        split,
        constraints: raw.constraints.unwrap_or_default(),
        pipeline: raw.pipeline,
        metric_set: MetricSet {
            metrics,
            primary,
            direction,
        },
        baseline_submission: resolve(dir, &baseline),
        quiz_path: raw.quiz.map(|q| resolve(dir, &q)),
        runner_command: raw.runner_command.unwrap_or_else(|| DEFAULT_RUNNER.into()),
        entry_file: raw.entry_file.unwrap_or_else(|| DEFAULT_ENTRY.into()),
        manifest_dir: dir.to_path_buf(),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
schema = 1
id = "tiny"
title = "Tiny regression"
challenge_type = "regression_model"
description = "Predict y."
baseline = "baseline.py"

[dataset]
path = "data.csv"
label_column = 2
task_kind = "regression"

[split]
test_fraction = 0.25
seed = 3

[metrics]
metrics = ["mse"]
primary = "mse"
direction = "minimize"
"#;

    pub(crate) fn fixture_dir(manifest: &str) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        let rows: String = (0..20)
            .map(|i| format!("{},{},{}\n", i, i % 3, 2 * i + 1))
            .collect();
        fs::write(dir.path().join("data.csv"), rows).unwrap();
        fs::write(dir.path().join("baseline.py"), "print('hi')\n").unwrap();
        fs::write(dir.path().join(MANIFEST_FILE), manifest).unwrap();
        dir
    }

    #[test]
    fn minimal_manifest_gets_defaults() {
        let dir = fixture_dir(MINIMAL);
        let spec = load_challenge(dir.path()).unwrap();
        assert_eq!(spec.constraints, ConstraintSet::default());
        assert_eq!(spec.constraints.wall_clock_s, 20.0);
        assert_eq!(spec.constraints.memory_mb, 512);
        assert_eq!(spec.constraints.console_cap_bytes, 65536);
        assert_eq!(spec.dataset.path, dir.path().join("data.csv"));
        assert_eq!(spec.baseline_submission, dir.path().join("baseline.py"));
        assert_eq!(spec.runner_command, "python3 {entry}");
        assert!(spec.split.shuffle);
    }

    #[test]
    fn unknown_challenge_type() {
        let dir = fixture_dir(&MINIMAL.replace("regression_model", "clustering"));
        assert!(matches!(
            load_challenge(dir.path()),
            Err(ChallengeError::UnknownChallengeType(t)) if t == "clustering"
        ));
    }

    #[test]
    fn maximize_mse_is_invalid() {
        let dir = fixture_dir(&MINIMAL.replace("\"minimize\"", "\"maximize\""));
        assert!(matches!(load_challenge(dir.path()), Err(ChallengeError::Invalid(_))));
    }

    #[test]
    fn dangling_dataset() {
        let dir = fixture_dir(&MINIMAL.replace("data.csv", "nope.csv"));
        assert!(matches!(
            load_challenge(dir.path()),
            Err(ChallengeError::DanglingPath { key: "dataset.path", .. })
        ));
    }

    #[test]
    fn wrong_schema() {
        let dir = fixture_dir(&MINIMAL.replace("schema = 1", "schema = 2"));
        assert!(matches!(
            load_challenge(dir.path()),
            Err(ChallengeError::UnsupportedSchema(2))
        ));
    }

    #[test]
    fn deleting_any_required_key_names_it() {
        let required = [
            "schema", "id", "title", "challenge_type", "description", "baseline", "path",
            "label_column", "task_kind", "test_fraction", "seed", "metrics", "primary", "direction",
        ];
        for key in required {
            let text: String = MINIMAL
                .lines()
                .filter(|l| !l.starts_with(&format!("{key} =")))
                .map(|l| format!("{l}\n"))
                .collect();
            assert_ne!(text, MINIMAL, "{key} not found in fixture");
            let dir = fixture_dir(&text);
            match load_challenge(dir.path()) {
                Err(ChallengeError::MissingKey(k)) => assert!(k.ends_with(key), "{key} -> {k}"),
                other => panic!("deleting {key}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn deleting_whole_tables_names_them() {
        for table in ["dataset", "split", "metrics"] {
            let mut out = String::new();
            let mut skipping = false;
            for line in MINIMAL.lines() {
                if line.starts_with('[') {
                    skipping = line == format!("[{table}]");
                }
                if !skipping {
                    out.push_str(line);
                    out.push('\n');
                }
            }
            let dir = fixture_dir(&out);
            assert!(matches!(
                load_challenge(dir.path()),
                Err(ChallengeError::MissingKey(k)) if k == table
            ));
        }
    }

    #[test]
    fn garbage_is_malformed_not_panic() {
        let dir = fixture_dir("schema = [[[");
        assert!(matches!(load_challenge(dir.path()), Err(ChallengeError::Malformed(_))));
    }
}
