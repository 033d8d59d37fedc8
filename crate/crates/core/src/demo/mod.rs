//! Bundled demo content: a tabular regression challenge, an image
//! dimensionality-reduction challenge, reference guest programs and a
//! qualification quiz.

mod data;

pub use data::{digits_csv, housing_csv, housing_price, DIGITS_PER_CLASS, HOUSING_ROWS};

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::service::CHALLENGES_DIR;

pub const HOUSING_ID: &str = "housing";
pub const DIGITS_ID: &str = "digits";
pub const QUIZ_ID: &str = "ml-basics";

/// Reference guests installed under `<challenge>/guests/`.
pub mod guests {
    pub const LINEAR_FIT: &str = "linear_fit.py";
    pub const SMALL_TREE: &str = "small_tree.py";
    pub const BLOCK_MEAN: &str = "block_mean.py";
    pub const TWENTY_DIMS: &str = "twenty_dims.py";
    pub const VIOLATOR_21: &str = "violator_21_dims.py";
    pub const UNFLATTENED: &str = "unflattened.py";
    pub const INFINITE_LOOP: &str = "infinite_loop.py";
    pub const FILE_DUMPER: &str = "file_dumper.py";
}

const HOUSING_BASELINE: &str = include_str!("guests/housing_baseline.py");
const LINEAR_FIT: &str = include_str!("guests/linear_fit.py");
const SMALL_TREE: &str = include_str!("guests/small_tree.py");
const DIGITS_BASELINE: &str = include_str!("guests/digits_baseline.py");
const DIGITS_FEATURES: &str = include_str!("guests/digits_features.py");
const UNFLATTENED: &str = include_str!("guests/digits_unflattened.py");
const INFINITE_LOOP: &str = include_str!("guests/infinite_loop.py");
const FILE_DUMPER: &str = include_str!("guests/file_dumper.py");

fn digits_features(dims: usize) -> String {
    DIGITS_FEATURES.replace("__DIMS__", &dims.to_string())
}

const QUIZ: &str = r#"id = "ml-basics"
pass_threshold = 1.0

[[questions]]
prompt = "Which data does the evaluator keep hidden from your code?"
options = ["The training features", "The training labels", "The test labels", "Nothing"]
correct_index = 2

[[questions]]
prompt = "A regression challenge is scored by mean squared error. Which score is better?"
options = ["12.5", "30.1"]
correct_index = 0

[[questions]]
prompt = "Where must a model submission write its predictions?"
options = ["stdout", "output/predictions.csv", "input/y_test.csv", "predictions.json"]
correct_index = 1

[[questions]]
prompt = "An image challenge allows at most 20 output dimensions. What happens to a 21-dimensional submission?"
options = ["It is truncated to 20", "It scores 0 and ranks last", "It is accepted normally"]
correct_index = 1

[[questions]]
prompt = "Why is a model evaluated on rows it never saw during training?"
options = ["To estimate how it generalizes", "To make training faster", "To reduce memory use"]
correct_index = 0
"#;

const HOUSING_DESCRIPTION: &str = r#"# Predict housing prices

Predict the sale price of a house (in thousands) from a few facts about it:
floor area, bedrooms, age, distance to the city centre, lot size and a
build-quality grade from 1 to 10.

Your program receives `input/x_train.csv` and `input/y_train.csv` to learn
from, and `input/x_test.csv` to predict. Write one prediction per test row,
in order, to `output/predictions.csv`.

Submissions are ranked by **mean squared error** on the hidden test labels;
lower is better. A baseline that predicts the average training price is
provided; try to beat it.

Only the Python standard library is available.
"#;

const DIGITS_DESCRIPTION: &str = r#"# Compress handwritten digits

Each row of `input/x_train.csv` and `input/x_test.csv` is an 8x8 grayscale
image of a digit, flattened row by row into 64 pixel values between 0 and 16
(see `image_shape` in `input/meta.json`).

Reduce each image to a vector of **20 values or fewer**. Write the reduced
training images to `output/x_train_out.csv` and the reduced test images to
`output/x_test_out.csv`, one image per row in the original order. An
undisclosed classifier is then trained on your reduced training images and
scored on your reduced test images.

Outputs wider than 20 values receive a score of 0. Each image must become a
1-dimensional vector: writing an image as a block of several rows is a
`ValueError`.

Submissions are ranked by multi-class **accuracy**; precision and recall are
reported too. The baseline keeps every other pixel.

Only the Python standard library is available.
"#;

const HOUSING_MANIFEST: &str = r#"schema = 1
id = "housing"
title = "Predict housing prices"
challenge_type = "regression_model"
description_file = "description.md"
baseline = "baseline/submission.py"
quiz = "quiz.toml"

[dataset]
path = "data.csv"
label_column = "price"
has_header = true
task_kind = "regression"

[split]
test_fraction = 0.25
seed = 7

[constraints]
wall_clock_s = 20
memory_mb = 512

[metrics]
metrics = ["mse"]
primary = "mse"
direction = "minimize"
"#;

const DIGITS_MANIFEST: &str = r#"schema = 1
id = "digits"
title = "Compress handwritten digits"
challenge_type = "dimensionality_reduction"
description_file = "description.md"
baseline = "baseline/submission.py"
quiz = "quiz.toml"

[dataset]
path = "data.csv"
label_column = "digit"
has_header = true
task_kind = "classification"
image_shape = [8, 8]

[split]
test_fraction = 0.25
seed = 11

[constraints]
max_output_dims = 20
require_flat_vectors = true
wall_clock_s = 20
memory_mb = 512

[pipeline]
training_seed = 0
reference_model = { kind = "knn_classifier", k = 3 }

[metrics]
metrics = ["accuracy", "macro_precision", "macro_recall"]
primary = "accuracy"
direction = "maximize"
"#;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("{0} is not empty; refusing to seed")]
    NotEmpty(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn put(path: PathBuf, contents: &str) -> Result<(), DemoError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| DemoError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(&path, contents).map_err(|source| DemoError::Io { path, source })
}

/// Directory of an installed challenge.
pub fn challenge_dir(data_dir: &Path, id: &str) -> PathBuf {
    data_dir.join(CHALLENGES_DIR).join(id)
}

/// Path of a reference guest installed by [`seed_demo`].
pub fn guest_path(data_dir: &Path, challenge_id: &str, guest: &str) -> PathBuf {
    challenge_dir(data_dir, challenge_id).join("guests").join(guest)
}

/// Installs both demo challenges into an empty or absent `data_dir`.
/// Returns the manifest paths.
pub fn seed_demo(data_dir: &Path) -> Result<Vec<PathBuf>, DemoError> {
    if let Ok(mut entries) = fs::read_dir(data_dir) {
        if entries.next().is_some() {
            return Err(DemoError::NotEmpty(data_dir.to_path_buf()));
        }
    }

    let housing = challenge_dir(data_dir, HOUSING_ID);
    put(housing.join("challenge.toml"), HOUSING_MANIFEST)?;
    put(housing.join("description.md"), HOUSING_DESCRIPTION)?;
    put(housing.join("data.csv"), &housing_csv())?;
    put(housing.join("quiz.toml"), QUIZ)?;
    put(housing.join("baseline/submission.py"), HOUSING_BASELINE)?;
    for (name, src) in [
        (guests::LINEAR_FIT, LINEAR_FIT),
        (guests::SMALL_TREE, SMALL_TREE),
        (guests::INFINITE_LOOP, INFINITE_LOOP),
        (guests::FILE_DUMPER, FILE_DUMPER),
    ] {
        put(housing.join("guests").join(name), src)?;
    }

    let digits = challenge_dir(data_dir, DIGITS_ID);
    put(digits.join("challenge.toml"), DIGITS_MANIFEST)?;
    put(digits.join("description.md"), DIGITS_DESCRIPTION)?;
    put(digits.join("data.csv"), &digits_csv())?;
    put(digits.join("quiz.toml"), QUIZ)?;
    put(digits.join("baseline/submission.py"), DIGITS_BASELINE)?;
    for (name, src) in [
        (guests::BLOCK_MEAN, digits_features(16)),
        (guests::TWENTY_DIMS, digits_features(20)),
        (guests::VIOLATOR_21, digits_features(21)),
        (guests::UNFLATTENED, UNFLATTENED.to_string()),
        (guests::INFINITE_LOOP, INFINITE_LOOP.to_string()),
        (guests::FILE_DUMPER, FILE_DUMPER.to_string()),
    ] {
        put(digits.join("guests").join(name), &src)?;
    }

    Ok(vec![housing.join("challenge.toml"), digits.join("challenge.toml")])
}
