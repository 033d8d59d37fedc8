mod common;

use std::fs;

use common::{cli, demo_answer_key, path_str, stderr, stdout};
use crowdml_core::demo::{guest_path, guests, HOUSING_ID};

fn seeded() -> (tempfile::TempDir, std::path::PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = cli(&["seed-demo", path_str(&data)]);
    assert!(out.status.success(), "{}", stderr(&out));
    (tmp, data)
}

#[test]
fn seed_demo_refuses_non_empty_dir() {
    let (_tmp, data) = seeded();
    let again = cli(&["seed-demo", path_str(&data)]);
    assert_eq!(again.status.code(), Some(2));
    assert!(stderr(&again).contains("not empty"));
}

#[test]
fn seeded_digits_meta_has_image_shape() {
    let (_tmp, data) = seeded();
    let manifest = data.join("challenges/digits/challenge.toml");
    let dump = guest_path(&data, "digits", guests::FILE_DUMPER);
    let out = cli(&["eval-local", path_str(&manifest), path_str(&dump)]);
    let compact: String = stdout(&out).split_whitespace().collect();
    assert!(compact.contains(r#""image_shape":[8,8]"#), "{}", stdout(&out));
}

#[test]
fn eval_local_exit_codes() {
    let (_tmp, data) = seeded();
    let manifest = data.join("challenges/housing/challenge.toml");
    let baseline = data.join("challenges/housing/baseline/submission.py");
    let ok = cli(&["eval-local", path_str(&manifest), path_str(&baseline)]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    assert!(stdout(&ok).contains("mse: "));

    let looper = guest_path(&data, HOUSING_ID, guests::INFINITE_LOOP);
    let timeout = cli(&["--wall-clock-s", "1", "eval-local", path_str(&manifest), path_str(&looper)]);
    assert_eq!(timeout.status.code(), Some(1));
    assert!(stdout(&timeout).contains("Timeout"));

    let missing = cli(&["eval-local", "/nonexistent/challenge.toml", path_str(&baseline)]);
    assert_eq!(missing.status.code(), Some(2));
    let no_args = cli(&["eval-local"]);
    assert_eq!(no_args.status.code(), Some(2));
}

#[test]
fn eval_local_json_is_a_report() {
    let (_tmp, data) = seeded();
    let manifest = data.join("challenges/housing");
    let sub = guest_path(&data, HOUSING_ID, guests::LINEAR_FIT);
    let out = cli(&["eval-local", path_str(&manifest), path_str(&sub), "--json"]);
    let report: crowdml_core::ScoreReport = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report.submission_id, "local");
    assert!(report.primary_value.is_some());
}

#[test]
fn validate_runs_baseline_and_reports_violations() {
    let (_tmp, data) = seeded();
    let manifest = data.join("challenges/digits/challenge.toml");
    let ok = cli(&["challenge", "validate", path_str(&manifest)]);
    assert_eq!(ok.status.code(), Some(0), "{}{}", stdout(&ok), stderr(&ok));
    assert!(stdout(&ok).contains("baseline accuracy"));

    let text = fs::read_to_string(&manifest).unwrap().replace("max_output_dims = 20", "max_output_dims = 0");
    fs::write(&manifest, text).unwrap();
    let bad = cli(&["challenge", "validate", "--no-run", path_str(&manifest)]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("max_output_dims"), "{}", stdout(&bad));
}

#[test]
fn validate_flags_failing_baseline() {
    let (_tmp, data) = seeded();
    let dir = data.join("challenges/housing");
    fs::write(dir.join("baseline/submission.py"), "raise SystemExit(3)\n").unwrap();
    let out = cli(&["challenge", "validate", path_str(&dir)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("baseline failed"));
}

#[test]
fn package_writes_public_bundle_only() {
    let (tmp, data) = seeded();
    let out_dir = tmp.path().join("bundle");
    let out = cli(&[
        "challenge",
        "package",
        path_str(&data.join("challenges/housing")),
        "--out",
        path_str(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for f in ["challenge.json", "description.md", "baseline/submission.py", "x_train.csv", "y_train.csv", "quiz.json"] {
        assert!(out_dir.join(f).is_file(), "{f} missing");
    }
    let quiz = fs::read_to_string(out_dir.join("quiz.json")).unwrap();
    assert!(!quiz.contains("correct_index"));
    let y_train = fs::read_to_string(out_dir.join("y_train.csv")).unwrap();
    assert_eq!(y_train.lines().count(), 300);
    let names: Vec<_> = fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(!names.iter().any(|n| n.to_string_lossy().contains("test")), "{names:?}");
}

#[test]
fn quiz_grade_pass_and_fail() {
    let (tmp, data) = seeded();
    let quiz = data.join("challenges/housing/quiz.toml");
    let key = demo_answer_key(&data);
    let good = tmp.path().join("good.txt");
    fs::write(&good, key.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")).unwrap();
    let pass = cli(&["quiz", "grade", path_str(&quiz), path_str(&good)]);
    assert_eq!(pass.status.code(), Some(0));
    assert!(stdout(&pass).contains("score 1.00"));

    let mut wrong = key.clone();
    wrong[0] = (wrong[0] + 1) % 2;
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, serde_json::to_string(&wrong).unwrap()).unwrap();
    let fail = cli(&["quiz", "grade", path_str(&quiz), path_str(&bad)]);
    assert_eq!(fail.status.code(), Some(1));
    assert!(stdout(&fail).contains("score 0.80"));

    let short = tmp.path().join("short.txt");
    fs::write(&short, "1 2").unwrap();
    let err = cli(&["quiz", "grade", path_str(&quiz), path_str(&short)]);
    assert_eq!(err.status.code(), Some(1));
    assert!(stderr(&err).contains("5"), "{}", stderr(&err));
}

#[test]
fn leaderboard_of_empty_store_and_unknown_challenge() {
    let (_tmp, data) = seeded();
    let out = cli(&["--data-dir", path_str(&data), "leaderboard", "housing", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "[]");
    assert!(!data.join("store").exists(), "read-only command created the store");
    let unknown = cli(&["--data-dir", path_str(&data), "leaderboard", "nope"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn pool_size_must_be_positive() {
    let out = cli(&["--pool-size", "0", "serve"]);
    assert_eq!(out.status.code(), Some(2));
}
