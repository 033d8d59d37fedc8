use super::{materialize, ChallengeSpec, ChallengeType};
use crate::dataset::TaskKind;
use crate::metrics::MetricId;
use crate::pipeline::ReferenceModelConfig;
use crate::quiz::load_quiz;

/// Static checks on a loaded spec. Returns human-readable violations; an
/// empty list means the challenge is valid. Running the baseline end to end
/// is left to the evaluator (see `service::check_baseline`).
pub fn validate_challenge(spec: &ChallengeSpec) -> Vec<String> {
    let mut out = spec.constraints.problems();
    let ty = spec.challenge_type;
    let task = spec.dataset.task_kind;

    if let Err(e) = spec.split.validate() {
        out.push(e.to_string());
    }

    if let Some(required) = ty.required_task() {
        if required != task {
            out.push(format!("{} needs a {required:?} dataset, found {task:?}", ty.name()));
        }
    }

    for m in &spec.metric_set.metrics {
        match (task, m) {
            (TaskKind::Regression, m) if m.requires_categorical() => {
                out.push(format!("metric {} needs categorical labels", m.name()));
            }
            (TaskKind::Classification, MetricId::Mse) => {
                out.push("mse is not a classification metric".into());
            }
            _ => {}
        }
    }

    match (ty.needs_pipeline(), &spec.pipeline) {
        (true, None) => out.push(format!("pipeline required for {}", ty.name())),
        (false, Some(_)) => out.push(format!("pipeline not allowed for {}", ty.name())),
        (true, Some(p)) => {
            if let Err(e) = p.reference_model.check() {
                out.push(e);
            }
            if ty == ChallengeType::LossSpecification {
                if !matches!(p.reference_model, ReferenceModelConfig::SoftmaxRegression { .. }) {
                    out.push("loss_specification needs a softmax_regression optimizer config".into());
                }
            } else if p.reference_model.task_kind() != task {
                out.push(format!(
                    "reference model trains {:?} but dataset is {task:?}",
                    p.reference_model.task_kind()
                ));
            }
        }
        (false, None) => {}
    }

    if spec.constraints.max_output_dims.is_some()
        && !matches!(
            ty,
            ChallengeType::DimensionalityReduction
                | ChallengeType::FeatureEngineering
                | ChallengeType::FeatureSelection
        )
    {
        out.push(format!("max_output_dims has no meaning for {}", ty.name()));
    }
    if spec.constraints.require_flat_vectors && spec.dataset.image_shape.is_none() {
        out.push("require_flat_vectors needs dataset.image_shape".into());
    }

    if spec.entry_file.is_empty() || spec.entry_file.contains(['/', '\\']) || spec.entry_file.starts_with('.') {
        out.push(format!("entry_file {:?} must be a plain file name", spec.entry_file));
    }
    if !spec.runner_command.contains("{entry}") {
        out.push("runner_command must reference {entry}".into());
    }

    match std::fs::metadata(&spec.baseline_submission) {
        Ok(m) if m.is_file() && m.len() > 0 => {}
        Ok(_) => out.push(format!("baseline {} is empty", spec.baseline_submission.display())),
        Err(e) => out.push(format!("baseline {}: {e}", spec.baseline_submission.display())),
    }

    if let Some(q) = &spec.quiz_path {
        if let Err(e) = load_quiz(q) {
            out.push(e.to_string());
        }
    }

    match materialize(spec) {
        Ok(p) => {
            if p.public.x_train.has_missing() && ty != ChallengeType::DataImputation {
                out.push("dataset has missing cells but is not an imputation challenge".into());
            }
            if ty == ChallengeType::DataImputation && !p.public.x_train.has_missing() && !p.private.x_test.has_missing() {
                out.push("imputation challenge dataset has no missing cells".into());
            }
        }
        Err(e) => out.push(format!("dataset: {e}")),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::challenge::load_challenge;
    use crate::challenge::manifest::tests::{fixture_dir, MINIMAL};

    #[test]
    fn minimal_manifest_is_valid() {
        let dir = fixture_dir(MINIMAL);
        assert_eq!(validate_challenge(&load_challenge(dir.path()).unwrap()), Vec::<String>::new());
    }

    #[test]
    fn dimensionality_without_pipeline() {
        let dir = fixture_dir(MINIMAL);
        let mut spec = load_challenge(dir.path()).unwrap();
        spec.challenge_type = ChallengeType::DimensionalityReduction;
        let v = validate_challenge(&spec);
        assert!(v.iter().any(|m| m.contains("pipeline required")), "{v:?}");
    }

    #[test]
    fn classification_with_mse() {
        let text = MINIMAL
            .replace("regression_model", "classification_model")
            .replace("\"regression\"", "\"classification\"");
        let dir = fixture_dir(&text);
        let spec = load_challenge(dir.path()).unwrap();
        let v = validate_challenge(&spec);
        assert!(v.iter().any(|m| m.contains("mse")), "{v:?}");
    }

    #[test]
    fn model_type_must_not_carry_pipeline() {
        let dir = fixture_dir(&format!(
            "{MINIMAL}\n[pipeline]\nreference_model = {{ kind = \"ols\" }}\n"
        ));
        let v = validate_challenge(&load_challenge(dir.path()).unwrap());
        assert!(v.iter().any(|m| m.contains("pipeline not allowed")), "{v:?}");
    }
}
