//! Multiple-choice qualification quizzes.
//!
//! Quiz file (TOML):
//!
//! ```toml
//! id = "demo-quiz"
//! pass_threshold = 1.0   # optional
//!
//! [[questions]]
//! prompt = "Which split is hidden?"
//! options = ["train", "test"]
//! correct_index = 1
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub prompt: String,
    pub options: Vec<String>,
    pub correct_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quiz {
    pub id: String,
    pub questions: Vec<Question>,
    #[serde(default = "default_threshold")]
    pub pass_threshold: f64,
}

fn default_threshold() -> f64 {
    1.0
}

/// A question as shown to participants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicQuestion {
    pub prompt: String,
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicQuiz {
    pub id: String,
    pub pass_threshold: f64,
    pub questions: Vec<PublicQuestion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizAttempt {
    pub user_id: String,
    pub quiz_id: String,
    pub answers: Vec<usize>,
    pub score: f64,
    pub passed: bool,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
}

#[derive(Debug, Error)]
pub enum QuizError {
    #[error("cannot read quiz {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed quiz: {0}")]
    Malformed(String),
    #[error("invalid quiz: {0}")]
    Invalid(String),
    #[error("{found} answers for {expected} questions")]
    LengthMismatch { expected: usize, found: usize },
    #[error("answer {index} to question {question} is out of range (0..{options})")]
    OptionOutOfRange {
        question: usize,
        index: usize,
        options: usize,
    },
}

impl Quiz {
    pub fn check(&self) -> Result<(), QuizError> {
        if self.questions.is_empty() {
            return Err(QuizError::Invalid("quiz has no questions".into()));
        }
        if !(self.pass_threshold > 0.0 && self.pass_threshold <= 1.0) {
            return Err(QuizError::Invalid(format!(
                "pass_threshold must be in (0, 1], got {}",
                self.pass_threshold
            )));
        }
        for (i, q) in self.questions.iter().enumerate() {
            if q.options.len() < 2 {
                return Err(QuizError::Invalid(format!("question {i} needs at least 2 options")));
            }
            if q.correct_index >= q.options.len() {
                return Err(QuizError::Invalid(format!(
                    "question {i}: correct_index {} out of range",
                    q.correct_index
                )));
            }
        }
        Ok(())
    }

    pub fn public_view(&self) -> PublicQuiz {
        PublicQuiz {
            id: self.id.clone(),
            pass_threshold: self.pass_threshold,
            questions: self
                .questions
                .iter()
                .map(|q| PublicQuestion {
                    prompt: q.prompt.clone(),
                    options: q.options.clone(),
                })
                .collect(),
        }
    }

    pub fn answer_key(&self) -> Vec<usize> {
        self.questions.iter().map(|q| q.correct_index).collect()
    }
}

pub fn parse_quiz(text: &str) -> Result<Quiz, QuizError> {
    let quiz: Quiz = toml::from_str(text).map_err(|e| QuizError::Malformed(e.message().to_string()))?;
    quiz.check()?;
    Ok(quiz)
}

pub fn load_quiz(path: impl AsRef<Path>) -> Result<Quiz, QuizError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| QuizError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_quiz(&text)
}

pub fn grade_quiz(
    quiz: &Quiz,
    user_id: &str,
    answers: &[usize],
    timestamp_ms: u64,
) -> Result<QuizAttempt, QuizError> {
    if answers.len() != quiz.questions.len() {
        return Err(QuizError::LengthMismatch {
            expected: quiz.questions.len(),
            found: answers.len(),
        });
    }
    let mut correct = 0usize;
    for (question, (q, &index)) in quiz.questions.iter().zip(answers).enumerate() {
        if index >= q.options.len() {
            return Err(QuizError::OptionOutOfRange {
                question,
                index,
                options: q.options.len(),
            });
        }
        correct += usize::from(index == q.correct_index);
    }
    let score = correct as f64 / quiz.questions.len() as f64;
    Ok(QuizAttempt {
        user_id: user_id.to_string(),
        quiz_id: quiz.id.clone(),
        answers: answers.to_vec(),
        score,
        passed: score >= quiz.pass_threshold,
        timestamp_ms,
    })
}
