use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tempfile::TempDir;

use super::SandboxError;
use crate::challenge::{ChallengeType, PreparedChallenge};
use crate::dataset::{labels_to_csv, matrix_to_csv};

/// Contents of `input/meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceMeta {
    pub challenge_type: ChallengeType,
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub image_shape: Option<(usize, usize)>,
    pub max_output_dims: Option<usize>,
}

impl WorkspaceMeta {
    pub fn of(prepared: &PreparedChallenge) -> Self {
        Self {
            challenge_type: prepared.challenge_type,
            n_train: prepared.public.x_train.rows(),
            n_test: prepared.private.x_test.rows(),
            n_features: prepared.public.x_train.cols(),
            image_shape: prepared.image_shape,
            max_output_dims: prepared.private.constraints.max_output_dims,
        }
    }
}

/// A per-run temp directory, removed on drop.
#[derive(Debug)]
pub struct Workspace {
    dir: TempDir,
}

impl Workspace {
    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    /// Keeps the directory on disk and returns its path.
    pub fn persist(self) -> PathBuf {
        self.dir.keep()
    }
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<(), SandboxError> {
    fs::write(&path, bytes).map_err(|source| SandboxError::Io { path, source })
}

fn mkdir(path: PathBuf) -> Result<(), SandboxError> {
    fs::create_dir(&path).map_err(|source| SandboxError::Io { path, source })
}

/// Writes the guest-visible inputs. Nothing derived from `y_test` is written.
pub fn prepare_workspace(prepared: &PreparedChallenge, source: &str) -> Result<Workspace, SandboxError> {
    let dir = tempfile::Builder::new()
        .prefix("crowdml-ws-")
        .tempdir()
        .map_err(|source| SandboxError::Io {
            path: std::env::temp_dir(),
            source,
        })?;
    let root = dir.path();
    mkdir(root.join("input"))?;
    mkdir(root.join("output"))?;
    write(root.join("input/x_train.csv"), matrix_to_csv(&prepared.public.x_train).as_bytes())?;
    write(root.join("input/y_train.csv"), labels_to_csv(&prepared.public.y_train).as_bytes())?;
    write(root.join("input/x_test.csv"), matrix_to_csv(&prepared.private.x_test).as_bytes())?;
    let meta = serde_json::to_vec_pretty(&WorkspaceMeta::of(prepared)).expect("meta serializes");
    write(root.join("input/meta.json"), &meta)?;
    write(root.join(&prepared.entry_file), source.as_bytes())?;
    Ok(Workspace { dir })
}
