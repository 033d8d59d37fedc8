use std::num::NonZeroUsize;
use std::path::PathBuf;

use crowdml_core::service::LimitOverrides;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_DATA_DIR: &str = "crowdml-data";

#[derive(Debug, Clone)]
pub struct CliConfig {
    pub data_dir: PathBuf,
    pub listen: String,
    pub pool_size: usize,
    /// Replace each challenge's own limits when set.
    pub limits: LimitOverrides,
}

impl CliConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            listen: DEFAULT_LISTEN.to_string(),
            pool_size: std::thread::available_parallelism().map_or(1, NonZeroUsize::get),
            limits: LimitOverrides::default(),
        }
    }
}
