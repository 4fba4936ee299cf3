//! Seeded end-to-end orchestration of the spectra-core pipeline and the
//! CSV/JSON artifacts it emits.

use std::path::{Path, PathBuf};

pub mod config;
pub mod pipeline;
pub mod report;

pub use config::{parse_list, DatasetConfig, RunConfig};
pub use pipeline::{
    load_input, run_pipeline, run_stages, write_outputs, RunManifest, RunState, Stage, StageRecord,
    StageStatus,
};
pub use report::{emit_report, ReportKind};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] spectra_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage `{0}` did not run or failed; cannot emit this report")]
    StageMissing(&'static str),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
