//! Pipeline orchestration over a plain-file record store.

mod config;
mod run;
mod serve;
pub mod store;

pub use config::{ConfigError, PathsConfig, PipelineConfig, ServeConfig};
pub use run::{parse_payload, Pipeline, PipelineError, RunOptions, RunSummary, SourceParse, Stage};
pub use serve::{router, serve, serve_on, ServeState};
pub use store::{RecordStore, StoreError};
