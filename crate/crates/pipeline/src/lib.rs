//! Staged, cached pipeline: extract → sample → train-agg → encode →
//! train-svm → evaluate → report.

pub mod cache;
pub mod config;
pub mod report;
pub mod stages;
pub mod sweep;
pub mod toy;

pub use config::{CommonArgs, PipelineConfig};
pub use stages::{Context, EvalSummary};
