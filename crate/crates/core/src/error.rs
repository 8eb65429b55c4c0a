use std::path::PathBuf;

use thiserror::Error;

use crate::knowledge::Violation;

pub type Result<T, E = NavError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NavError {
    #[error("position ({x:.3}, {y:.3}) lies outside the {width}x{height} map")]
    OutOfBounds { x: f64, y: f64, width: usize, height: usize },

    #[error("path start ({x:.3}, {y:.3}) is not on a free cell")]
    StartNotFree { x: f64, y: f64 },

    #[error("angle {theta:.6} rad is outside the view cone of half-width {half_fov:.6} rad")]
    OutsideCone { theta: f64, half_fov: f64 },

    #[error("invalid probability distribution: {0}")]
    Distribution(String),

    #[error("knowledge file failed validation:\n{}", format_violations(.0))]
    Knowledge(Vec<Violation>),

    #[error("target `{0}` is not in the knowledge base")]
    UnknownTarget(String),

    #[error("unknown prompt `{0}`: neither an object class nor a room type")]
    UnknownPrompt(String),

    #[error("world generation failed: {0}")]
    Generation(String),

    #[error("invalid episode setup: {0}")]
    Episode(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot compute metrics over an empty result set")]
    EmptyResults,

    #[error("trace error: {0}")]
    Trace(String),

    #[error("failed to parse {what}: {source}")]
    Parse {
        what: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image encoding failed: {0}")]
    Image(#[from] image::ImageError),
}

impl NavError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NavError::Io { path: path.into(), source }
    }
}

fn format_violations(violations: &[Violation]) -> String {
    violations.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n")
}
