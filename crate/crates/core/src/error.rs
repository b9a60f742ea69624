use std::path::PathBuf;

use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("malformed input {file} line {line}: {msg}")]
    Parse {
        file: String,
        line: u64,
        msg: String,
    },

    #[error("cannot impute speed: edge has neither road types nor speed limits")]
    Imputation,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no path from {src} to {dst}")]
    NoPath { src: NodeId, dst: NodeId },

    #[error("invalid path: no edge {from} -> {to} in the resolved view")]
    InvalidPath { from: NodeId, to: NodeId },

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("artifact {}: {msg}", path.display())]
    Artifact { path: PathBuf, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
