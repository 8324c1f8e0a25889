//! Chemical reaction network scripting: a small functional language that
//! generates reaction networks and lab protocols, deterministic and
//! linear-noise simulation, a virtual microfluidic device, and reaction
//! score rendering.

pub mod cli;
pub mod crn;
pub mod dmf;
pub mod eval;
pub mod expr;
pub mod lang;
pub mod protocol;
pub mod score;
pub mod sim;

use thiserror::Error;

/// Any failure of the end-to-end pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Syntax(#[from] lang::SyntaxError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error("protocol: {0}")]
    Protocol(#[from] protocol::ProtocolError),
    #[error("device: {0}")]
    Device(#[from] dmf::DeviceError),
    #[error("score: {0}")]
    Score(#[from] score::ScoreError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("invalid network file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Config(String),
}

impl Error {
    /// Source position, for errors that have one.
    pub fn location(&self) -> Option<(u32, u32)> {
        match self {
            Error::Syntax(e) => Some((e.line, e.column)),
            Error::Eval(e) => Some((e.line, e.column)),
            _ => None,
        }
    }

    /// The message without its position.
    pub fn message(&self) -> String {
        match self {
            Error::Syntax(e) => e.message.clone(),
            Error::Eval(e) => e.message.clone(),
            other => other.to_string(),
        }
    }
}
