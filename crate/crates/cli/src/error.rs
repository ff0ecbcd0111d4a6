use std::path::PathBuf;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {msg}", path.display())]
    Io { path: PathBuf, msg: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("no session files given")]
    NoSessions,
    #[error(transparent)]
    Pipeline(#[from] handface_core::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        use handface_core::Error as E;
        match self {
            CliError::Io { .. } => "io",
            CliError::Config(_) => "config",
            CliError::PortInUse(_) => "port_in_use",
            CliError::NoSessions => "no_sessions",
            CliError::Pipeline(e) => match e {
                E::Session(handface_core::session::SessionError::Io { .. }) => "io",
                E::Session(_) => "session",
                E::Eval(handface_core::eval::EvalError::InsufficientSessions { .. }) => "insufficient_sessions",
                E::Eval(_) => "evaluation",
                E::Nn(_) => "training",
                E::Preprocess(_) => "preprocess",
                E::Simulation(_) | E::Impedance(_) => "simulation",
                E::Frame(_) | E::Sync(_) | E::Stream(_) => "stream",
            },
        }
    }

    /// One-line JSON error record for stderr.
    pub fn machine_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            error: &'a str,
            message: String,
        }
        serde_json::to_string(&Line { error: self.kind(), message: self.to_string() }).expect("error line serializes")
    }
}

macro_rules! from_core {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Pipeline(e.into())
            }
        })*
    };
}

from_core!(
    handface_core::session::SessionError,
    handface_core::simulator::SimError,
    handface_core::nn::NnError,
    handface_core::eval::EvalError,
    handface_core::preprocess::PreprocessError
);
