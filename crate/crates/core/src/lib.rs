//! Hand-over-face gesture recognition from shoulder-to-shoulder
//! bio-impedance.
//!
//! The crate covers the whole offline pipeline: an impedance model of the
//! body with hand-face contact paths ([`impedance`]), a seeded session
//! simulator ([`simulator`]), the device frame codec and resampling
//! ([`protocol`]), session files ([`session`]), windowing and normalization
//! ([`preprocess`]), a small 1D convolutional classifier trained from scratch
//! ([`nn`]) and leave-one-session-out evaluation ([`eval`]).

pub mod corpus;
pub mod eval;
pub mod gesture;
pub mod impedance;
pub mod nn;
pub mod preprocess;
pub mod protocol;
pub mod seed;
pub mod session;
pub mod simulator;
pub mod stream;

pub use gesture::GestureClass;
pub use stream::{LabelInterval, LabeledStream, StreamSample};

/// Any error the pipeline can produce.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Impedance(#[from] impedance::ImpedanceError),
    #[error(transparent)]
    Simulation(#[from] simulator::SimError),
    #[error(transparent)]
    Frame(#[from] protocol::FrameError),
    #[error(transparent)]
    Sync(#[from] protocol::SyncError),
    #[error(transparent)]
    Session(#[from] session::SessionError),
    #[error(transparent)]
    Stream(#[from] stream::StreamError),
    #[error(transparent)]
    Preprocess(#[from] preprocess::PreprocessError),
    #[error(transparent)]
    Nn(#[from] nn::NnError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
}
