//! Heart and respiration rate from facial video, read off the mean hue of
//! the forehead.
//!
//! The modules follow the processing chain:
//!
//! - [`color`]: RGB/HSV/YUV conversions
//! - [`ingest`]: Y4M, image-sequence and raw RGB frame sources
//! - [`roi`]: forehead rectangle from landmarks, masked mean hue per frame
//! - [`signal`]: resampling, windowed spectra, band peaks
//! - [`estimator`]: per-second streaming HR/RR with warm-up and smoothing
//! - [`pipeline`]: offline driver from frames to estimates
//! - [`synth`]: synthetic faces with planted rates
//! - [`eval`]: RMSE against a reference device

pub mod color;
pub mod estimator;
pub mod eval;
pub mod ingest;
pub mod pipeline;
pub mod roi;
pub mod signal;
pub mod synth;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Roi(#[from] roi::RoiError),
    #[error("frame {frame}: {source}")]
    FrameRoi {
        frame: u64,
        #[source]
        source: roi::RoiError,
    },
    #[error(transparent)]
    Signal(#[from] signal::SignalError),
    #[error(transparent)]
    Estimator(#[from] estimator::EstimatorError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/hue.md")]
    mod hue {}
    #[doc = include_str!("../../../book/src/forehead.md")]
    mod forehead {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/streaming.md")]
    mod streaming {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
