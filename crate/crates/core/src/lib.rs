//! Reverse-GPS tag detection: FSK code generation, a demodulation and
//! correlation pipeline that estimates times of arrival, the
//! searching/tracking scheduler, and benchmark metrics.

pub mod codegen;
pub mod config;
pub mod detector;
pub mod dsp;
pub mod error;
pub mod harness;
pub mod recording;
pub mod scenario;
pub mod scheduler;

pub use error::{Error, Result};
