pub mod binio;
pub mod countermeasure;
pub mod dsp;
pub mod embedder;
pub mod error;
pub mod features;
pub mod labels;
pub mod linalg;
pub mod metrics;
pub mod nnet;
pub mod pipeline;
pub mod scalar;
pub mod seeds;
pub mod simcorpus;

pub use error::{Error, Result};
pub use scalar::Scalar;
