//! Experiment configuration and the stage functions behind each CLI
//! subcommand. Every artifact records the hash of the config sections it
//! depends on; readers refuse mismatched artifacts unless forced.

mod config;
mod stages;

pub use config::{ExperimentConfig, FeatureSection, LdaSection, TrainSection};
pub use stages::{Analysis, CmItem, EvalInputs, Layout, Pipeline};
