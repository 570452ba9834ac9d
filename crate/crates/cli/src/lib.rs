//! Campaign runner: configuration, instance generation, dispatch to the
//! certificate pipelines and report emission.

pub mod campaign;
pub mod config;
pub mod generate;

pub use campaign::{run, RunReport};
pub use config::{CampaignConfig, Mode};
