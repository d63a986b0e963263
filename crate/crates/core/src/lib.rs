//! Occupation inference from smartphone sensor logs: ingestion and
//! windowing, feature extraction, a variational autoencoder for latent
//! features, gradient-boosted trees, the evaluation harness and a synthetic
//! data generator.

pub mod boosting;
pub mod error;
pub mod features;
pub mod harness;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod synthgen;
pub mod vae;

pub use error::{Result, WorkrError};
pub use model::{LabeledWindow, Occupation, SensorKind, SensorRecord, TaskAnnotation, TimeSlot};
