//! Agent-based simulator for recommendation strategies.
//!
//! A single provider recommends items to a population of consumers under one
//! of five list-ordering strategies. Consumers accept recommendations with a
//! probability driven by their trust in the provider (a Beta-mean belief built
//! from experienced utility) and by the provider's social reputation (a global
//! thumbs-up/down ledger). The engine tracks trust, consumption probability,
//! and profit over discrete time steps and aggregates replications into mean
//! and confidence-interval series.
//!
//! The crate is organized along the pipeline:
//!
//! - [`data`]: MovieLens-format ingestion, item catalog with synthetic
//!   profits, consumer initialization.
//! - [`predictor`]: latent-factor rating model (biased SGD matrix
//!   factorization) and the merged prediction matrix.
//! - [`strategy`]: recommendation-list construction under the configured
//!   strategy.
//! - [`consumer`]: consumption decisions, item choice under position bias,
//!   utility experience, trust updates, feedback and posting behavior.
//! - [`social`]: the global reputation ledger.
//! - [`engine`]: the step loop, replication runner, and experiment grid.
//! - [`cli`]: configuration files, CSV emission, figure presets,
//!   verification.
//! - [`synth`]: a deterministic generator for a MovieLens-shaped stand-in
//!   dataset, for environments without the real ratings file.

pub mod cli;
pub mod consumer;
pub mod data;
pub mod engine;
pub mod error;
pub mod predictor;
pub mod social;
pub mod strategy;
pub mod synth;

pub use error::{Result, SimError};
