//! GenIAS: a variational generator for synthetic time-series anomalies.
//!
//! The crate learns a compact latent representation of normal windows with
//! a TCN-VAE, synthesizes anomalies by inflating the latent standard
//! deviation with a learned scale, patches them back into the source
//! windows, and evaluates both generation quality (ARP/EDI over a one-class
//! embedding) and downstream detection utility (best F1, AUPR, AUROC).

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod genquality;
pub mod injector;
pub mod model;
pub mod nn;
pub mod objectives;
pub mod plot;
pub mod theory;
pub mod trainer;
pub mod tsad;

pub use config::{ArchDescriptor, GenConfig, PatchConfig, PatchMode};
pub use error::{GeniasError, Result};
