//! Monte Carlo simulation of an uplink macrocell underlaid with femtocells.
//!
//! Two spectrum policies are modelled: a split scheme where femtocells get a dedicated
//! subset of the channels, and a shared scheme where both tiers reuse every channel under
//! power control, optionally with handover and successive interference cancellation.

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod radio;
pub mod rng;
pub mod shared;
pub mod split;
pub mod topology;

use thiserror::Error;

pub use config::{ConfigError, FemtocellCountMode, NetworkConfig};
pub use experiment::{run_sweep, FigureId, Scheme, SweepSpec};
pub use metrics::MetricsRecord;
pub use shared::{evaluate_shared, SharedOutcome, Strategy};
pub use topology::{build_distance_table, sample_topology, DistanceTable, Point, Topology};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("gamma = {gamma} is below the {users} femto users per cell")]
    GammaBelowUsers { gamma: usize, users: usize },
    #[error("gamma = {gamma} exceeds the {channels} available channels")]
    GammaAboveChannels { gamma: usize, channels: usize },
    #[error("kappa_m = {0} leaves no interference margin at the BS")]
    NoInterferenceMargin(f64),
}
