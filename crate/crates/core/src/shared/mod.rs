//! Shared-spectrum scheme: both tiers use every channel.
//!
//! Macro users are power controlled against the BS with margin `kappa_m`. The margin becomes a
//! per-channel femto interference budget at the BS, which each FAP turns into a power cap for its
//! users. Optionally, macro users hand over to a nearby FAP and share a channel with one of its
//! femto users through successive interference cancellation (SIC).

mod assignment;
mod handover;
mod pipeline;
mod power_control;
mod sic;

pub use assignment::{assign_channels_shared, sense_channel_interference};
pub use handover::{run_handover_phase, HandoverPhase};
pub use pipeline::{evaluate_shared, SharedOutcome, Strategy};
pub use power_control::{femto_power_control, PowerControlOutcome, MAX_ROUNDS, RELATIVE_TOLERANCE};
pub use sic::{sic_evaluate, SicPair};

use serde::Serialize;

use crate::config::NetworkConfig;
use crate::topology::DistanceTable;
use crate::SchemeError;

/// Links power controlled to exactly their threshold converge to it only within the fixed-point
/// tolerance, so threshold checks on them allow this much relative slack.
pub const SINR_TOLERANCE: f64 = 1e-5;

#[inline]
pub fn meets_threshold(sinr: f64, beta: f64) -> bool {
    sinr >= beta * (1.0 - SINR_TOLERANCE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Attachment {
    Bs,
    Fap(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub macro_tx_mw: Vec<f64>,
    /// `femto_tx_mw[cell][user]`.
    pub femto_tx_mw: Vec<Vec<f64>>,
    pub femto_cap_mw: Vec<f64>,
    pub attachment: Vec<Attachment>,
}

/// Channel occupancy. Channel `n` always belongs to macro user `n`; inside each femtocell every
/// femto user holds exactly one channel, and a paired femto user holds its macro partner's.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelAllocation {
    /// `femto_channel[cell][user]`.
    pub femto_channel: Vec<Vec<usize>>,
    pub pairs: Vec<SicPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Occupant {
    Vacant,
    Femto(usize),
    /// Index into `ChannelAllocation::pairs`.
    Pair(usize),
}

impl ChannelAllocation {
    pub fn occupant(&self, cell: usize, channel: usize) -> Occupant {
        if let Some(i) = self
            .pairs
            .iter()
            .position(|p| p.cell_id == cell && p.channel_id == channel)
        {
            return Occupant::Pair(i);
        }
        match self.femto_channel[cell].iter().position(|&c| c == channel) {
            Some(u) => Occupant::Femto(u),
            None => Occupant::Vacant,
        }
    }

    pub fn pair_of_femto(&self, cell: usize, user: usize) -> Option<&SicPair> {
        self.pairs
            .iter()
            .find(|p| p.cell_id == cell && p.femto_user_id == user)
    }
}

/// Minimum macro power meeting `kappa_m * beta_m` over noise at the BS.
pub fn macro_min_power(d_mb: f64, config: &NetworkConfig) -> f64 {
    config.kappa_m * config.beta_m() * config.noise_mw() * d_mb.powf(config.phi)
}

/// Aggregate femto interference each channel may put on the BS, `noise * (kappa_m - 1)`.
pub fn interference_budget(config: &NetworkConfig) -> Result<f64, SchemeError> {
    if !(config.kappa_m > 1.0) {
        return Err(SchemeError::NoInterferenceMargin(config.kappa_m));
    }
    Ok(config.noise_mw() * (config.kappa_m - 1.0))
}

/// Power cap for every user of a femtocell whose FAP is `d_ab` from the BS. Each user is assumed
/// to sit on the cell edge nearest the BS and gets an equal share of the budget per femtocell.
pub fn femto_power_cap(d_ab: f64, config: &NetworkConfig) -> f64 {
    let budget = config.noise_mw() * (config.kappa_m - 1.0);
    let worst_distance = (d_ab - config.r_femto_m).max(config.min_distance_m);
    budget * worst_distance.powf(config.phi) / config.n_f_mean
}

/// Power a macro user needs to meet `beta_m` at a FAP seeing `interference_mw` from co-channel
/// femto users.
pub fn required_fap_power(
    mu_id: usize,
    cell_id: usize,
    distances: &DistanceTable,
    interference_mw: f64,
    config: &NetworkConfig,
) -> f64 {
    config.beta_m()
        * (interference_mw + config.noise_mw())
        * distances.d_ma[mu_id][cell_id].powf(config.psi)
}

/// True iff reaching the FAP takes strictly less power than reaching the BS.
pub fn handover_decision(
    mu_id: usize,
    cell_id: usize,
    distances: &DistanceTable,
    co_channel_interference_at_fap_mw: f64,
    config: &NetworkConfig,
) -> bool {
    let noise = config.noise_mw();
    let lhs = distances.d_mb[mu_id].powf(config.phi);
    let rhs = (co_channel_interference_at_fap_mw + noise)
        * distances.d_ma[mu_id][cell_id].powf(config.psi)
        / (config.kappa_m * noise);
    lhs > rhs
}

/// Upper bound on the shared-scheme gain when all `femto_users` are served.
pub fn max_shared_gain(femto_users: f64, config: &NetworkConfig) -> f64 {
    femto_users * config.femto_link_rate() / config.macro_only_sum_rate()
}
