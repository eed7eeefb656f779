use serde::Serialize;

use crate::config::NetworkConfig;
use crate::radio::{path_gain, sinr_from_totals};
use crate::topology::DistanceTable;

use super::meets_threshold;

/// A macro user sharing its own channel with one femto user at a FAP.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SicPair {
    pub cell_id: usize,
    pub macro_user_id: usize,
    pub femto_user_id: usize,
    pub channel_id: usize,
    /// Residual interference left by imperfect cancellation of the femto signal.
    pub residual_mw: f64,
    /// The femto user is decoded first, treating the macro signal as interference.
    pub fu_decoded: bool,
    /// The macro user meets `beta_m` after cancellation (requires `fu_decoded`).
    pub mu_decoded: bool,
    /// Femto SINR in the first decoding stage.
    pub femto_sinr: f64,
    /// Macro SINR with the femto signal perfectly removed.
    pub macro_sinr_perfect: f64,
}

impl SicPair {
    pub fn new(cell_id: usize, macro_user_id: usize, femto_user_id: usize) -> Self {
        Self {
            cell_id,
            macro_user_id,
            femto_user_id,
            channel_id: macro_user_id,
            residual_mw: 0.0,
            fu_decoded: false,
            mu_decoded: false,
            femto_sinr: f64::NAN,
            macro_sinr_perfect: f64::NAN,
        }
    }

    /// Macro SINR after imperfect cancellation, `(1 - epsilon)` times the perfect one.
    pub fn macro_sinr_after_cancellation(&self, external_plus_noise_mw: f64) -> f64 {
        let perfect = self.macro_sinr_perfect * external_plus_noise_mw;
        perfect / (self.residual_mw + external_plus_noise_mw)
    }

    /// Both stages would succeed with perfect cancellation.
    pub fn feasible_without_residual(&self, config: &NetworkConfig) -> bool {
        self.fu_decoded && meets_threshold(self.macro_sinr_perfect, config.beta_m())
    }
}

/// Runs both SIC stages at the pair's FAP.
///
/// `external_interference_mw` is everything on the channel at the FAP except the pair itself
/// (co-channel femto-tier transmitters of other cells). The residual is sized so that the macro
/// SINR after cancellation is `(1 - epsilon)` times the perfect-cancellation SINR.
pub fn sic_evaluate(
    pair: &SicPair,
    macro_tx_mw: f64,
    femto_tx_mw: f64,
    distances: &DistanceTable,
    external_interference_mw: f64,
    config: &NetworkConfig,
) -> SicPair {
    let clamp = config.min_distance_m;
    let base = external_interference_mw + config.noise_mw();
    let macro_rx = macro_tx_mw
        * path_gain(
            distances.d_ma[pair.macro_user_id][pair.cell_id],
            config.psi,
            clamp,
        );
    let femto_rx = femto_tx_mw
        * path_gain(
            distances.own_fap(pair.cell_id, pair.femto_user_id),
            config.alpha,
            clamp,
        );

    let femto_sinr = sinr_from_totals(
        femto_rx,
        macro_rx + external_interference_mw,
        config.noise_mw(),
    );
    let fu_decoded = meets_threshold(femto_sinr, config.beta_f());

    let macro_sinr_perfect = macro_rx / base;
    let eps = config.epsilon;
    let residual_mw = eps / (1.0 - eps) * base;
    let after = macro_rx / (residual_mw + base);
    let mu_decoded = fu_decoded && meets_threshold(after, config.beta_m());

    SicPair {
        residual_mw,
        fu_decoded,
        mu_decoded,
        femto_sinr,
        macro_sinr_perfect,
        ..pair.clone()
    }
}
