//! Link-level math: distance pathloss, SINR, threshold rates and unit conversions.
//!
//! Everything here works in linear units (mW and dimensionless gains). Decibel values only
//! appear at the configuration and reporting boundaries.

/// Whether a received term is the wanted signal or interference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermRole {
    Signal,
    Interference,
}

/// A single received power term: transmit power times path gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudgetTerm {
    pub tx_power_mw: f64,
    pub path_gain: f64,
    pub role: TermRole,
}

impl LinkBudgetTerm {
    pub fn signal(tx_power_mw: f64, path_gain: f64) -> Self {
        Self {
            tx_power_mw,
            path_gain,
            role: TermRole::Signal,
        }
    }

    pub fn interference(tx_power_mw: f64, path_gain: f64) -> Self {
        Self {
            tx_power_mw,
            path_gain,
            role: TermRole::Interference,
        }
    }

    #[inline]
    pub fn received_mw(&self) -> f64 {
        self.tx_power_mw * self.path_gain
    }
}

/// Distance-power-law gain `max(d, clamp)^-exponent`.
#[inline]
pub fn path_gain(distance_m: f64, exponent: f64, clamp_m: f64) -> f64 {
    distance_m.max(clamp_m).powf(-exponent)
}

/// Signal over interference-plus-noise, linear scale. An empty interferer list gives the SNR.
pub fn sinr(signal: LinkBudgetTerm, interferers: &[LinkBudgetTerm], noise_mw: f64) -> f64 {
    debug_assert!(noise_mw > 0.0);
    let interference: f64 = interferers.iter().map(LinkBudgetTerm::received_mw).sum();
    sinr_from_totals(signal.received_mw(), interference, noise_mw)
}

/// SINR from already-summed received powers.
#[inline]
pub fn sinr_from_totals(received_mw: f64, interference_mw: f64, noise_mw: f64) -> f64 {
    received_mw / (interference_mw + noise_mw)
}

/// Rate credited to a link: `log2(1 + beta)` if the link meets its threshold, zero otherwise.
///
/// The rate is evaluated at the threshold, not at the achieved SINR.
#[inline]
pub fn threshold_rate(sinr_linear: f64, beta_linear: f64) -> f64 {
    if sinr_linear >= beta_linear {
        (1.0 + beta_linear).log2()
    } else {
        0.0
    }
}

#[inline]
pub fn db_to_linear(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

#[inline]
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[inline]
pub fn dbm_to_mw(x_dbm: f64) -> f64 {
    db_to_linear(x_dbm)
}

#[inline]
pub fn mw_to_dbm(x_mw: f64) -> f64 {
    linear_to_db(x_mw)
}
