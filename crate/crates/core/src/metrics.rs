use serde::Serialize;

/// Outcome of one replicate under one scheme. Values that do not apply to the scheme are NaN.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub realized_femtocells: usize,
    pub femto_users: usize,
    pub macro_users: usize,
    /// Mean over femto users of the per-user SINR in dB. NaN without femto users.
    pub mean_femto_sinr_db: f64,
    pub rate_macro: f64,
    pub rate_femto: f64,
    pub rate_sum: f64,
    pub split_gain: f64,
    pub shared_gain: f64,
    /// Sum-rate gain bound with every femto user served, using the mean femtocell count.
    pub r_max: f64,
    /// The same bound evaluated at the realized femtocell count.
    pub r_max_realized: f64,
    pub handovers: usize,
    pub handover_successes: usize,
    pub served_femto: usize,
    pub served_macro: usize,
    pub mean_macro_power_mw: f64,
    pub mean_femto_power_mw: f64,
    pub power_control_rounds: usize,
    pub non_converged: bool,
}

impl MetricsRecord {
    pub fn served_macro_fraction(&self) -> f64 {
        self.served_macro as f64 / self.macro_users as f64
    }

    pub fn handover_fraction(&self) -> f64 {
        self.handovers as f64 / self.macro_users as f64
    }

    pub fn handover_success_fraction(&self) -> f64 {
        self.handover_successes as f64 / self.macro_users as f64
    }

    pub fn unserved_femto(&self) -> usize {
        self.femto_users - self.served_femto
    }
}

/// Mean of finite values, NaN when there are none.
pub(crate) fn mean_or_nan(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}
