use crate::config::NetworkConfig;
use crate::radio::path_gain;
use crate::topology::DistanceTable;

use super::Attachment;

/// Interference a FAP measures on every channel: the channel's macro user (unless it is attached
/// to this very FAP) plus the femto users of other cells already known to transmit on it.
/// `known_femto` holds `(cell, user, channel, power_mw)`.
pub fn sense_channel_interference(
    cell: usize,
    config: &NetworkConfig,
    distances: &DistanceTable,
    macro_tx_mw: &[f64],
    attachment: &[Attachment],
    known_femto: &[(usize, usize, usize, f64)],
) -> Vec<f64> {
    let clamp = config.min_distance_m;
    let mut measured: Vec<f64> = (0..config.n_channels)
        .map(|n| match attachment[n] {
            Attachment::Fap(a) if a == cell => 0.0,
            _ => macro_tx_mw[n] * path_gain(distances.d_ma[n][cell], config.psi, clamp),
        })
        .collect();
    for &(c, u, ch, p) in known_femto {
        if c != cell {
            measured[ch] += p * path_gain(distances.d_fa[c][u][cell], config.phi, clamp);
        }
    }
    measured
}

/// Picks the `unpaired_users` least-interfered channels not held by this cell's pairs, in
/// ascending interference order. Ties go to the lower channel id.
pub fn assign_channels_shared(
    pair_channels: &[usize],
    measured_interference_mw: &[f64],
    unpaired_users: usize,
) -> Vec<usize> {
    let mut free: Vec<usize> = (0..measured_interference_mw.len())
        .filter(|n| !pair_channels.contains(n))
        .collect();
    free.sort_by(|&a, &b| {
        measured_interference_mw[a]
            .total_cmp(&measured_interference_mw[b])
            .then(a.cmp(&b))
    });
    free.truncate(unpaired_users);
    free
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_interfered_first() {
        // Channels 1, 2, 3 of the example map to ids 0, 1, 2.
        assert_eq!(
            assign_channels_shared(&[], &[3e-13, 1e-13, 2e-13], 2),
            vec![1, 2]
        );
    }

    #[test]
    fn ties_by_channel_id() {
        assert_eq!(
            assign_channels_shared(&[], &[1.0; 25], 5),
            vec![0, 1, 2, 3, 4]
        );
        assert_eq!(
            assign_channels_shared(&[1], &[1.0; 25], 4),
            vec![0, 2, 3, 4]
        );
    }

    #[test]
    fn pair_channels_excluded() {
        let measured: Vec<f64> = (0..25)
            .map(|n| if n == 6 { 0.0 } else { 1.0 + n as f64 })
            .collect();
        let got = assign_channels_shared(&[6], &measured, 4);
        assert_eq!(got.len(), 4);
        assert!(!got.contains(&6));
        assert_eq!(got, vec![0, 1, 2, 3]);
    }

    #[test]
    fn sensing_skips_own_pair_macro_and_own_cell() {
        let cfg = NetworkConfig {
            n_channels: 2,
            n_macro_users: 2,
            ..NetworkConfig::default()
        };
        let d = DistanceTable {
            d_mb: vec![100.0, 100.0],
            d_ab: vec![100.0, 100.0],
            d_fb: vec![vec![100.0], vec![100.0]],
            d_ma: vec![vec![10.0, 20.0], vec![10.0, 20.0]],
            d_fa: vec![vec![vec![1.0, 10.0]], vec![vec![10.0, 1.0]]],
        };
        let att = [Attachment::Fap(0), Attachment::Bs];
        let known = [(0, 0, 1, 1.0), (1, 0, 1, 1.0)];
        let m = sense_channel_interference(0, &cfg, &d, &[1.0, 1.0], &att, &known);
        assert_eq!(m[0], 0.0);
        assert_eq!(m[1], 10f64.powf(-3.0) + 10f64.powf(-3.5));
    }
}
