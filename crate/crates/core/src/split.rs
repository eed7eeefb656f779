//! Split-spectrum scheme: `gamma` channels go to the femtocell tier, the rest to macro users, so
//! there is no cross-tier interference. Femto users transmit at a constant power on channels each
//! FAP draws at random.

use rand::seq::index::sample;
use rand::Rng;

use crate::config::NetworkConfig;
use crate::metrics::{mean_or_nan, MetricsRecord};
use crate::radio::{linear_to_db, path_gain, sinr_from_totals, threshold_rate};
use crate::topology::{DistanceTable, Topology};
use crate::SchemeError;

#[derive(Debug, Clone, PartialEq)]
pub struct SplitAllocation {
    /// The `gamma` channels handed to the femtocell tier, ascending.
    pub femto_channel_ids: Vec<usize>,
    /// `per_cell_choice[cell][user]`: the channel of each femto user.
    pub per_cell_choice: Vec<Vec<usize>>,
    pub macro_served_count: usize,
}

/// Gives `gamma` random channels to the femto tier and lets every FAP draw `F` distinct ones.
pub fn allocate_split<R: Rng + ?Sized>(
    config: &NetworkConfig,
    topology: &Topology,
    rng: &mut R,
) -> Result<SplitAllocation, SchemeError> {
    let f = config.n_femto_users_per_cell;
    let gamma = config.gamma;
    if gamma < f {
        return Err(SchemeError::GammaBelowUsers { gamma, users: f });
    }
    if gamma > config.n_channels {
        return Err(SchemeError::GammaAboveChannels {
            gamma,
            channels: config.n_channels,
        });
    }
    let mut femto_channel_ids = sample(rng, config.n_channels, gamma).into_vec();
    femto_channel_ids.sort_unstable();
    let per_cell_choice = (0..topology.realized_femtocell_count())
        .map(|_| {
            sample(rng, gamma, f)
                .into_iter()
                .map(|i| femto_channel_ids[i])
                .collect()
        })
        .collect();
    Ok(SplitAllocation {
        femto_channel_ids,
        per_cell_choice,
        macro_served_count: config.n_channels - gamma,
    })
}

/// Per-user SINRs at the serving FAP, `sinrs[cell][user]`.
pub fn femto_sinrs(
    config: &NetworkConfig,
    distances: &DistanceTable,
    allocation: &SplitAllocation,
) -> Vec<Vec<f64>> {
    let p = config.p_femto_const_mw();
    let noise = config.noise_mw();
    let clamp = config.min_distance_m;
    let mut on_channel: Vec<Vec<(usize, usize)>> = vec![Vec::new(); config.n_channels];
    for (cell, chans) in allocation.per_cell_choice.iter().enumerate() {
        for (user, &ch) in chans.iter().enumerate() {
            on_channel[ch].push((cell, user));
        }
    }
    allocation
        .per_cell_choice
        .iter()
        .enumerate()
        .map(|(cell, chans)| {
            chans
                .iter()
                .enumerate()
                .map(|(user, &ch)| {
                    let signal = p * path_gain(distances.own_fap(cell, user), config.alpha, clamp);
                    let interference: f64 = on_channel[ch]
                        .iter()
                        .filter(|&&(c, _)| c != cell)
                        .map(|&(c, u)| p * path_gain(distances.d_fa[c][u][cell], config.phi, clamp))
                        .sum();
                    sinr_from_totals(signal, interference, noise)
                })
                .collect()
        })
        .collect()
}

pub fn evaluate_split(
    config: &NetworkConfig,
    topology: &Topology,
    distances: &DistanceTable,
    allocation: &SplitAllocation,
) -> MetricsRecord {
    let beta_f = config.beta_f();
    let sinrs = femto_sinrs(config, distances, allocation);
    let all = || sinrs.iter().flatten().copied();
    let served_femto = all().filter(|&s| s >= beta_f).count();
    let rate_femto: f64 = all().map(|s| threshold_rate(s, beta_f)).sum();
    let rate_macro = allocation.macro_served_count as f64 * config.macro_link_rate();
    let rate_sum = rate_macro + rate_femto;
    let femto_users = topology.femto_user_count();
    MetricsRecord {
        realized_femtocells: topology.realized_femtocell_count(),
        femto_users,
        macro_users: config.n_macro_users,
        mean_femto_sinr_db: mean_or_nan(all().map(linear_to_db)),
        rate_macro,
        rate_femto,
        rate_sum,
        split_gain: split_gain(rate_sum, config),
        shared_gain: f64::NAN,
        r_max: f64::NAN,
        r_max_realized: f64::NAN,
        handovers: 0,
        handover_successes: 0,
        served_femto,
        served_macro: allocation.macro_served_count,
        mean_macro_power_mw: f64::NAN,
        mean_femto_power_mw: if femto_users > 0 {
            config.p_femto_const_mw()
        } else {
            f64::NAN
        },
        power_control_rounds: 0,
        non_converged: false,
    }
}

/// Relative sum-rate gain over the macro-only network.
pub fn split_gain(r_sum: f64, config: &NetworkConfig) -> f64 {
    let baseline = config.macro_only_sum_rate();
    (r_sum - baseline) / baseline
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::FemtocellCountMode;
    use crate::rng::substream;
    use crate::topology::{build_distance_table, sample_topology, Point};
    use approx::assert_relative_eq;

    fn cfg(n_f: f64, gamma: usize) -> NetworkConfig {
        NetworkConfig {
            n_f_mean: n_f,
            gamma,
            femtocell_count_mode: FemtocellCountMode::Fixed,
            ..NetworkConfig::default()
        }
    }

    #[test]
    fn gamma_equal_f_uses_identical_channels() {
        let c = cfg(12.0, 5);
        let topo = sample_topology(&c, &mut substream(1, &[]));
        let alloc = allocate_split(&c, &topo, &mut substream(2, &[])).unwrap();
        let mut first = alloc.per_cell_choice[0].clone();
        first.sort_unstable();
        assert_eq!(first, alloc.femto_channel_ids);
        for cell in &alloc.per_cell_choice {
            let mut s = cell.clone();
            s.sort_unstable();
            assert_eq!(s, first);
        }
        assert_eq!(alloc.macro_served_count, 20);
    }

    #[test]
    fn per_cell_channels_distinct_and_in_femto_set() {
        let c = cfg(30.0, 12);
        for rep in 0..50 {
            let topo = sample_topology(&c, &mut substream(3, &[rep]));
            let alloc = allocate_split(&c, &topo, &mut substream(4, &[rep])).unwrap();
            assert_eq!(alloc.femto_channel_ids.len(), 12);
            for chans in &alloc.per_cell_choice {
                assert_eq!(chans.len(), 5);
                let mut s = chans.clone();
                s.sort_unstable();
                s.dedup();
                assert_eq!(s.len(), 5);
                assert!(chans.iter().all(|ch| alloc.femto_channel_ids.contains(ch)));
            }
        }
    }

    #[test]
    fn shared_channel_probability_matches_uniform_subsets() {
        // Two cells with gamma = 25, F = 5: a given channel is used by both with probability
        // (F / gamma)^2 = 0.04.
        let c = cfg(2.0, 25);
        let topo = sample_topology(&c, &mut substream(5, &[]));
        let draws = 10_000;
        let mut rng = substream(6, &[]);
        let mut hits = 0usize;
        for _ in 0..draws {
            let a = allocate_split(&c, &topo, &mut rng).unwrap();
            if a.per_cell_choice[0].contains(&0) && a.per_cell_choice[1].contains(&0) {
                hits += 1;
            }
        }
        let p = 0.04;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        let got = hits as f64 / draws as f64;
        assert!((got - p).abs() < 3.0 * sigma, "empirical {got}");
    }

    #[test]
    fn gamma_below_f_rejected() {
        let mut c = cfg(3.0, 5);
        c.gamma = 4;
        let topo = sample_topology(&c, &mut substream(1, &[]));
        assert!(matches!(
            allocate_split(&c, &topo, &mut substream(1, &[])),
            Err(SchemeError::GammaBelowUsers { .. })
        ));
    }

    #[test]
    fn no_femtocells_gives_macro_baseline() {
        let mut c = cfg(0.0, 5);
        c.gamma = 0;
        c.n_femto_users_per_cell = 0;
        let topo = sample_topology(&c, &mut substream(1, &[]));
        let d = build_distance_table(&topo, &c);
        let alloc = allocate_split(&c, &topo, &mut substream(1, &[])).unwrap();
        assert!(alloc.per_cell_choice.is_empty());
        let m = evaluate_split(&c, &topo, &d, &alloc);
        assert_relative_eq!(m.rate_sum, 25.0 * 101f64.log2(), max_relative = 1e-12);
        assert_relative_eq!(m.rate_sum, 166.4552870687949, max_relative = 1e-9);
        assert_eq!(m.split_gain, 0.0);
    }

    #[test]
    fn zero_cells_with_femto_channels_reports_macro_count() {
        let c = cfg(0.0, 10);
        let topo = sample_topology(&c, &mut substream(1, &[]));
        let alloc = allocate_split(&c, &topo, &mut substream(1, &[])).unwrap();
        assert!(alloc.per_cell_choice.is_empty());
        assert_eq!(alloc.macro_served_count, 15);
    }

    #[test]
    fn single_cell_has_no_interference() {
        let c = cfg(1.0, 5);
        let topo = Topology {
            bs_position: Point::ORIGIN,
            fap_positions: vec![Point::new(100.0, 0.0)],
            femto_user_positions: vec![vec![
                Point::new(101.0, 0.0),
                Point::new(110.0, 0.0),
                Point::new(100.0, 29.0),
                Point::new(100.0, -5.0),
                Point::new(90.0, 10.0),
            ]],
            macro_user_positions: vec![Point::new(50.0, 50.0); 25],
        };
        let d = build_distance_table(&topo, &c);
        let alloc = allocate_split(&c, &topo, &mut substream(1, &[])).unwrap();
        let s = femto_sinrs(&c, &d, &alloc);
        let p = c.p_femto_const_mw();
        for (u, &x) in s[0].iter().enumerate() {
            let snr = p * d.own_fap(0, u).powf(-2.0) / c.noise_mw();
            assert_relative_eq!(x, snr, max_relative = 1e-12);
        }
        let m = evaluate_split(&c, &topo, &d, &alloc);
        // Every user sits inside the cell edge, so the constant power serves them all.
        assert_eq!(m.served_femto, 5);
    }

    #[test]
    fn all_channels_to_femto_means_no_macro_rate() {
        let c = cfg(10.0, 25);
        let topo = sample_topology(&c, &mut substream(8, &[]));
        let d = build_distance_table(&topo, &c);
        let alloc = allocate_split(&c, &topo, &mut substream(9, &[])).unwrap();
        let m = evaluate_split(&c, &topo, &d, &alloc);
        assert_eq!(m.rate_macro, 0.0);
        assert_eq!(m.rate_sum, m.rate_femto);
    }

    #[test]
    fn gain_definition() {
        let c = NetworkConfig::default();
        let base = c.macro_only_sum_rate();
        assert_eq!(split_gain(base, &c), 0.0);
        assert_relative_eq!(split_gain(2.0 * base, &c), 1.0, max_relative = 1e-12);
        assert_relative_eq!(split_gain(3.0 * base, &c), 2.0, max_relative = 1e-12);
    }
}
