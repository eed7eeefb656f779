//! The full shared-spectrum pipeline for one topology.

use serde::Serialize;

use crate::config::NetworkConfig;
use crate::metrics::{mean_or_nan, MetricsRecord};
use crate::radio::{linear_to_db, path_gain};
use crate::topology::{build_distance_table, DistanceTable, Topology};

use super::assignment::{assign_channels_shared, sense_channel_interference};
use super::handover::run_handover_phase;
use super::power_control::{femto_power_control, PowerControlOutcome};
use super::sic::sic_evaluate;
use super::{
    femto_power_cap, macro_min_power, max_shared_gain, meets_threshold, Attachment,
    ChannelAllocation, PowerAllocation, SicPair,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Power control and channel assignment only.
    Pc,
    /// Power control, channel assignment, handover and SIC pairing.
    Sic,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Pc => "pc",
            Strategy::Sic => "sic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SharedOutcome {
    pub strategy: Strategy,
    pub metrics: MetricsRecord,
    pub powers: PowerAllocation,
    pub allocation: ChannelAllocation,
    /// Final SINR of every femto user at its FAP (first SIC stage for paired users).
    pub femto_sinr: Vec<Vec<f64>>,
    /// Final SINR of every macro user at its receiver; after cancellation for FAP-attached users.
    pub macro_sinr: Vec<f64>,
    /// Aggregate femto interference at the BS on every channel.
    pub bs_femto_interference_mw: Vec<f64>,
    /// Power each macro user would need at the BS.
    pub macro_bs_power_mw: Vec<f64>,
    /// Macro users that found a FAP satisfying the decision rule.
    pub handover_rule_satisfied: usize,
}

/// Runs the shared scheme on one topology. The pipeline is deterministic, so no random stream is
/// needed.
///
/// A macro user admitted to a FAP is power controlled like a femto user, clipped to the cell cap
/// and to its BS power. It targets `kappa_m * beta_m`, the same headroom it had at the BS, so a
/// cancellation loss up to `1 - 1 / kappa_m` still leaves it at `beta_m`. Nothing before the
/// final decoding step depends on `epsilon`.
pub fn evaluate_shared(
    topology: &Topology,
    config: &NetworkConfig,
    strategy: Strategy,
) -> SharedOutcome {
    let distances = build_distance_table(topology, config);
    let d = &distances;
    let m_count = config.n_macro_users;
    let n_cells = topology.realized_femtocell_count();

    let macro_bs: Vec<f64> = d.d_mb.iter().map(|&x| macro_min_power(x, config)).collect();
    let caps: Vec<f64> = d.d_ab.iter().map(|&x| femto_power_cap(x, config)).collect();

    let macro_target = config.kappa_m * config.beta_m();
    let macro_cap = |m: usize, a: usize| macro_bs[m].min(caps[a]);
    let mut attachment = vec![Attachment::Bs; m_count];
    let mut macro_tx = macro_bs.clone();
    let mut pairs: Vec<SicPair> = Vec::new();
    let mut rule_satisfied = 0;

    if strategy == Strategy::Sic && n_cells > 0 {
        // Provisional picture: every femto user on its PC-scheme channel at its cap.
        let provisional = assign_all(config, d, &attachment, &macro_tx, &[], &caps);
        let interference = femto_interference_at_faps(config, d, &provisional, &caps);
        let phase = run_handover_phase(config, d, &interference);
        rule_satisfied = phase.rule_satisfied;
        let structural = NetworkConfig {
            epsilon: 0.0,
            ..config.clone()
        };
        for pair in phase.pairs {
            let (m, a) = (pair.macro_user_id, pair.cell_id);
            let ext = interference[m][a];
            let p_m = (config.kappa_m * phase.required_power_mw[m]).min(macro_cap(m, a));
            let checked = sic_evaluate(&pair, p_m, caps[a], d, ext, &structural);
            if checked.feasible_without_residual(config) {
                attachment[m] = Attachment::Fap(a);
                macro_tx[m] = p_m;
                pairs.push(pair);
            }
        }
    }

    // Assign and power control; pairs that cannot work even with perfect cancellation are
    // dissolved and the femto tier is re-planned without them.
    let macro_caps: Vec<f64> = (0..m_count)
        .map(|m| match attachment[m] {
            Attachment::Fap(a) => macro_cap(m, a),
            Attachment::Bs => macro_bs[m],
        })
        .collect();
    let (allocation, pc, evaluated_pairs) = loop {
        let femto_channel = assign_all(config, d, &attachment, &macro_tx, &pairs, &caps);
        let allocation = ChannelAllocation {
            femto_channel,
            pairs: pairs.clone(),
        };
        let pc = femto_power_control(
            config,
            d,
            &allocation,
            &attachment,
            &macro_tx,
            &macro_caps,
            &caps,
            macro_target,
        );
        let evaluated: Vec<SicPair> = pairs
            .iter()
            .map(|p| {
                sic_evaluate(
                    p,
                    pc.powers.macro_tx_mw[p.macro_user_id],
                    pc.powers.femto_tx_mw[p.cell_id][p.femto_user_id],
                    d,
                    pc.macro_fap_interference_mw[p.macro_user_id],
                    config,
                )
            })
            .collect();
        let broken: Vec<usize> = evaluated
            .iter()
            .filter(|p| !p.feasible_without_residual(config))
            .map(|p| p.macro_user_id)
            .collect();
        if broken.is_empty() {
            break (allocation, pc, evaluated);
        }
        for &m in &broken {
            attachment[m] = Attachment::Bs;
            macro_tx[m] = macro_bs[m];
        }
        pairs.retain(|p| !broken.contains(&p.macro_user_id));
    };

    let allocation = ChannelAllocation {
        pairs: evaluated_pairs,
        ..allocation
    };
    finish(
        config,
        topology,
        d,
        strategy,
        allocation,
        pc,
        macro_bs,
        rule_satisfied,
    )
}

/// Channel assignment for every cell in index order. Each FAP senses the macro users, every pair
/// partner and the femto users of cells that already assigned, all femto users at their caps.
fn assign_all(
    config: &NetworkConfig,
    d: &DistanceTable,
    attachment: &[Attachment],
    macro_tx: &[f64],
    pairs: &[SicPair],
    caps: &[f64],
) -> Vec<Vec<usize>> {
    let mut known: Vec<(usize, usize, usize, f64)> = pairs
        .iter()
        .map(|p| (p.cell_id, p.femto_user_id, p.channel_id, caps[p.cell_id]))
        .collect();
    let mut femto_channel = Vec::with_capacity(d.d_ab.len());
    for (cell, &cap) in caps.iter().enumerate() {
        let users = d.d_fa[cell].len();
        let mut channel = vec![usize::MAX; users];
        let mine: Vec<&SicPair> = pairs.iter().filter(|p| p.cell_id == cell).collect();
        for p in &mine {
            channel[p.femto_user_id] = p.channel_id;
        }
        let pair_channels: Vec<usize> = mine.iter().map(|p| p.channel_id).collect();
        let measured = sense_channel_interference(cell, config, d, macro_tx, attachment, &known);
        // The weakest links (farthest from the FAP) get the quietest channels.
        let mut unpaired: Vec<usize> = (0..users).filter(|&u| channel[u] == usize::MAX).collect();
        unpaired.sort_by(|&u, &v| {
            d.own_fap(cell, v)
                .total_cmp(&d.own_fap(cell, u))
                .then(u.cmp(&v))
        });
        let chosen = assign_channels_shared(&pair_channels, &measured, unpaired.len());
        for (&u, &ch) in unpaired.iter().zip(&chosen) {
            channel[u] = ch;
            known.push((cell, u, ch, cap));
        }
        femto_channel.push(channel);
    }
    femto_channel
}

/// `[m][a]`: interference at FAP `a` on macro user `m`'s channel from other cells' femto users
/// at their caps.
fn femto_interference_at_faps(
    config: &NetworkConfig,
    d: &DistanceTable,
    femto_channel: &[Vec<usize>],
    caps: &[f64],
) -> Vec<Vec<f64>> {
    let n_cells = femto_channel.len();
    let mut out = vec![vec![0.0; n_cells]; config.n_macro_users];
    for (b, chans) in femto_channel.iter().enumerate() {
        for (u, &ch) in chans.iter().enumerate() {
            for (a, slot) in out[ch].iter_mut().enumerate() {
                if a != b {
                    *slot +=
                        caps[b] * path_gain(d.d_fa[b][u][a], config.phi, config.min_distance_m);
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn finish(
    config: &NetworkConfig,
    topology: &Topology,
    d: &DistanceTable,
    strategy: Strategy,
    allocation: ChannelAllocation,
    pc: PowerControlOutcome,
    macro_bs: Vec<f64>,
    rule_satisfied: usize,
) -> SharedOutcome {
    let clamp = config.min_distance_m;
    let noise = config.noise_mw();
    let beta_m = config.beta_m();
    let beta_f = config.beta_f();
    let powers = pc.powers;

    let mut bs_interference = vec![0.0; config.n_channels];
    for (cell, chans) in allocation.femto_channel.iter().enumerate() {
        for (user, &ch) in chans.iter().enumerate() {
            bs_interference[ch] +=
                powers.femto_tx_mw[cell][user] * path_gain(d.d_fb[cell][user], config.phi, clamp);
        }
    }

    let mut macro_sinr = vec![f64::NAN; config.n_macro_users];
    let mut served_macro = 0;
    for m in 0..config.n_macro_users {
        let ok = match powers.attachment[m] {
            Attachment::Bs => {
                let s = powers.macro_tx_mw[m] * path_gain(d.d_mb[m], config.phi, clamp)
                    / (bs_interference[m] + noise);
                macro_sinr[m] = s;
                meets_threshold(s, beta_m)
            }
            Attachment::Fap(_) => {
                let pair = allocation
                    .pairs
                    .iter()
                    .find(|p| p.macro_user_id == m)
                    .expect("paired");
                let base = pc.macro_fap_interference_mw[m] + noise;
                macro_sinr[m] = pair.macro_sinr_after_cancellation(base);
                pair.mu_decoded
            }
        };
        served_macro += ok as usize;
    }

    let mut served_femto = 0;
    for (cell, sinrs) in pc.femto_sinr.iter().enumerate() {
        for (user, &s) in sinrs.iter().enumerate() {
            let ok = match allocation.pair_of_femto(cell, user) {
                Some(p) => p.fu_decoded,
                None => meets_threshold(s, beta_f),
            };
            served_femto += ok as usize;
        }
    }

    let femto_users = topology.femto_user_count();
    let handovers = allocation.pairs.len();
    let handover_successes = allocation.pairs.iter().filter(|p| p.mu_decoded).count();
    let rate_femto = served_femto as f64 * config.femto_link_rate();
    let rate_macro = served_macro as f64 * config.macro_link_rate();
    let metrics = MetricsRecord {
        realized_femtocells: topology.realized_femtocell_count(),
        femto_users,
        macro_users: config.n_macro_users,
        mean_femto_sinr_db: mean_or_nan(pc.femto_sinr.iter().flatten().map(|&s| linear_to_db(s))),
        rate_macro,
        rate_femto,
        rate_sum: rate_macro + rate_femto,
        split_gain: f64::NAN,
        shared_gain: rate_femto / config.macro_only_sum_rate(),
        r_max: max_shared_gain(
            config.n_femto_users_per_cell as f64 * config.n_f_mean,
            config,
        ),
        r_max_realized: max_shared_gain(femto_users as f64, config),
        handovers,
        handover_successes,
        served_femto,
        served_macro,
        mean_macro_power_mw: mean_or_nan(powers.macro_tx_mw.iter().copied()),
        mean_femto_power_mw: mean_or_nan(powers.femto_tx_mw.iter().flatten().copied()),
        power_control_rounds: pc.rounds,
        non_converged: !pc.converged,
    };

    SharedOutcome {
        strategy,
        metrics,
        femto_sinr: pc.femto_sinr,
        macro_sinr,
        bs_femto_interference_mw: bs_interference,
        macro_bs_power_mw: macro_bs,
        handover_rule_satisfied: rule_satisfied,
        powers,
        allocation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::FemtocellCountMode;
    use crate::rng::substream;
    use crate::topology::sample_topology;

    fn fixed(n_f: f64) -> NetworkConfig {
        NetworkConfig {
            n_f_mean: n_f,
            femtocell_count_mode: FemtocellCountMode::Fixed,
            ..NetworkConfig::default()
        }
    }

    #[test]
    fn no_femtocells_leaves_macro_tier_untouched() {
        let cfg = fixed(0.0);
        let topo = sample_topology(&cfg, &mut substream(3, &[]));
        for strategy in [Strategy::Pc, Strategy::Sic] {
            let out = evaluate_shared(&topo, &cfg, strategy);
            assert_eq!(out.metrics.rate_femto, 0.0);
            assert_eq!(out.metrics.shared_gain, 0.0);
            assert_eq!(out.metrics.handovers, 0);
            assert_eq!(out.metrics.served_macro, 25);
            assert!(out.powers.attachment.iter().all(|a| *a == Attachment::Bs));
            assert_eq!(out.powers.macro_tx_mw, out.macro_bs_power_mw);
        }
    }

    #[test]
    fn pc_strategy_never_pairs() {
        let cfg = fixed(10.0);
        let topo = sample_topology(&cfg, &mut substream(4, &[]));
        let out = evaluate_shared(&topo, &cfg, Strategy::Pc);
        assert!(out.allocation.pairs.is_empty());
        assert_eq!(out.handover_rule_satisfied, 0);
    }

    #[test]
    fn every_cell_uses_distinct_channels() {
        let cfg = fixed(20.0);
        for r in 0..20 {
            let topo = sample_topology(&cfg, &mut substream(5, &[r]));
            let out = evaluate_shared(&topo, &cfg, Strategy::Sic);
            for (cell, chans) in out.allocation.femto_channel.iter().enumerate() {
                let mut sorted = chans.clone();
                sorted.sort_unstable();
                sorted.dedup();
                assert_eq!(sorted.len(), chans.len(), "cell {cell} reuses a channel");
            }
            for p in &out.allocation.pairs {
                assert_eq!(
                    out.allocation.femto_channel[p.cell_id][p.femto_user_id],
                    p.macro_user_id
                );
            }
        }
    }

    #[test]
    fn fap_attached_macros_stay_within_both_caps() {
        let cfg = fixed(10.0);
        let mut paired = 0;
        for r in 0..30 {
            let topo = sample_topology(&cfg, &mut substream(6, &[r]));
            let out = evaluate_shared(&topo, &cfg, Strategy::Sic);
            for (m, att) in out.powers.attachment.iter().enumerate() {
                if let Attachment::Fap(a) = *att {
                    paired += 1;
                    assert!(out.powers.macro_tx_mw[m] <= out.macro_bs_power_mw[m]);
                    assert!(out.powers.macro_tx_mw[m] <= out.powers.femto_cap_mw[a]);
                }
            }
        }
        assert!(paired > 0);
    }

    #[test]
    fn perfect_cancellation_serves_every_macro_user() {
        let cfg = fixed(8.0);
        for r in 0..30 {
            let topo = sample_topology(&cfg, &mut substream(7, &[r]));
            let out = evaluate_shared(&topo, &cfg, Strategy::Sic);
            assert_eq!(out.metrics.served_macro, 25);
            assert_eq!(out.metrics.handovers, out.metrics.handover_successes);
        }
    }

    #[test]
    fn epsilon_only_changes_macro_decoding() {
        for r in 0..20 {
            let topo = sample_topology(&fixed(15.0), &mut substream(8, &[r]));
            let perfect = evaluate_shared(&topo, &fixed(15.0), Strategy::Sic);
            let mut prev = perfect.metrics.handover_successes;
            for eps in [0.05, 0.125, 0.3] {
                let cfg = NetworkConfig {
                    epsilon: eps,
                    ..fixed(15.0)
                };
                let out = evaluate_shared(&topo, &cfg, Strategy::Sic);
                assert_eq!(out.powers, perfect.powers);
                assert_eq!(out.metrics.handovers, perfect.metrics.handovers);
                assert_eq!(out.metrics.served_femto, perfect.metrics.served_femto);
                assert!(out.metrics.handover_successes <= prev);
                prev = out.metrics.handover_successes;
            }
        }
    }
}
