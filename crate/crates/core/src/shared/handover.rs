use crate::config::NetworkConfig;
use crate::topology::DistanceTable;

use super::{handover_decision, required_fap_power, Attachment, SicPair};

#[derive(Debug, Clone, PartialEq)]
pub struct HandoverPhase {
    pub attachment: Vec<Attachment>,
    pub pairs: Vec<SicPair>,
    /// Power each admitted macro user needs at its FAP; NaN for users left on the BS.
    pub required_power_mw: Vec<f64>,
    /// Macro users for which at least one FAP satisfied the decision rule.
    pub rule_satisfied: usize,
}

/// Decides which macro users move to a FAP and pairs each of them with a femto user.
///
/// `interference_at_fap_mw[m][a]` is the co-channel interference FAP `a` sees on macro user
/// `m`'s channel. Each macro user asks the rule-satisfying FAP that needs the least power. A FAP
/// admits at most `F` macro users, in ascending order of required power (ties by user id), and
/// pairs each with its unpaired femto user closest to the FAP.
pub fn run_handover_phase(
    config: &NetworkConfig,
    distances: &DistanceTable,
    interference_at_fap_mw: &[Vec<f64>],
) -> HandoverPhase {
    let m_count = distances.d_mb.len();
    let n_cells = distances.d_ab.len();

    let mut requests: Vec<(f64, usize, usize)> = Vec::new();
    for (m, interference) in interference_at_fap_mw.iter().enumerate() {
        let best = (0..n_cells)
            .filter(|&a| handover_decision(m, a, distances, interference[a], config))
            .map(|a| {
                (
                    required_fap_power(m, a, distances, interference[a], config),
                    a,
                )
            })
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        if let Some((p, a)) = best {
            requests.push((p, m, a));
        }
    }
    let rule_satisfied = requests.len();
    requests.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

    let mut attachment = vec![Attachment::Bs; m_count];
    let mut required_power_mw = vec![f64::NAN; m_count];
    let mut pairs = Vec::new();
    let mut taken: Vec<Vec<bool>> = distances
        .d_fa
        .iter()
        .map(|users| vec![false; users.len()])
        .collect();
    for (p, m, a) in requests {
        let partner = (0..taken[a].len())
            .filter(|&u| !taken[a][u])
            .min_by(|&u, &v| {
                distances
                    .own_fap(a, u)
                    .total_cmp(&distances.own_fap(a, v))
                    .then(u.cmp(&v))
            });
        // Every admission consumes one of the cell's F femto users, which caps admissions at F.
        let Some(u) = partner else { continue };
        taken[a][u] = true;
        attachment[m] = Attachment::Fap(a);
        required_power_mw[m] = p;
        pairs.push(SicPair::new(a, m, u));
    }
    HandoverPhase {
        attachment,
        pairs,
        required_power_mw,
        rule_satisfied,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::FemtocellCountMode;
    use crate::rng::substream;
    use crate::topology::{build_distance_table, sample_topology, Point, Topology};

    #[test]
    fn no_femtocells_no_handovers() {
        let cfg = NetworkConfig {
            n_f_mean: 0.0,
            femtocell_count_mode: FemtocellCountMode::Fixed,
            ..NetworkConfig::default()
        };
        let topo = sample_topology(&cfg, &mut substream(1, &[]));
        let d = build_distance_table(&topo, &cfg);
        let out = run_handover_phase(&cfg, &d, &vec![vec![]; 25]);
        assert!(out.pairs.is_empty());
        assert!(out.attachment.iter().all(|a| *a == Attachment::Bs));
    }

    fn cell_with_macro(macro_pos: Point) -> Topology {
        let fap = Point::new(380.0, 0.0);
        Topology {
            bs_position: Point::ORIGIN,
            fap_positions: vec![fap],
            femto_user_positions: vec![vec![
                Point::new(385.0, 0.0),
                Point::new(380.0, 2.0),
                Point::new(360.0, 0.0),
                Point::new(380.0, -20.0),
                Point::new(395.0, 10.0),
            ]],
            macro_user_positions: vec![macro_pos],
        }
    }

    #[test]
    fn nearby_macro_user_hands_over_to_quiet_fap() {
        let cfg = NetworkConfig {
            n_channels: 1,
            n_macro_users: 1,
            n_femto_users_per_cell: 5,
            gamma: 5,
            ..NetworkConfig::default()
        };
        // d_mb = 380, d_ma = 10.
        let topo = cell_with_macro(Point::new(370.0, 0.0));
        let d = build_distance_table(&topo, &cfg);
        let out = run_handover_phase(&cfg, &d, &[vec![0.0]]);
        assert_eq!(out.attachment, vec![Attachment::Fap(0)]);
        // Partner is the femto user closest to the FAP (2 m away).
        assert_eq!(out.pairs.len(), 1);
        assert_eq!(out.pairs[0].femto_user_id, 1);
        assert_eq!(out.pairs[0].channel_id, 0);
    }

    #[test]
    fn admissions_capped_per_cell_in_power_order() {
        let cfg = NetworkConfig {
            n_femto_users_per_cell: 2,
            ..NetworkConfig::default()
        };
        let fap = Point::new(300.0, 0.0);
        let macros: Vec<Point> = (0..25)
            .map(|i| Point::new(300.0 - 2.0 * (i as f64 + 1.0), 0.0))
            .collect();
        let topo = Topology {
            bs_position: Point::ORIGIN,
            fap_positions: vec![fap],
            femto_user_positions: vec![vec![Point::new(301.0, 0.0), Point::new(305.0, 0.0)]],
            macro_user_positions: macros,
        };
        let d = build_distance_table(&topo, &cfg);
        let out = run_handover_phase(&cfg, &d, &vec![vec![0.0]; 25]);
        assert_eq!(out.pairs.len(), 2);
        // The two macro users nearest the FAP need the least power.
        assert_eq!(out.pairs[0].macro_user_id, 0);
        assert_eq!(out.pairs[1].macro_user_id, 1);
        assert_eq!(out.pairs[0].femto_user_id, 0);
        assert_eq!(out.pairs[1].femto_user_id, 1);
        assert!(out.rule_satisfied >= 2);
    }
}
