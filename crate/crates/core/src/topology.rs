//! Random network realizations and their distance tables.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::config::{FemtocellCountMode, NetworkConfig};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Uniform point in the disk of `radius` around `center`.
pub fn uniform_in_disk<R: Rng + ?Sized>(rng: &mut R, center: Point, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    Point::new(center.x + r * theta.cos(), center.y + r * theta.sin())
}

/// One sampled network: the base station at the origin, femtocell access points, their users
/// and the macro users.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub bs_position: Point,
    pub fap_positions: Vec<Point>,
    /// `femto_user_positions[cell][user]`.
    pub femto_user_positions: Vec<Vec<Point>>,
    pub macro_user_positions: Vec<Point>,
}

impl Topology {
    #[inline]
    pub fn realized_femtocell_count(&self) -> usize {
        self.fap_positions.len()
    }

    pub fn femto_user_count(&self) -> usize {
        self.femto_user_positions.iter().map(Vec::len).sum()
    }

    /// Keeps only the first `n` femtocells. Used to build nested topologies.
    pub fn truncated(&self, n: usize) -> Topology {
        let n = n.min(self.realized_femtocell_count());
        Topology {
            bs_position: self.bs_position,
            fap_positions: self.fap_positions[..n].to_vec(),
            femto_user_positions: self.femto_user_positions[..n].to_vec(),
            macro_user_positions: self.macro_user_positions.clone(),
        }
    }
}

/// Draws the number of femtocells for one realization.
pub fn sample_femtocell_count<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> usize {
    match config.femtocell_count_mode {
        FemtocellCountMode::Fixed => config.n_f_mean.round() as usize,
        FemtocellCountMode::Poisson => {
            if config.n_f_mean <= 0.0 {
                0
            } else {
                let law = Poisson::new(config.n_f_mean).expect("positive finite Poisson mean");
                law.sample(rng) as usize
            }
        }
    }
}

/// Samples a topology: Poisson (or fixed) number of FAPs uniform on the macrocell, `F` users
/// uniform in each femtocell, `M` macro users uniform on the macrocell.
pub fn sample_topology<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> Topology {
    let bs = Point::ORIGIN;
    let n = sample_femtocell_count(config, rng);
    let fap_positions: Vec<Point> = (0..n)
        .map(|_| uniform_in_disk(rng, bs, config.r_macro_m))
        .collect();
    let femto_user_positions = fap_positions
        .iter()
        .map(|&fap| {
            (0..config.n_femto_users_per_cell)
                .map(|_| uniform_in_disk(rng, fap, config.r_femto_m))
                .collect()
        })
        .collect();
    let macro_user_positions = (0..config.n_macro_users)
        .map(|_| uniform_in_disk(rng, bs, config.r_macro_m))
        .collect();
    Topology {
        bs_position: bs,
        fap_positions,
        femto_user_positions,
        macro_user_positions,
    }
}

/// Pairwise distances used by the link models, all clamped below at `min_distance_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    /// Macro user to BS.
    pub d_mb: Vec<f64>,
    /// FAP to BS.
    pub d_ab: Vec<f64>,
    /// `d_fb[cell][user]`: femto user to BS.
    pub d_fb: Vec<Vec<f64>>,
    /// `d_ma[macro][cell]`: macro user to every FAP.
    pub d_ma: Vec<Vec<f64>>,
    /// `d_fa[cell][user][fap]`: femto user to every FAP.
    pub d_fa: Vec<Vec<Vec<f64>>>,
}

impl DistanceTable {
    /// Distance from a femto user to the FAP of its own cell.
    #[inline]
    pub fn own_fap(&self, cell: usize, user: usize) -> f64 {
        self.d_fa[cell][user][cell]
    }
}

pub fn build_distance_table(topology: &Topology, config: &NetworkConfig) -> DistanceTable {
    let clamp = |d: f64| d.max(config.min_distance_m);
    let bs = topology.bs_position;
    let faps = &topology.fap_positions;
    DistanceTable {
        d_mb: topology
            .macro_user_positions
            .iter()
            .map(|p| clamp(p.distance(&bs)))
            .collect(),
        d_ab: faps.iter().map(|p| clamp(p.distance(&bs))).collect(),
        d_fb: topology
            .femto_user_positions
            .iter()
            .map(|users| users.iter().map(|p| clamp(p.distance(&bs))).collect())
            .collect(),
        d_ma: topology
            .macro_user_positions
            .iter()
            .map(|m| faps.iter().map(|a| clamp(m.distance(a))).collect())
            .collect(),
        d_fa: topology
            .femto_user_positions
            .iter()
            .map(|users| {
                users
                    .iter()
                    .map(|u| faps.iter().map(|a| clamp(u.distance(a))).collect())
                    .collect()
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn table1() -> NetworkConfig {
        NetworkConfig::default()
    }

    #[test]
    fn empty_femtocell_tier() {
        let mut cfg = table1();
        cfg.n_f_mean = 0.0;
        cfg.femtocell_count_mode = FemtocellCountMode::Fixed;
        let topo = sample_topology(&cfg, &mut substream(1, &[]));
        assert_eq!(topo.realized_femtocell_count(), 0);
        assert_eq!(topo.macro_user_positions.len(), 25);
        let d = build_distance_table(&topo, &cfg);
        assert!(d.d_ab.is_empty());
        assert!(d.d_ma.iter().all(Vec::is_empty));
    }

    #[test]
    fn containment_invariants() {
        let mut cfg = table1();
        cfg.n_f_mean = 20.0;
        for rep in 0..200u64 {
            let topo = sample_topology(&cfg, &mut substream(9, &[rep]));
            for (fap, users) in topo.fap_positions.iter().zip(&topo.femto_user_positions) {
                assert!(fap.norm() <= cfg.r_macro_m);
                assert_eq!(users.len(), 5);
                for u in users {
                    assert!(u.distance(fap) <= cfg.r_femto_m);
                    // Triangle bound used by the femto power cap.
                    assert!(u.norm() >= fap.norm() - cfg.r_femto_m);
                }
            }
            assert_eq!(topo.macro_user_positions.len(), 25);
            assert!(topo
                .macro_user_positions
                .iter()
                .all(|p| p.norm() <= cfg.r_macro_m));
        }
    }

    #[test]
    fn poisson_count_mean() {
        let mut cfg = table1();
        cfg.n_f_mean = 20.0;
        let mut rng = substream(11, &[]);
        let n = 10_000;
        let total: usize = (0..n).map(|_| sample_femtocell_count(&cfg, &mut rng)).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 20.0).abs() < 0.5, "mean {mean}");
    }

    #[test]
    fn fixed_count_rounds() {
        let mut cfg = table1();
        cfg.femtocell_count_mode = FemtocellCountMode::Fixed;
        cfg.n_f_mean = 7.6;
        assert_eq!(sample_femtocell_count(&cfg, &mut substream(1, &[])), 8);
    }

    #[test]
    fn fap_positions_uniform_on_disk() {
        let cfg = table1();
        let mut rng = substream(12, &[]);
        let n = 20_000;
        let mean_sq: f64 = (0..n)
            .map(|_| {
                uniform_in_disk(&mut rng, Point::ORIGIN, cfg.r_macro_m)
                    .norm()
                    .powi(2)
            })
            .sum::<f64>()
            / n as f64;
        let expected = cfg.r_macro_m.powi(2) / 2.0;
        assert!(
            (mean_sq / expected - 1.0).abs() < 0.02,
            "{mean_sq} vs {expected}"
        );
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = table1();
        let a = sample_topology(&cfg, &mut substream(5, &[3]));
        let b = sample_topology(&cfg, &mut substream(5, &[3]));
        assert_eq!(a, b);
        let c = sample_topology(&cfg, &mut substream(5, &[4]));
        assert_ne!(a, c);
    }

    fn one_cell(fap: Point, users: Vec<Point>, macros: Vec<Point>) -> Topology {
        Topology {
            bs_position: Point::ORIGIN,
            fap_positions: vec![fap],
            femto_user_positions: vec![users],
            macro_user_positions: macros,
        }
    }

    #[test]
    fn distance_examples() {
        let cfg = table1();
        let topo = one_cell(
            Point::new(200.0, 0.0),
            vec![Point::new(200.0, 0.0)],
            vec![Point::new(3.0, 4.0)],
        );
        let d = build_distance_table(&topo, &cfg);
        assert_eq!(d.d_mb[0], 5.0);
        // Colocated with its FAP: clamp engages.
        assert_eq!(d.own_fap(0, 0), 1.0);
    }

    #[test]
    fn femto_to_bs_within_fap_distance_band() {
        let cfg = table1();
        let fap = Point::new(200.0, 0.0);
        let mut rng = substream(13, &[]);
        for _ in 0..1000 {
            let u = uniform_in_disk(&mut rng, fap, cfg.r_femto_m);
            let d = build_distance_table(&one_cell(fap, vec![u], vec![]), &cfg);
            assert!((170.0..=230.0).contains(&d.d_fb[0][0]));
        }
    }

    #[test]
    fn table_entries_clamped_and_symmetric() {
        let mut cfg = table1();
        cfg.n_f_mean = 15.0;
        let topo = sample_topology(&cfg, &mut substream(14, &[]));
        let d = build_distance_table(&topo, &cfg);
        let all = d
            .d_mb
            .iter()
            .chain(&d.d_ab)
            .chain(d.d_fb.iter().flatten())
            .chain(d.d_ma.iter().flatten())
            .chain(d.d_fa.iter().flatten().flatten());
        for &x in all {
            assert!(x >= cfg.min_distance_m);
        }
        for (cell, users) in topo.femto_user_positions.iter().enumerate() {
            for (u, p) in users.iter().enumerate() {
                assert!(p.distance(&topo.fap_positions[cell]) <= cfg.r_femto_m);
                assert!(d.own_fap(cell, u) >= cfg.min_distance_m);
            }
        }
    }
}
