//! Monte Carlo sweeps, aggregation and the figure datasets.
//!
//! Every replicate draws its topology from a stream keyed by `(seed, n_f, replicate)` only, so
//! all schemes, `gamma` and `epsilon` values at one grid point are compared on the same
//! topologies. Work units run in parallel; results are collected in grid order, so the output
//! does not depend on scheduling.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::NetworkConfig;
use crate::metrics::MetricsRecord;
use crate::rng::{grid_key, substream, tag};
use crate::shared::{evaluate_shared, Strategy};
use crate::split::{allocate_split, evaluate_split};
use crate::topology::{build_distance_table, sample_topology, Topology};
use crate::SchemeError;

/// z-value of a two-sided 95% normal interval.
const Z95: f64 = 1.959_963_984_540_054;

pub const GAMMA_AXIS: [usize; 5] = [5, 10, 15, 20, 25];
pub const EPSILON_AXIS: [f64; 6] = [0.0, 0.025, 0.05, 0.075, 0.1, 0.125];
pub const SINR_NF_AXIS: [f64; 9] = [1.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0];
pub const SHARED_NF_AXIS: [f64; 18] = [
    0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 12.0, 15.0, 20.0, 25.0, 30.0, 35.0,
    40.0,
];

pub fn split_nf_axis() -> Vec<f64> {
    (0..=40).map(f64::from).collect()
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("unknown figure `{0}` (expected fig2 to fig8)")]
    UnknownFigure(String),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Split,
    Pc,
    Sic,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Split => "split",
            Scheme::Pc => "pc",
            Scheme::Sic => "sic",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "split" => Ok(Scheme::Split),
            "pc" => Ok(Scheme::Pc),
            "sic" => Ok(Scheme::Sic),
            other => Err(format!("expected split, pc or sic, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: NetworkConfig,
    pub n_f: Vec<f64>,
    /// Used by the split scheme only.
    pub gamma: Vec<usize>,
    /// Used by the sic strategy only.
    pub epsilon: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub replicates: usize,
}

impl SweepSpec {
    /// One-point sweep over the base configuration's own `n_f`, `gamma` and `epsilon`.
    pub fn single(base: &NetworkConfig, schemes: Vec<Scheme>) -> Self {
        Self {
            n_f: vec![base.n_f_mean],
            gamma: vec![base.gamma],
            epsilon: vec![base.epsilon],
            schemes,
            replicates: base.replicates,
            base: base.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidSpec(m.to_string()));
        if self.n_f.is_empty() || self.schemes.is_empty() {
            return bad("empty n_f axis or scheme list");
        }
        if self.schemes.contains(&Scheme::Split) && self.gamma.is_empty() {
            return bad("split sweep without gamma values");
        }
        if self.schemes.contains(&Scheme::Sic) && self.epsilon.is_empty() {
            return bad("sic sweep without epsilon values");
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1");
        }
        for &n_f in &self.n_f {
            for &gamma in &self.gamma {
                for &epsilon in &self.epsilon {
                    let cfg = NetworkConfig {
                        n_f_mean: n_f,
                        gamma,
                        epsilon,
                        ..self.base.clone()
                    };
                    cfg.validate()
                        .map_err(|e| ExperimentError::InvalidSpec(e.to_string()))?;
                }
            }
        }
        Ok(())
    }

    /// Grid points in output order: by `n_f`, then scheme, then `gamma` or `epsilon`.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &n_f in &self.n_f {
            for &scheme in &self.schemes {
                match scheme {
                    Scheme::Split => out.extend(self.gamma.iter().map(|&gamma| GridPoint {
                        n_f,
                        scheme,
                        gamma: Some(gamma),
                        epsilon: None,
                    })),
                    Scheme::Pc => out.push(GridPoint {
                        n_f,
                        scheme,
                        gamma: None,
                        epsilon: None,
                    }),
                    Scheme::Sic => out.extend(self.epsilon.iter().map(|&epsilon| GridPoint {
                        n_f,
                        scheme,
                        gamma: None,
                        epsilon: Some(epsilon),
                    })),
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub n_f: f64,
    pub scheme: Scheme,
    pub gamma: Option<usize>,
    pub epsilon: Option<f64>,
}

impl GridPoint {
    pub fn config(&self, base: &NetworkConfig) -> NetworkConfig {
        NetworkConfig {
            n_f_mean: self.n_f,
            gamma: self.gamma.unwrap_or(base.gamma),
            epsilon: self.epsilon.unwrap_or(base.epsilon),
            ..base.clone()
        }
    }
}

/// Per-replicate records of one grid point, in replicate order.
#[derive(Debug, Clone)]
pub struct PointRecords {
    pub point: GridPoint,
    pub records: Vec<MetricsRecord>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub points: Vec<PointRecords>,
}

impl SweepResult {
    pub fn find(&self, pred: impl Fn(&GridPoint) -> bool) -> Option<&PointRecords> {
        self.points.iter().find(|p| pred(&p.point))
    }

    /// Fraction of all records whose power control hit the iteration limit.
    pub fn non_converged_fraction(&self) -> f64 {
        let (flagged, total) = self
            .points
            .iter()
            .flat_map(|p| &p.records)
            .fold((0, 0), |(f, t), r| (f + r.non_converged as usize, t + 1));
        if total == 0 {
            0.0
        } else {
            flagged as f64 / total as f64
        }
    }
}

/// Topology of one replicate at one `n_f` value.
pub fn replicate_topology(base: &NetworkConfig, n_f: f64, replicate: usize) -> Topology {
    let cfg = NetworkConfig {
        n_f_mean: n_f,
        ..base.clone()
    };
    let mut rng = substream(base.seed, &[tag::TOPOLOGY, grid_key(n_f), replicate as u64]);
    sample_topology(&cfg, &mut rng)
}

/// Evaluates one scheme on one topology.
pub fn evaluate_point(
    point: &GridPoint,
    base: &NetworkConfig,
    topology: &Topology,
    replicate: usize,
) -> Result<MetricsRecord, SchemeError> {
    let cfg = point.config(base);
    match point.scheme {
        Scheme::Split => {
            let mut rng = substream(
                base.seed,
                &[
                    tag::SPLIT_CHANNELS,
                    grid_key(point.n_f),
                    cfg.gamma as u64,
                    replicate as u64,
                ],
            );
            let alloc = allocate_split(&cfg, topology, &mut rng)?;
            let distances = build_distance_table(topology, &cfg);
            Ok(evaluate_split(&cfg, topology, &distances, &alloc))
        }
        Scheme::Pc => Ok(evaluate_shared(topology, &cfg, Strategy::Pc).metrics),
        Scheme::Sic => Ok(evaluate_shared(topology, &cfg, Strategy::Sic).metrics),
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, ExperimentError> {
    spec.validate()?;
    let points = spec.points();
    // One work unit per (n_f, replicate): the topology is drawn once and every scheme at that
    // n_f is evaluated on it.
    let units: Vec<(f64, usize)> = spec
        .n_f
        .iter()
        .flat_map(|&n_f| (0..spec.replicates).map(move |r| (n_f, r)))
        .collect();
    let evaluated: Vec<Vec<(usize, MetricsRecord)>> = units
        .par_iter()
        .map(|&(n_f, r)| {
            let topo = replicate_topology(&spec.base, n_f, r);
            points
                .iter()
                .enumerate()
                .filter(|(_, p)| p.n_f.to_bits() == n_f.to_bits())
                .map(|(i, p)| evaluate_point(p, &spec.base, &topo, r).map(|rec| (i, rec)))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let mut out: Vec<PointRecords> = points
        .iter()
        .map(|&point| PointRecords {
            point,
            records: Vec::with_capacity(spec.replicates),
        })
        .collect();
    for unit in evaluated {
        for (i, rec) in unit {
            out[i].records.push(rec);
        }
    }
    Ok(SweepResult {
        spec: spec.clone(),
        points: out,
    })
}

/// Mean, standard error and 95% normal-approximation half-width of the finite samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std_err: f64,
    pub ci95: f64,
    /// Number of finite samples.
    pub n: usize,
}

impl Summary {
    /// NaN samples are skipped. With fewer than two samples the spread is NaN.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let xs: Vec<f64> = values.into_iter().filter(|v| v.is_finite()).collect();
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_err: f64::NAN,
                ci95: f64::NAN,
                n,
            };
        }
        let mean = neumaier_sum(xs.iter().copied()) / n as f64;
        if n < 2 {
            return Self {
                mean,
                std_err: f64::NAN,
                ci95: f64::NAN,
                n,
            };
        }
        let var = neumaier_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64;
        let std_err = (var / n as f64).sqrt();
        Self {
            mean,
            std_err,
            ci95: Z95 * std_err,
            n,
        }
    }
}

/// Compensated summation, so long sweeps do not drift with the number of replicates.
fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Per-replicate power savings of sic over pc for one user class; NaN where undefined.
pub fn power_savings(sic: &MetricsRecord, pc: &MetricsRecord, class: UserClass) -> f64 {
    let (s, p) = match class {
        UserClass::Macro => (sic.mean_macro_power_mw, pc.mean_macro_power_mw),
        UserClass::Femto => (sic.mean_femto_power_mw, pc.mean_femto_power_mw),
    };
    if p > 0.0 {
        1.0 - s / p
    } else {
        f64::NAN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserClass {
    Macro,
    Femto,
}

impl UserClass {
    pub fn name(self) -> &'static str {
        match self {
            UserClass::Macro => "macro",
            UserClass::Femto => "femto",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

impl FigureId {
    pub const ALL: [FigureId; 7] = [
        FigureId::Fig2,
        FigureId::Fig3,
        FigureId::Fig4,
        FigureId::Fig5,
        FigureId::Fig6,
        FigureId::Fig7,
        FigureId::Fig8,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
            FigureId::Fig7 => "fig7",
            FigureId::Fig8 => "fig8",
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            FigureId::Fig2 => &["n_f", "gamma", "mean_femto_sinr_db", "ci95"],
            FigureId::Fig3 => &["n_f", "gamma", "split_gain", "ci95"],
            FigureId::Fig4 => &["n_f", "epsilon", "handover_fraction", "ci95"],
            FigureId::Fig5 => &["n_f", "epsilon", "served_macro_fraction", "ci95"],
            FigureId::Fig6 => &["n_f", "class", "savings_fraction", "ci95"],
            FigureId::Fig7 => &["n_f", "strategy", "served_femto_mean", "ci95"],
            FigureId::Fig8 => &["n_f", "strategy", "shared_gain", "ci95", "r_max"],
        }
    }

    /// The sweep behind this figure. Figures 4 and 5 share one, as do 6, 7 and 8.
    pub fn sweep(self, base: &NetworkConfig, replicates: usize) -> SweepSpec {
        let shared = |schemes, epsilon: Vec<f64>| SweepSpec {
            base: base.clone(),
            n_f: SHARED_NF_AXIS.to_vec(),
            gamma: vec![base.gamma],
            epsilon,
            schemes,
            replicates,
        };
        match self {
            FigureId::Fig2 | FigureId::Fig3 => SweepSpec {
                base: base.clone(),
                n_f: if self == FigureId::Fig2 {
                    SINR_NF_AXIS.to_vec()
                } else {
                    split_nf_axis()
                },
                gamma: GAMMA_AXIS.to_vec(),
                epsilon: vec![base.epsilon],
                schemes: vec![Scheme::Split],
                replicates,
            },
            FigureId::Fig4 | FigureId::Fig5 => shared(vec![Scheme::Sic], EPSILON_AXIS.to_vec()),
            FigureId::Fig6 | FigureId::Fig7 | FigureId::Fig8 => {
                shared(vec![Scheme::Pc, Scheme::Sic], vec![0.0])
            }
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureId {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| ExperimentError::UnknownFigure(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Num(f64),
    Text(&'static str),
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Num(v) => write!(f, "{v}"),
            Field::Text(s) => f.write_str(s),
        }
    }
}

/// A figure dataset: named columns and one row per grid point and series.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub figure: FigureId,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Field>>,
}

impl Table {
    fn index(&self, column: &str) -> usize {
        self.columns
            .iter()
            .position(|&c| c == column)
            .unwrap_or_else(|| panic!("{} has no column `{column}`", self.figure))
    }

    /// Numeric column; text fields read as NaN.
    pub fn column(&self, column: &str) -> Vec<f64> {
        let i = self.index(column);
        self.rows
            .iter()
            .map(|r| match r[i] {
                Field::Num(v) => v,
                Field::Text(_) => f64::NAN,
            })
            .collect()
    }

    /// Rows whose `column` equals `value` (compared as text).
    pub fn filter(&self, column: &str, value: &str) -> Table {
        let i = self.index(column);
        Table {
            figure: self.figure,
            columns: self.columns.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| r[i].to_string() == value)
                .cloned()
                .collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|f| f.to_string()))?;
        }
        w.flush().map_err(|source| ExperimentError::Io {
            path: "<csv>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Builds a figure table from a sweep produced by [`FigureId::sweep`].
pub fn figure_table(figure: FigureId, sweep: &SweepResult) -> Table {
    use Field::{Num, Text};
    let mut rows = Vec::new();
    let summary_row = |lead: Vec<Field>, s: Summary| {
        let mut row = lead;
        row.push(Num(s.mean));
        row.push(Num(s.ci95));
        row
    };
    match figure {
        FigureId::Fig2 | FigureId::Fig3 => {
            for p in &sweep.points {
                let gamma = p.point.gamma.unwrap_or_default() as f64;
                let s = Summary::of(p.records.iter().map(|r| {
                    if figure == FigureId::Fig2 {
                        r.mean_femto_sinr_db
                    } else {
                        r.split_gain
                    }
                }));
                rows.push(summary_row(vec![Num(p.point.n_f), Num(gamma)], s));
            }
        }
        FigureId::Fig4 | FigureId::Fig5 => {
            for p in &sweep.points {
                let eps = p.point.epsilon.unwrap_or_default();
                let s = Summary::of(p.records.iter().map(|r| {
                    if figure == FigureId::Fig4 {
                        r.handover_success_fraction()
                    } else {
                        r.served_macro_fraction()
                    }
                }));
                rows.push(summary_row(vec![Num(p.point.n_f), Num(eps)], s));
            }
        }
        FigureId::Fig6 => {
            for &n_f in &sweep.spec.n_f {
                let (Some(pc), Some(sic)) = (
                    sweep.find(|g| g.n_f == n_f && g.scheme == Scheme::Pc),
                    sweep.find(|g| g.n_f == n_f && g.scheme == Scheme::Sic),
                ) else {
                    continue;
                };
                for class in [UserClass::Macro, UserClass::Femto] {
                    let s = Summary::of(
                        sic.records
                            .iter()
                            .zip(&pc.records)
                            .map(|(s, p)| power_savings(s, p, class)),
                    );
                    rows.push(summary_row(vec![Num(n_f), Text(class.name())], s));
                }
            }
        }
        FigureId::Fig7 | FigureId::Fig8 => {
            for p in &sweep.points {
                let s = Summary::of(p.records.iter().map(|r| {
                    if figure == FigureId::Fig7 {
                        r.served_femto as f64
                    } else {
                        r.shared_gain
                    }
                }));
                let mut row = summary_row(vec![Num(p.point.n_f), Text(p.point.scheme.name())], s);
                if figure == FigureId::Fig8 {
                    let cfg = p.point.config(&sweep.spec.base);
                    let users = cfg.n_femto_users_per_cell as f64 * p.point.n_f;
                    row.push(Num(crate::shared::max_shared_gain(users, &cfg)));
                }
                rows.push(row);
            }
        }
    }
    Table {
        figure,
        columns: figure.columns().to_vec(),
        rows,
    }
}

/// Runs the sweep behind one figure and builds its table.
pub fn figure_dataset(
    figure: FigureId,
    base: &NetworkConfig,
    replicates: usize,
) -> Result<(Table, SweepResult), ExperimentError> {
    let sweep = run_sweep(&figure.sweep(base, replicates))?;
    Ok((figure_table(figure, &sweep), sweep))
}

/// All seven figures, running each distinct sweep once.
pub fn all_figures(
    base: &NetworkConfig,
    replicates: usize,
) -> Result<Vec<(Table, SweepResult)>, ExperimentError> {
    let mut cache: Vec<(FigureId, SweepResult)> = Vec::new();
    let mut out = Vec::new();
    for figure in FigureId::ALL {
        let owner = match figure {
            FigureId::Fig5 => FigureId::Fig4,
            FigureId::Fig7 | FigureId::Fig8 => FigureId::Fig6,
            other => other,
        };
        let sweep = match cache.iter().find(|(f, _)| *f == owner) {
            Some((_, s)) => s.clone(),
            None => {
                let s = run_sweep(&owner.sweep(base, replicates))?;
                cache.push((owner, s.clone()));
                s
            }
        };
        out.push((figure_table(figure, &sweep), sweep));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub figure: String,
    pub replicates: usize,
    pub seed: u64,
    pub mode: String,
    pub non_converged_fraction: f64,
    pub config: serde_json::Map<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(figure: &str, base: &NetworkConfig, replicates: usize, non_converged: f64) -> Self {
        let config = base
            .entries()
            .into_iter()
            .map(|(k, v)| (k.to_string(), serde_json::Value::String(v)))
            .collect();
        Self {
            figure: figure.to_string(),
            replicates,
            seed: base.seed,
            mode: base.femtocell_count_mode.to_string(),
            non_converged_fraction: non_converged,
            config,
        }
    }
}

/// Writes `<figure>.csv` and `<figure>.manifest.json` into `dir`; returns the CSV path.
pub fn write_figure(
    dir: &Path,
    table: &Table,
    manifest: &Manifest,
) -> Result<PathBuf, ExperimentError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| ExperimentError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let csv_path = dir.join(format!("{}.csv", table.figure));
    let file = std::fs::File::create(&csv_path).map_err(io(&csv_path))?;
    table.write_csv(file)?;
    let manifest_path = dir.join(format!("{}.manifest.json", table.figure));
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, json + "\n").map_err(io(&manifest_path))?;
    Ok(csv_path)
}
