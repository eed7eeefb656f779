use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use femtocell_sim::experiment::{
    all_figures, evaluate_point, figure_dataset, replicate_topology, run_sweep, write_figure,
    ExperimentError, FigureId, Manifest, Scheme, Summary, SweepResult, SweepSpec,
};
use femtocell_sim::{ConfigError, FemtocellCountMode, MetricsRecord, NetworkConfig};

/// Non-convergence above this fraction of replicates makes the run exit with status 2.
const MAX_NON_CONVERGED: f64 = 0.10;

#[derive(Parser)]
#[command(
    name = "femtosim",
    version,
    about = "Uplink macrocell + femtocell Monte Carlo simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one replicate and print its metrics as JSON lines.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Scheme to run; all three when omitted.
        #[arg(long)]
        strategy: Option<Scheme>,
    },
    /// Sweep the configured point (or the given axes) and write sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        strategy: Option<Scheme>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated mean femtocell counts.
        #[arg(long = "n-f", value_delimiter = ',')]
        n_f: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        gamma: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        epsilon: Vec<f64>,
    },
    /// Write figN.csv and figN.manifest.json (`all` for every figure).
    Figure {
        figure: String,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check a configuration and print it in canonical form.
    ValidateConfig {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, conflicts_with = "defaults")]
    config: Option<PathBuf>,
    /// Start from the built-in defaults instead of a file.
    #[arg(long)]
    defaults: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mode: Option<FemtocellCountMode>,
    /// `key=value` override applied after the file (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn resolve(&self, replicates: Option<usize>) -> Result<NetworkConfig, ConfigError> {
        let mut overrides = self.set.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        if let Some(mode) = self.mode {
            overrides.push(format!("femtocell_count_mode={mode}"));
        }
        if let Some(r) = replicates {
            overrides.push(format!("replicates={r}"));
        }
        match (&self.config, self.defaults) {
            (Some(path), _) => NetworkConfig::from_file(path, &overrides),
            (None, true) => NetworkConfig::parse("", &overrides),
            (None, false) => Err(ConfigError::Invalid(
                "pass --config <file> or --defaults".into(),
            )),
        }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidSpec(_) | ExperimentError::UnknownFigure(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(non_converged) if non_converged > MAX_NON_CONVERGED => {
            eprintln!(
                "warning: power control did not converge in {:.1}% of replicates",
                100.0 * non_converged
            );
            ExitCode::from(2)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Returns the fraction of non-converged replicates.
fn run(cli: Cli) -> Result<f64, Failure> {
    match cli.command {
        Command::Simulate { common, strategy } => {
            let cfg = common.resolve(None)?;
            let spec = SweepSpec {
                replicates: 1,
                ..SweepSpec::single(&cfg, schemes(strategy))
            };
            spec.validate()?;
            let topo = replicate_topology(&cfg, cfg.n_f_mean, 0);
            let mut flagged = 0;
            let points = spec.points();
            for point in &points {
                let rec = evaluate_point(point, &cfg, &topo, 0).map_err(ExperimentError::from)?;
                flagged += rec.non_converged as usize;
                println!("{}", summary_json(point.scheme, &rec));
            }
            Ok(flagged as f64 / points.len() as f64)
        }
        Command::Sweep {
            common,
            strategy,
            replicates,
            out,
            n_f,
            gamma,
            epsilon,
        } => {
            let cfg = common.resolve(replicates)?;
            let mut spec = SweepSpec::single(&cfg, schemes(strategy));
            if !n_f.is_empty() {
                spec.n_f = n_f;
            }
            if !gamma.is_empty() {
                spec.gamma = gamma;
            }
            if !epsilon.is_empty() {
                spec.epsilon = epsilon;
            }
            let result = run_sweep(&spec)?;
            let path = write_sweep(&out, &result)?;
            eprintln!("wrote {}", path.display());
            Ok(result.non_converged_fraction())
        }
        Command::Figure {
            figure,
            common,
            replicates,
            out,
        } => {
            let cfg = common.resolve(replicates)?;
            let datasets = if figure == "all" {
                all_figures(&cfg, cfg.replicates)?
            } else {
                let id: FigureId = figure.parse()?;
                vec![figure_dataset(id, &cfg, cfg.replicates)?]
            };
            let mut worst = 0.0f64;
            for (table, sweep) in &datasets {
                let nc = sweep.non_converged_fraction();
                worst = worst.max(nc);
                let manifest = Manifest::new(table.figure.name(), &cfg, cfg.replicates, nc);
                let path = write_figure(&out, table, &manifest)?;
                eprintln!("wrote {}", path.display());
            }
            Ok(worst)
        }
        Command::ValidateConfig { common } => {
            let cfg = common.resolve(None)?;
            print!("{}", cfg.to_config_text());
            Ok(0.0)
        }
    }
}

fn schemes(strategy: Option<Scheme>) -> Vec<Scheme> {
    match strategy {
        Some(s) => vec![s],
        None => vec![Scheme::Split, Scheme::Pc, Scheme::Sic],
    }
}

fn summary_json(scheme: Scheme, rec: &MetricsRecord) -> String {
    let mut value = serde_json::to_value(rec).expect("record serializes");
    value["scheme"] = serde_json::Value::from(scheme.name());
    // JSON has no NaN; serde_json writes null for it.
    value.to_string()
}

const SWEEP_METRICS: [&str; 10] = [
    "mean_femto_sinr_db",
    "split_gain",
    "shared_gain",
    "handover_fraction",
    "handover_success_fraction",
    "served_macro_fraction",
    "served_femto",
    "rate_sum",
    "mean_macro_power_mw",
    "mean_femto_power_mw",
];

fn metric(rec: &MetricsRecord, name: &str) -> f64 {
    match name {
        "mean_femto_sinr_db" => rec.mean_femto_sinr_db,
        "split_gain" => rec.split_gain,
        "shared_gain" => rec.shared_gain,
        "handover_fraction" => rec.handover_fraction(),
        "handover_success_fraction" => rec.handover_success_fraction(),
        "served_macro_fraction" => rec.served_macro_fraction(),
        "served_femto" => rec.served_femto as f64,
        "rate_sum" => rec.rate_sum,
        "mean_macro_power_mw" => rec.mean_macro_power_mw,
        "mean_femto_power_mw" => rec.mean_femto_power_mw,
        _ => unreachable!("unknown metric {name}"),
    }
}

fn write_sweep(dir: &Path, result: &SweepResult) -> Result<PathBuf, Failure> {
    let runtime = |e: std::io::Error| Failure::Runtime(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(runtime)?;
    let path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Failure::Runtime(e.to_string()))?;
    let mut header = vec![
        "scheme".to_string(),
        "n_f".into(),
        "gamma".into(),
        "epsilon".into(),
    ];
    header.push("replicates".into());
    header.push("flagged_fraction".into());
    for m in SWEEP_METRICS {
        header.push(m.to_string());
        header.push(format!("{m}_ci95"));
    }
    w.write_record(&header)
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    for p in &result.points {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let flagged = p.records.iter().filter(|r| r.non_converged).count();
        let mut row = vec![
            p.point.scheme.name().to_string(),
            p.point.n_f.to_string(),
            opt(p.point.gamma.map(|g| g.to_string())),
            opt(p.point.epsilon.map(|e| e.to_string())),
            p.records.len().to_string(),
            (flagged as f64 / p.records.len() as f64).to_string(),
        ];
        for m in SWEEP_METRICS {
            let s = Summary::of(p.records.iter().map(|r| metric(r, m)));
            row.push(s.mean.to_string());
            row.push(s.ci95.to_string());
        }
        w.write_record(&row)
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    w.flush().map_err(runtime)?;
    let manifest = Manifest::new(
        "sweep",
        &result.spec.base,
        result.spec.replicates,
        result.non_converged_fraction(),
    );
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join("sweep.manifest.json"), json + "\n").map_err(runtime)?;
    Ok(path)
}
