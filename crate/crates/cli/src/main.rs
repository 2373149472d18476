//! `qtda`: persistent Betti numbers, quantum-estimator emulation, gap sweeps and
//! resource estimates from the command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 infeasible computation, 4 I/O.

mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qtda_core::QtdaError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] QtdaError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Core(e) => match e {
                QtdaError::Io(_) => 4,
                QtdaError::Infeasible(_)
                | QtdaError::Overflow(..)
                | QtdaError::ExactOverflow
                | QtdaError::NonConvergence(_) => 3,
                _ => 2,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "qtda", version, about = "Persistent Betti numbers: classical engines, quantum-estimator emulation and cost model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Betti table and persistence pairs with the three-engine agreement report.
    Persistence(PersistenceArgs),
    /// Emulate the three-instance quantum estimator.
    Qtda(QtdaArgs),
    /// Cost-model report for one parameter point.
    Resources(ResourcesArgs),
    /// Comparison CSV against prior quantum and classical algorithms.
    Compare(CompareArgs),
    /// Spectral-gap sweep over random instances (CSV).
    Gaps(GapsArgs),
    /// Eigenvector overlaps of the Zeno counterexample.
    Zeno(ZenoArgs),
    /// Johnson–Lindenstrauss projection of a point cloud.
    Jl(JlArgs),
}

/// Where the point cloud comes from.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SourceArgs {
    /// Point cloud file (CSV or JSON).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Built-in fixture instead of a file: house, square or apex.
    #[arg(long, conflicts_with = "input")]
    pub fixture: Option<String>,
    /// Input format; inferred from the file extension when omitted.
    #[arg(long)]
    pub format: Option<String>,
    /// Total fixed-point bits per coordinate.
    #[arg(long, default_value_t = 32)]
    pub bits: u32,
    /// Fraction bits per coordinate.
    #[arg(long, default_value_t = 16)]
    pub frac_bits: u32,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PersistenceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = 1)]
    pub kmax: usize,
    /// `all`, `consecutive`, `default`, `none` or pairs `i,j;i,j`.
    #[arg(long, default_value = "all")]
    pub scales: String,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory for betti.json and pairs.csv; stdout (table only) when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct QtdaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    /// Scale pairs; `default` is the fixture's canonical pair.
    #[arg(long, default_value = "default")]
    pub scales: String,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 0.4)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    #[arg(long, default_value = "poly")]
    pub mode: String,
    #[arg(long, default_value = "direct")]
    pub mapping: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of seeds per scale pair (seed, seed + 1, …).
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Big-O constants file (overrides QTDA_CONSTANTS); only success_constant is used here.
    #[arg(long)]
    pub constants: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Parameters shared by `resources` and `compare`.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CostArgs {
    /// Measure N, |S_k| and the gaps from a point cloud or fixture instead.
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    /// Scale pair for measurement (`default` for fixtures).
    #[arg(long, default_value = "default")]
    pub scales: String,
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 16)]
    pub b: usize,
    /// |S_k^i|; binom(N, k+1) when omitted.
    #[arg(long)]
    pub s_k: Option<f64>,
    /// |S_{k+1}^j| for classical rows; binom(N, k+1) when omitted.
    #[arg(long)]
    pub s_k1: Option<f64>,
    /// Simplex count after sparsification (classical_sparse).
    #[arg(long)]
    pub s_sparse: Option<f64>,
    /// Betti number (classical_power).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Gaps `Λ_∂k,Λ_∂k+1,Λ_ΠΠ`.
    #[arg(long, default_value = "1,1,1")]
    pub gaps: String,
    /// Gaps `Λ_1,Λ_2` of the persistent-Laplacian approach.
    #[arg(long)]
    pub hayakawa_gaps: Option<String>,
    #[arg(long, default_value_t = 0.4)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    #[arg(long, default_value = "direct")]
    pub mapping: String,
    #[arg(long, default_value = "qrom")]
    pub memory: String,
    /// Big-O constants file (overrides QTDA_CONSTANTS).
    #[arg(long)]
    pub constants: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ResourcesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub cost: CostArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub cost: CostArgs,
    /// `all` or a comma list of references.
    #[arg(long, default_value = "all")]
    pub reference: String,
    /// N grid for the exponent fits written to --report.
    #[arg(long, default_value = "1024,2048,4096,8192,16384,32768,65536")]
    pub fit_sizes: String,
    /// JSON with exponent fits, headline speedup and footnotes.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GapsArgs {
    /// `geometric` or `graph`.
    #[arg(long, default_value = "geometric")]
    pub generator: String,
    #[arg(long, default_value = "4,5,6,7,8")]
    pub sizes: String,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-size quartile summary (JSON).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ZenoArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct JlArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    /// Allowed distance distortion.
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Overlay the keys of a JSON config file onto parsed flags. Keys use flag
/// names with `-` or `_`; unknown keys are rejected.
pub fn apply_config<T: Serialize + DeserializeOwned>(args: T, config: Option<&Path>) -> CliResult<T> {
    let Some(path) = config else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let overlay: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let serde_json::Value::Object(overlay) = overlay else {
        return Err(CliError::Config(format!("{}: expected a JSON object", path.display())));
    };
    let mut base = serde_json::to_value(&args).map_err(|e| CliError::Config(e.to_string()))?;
    let fields = base.as_object_mut().expect("argument structs serialize to objects");
    for (key, value) in overlay {
        let key = key.replace('-', "_");
        if key == "config" || !fields.contains_key(&key) {
            return Err(CliError::Config(format!("unknown config key {key:?}")));
        }
        fields.insert(key, value);
    }
    serde_json::from_value(base).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Persistence(a) => {
            let cfg = a.config.clone();
            commands::persistence(apply_config(a, cfg.as_deref())?)
        }
        Command::Qtda(a) => {
            let cfg = a.config.clone();
            commands::qtda(apply_config(a, cfg.as_deref())?)
        }
        Command::Resources(a) => {
            let cfg = a.config.clone();
            commands::resources(apply_config(a, cfg.as_deref())?)
        }
        Command::Compare(a) => {
            let cfg = a.config.clone();
            commands::compare(apply_config(a, cfg.as_deref())?)
        }
        Command::Gaps(a) => {
            let cfg = a.config.clone();
            commands::gaps(apply_config(a, cfg.as_deref())?)
        }
        Command::Zeno(a) => {
            let cfg = a.config.clone();
            commands::zeno(apply_config(a, cfg.as_deref())?)
        }
        Command::Jl(a) => {
            let cfg = a.config.clone();
            commands::jl(apply_config(a, cfg.as_deref())?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qtda: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
