//! Command-line front end.
//!
//! Arguments are first turned into a fully resolved [`RunConfig`]; the run
//! itself only sees that value, and the report echoes it, so `--config`
//! can replay any earlier report.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use gauss_scan_core::constants::{
    integrate_g_d, j_d_of, pickands_f, ConstantEstimate, GridMcParams, JQuadParams, Method, Provenance,
};
use gauss_scan_core::experiments::{
    run_gumbel, run_lln, run_poisson_clumps, run_tail_comparison, synthetic_poisson_check, ExperimentConfig,
    FieldSource, TailConfig,
};
use gauss_scan_core::scan::{scan, scan_naive};
use gauss_scan_core::theory::{
    extreme_value_rate, normalizer, normalizer_band, rate_expansion, tau_band, u_from_rate, Region, Setting,
    SettingSpec, Shape,
};
use gauss_scan_core::{Executor, GaussianLatticeField, PrefixSumTable, WindowFamily};

use crate::cache::ConstantCache;
use crate::pool::ThreadPool;
use crate::report::{ConstantUsed, Report, Table, CODE_VERSION};
use crate::resolve::{McOptions, Resolved, Resolver, G_TOL};

/// Acceptance band for the tail ratio.
pub const TAIL_RATIO_BAND: (f64, f64) = (0.75, 1.30);
/// Desk-scale band for the median LLN ratio.
pub const LLN_MEDIAN_BAND: (f64, f64) = (0.9, 1.25);

#[derive(Parser, Debug)]
#[command(
    name = "gauss-scan",
    version,
    about = "Maxima of standardized Gaussian window sums: constants, thresholds, scans and Monte Carlo checks"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Args, Debug)]
pub struct Common {
    /// Master seed of the run (the Monte Carlo seed for `constants`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "GAUSS_SCAN_WORKERS")]
    pub workers: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Directory of the constant cache.
    #[arg(long, global = true, env = "GAUSS_SCAN_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Replay the `config` of an earlier report, or a bare config object.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Include per-replication samples in JSON reports.
    #[arg(long, global = true)]
    pub emit_samples: bool,
    /// No progress lines on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SettingArg {
    Iid,
    DiscreteCube,
    DiscreteRect,
    ContinuousCube,
    ContinuousRect,
}

impl From<SettingArg> for Setting {
    fn from(s: SettingArg) -> Self {
        match s {
            SettingArg::Iid => Setting::Iid,
            SettingArg::DiscreteCube => Setting::DiscreteCube,
            SettingArg::DiscreteRect => Setting::DiscreteRect,
            SettingArg::ContinuousCube => Setting::ContinuousCube,
            SettingArg::ContinuousRect => Setting::ContinuousRect,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    Cube,
    Rect,
}

impl From<ShapeArg> for Shape {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::Cube => Shape::Cube,
            ShapeArg::Rect => Shape::Rect,
        }
    }
}

/// Constants `constants --name` can evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum ConstName {
    /// `F(kappa)` by its series.
    #[value(name = "F")]
    #[serde(rename = "F")]
    F,
    /// `G(h; kappa) = F(kappa/h)^2 / h^2`.
    #[value(name = "G")]
    #[serde(rename = "G")]
    G,
    /// `G_d`, the integral of `G(h; 2d)`.
    #[value(name = "G_d")]
    #[serde(rename = "G_d")]
    GD,
    /// `E_d(kappa)` by grid Monte Carlo.
    #[value(name = "E_d_grid")]
    #[serde(rename = "E_d_grid")]
    EDGrid,
    /// Continuum `E_d`, extrapolated to `kappa = 0`.
    #[value(name = "E_d")]
    #[serde(rename = "E_d")]
    ED,
    /// `J_d(h) = h^-(d+1) E_d(2d/h)`.
    #[value(name = "J_d_h")]
    #[serde(rename = "J_d_h")]
    JDH,
    /// `J_d` by Monte Carlo quadrature.
    #[value(name = "J_d")]
    #[serde(rename = "J_d")]
    JD,
    /// `H = 4 J_1 = 4 G_1`, the one-dimensional constant.
    #[value(name = "H")]
    #[serde(rename = "H")]
    H,
}

#[derive(Args, Debug, Clone)]
pub struct McArgs {
    /// Replications per `kappa` node for Monte Carlo constants.
    #[arg(long, default_value_t = McOptions::default().replications)]
    pub mc_replications: usize,
    #[arg(long, default_value_t = McOptions::default().seed)]
    pub mc_seed: u64,
    /// Walk horizon `T` (default 48 for d = 1, 24 otherwise).
    #[arg(long)]
    pub mc_horizon: Option<f64>,
    /// Log-spaced `h` nodes of the `J_d` quadrature (1 mod 4).
    #[arg(long, default_value_t = JQuadParams::default().nodes)]
    pub quad_nodes: usize,
    #[arg(long, default_value_t = JQuadParams::default().h_min)]
    pub quad_h_min: f64,
    /// Upper quadrature node (default 64 for d = 1, 16 otherwise).
    #[arg(long)]
    pub quad_h_cut: Option<f64>,
    /// Largest-`h` nodes used for the `kappa -> 0` fit.
    #[arg(long, default_value_t = JQuadParams::default().fit_nodes)]
    pub fit_nodes: usize,
}

impl McArgs {
    fn options(&self) -> McOptions {
        McOptions {
            replications: self.mc_replications,
            seed: self.mc_seed,
            horizon: self.mc_horizon,
            quad: JQuadParams {
                h_min: self.quad_h_min,
                h_cut: self.quad_h_cut,
                nodes: self.quad_nodes,
                fit_nodes: self.fit_nodes,
            },
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SettingArgs {
    #[arg(long, value_enum)]
    pub setting: SettingArg,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Lattice side (discrete) or box side (continuous).
    #[arg(long)]
    pub n: f64,
    /// Minimum window side, continuous settings (default 1).
    #[arg(long)]
    pub a: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct ScanBoundsArgs {
    /// Maximum window side, continuous settings (default n).
    #[arg(long)]
    pub b: Option<f64>,
    /// Grid step, continuous settings (default 0.1).
    #[arg(long)]
    pub q: Option<f64>,
    /// Smallest side count, discrete settings.
    #[arg(long, default_value_t = 1)]
    pub side_min: usize,
    /// Largest side count, discrete settings (default n).
    #[arg(long)]
    pub side_max: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate a constant: F, G, G_d, E_d_grid, E_d, J_d_h, J_d or H.
    Constants {
        #[arg(long, value_enum)]
        name: ConstName,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, value_delimiter = ',')]
        kappa: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        h: Vec<f64>,
        /// Series or quadrature tolerance (default 1e-12 for F and G, 1e-10 for G_d and H).
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Print u_n(tau) with the band implied by the constant's error.
    Threshold {
        #[command(flatten)]
        setting: SettingArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        tau: f64,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Extreme-value rates, normalizers and their rate-based counterparts.
    Rates {
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long)]
        n: f64,
        /// Minimum side for the continuous settings.
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        tau: f64,
        /// Settings to tabulate (default: all four scan settings).
        #[arg(long, value_enum, value_delimiter = ',')]
        settings: Vec<SettingArg>,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Scan one field: a seeded Gaussian lattice or values from a file.
    Scan {
        /// Lattice extents, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long, value_enum, default_value_t = ShapeArg::Cube)]
        shape: ShapeArg,
        #[arg(long, default_value_t = 1)]
        side_min: usize,
        #[arg(long)]
        side_max: Option<usize>,
        /// Random stream of the generated field.
        #[arg(long, default_value_t = 0)]
        stream: u64,
        /// Whitespace or comma separated values, row-major.
        #[arg(long)]
        field: Option<PathBuf>,
        /// Repeat the scan with the naive oracle (small lattices only).
        #[arg(long)]
        check_naive: bool,
    },
    /// Gumbel convergence of the normalized maximum.
    Gumbel {
        #[command(flatten)]
        setting: SettingArgs,
        #[command(flatten)]
        bounds: ScanBoundsArgs,
        #[arg(long, default_value_t = 1000)]
        replications: usize,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Poisson counts of exceeding blocks.
    Poisson {
        #[arg(long, value_enum)]
        setting: SettingArg,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long)]
        n: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        tau: f64,
        /// Lower side multiplier (discrete) or length (continuous).
        #[arg(long, default_value_t = 0.5)]
        a: f64,
        #[arg(long, default_value_t = 3.0)]
        b: f64,
        /// Grid step, continuous settings (default 0.1).
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, default_value_t = 500)]
        replications: usize,
        #[arg(long, default_value_t = 2000)]
        synthetic_blocks: usize,
        #[arg(long, default_value_t = 5e-4)]
        synthetic_p: f64,
        #[arg(long, default_value_t = 4000)]
        synthetic_replications: usize,
        #[command(flatten)]
        mc: McArgs,
    },
    /// max / sqrt(2 d log n) per replication.
    Lln {
        #[command(flatten)]
        setting: SettingArgs,
        #[command(flatten)]
        bounds: ScanBoundsArgs,
        #[arg(long, default_value_t = 100)]
        replications: usize,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Monte Carlo tail probability against the grid asymptotic.
    Tail {
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, value_enum, default_value_t = ShapeArg::Rect)]
        shape: ShapeArg,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        origin_lo: f64,
        #[arg(long, default_value_t = 1.0)]
        origin_hi: f64,
        #[arg(long, default_value_t = 1.0)]
        len_lo: f64,
        #[arg(long, default_value_t = 2.0)]
        len_hi: f64,
        #[arg(long, default_value_t = 4.0)]
        u: f64,
        #[arg(long, default_value_t = 0.01)]
        q: f64,
        #[arg(long, default_value_t = 1_000_000)]
        replications: usize,
        #[command(flatten)]
        mc: McArgs,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    pub name: ConstName,
    pub d: usize,
    pub kappa: Vec<f64>,
    pub h: Vec<f64>,
    pub tol: f64,
    pub mc: McOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub setting: Setting,
    pub d: usize,
    pub n: f64,
    pub a: Option<f64>,
    pub tau: f64,
    pub mc: McOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub d: usize,
    pub n: f64,
    pub a: f64,
    pub tau: f64,
    pub settings: Vec<Setting>,
    pub mc: McOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub dims: Vec<usize>,
    pub shape: Shape,
    pub side_min: usize,
    pub side_max: Option<usize>,
    pub seed: u64,
    pub stream: u64,
    pub field: Option<PathBuf>,
    pub check_naive: bool,
}

/// Configuration shared by `gumbel` and `lln`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaximaConfig {
    pub setting: Setting,
    pub d: usize,
    pub n: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub q: Option<f64>,
    pub side_min: usize,
    pub side_max: Option<usize>,
    pub replications: usize,
    pub seed: u64,
    pub emit_samples: bool,
    pub mc: McOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPlan {
    pub blocks: usize,
    pub p: f64,
    pub replications: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonConfig {
    pub setting: Setting,
    pub d: usize,
    pub n: f64,
    pub tau: f64,
    pub a: f64,
    pub b: f64,
    pub q: Option<f64>,
    pub replications: usize,
    pub seed: u64,
    pub emit_samples: bool,
    pub synthetic: SyntheticPlan,
    pub mc: McOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailRunConfig {
    pub d: usize,
    pub shape: Shape,
    pub region: Region,
    pub u: f64,
    pub q: f64,
    pub replications: usize,
    pub seed: u64,
    pub mc: McOptions,
}

/// Everything a run depends on, defaults included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Constants(ConstantsConfig),
    Threshold(ThresholdConfig),
    Rates(RatesConfig),
    Scan(ScanConfig),
    Gumbel(MaximaConfig),
    Lln(MaximaConfig),
    Poisson(PoissonConfig),
    Tail(TailRunConfig),
}

impl RunConfig {
    pub fn command_name(&self) -> &'static str {
        match self {
            RunConfig::Constants(_) => "constants",
            RunConfig::Threshold(_) => "threshold",
            RunConfig::Rates(_) => "rates",
            RunConfig::Scan(_) => "scan",
            RunConfig::Gumbel(_) => "gumbel",
            RunConfig::Lln(_) => "lln",
            RunConfig::Poisson(_) => "poisson",
            RunConfig::Tail(_) => "tail",
        }
    }

    fn seed(&self) -> u64 {
        match self {
            RunConfig::Constants(c) => c.mc.seed,
            RunConfig::Threshold(c) => c.mc.seed,
            RunConfig::Rates(c) => c.mc.seed,
            RunConfig::Scan(c) => c.seed,
            RunConfig::Gumbel(c) | RunConfig::Lln(c) => c.seed,
            RunConfig::Poisson(c) => c.seed,
            RunConfig::Tail(c) => c.seed,
        }
    }

    fn set_emit_samples(&mut self) {
        match self {
            RunConfig::Gumbel(c) | RunConfig::Lln(c) => c.emit_samples = true,
            RunConfig::Poisson(c) => c.emit_samples = true,
            _ => {}
        }
    }
}

/// Default master seed of experiments and scans.
pub const DEFAULT_SEED: u64 = 2024;

impl Command {
    /// Resolves defaults. `seed` is the global `--seed`.
    pub fn into_config(self, seed: Option<u64>, emit_samples: bool) -> RunConfig {
        let master = seed.unwrap_or(DEFAULT_SEED);
        let mut cfg = match self {
            Command::Constants { name, d, kappa, h, tol, mc } => {
                let mut mc = mc.options();
                if let Some(s) = seed {
                    mc.seed = s;
                }
                let tol = tol.unwrap_or(match name {
                    ConstName::GD | ConstName::H => G_TOL,
                    _ => 1e-12,
                });
                RunConfig::Constants(ConstantsConfig { name, d, kappa, h, tol, mc })
            }
            Command::Threshold { setting, tau, mc } => RunConfig::Threshold(ThresholdConfig {
                setting: setting.setting.into(),
                d: setting.d,
                n: setting.n,
                a: continuous_a(setting.setting.into(), setting.a),
                tau,
                mc: mc.options(),
            }),
            Command::Rates { d, n, a, tau, settings, mc } => {
                let settings = if settings.is_empty() {
                    vec![Setting::DiscreteCube, Setting::DiscreteRect, Setting::ContinuousCube, Setting::ContinuousRect]
                } else {
                    settings.into_iter().map(Setting::from).collect()
                };
                RunConfig::Rates(RatesConfig { d, n, a, tau, settings, mc: mc.options() })
            }
            Command::Scan { dims, shape, side_min, side_max, stream, field, check_naive } => {
                RunConfig::Scan(ScanConfig {
                    dims,
                    shape: shape.into(),
                    side_min,
                    side_max,
                    seed: master,
                    stream,
                    field,
                    check_naive,
                })
            }
            Command::Gumbel { setting, bounds, replications, mc } => {
                RunConfig::Gumbel(maxima_config(setting, bounds, replications, master, mc))
            }
            Command::Lln { setting, bounds, replications, mc } => {
                RunConfig::Lln(maxima_config(setting, bounds, replications, master, mc))
            }
            Command::Poisson {
                setting,
                d,
                n,
                tau,
                a,
                b,
                q,
                replications,
                synthetic_blocks,
                synthetic_p,
                synthetic_replications,
                mc,
            } => {
                let setting: Setting = setting.into();
                RunConfig::Poisson(PoissonConfig {
                    setting,
                    d,
                    n,
                    tau,
                    a,
                    b,
                    q: if setting.is_continuous() { Some(q.unwrap_or(DEFAULT_Q)) } else { None },
                    replications,
                    seed: master,
                    emit_samples: false,
                    synthetic: SyntheticPlan {
                        blocks: synthetic_blocks,
                        p: synthetic_p,
                        replications: synthetic_replications,
                        seed: master,
                    },
                    mc: mc.options(),
                })
            }
            Command::Tail { d, shape, origin_lo, origin_hi, len_lo, len_hi, u, q, replications, mc } => {
                RunConfig::Tail(TailRunConfig {
                    d,
                    shape: shape.into(),
                    region: Region::uniform(d, (origin_lo, origin_hi), (len_lo, len_hi)),
                    u,
                    q,
                    replications,
                    seed: master,
                    mc: mc.options(),
                })
            }
        };
        if emit_samples {
            cfg.set_emit_samples();
        }
        cfg
    }
}

/// Default grid step of continuous settings.
pub const DEFAULT_Q: f64 = 0.1;

fn continuous_a(s: Setting, a: Option<f64>) -> Option<f64> {
    if s.is_continuous() {
        Some(a.unwrap_or(1.0))
    } else {
        a
    }
}

fn maxima_config(s: SettingArgs, b: ScanBoundsArgs, replications: usize, seed: u64, mc: McArgs) -> MaximaConfig {
    let setting: Setting = s.setting.into();
    let cont = setting.is_continuous();
    MaximaConfig {
        setting,
        d: s.d,
        n: s.n,
        a: continuous_a(setting, s.a),
        b: if cont { Some(b.b.unwrap_or(s.n)) } else { None },
        q: if cont { Some(b.q.unwrap_or(DEFAULT_Q)) } else { None },
        side_min: b.side_min,
        side_max: b.side_max,
        replications,
        seed,
        emit_samples: false,
        mc: mc.options(),
    }
}

/// Failure of a run, split by exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Exit code 1.
    Config(String),
    /// Exit code 2.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<gauss_scan_core::Error> for CliError {
    fn from(e: gauss_scan_core::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Non-configuration context of a run.
pub struct Runtime {
    pub pool: ThreadPool,
    pub cache: Option<ConstantCache>,
    pub quiet: bool,
}

impl Runtime {
    fn log(&self, msg: &str) {
        if !self.quiet {
            eprintln!("gauss-scan: {msg}");
        }
    }

    fn resolver<'a>(&'a self, mc: &'a McOptions) -> Resolver<'a, ThreadPool> {
        Resolver { mc, cache: self.cache.as_ref(), exec: &self.pool, quiet: self.quiet }
    }
}

/// A report plus its CSV view.
pub struct Output {
    pub report: Report,
    pub table: Table,
}

struct Body {
    constants: Vec<ConstantUsed>,
    samples: Option<Value>,
    summary: Value,
    table: Table,
}

pub fn execute(cfg: &RunConfig, rt: &Runtime) -> CliResult<Output> {
    let start = Instant::now();
    rt.log(&format!("running {}", cfg.command_name()));
    let body = match cfg {
        RunConfig::Constants(c) => run_constants(c, rt)?,
        RunConfig::Threshold(c) => run_threshold(c, rt)?,
        RunConfig::Rates(c) => run_rates(c, rt)?,
        RunConfig::Scan(c) => run_scan(c)?,
        RunConfig::Gumbel(c) => run_gumbel_cmd(c, rt)?,
        RunConfig::Lln(c) => run_lln_cmd(c, rt)?,
        RunConfig::Poisson(c) => run_poisson_cmd(c, rt)?,
        RunConfig::Tail(c) => run_tail_cmd(c, rt)?,
    };
    let config = serde_json::to_value(cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
    let report = Report {
        command: cfg.command_name().to_string(),
        code_version: CODE_VERSION.to_string(),
        config,
        constants_used: body.constants,
        samples: body.samples,
        summary: body.summary,
        runtime_seconds: start.elapsed().as_secs_f64(),
        seed: cfg.seed(),
    };
    rt.log(&format!("done in {:.2} s", report.runtime_seconds));
    Ok(Output { report, table: body.table })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

const CONSTANT_COLUMNS: [&str; 8] = ["name", "d", "kappa", "h", "value", "abs_error", "method", "params"];

fn constant_row(name: &str, d: Option<usize>, kappa: Option<f64>, h: Option<f64>, c: &ConstantEstimate) -> Value {
    json!({
        "name": name,
        "d": d,
        "kappa": kappa,
        "h": h,
        "value": c.value,
        "abs_error": c.abs_error,
        "method": c.method,
        "params": c.params,
    })
}

fn require(list: &[f64], flag: &str, name: ConstName) -> CliResult<()> {
    if list.is_empty() {
        return Err(CliError::Config(format!("constant {name:?} needs --{flag}")));
    }
    Ok(())
}

fn run_constants(c: &ConstantsConfig, rt: &Runtime) -> CliResult<Body> {
    let r = rt.resolver(&c.mc);
    let mut rows = Vec::new();
    match c.name {
        ConstName::F => {
            require(&c.kappa, "kappa", c.name)?;
            for &k in &c.kappa {
                rows.push(constant_row("F", None, Some(k), None, &pickands_f(k, c.tol)?));
            }
        }
        ConstName::G => {
            require(&c.kappa, "kappa", c.name)?;
            require(&c.h, "h", c.name)?;
            for &h in &c.h {
                for &k in &c.kappa {
                    if h.is_nan() || h <= 0.0 {
                        return Err(CliError::Config(format!("h must be positive, got {h}")));
                    }
                    let f = pickands_f(k / h, c.tol)?;
                    let g = ConstantEstimate {
                        value: f.value * f.value / (h * h),
                        abs_error: 2.0 * f.value * f.abs_error / (h * h),
                        method: Method::Series,
                        params: Provenance { kappa: Some(k), h: Some(h), ..f.params },
                    };
                    rows.push(constant_row("G", None, Some(k), Some(h), &g));
                }
            }
        }
        ConstName::GD => rows.push(constant_row("G_d", Some(c.d), None, None, &integrate_g_d(c.d, c.tol)?)),
        ConstName::H => {
            let g = integrate_g_d(1, c.tol)?;
            let h = ConstantEstimate { value: 4.0 * g.value, abs_error: 4.0 * g.abs_error, ..g };
            rows.push(constant_row("H", Some(1), None, None, &h));
        }
        ConstName::EDGrid => {
            require(&c.kappa, "kappa", c.name)?;
            for &k in &c.kappa {
                rows.push(constant_row("E_d_grid", Some(c.d), Some(k), None, &r.e_d_grid(c.d, k)?));
            }
        }
        ConstName::ED => rows.push(constant_row("E_d", Some(c.d), None, None, &r.e_d(c.d)?)),
        ConstName::JDH => {
            require(&c.h, "h", c.name)?;
            let mc = GridMcParams { replications: c.mc.replications, horizon: c.mc.horizon, seed: c.mc.seed };
            for &h in &c.h {
                rows.push(constant_row("J_d_h", Some(c.d), None, Some(h), &j_d_of(h, c.d, &mc, &rt.pool)?));
            }
        }
        ConstName::JD => {
            let j = r.j_d(c.d)?;
            rows.push(constant_row("J_d", Some(c.d), None, None, &j.estimate));
        }
    }
    let table = Table::from_objects(&CONSTANT_COLUMNS, &rows);
    Ok(Body { constants: Vec::new(), samples: None, summary: json!({ "table": rows }), table })
}

fn setting_spec(
    setting: Setting,
    d: usize,
    n: f64,
    a: Option<f64>,
    resolved: Option<&Resolved>,
) -> CliResult<SettingSpec> {
    let mut s = SettingSpec::new(setting, d, n);
    s.a = a;
    if let Some(r) = resolved {
        s = s.with_constant(r.estimate.clone());
    }
    s.validate()?;
    Ok(s)
}

fn run_threshold(c: &ThresholdConfig, rt: &Runtime) -> CliResult<Body> {
    let resolved = rt.resolver(&c.mc).for_setting(c.setting, c.d)?;
    let s = setting_spec(c.setting, c.d, c.n, c.a, resolved.as_ref())?;
    let t = normalizer_band(&s, c.tau)?;
    let summary = json!({
        "setting": s.family,
        "d": c.d,
        "n": c.n,
        "tau": c.tau,
        "u": t.u,
        "half_width": t.half_width,
        "lower": t.u - t.half_width,
        "upper": t.u + t.half_width,
        "scale": s.scale(),
        "shift": s.shift()?,
        "tau_band": tau_band(&s),
    });
    let table = Table::from_objects(
        &["setting", "d", "n", "tau", "u", "half_width", "lower", "upper", "scale", "shift", "tau_band"],
        std::slice::from_ref(&summary),
    );
    Ok(Body { constants: resolved.iter().map(Resolved::used).collect(), samples: None, summary, table })
}

fn run_rates(c: &RatesConfig, rt: &Runtime) -> CliResult<Body> {
    let r = rt.resolver(&c.mc);
    let mut rows = Vec::new();
    let mut used = Vec::new();
    for &setting in &c.settings {
        if setting == Setting::Iid {
            return Err(CliError::Config("the i.i.d. setting has no extreme-value rate to tabulate".into()));
        }
        let resolved = r.for_setting(setting, c.d)?;
        let a = if setting.is_continuous() { Some(c.a) } else { None };
        let s = setting_spec(setting, c.d, c.n, a, resolved.as_ref())?;
        let rate = extreme_value_rate(&s)?;
        let u = normalizer(&s, c.tau)?;
        let from_rate = u_from_rate(&rate, c.n, c.tau)?;
        rows.push(json!({
            "setting": setting,
            "alpha": rate.alpha,
            "beta": rate.beta,
            "gamma": rate.gamma,
            "log_rate": rate.log_rate(c.n),
            "u": u,
            "u_from_rate": from_rate,
            "rate_expansion": rate_expansion(&rate, c.n, c.tau)?,
            "scaled_gap": (from_rate - u).abs() * s.scale(),
        }));
        used.extend(resolved.iter().map(Resolved::used));
    }
    let table = Table::from_objects(
        &["setting", "alpha", "beta", "gamma", "log_rate", "u", "u_from_rate", "rate_expansion", "scaled_gap"],
        &rows,
    );
    Ok(Body {
        constants: used,
        samples: None,
        summary: json!({ "d": c.d, "n": c.n, "tau": c.tau, "table": rows }),
        table,
    })
}

fn read_field(path: &Path, dims: &[usize]) -> CliResult<GaussianLatticeField> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read field file {}: {e}", path.display())))?;
    let values = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| CliError::Config(format!("not a number in field file: {t:?}"))))
        .collect::<CliResult<Vec<f64>>>()?;
    Ok(GaussianLatticeField::from_values(dims, values)?)
}

fn run_scan(c: &ScanConfig) -> CliResult<Body> {
    let field = match &c.field {
        Some(p) => read_field(p, &c.dims)?,
        None => GaussianLatticeField::generate(&c.dims, c.seed, c.stream)?,
    };
    let family = match c.shape {
        Shape::Cube => WindowFamily::cubes(c.dims.len(), c.side_min, c.side_max),
        Shape::Rect => WindowFamily::rects(vec![c.side_min; c.dims.len()], c.side_max.map(|m| vec![m; c.dims.len()])),
    };
    let result = scan(&PrefixSumTable::build(&field), &family)?;
    let naive = if c.check_naive {
        let n = scan_naive(&field, &family)?;
        Some(json!({
            "max_value": n.max_value,
            "agrees": (n.max_value - result.max_value).abs() <= 1e-9 && n.argmax == result.argmax,
        }))
    } else {
        None
    };
    let summary = json!({
        "max_value": result.max_value,
        "argmax": result.argmax,
        "windows_scanned": result.windows_scanned,
        "naive": naive,
    });
    let mut table = Table::new(&["max_value", "origin", "sides", "windows_scanned"]);
    table.push(vec![
        json!(result.max_value),
        json!(crate::report::to_compact_string(&result.argmax.origin)),
        json!(crate::report::to_compact_string(&result.argmax.sides)),
        json!(result.windows_scanned),
    ]);
    Ok(Body { constants: Vec::new(), samples: None, summary, table })
}

fn experiment_config(c: &MaximaConfig, s: SettingSpec) -> CliResult<ExperimentConfig> {
    let d = c.d;
    let family = match c.setting {
        Setting::DiscreteCube => WindowFamily::cubes(d, c.side_min, c.side_max),
        Setting::DiscreteRect => WindowFamily::rects(vec![c.side_min; d], c.side_max.map(|m| vec![m; d])),
        Setting::ContinuousCube | Setting::ContinuousRect => {
            let a = c.a.unwrap_or(1.0);
            let b = c.b.unwrap_or(c.n);
            WindowFamily::grid(
                c.setting == Setting::ContinuousCube,
                &vec![a; d],
                &vec![b; d],
                c.q.unwrap_or(DEFAULT_Q),
            )?
        }
        Setting::Iid => return Err(CliError::Config("experiments need a scan setting, not iid".into())),
    };
    let cfg = ExperimentConfig::new(s, c.replications, c.seed).with_family(family).with_source(FieldSource::Gaussian);
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_maxima(c: &MaximaConfig, rt: &Runtime) -> CliResult<(ExperimentConfig, Vec<ConstantUsed>)> {
    if c.setting == Setting::Iid {
        return Err(CliError::Config("experiments need a scan setting, not iid".into()));
    }
    let resolved = rt.resolver(&c.mc).for_setting(c.setting, c.d)?;
    let s = setting_spec(c.setting, c.d, c.n, c.a, resolved.as_ref())?;
    Ok((experiment_config(c, s)?, resolved.iter().map(Resolved::used).collect()))
}

fn run_gumbel_cmd(c: &MaximaConfig, rt: &Runtime) -> CliResult<Body> {
    let (cfg, used) = resolve_maxima(c, rt)?;
    let r = run_gumbel(&cfg, &rt.pool)?;
    let summary = json!({
        "replications": c.replications,
        "ks_distance": r.ks_distance,
        "ks_widened": r.ks_widened,
        "tau_band": r.tau_band,
        "quantiles": r.quantiles,
    });
    let mut table = Table::new(&["replication", "tau_hat", "max"]);
    for (i, (t, m)) in r.tau_samples.iter().zip(&r.maxima).enumerate() {
        table.push(vec![json!(i), json!(t), json!(m)]);
    }
    let samples = c.emit_samples.then(|| json!({ "tau_hat": r.tau_samples, "max": r.maxima }));
    Ok(Body { constants: used, samples, summary, table })
}

fn run_lln_cmd(c: &MaximaConfig, rt: &Runtime) -> CliResult<Body> {
    let (cfg, used) = resolve_maxima(c, rt)?;
    let r = run_lln(&cfg, &rt.pool)?;
    let (lo, hi) = LLN_MEDIAN_BAND;
    let summary = json!({
        "replications": c.replications,
        "median": r.median,
        "band": [lo, hi],
        "median_within_band": r.median > lo && r.median < hi,
    });
    let mut table = Table::new(&["replication", "ratio"]);
    for (i, v) in r.ratios.iter().enumerate() {
        table.push(vec![json!(i), json!(v)]);
    }
    let samples = c.emit_samples.then(|| json!({ "ratio": r.ratios }));
    Ok(Body { constants: used, samples, summary, table })
}

fn chi_square_json(chi: &gauss_scan_core::experiments::ChiSquare) -> Value {
    let p_value = if chi.dof > 0 { ChiSquared::new(chi.dof as f64).map(|d| d.sf(chi.statistic)).ok() } else { None };
    json!({ "statistic": chi.statistic, "dof": chi.dof, "p_value": p_value })
}

fn run_poisson_cmd(c: &PoissonConfig, rt: &Runtime) -> CliResult<Body> {
    if c.setting == Setting::Iid {
        return Err(CliError::Config("clump counts need a scan setting, not iid".into()));
    }
    let syn = synthetic_poisson_check(
        c.synthetic.blocks,
        c.synthetic.p,
        c.synthetic.replications,
        c.synthetic.seed,
        &rt.pool,
    )?;
    let synthetic_ok = syn.mean_within_band && syn.dispersion_within_band;
    rt.log(&format!(
        "synthetic Poisson check: mean {:.4} vs {:.4}, dispersion {:?}",
        syn.mean, syn.lambda_predicted, syn.dispersion
    ));
    if !synthetic_ok {
        return Err(CliError::Runtime(format!(
            "synthetic Poisson check failed (mean {}, lambda {}, dispersion {:?}); not running the scan experiment",
            syn.mean, syn.lambda_predicted, syn.dispersion
        )));
    }
    let resolved = rt.resolver(&c.mc).for_setting(c.setting, c.d)?;
    let a = if c.setting.is_continuous() { Some(c.a) } else { None };
    let s = setting_spec(c.setting, c.d, c.n, a, resolved.as_ref())?;
    let mut cfg = ExperimentConfig::new(s, c.replications, c.seed);
    if c.setting.is_continuous() {
        cfg.family.grid_step = c.q.unwrap_or(DEFAULT_Q);
    }
    let profile = resolved.as_ref().and_then(|r| r.profile.as_ref());
    let r = run_poisson_clumps(&cfg, c.tau, c.a, c.b, profile, &rt.pool)?;
    let summary = json!({
        "replications": c.replications,
        "lambda_predicted": r.lambda_predicted,
        "mean": r.mean,
        "variance": r.variance,
        "dispersion": r.dispersion,
        "mean_band": r.mean_band,
        "mean_within_band": r.mean_within_band,
        "dispersion_within_band": r.dispersion_within_band,
        "chi_square": chi_square_json(&r.chi_square),
        "layout": r.layout,
        "synthetic": {
            "mean": syn.mean,
            "lambda_predicted": syn.lambda_predicted,
            "dispersion": syn.dispersion,
            "chi_square": chi_square_json(&syn.chi_square),
            "passed": synthetic_ok,
        },
    });
    let mut table = Table::new(&["replication", "count"]);
    for (i, v) in r.counts.iter().enumerate() {
        table.push(vec![json!(i), json!(v)]);
    }
    let samples = c.emit_samples.then(|| json!({ "count": r.counts }));
    Ok(Body { constants: resolved.iter().map(Resolved::used).collect(), samples, summary, table })
}

fn run_tail_cmd(c: &TailRunConfig, rt: &Runtime) -> CliResult<Body> {
    let cfg = TailConfig {
        d: c.d,
        shape: c.shape,
        region: c.region.clone(),
        u: c.u,
        q: c.q,
        replications: c.replications,
        master_seed: c.seed,
        source: FieldSource::Gaussian,
    };
    let resolver = rt.resolver(&c.mc);
    let e_grid = |k: f64| resolver.e_d_grid(c.d, k).map(|e| e.value);
    let provider: Option<&dyn Fn(f64) -> gauss_scan_core::Result<f64>> =
        if c.shape == Shape::Cube && c.d >= 2 { Some(&e_grid) } else { None };
    let r = run_tail_comparison(&cfg, provider, &rt.pool)?;
    let (lo, hi) = TAIL_RATIO_BAND;
    let mut summary = to_value(&r);
    summary["band"] = json!([lo, hi]);
    summary["ratio_within_band"] = json!(r.ratio >= lo && r.ratio <= hi);
    let table = Table::from_objects(
        &[
            "kappa",
            "hits",
            "probability",
            "stderr",
            "asymptotic_grid",
            "asymptotic_continuous",
            "ratio",
            "ratio_stderr",
        ],
        std::slice::from_ref(&summary),
    );
    Ok(Body { constants: Vec::new(), samples: None, summary, table })
}

fn read_replay(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("config {} is not JSON: {e}", path.display())))?;
    let cfg = match v.get("config") {
        Some(inner) => inner.clone(),
        None => v,
    };
    serde_json::from_value(cfg).map_err(|e| CliError::Config(format!("invalid config in {}: {e}", path.display())))
}

fn write_output(out: &Output, format: Format, path: Option<&Path>) -> CliResult<()> {
    let mut buf = Vec::new();
    match format {
        Format::Json => {
            buf.extend_from_slice(out.report.to_json().as_bytes());
            buf.push(b'\n');
        }
        Format::Csv => out.table.write_csv(&mut buf).map_err(|e| CliError::Runtime(e.to_string()))?,
    }
    match path {
        Some(p) => fs::write(p, &buf).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&buf).and_then(|_| stdout.flush()).map_err(|e| CliError::Runtime(e.to_string()))
        }
    }
}

fn run_parsed(cli: Cli) -> CliResult<()> {
    let common = cli.common;
    let mut cfg = match (common.config.as_deref(), cli.command) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config("--config replays a whole run; give no subcommand with it".into()))
        }
        (Some(_), None) if common.seed.is_some() => {
            return Err(CliError::Config("--seed cannot override a replayed config".into()))
        }
        (Some(path), None) => read_replay(path)?,
        (None, Some(cmd)) => cmd.into_config(common.seed, common.emit_samples),
        (None, None) => return Err(CliError::Config("no subcommand given; see --help".into())),
    };
    if common.emit_samples {
        cfg.set_emit_samples();
    }
    let workers = common.workers.unwrap_or_else(|| ThreadPool::available().workers());
    if workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    let rt = Runtime {
        pool: ThreadPool::new(workers),
        cache: common.cache_dir.map(ConstantCache::new),
        quiet: common.quiet,
    };
    let out = execute(&cfg, &rt)?;
    write_output(&out, common.format, common.out.as_deref())
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    if args.len() <= 1 {
        eprintln!("{}", Cli::command().render_help());
        return 1;
    }
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    eprint!("{e}");
                    1
                }
                _ => {
                    let text = e.to_string();
                    let line = text.lines().next().unwrap_or("invalid arguments");
                    eprintln!("gauss-scan: {}", line.trim_start_matches("error: "));
                    1
                }
            };
        }
    };
    match run_parsed(cli) {
        Ok(()) => 0,
        Err(e) => {
            let (kind, msg) = match &e {
                CliError::Config(m) => ("configuration error", m),
                CliError::Runtime(m) => ("runtime error", m),
            };
            eprintln!("gauss-scan: {kind}: {}", msg.replace('\n', " "));
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn configs_round_trip_through_json() {
        let cli = Cli::try_parse_from(["gauss-scan", "gumbel", "--setting", "continuous-cube", "--d", "2", "--n", "8"])
            .unwrap();
        let cfg = cli.command.unwrap().into_config(Some(5), true);
        let text = crate::report::to_pretty_string(&cfg);
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        match back {
            RunConfig::Gumbel(m) => {
                assert_eq!((m.a, m.b, m.q, m.seed, m.emit_samples), (Some(1.0), Some(8.0), Some(DEFAULT_Q), 5, true));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_config_fields_are_rejected() {
        let text = r#"{"command":"scan","dims":[4],"shape":"cube","side_min":1,"side_max":null,"seed":1,"stream":0,"field":null,"check_naive":false,"extra":1}"#;
        assert!(serde_json::from_str::<RunConfig>(text).is_err());
        let ok = text.replace(r#","extra":1"#, "");
        assert!(serde_json::from_str::<RunConfig>(&ok).is_ok());
    }

    #[test]
    fn negative_tau_parses() {
        let cli = Cli::try_parse_from(["gauss-scan", "threshold", "--setting", "iid", "--n", "1000", "--tau", "-1.5"])
            .unwrap();
        match cli.command.unwrap().into_config(None, false) {
            RunConfig::Threshold(t) => assert_eq!(t.tau, -1.5),
            other => panic!("{other:?}"),
        }
    }
}
