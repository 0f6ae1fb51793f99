use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use vitcube_core::gp::Smoothness;
use vitcube_core::pareto::FractionBase;

use crate::commands;
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "vitcube", version, about = "Architecture-factor analysis for MobileViT-style networks")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed from the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory [default: config `output_dir`, else `out`].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base stage table (TOML) [default: config `base_table`, else the
    /// built-in MobileViT V2 table].
    #[arg(long, global = true)]
    pub base: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// MACs and parameter table for one factor tuple.
    Macs(MacsArgs),
    /// 1D GP of top-1 accuracy against one factor.
    FitGp(FitGpArgs),
    /// 2D GP posterior surface over two factors.
    Grid(GridArgs),
    /// Nondominated sorting and top-fraction selection.
    Pareto(ParetoArgs),
    /// Fits the MACs-to-factors rule on a selected set.
    FitRule(FitRuleArgs),
    /// Factor tuple for a MACs budget.
    Recommend(RecommendArgs),
    /// Attention cost scaling over token counts and embedding dims.
    AttnBench(AttnBenchArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Macs(_) => "macs",
            Command::FitGp(_) => "fit-gp",
            Command::Grid(_) => "grid",
            Command::Pareto(_) => "pareto",
            Command::FitRule(_) => "fit-rule",
            Command::Recommend(_) => "recommend",
            Command::AttnBench(_) => "attn-bench",
        }
    }
}

#[derive(Debug, Args)]
pub struct MacsArgs {
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long = "d-i", default_value_t = 1.0)]
    pub d_i: f64,
    #[arg(long = "d-m", default_value_t = 1.0)]
    pub d_m: f64,
    #[arg(long, default_value_t = 1.0)]
    pub w: f64,
}

#[derive(Debug, Args)]
pub struct FitGpArgs {
    /// Observation CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Factor column used as the GP input (r, d_i, d_m or w).
    #[arg(long, default_value = "r")]
    pub factor: String,
    /// Matérn smoothness [default: config `gp.smoothness`].
    #[arg(long)]
    pub smoothness: Option<Smoothness>,
    /// Posterior evaluation range `lo,hi` [default: observed range].
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub range: Option<Vec<f64>>,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "r")]
    pub x: String,
    #[arg(long, default_value = "w")]
    pub y: String,
    /// Matérn smoothness [default: config `gp.smoothness`].
    #[arg(long)]
    pub smoothness: Option<Smoothness>,
    /// `lo,hi` [default: observed range].
    #[arg(long = "x-range", value_delimiter = ',', num_args = 2)]
    pub x_range: Option<Vec<f64>>,
    #[arg(long = "y-range", value_delimiter = ',', num_args = 2)]
    pub y_range: Option<Vec<f64>>,
    #[arg(long, default_value_t = 500)]
    pub nx: usize,
    #[arg(long, default_value_t = 500)]
    pub ny: usize,
}

#[derive(Debug, Args)]
pub struct ParetoArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Baseline MACs [default: identity tuple on the base table].
    #[arg(long)]
    pub m0: Option<f64>,
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long = "fraction-base")]
    pub fraction_base: Option<FractionBaseArg>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum FractionBaseArg {
    Constrained,
    All,
}

impl From<FractionBaseArg> for FractionBase {
    fn from(a: FractionBaseArg) -> Self {
        match a {
            FractionBaseArg::Constrained => FractionBase::Constrained,
            FractionBaseArg::All => FractionBase::All,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitRuleArgs {
    /// Selected records, e.g. `selected.csv` from `pareto`.
    #[arg(long)]
    pub input: PathBuf,
    /// Baseline MACs [default: identity tuple on the base table].
    #[arg(long)]
    pub m0: Option<f64>,
    /// Matérn smoothness [default: config `gp.smoothness`].
    #[arg(long)]
    pub smoothness: Option<Smoothness>,
    /// Samples of the factor curves over the reduction-factor domain.
    #[arg(long = "curve-points", default_value_t = 91)]
    pub curve_points: usize,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    /// Rule JSON written by `fit-rule`.
    #[arg(long)]
    pub rule: PathBuf,
    #[arg(long = "target-macs")]
    pub target_macs: f64,
}

#[derive(Debug, Args)]
pub struct AttnBenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128,256,512,1024,2048,4096,8192")]
    pub tokens: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "64")]
    pub dims: Vec<u64>,
    /// Timed repetitions per point; 0 skips timing and keeps the output
    /// deterministic.
    #[arg(long, default_value_t = 0)]
    pub reps: usize,
    /// Largest token count timed for multi-head attention.
    #[arg(long = "mha-max-tokens", default_value_t = 1024)]
    pub mha_max_tokens: u64,
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
}

/// Drops `--out <dir>` / `--out=<dir>` and the program name so that the
/// manifest does not depend on where it was written.
fn recorded_arguments(argv: &[OsString]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in argv.iter().skip(1) {
        let a = a.to_string_lossy().into_owned();
        if skip {
            skip = false;
            continue;
        }
        if a == "--out" {
            skip = true;
            continue;
        }
        if a.starts_with("--out=") {
            continue;
        }
        out.push(a);
    }
    out
}

pub struct Invocation {
    pub cli: Cli,
    pub config: RunConfig,
    pub config_path: Option<PathBuf>,
    pub out: PathBuf,
    pub arguments: Vec<String>,
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn run_from(argv: Vec<OsString>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { CliError::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, recorded_arguments(&argv)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli, arguments: Vec<String>) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(base) = &cli.base {
        config.base_table = Some(base.clone());
    }
    let out = cli.out.clone().or_else(|| config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let config_path = cli.config.clone();
    commands::dispatch(Invocation { cli, config, config_path, out, arguments })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_flag_is_not_recorded() {
        let argv: Vec<OsString> =
            ["vitcube", "--out", "x", "macs", "--out=y", "--r", "1.1"].iter().map(Into::into).collect();
        assert_eq!(recorded_arguments(&argv), ["macs", "--r", "1.1"]);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
