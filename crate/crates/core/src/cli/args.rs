use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use super::CliError;
use crate::eval::DEFAULT_BETA;
use crate::measure::GFunction;
use crate::scoring::{AggregationPolicy, Method};

#[derive(Debug, Parser)]
#[command(
    name = "oddball",
    version,
    about = "Token anomaly detection with oddballness scores"
)]
pub struct Cli {
    /// TOML file with defaults for any run flag; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dump against the format and its invariants.
    Validate {
        #[arg(long)]
        dump: PathBuf,
    },
    /// Score every dataset token of a dump.
    Score(RunArgs),
    /// Tune a threshold on a development split.
    Tune(RunArgs),
    /// Evaluate a fixed threshold on a labeled split.
    Eval(RunArgs),
    /// Tune on dev and evaluate on test for several methods.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Probability,
    Oddballness,
    Topk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GArg {
    Identity,
    Square,
    Cube,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggArg {
    Max,
    Mean,
    First,
}

/// Direction of cross-model combination. `auto` takes the method's own
/// direction (max for oddballness, min for probability).
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineArg {
    Max,
    Min,
    Auto,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long, value_enum)]
    pub g: Option<GArg>,
    #[arg(long, value_enum)]
    pub agg: Option<AggArg>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// `default`, `start:stop:step` or a comma-separated list.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, value_enum)]
    pub combine: Option<CombineArg>,
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[arg(long)]
    pub dump2: Option<PathBuf>,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where `eval` writes predicted labels in the gold TSV layout.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Where `eval` writes the text table.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// A `tune` result to take the threshold and dev score from.
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportArgs {
    #[arg(long)]
    pub dev_dump: Option<PathBuf>,
    #[arg(long)]
    pub dev_dump2: Option<PathBuf>,
    #[arg(long)]
    pub dev_gold: Option<PathBuf>,
    #[arg(long)]
    pub test_dump: Option<PathBuf>,
    #[arg(long)]
    pub test_dump2: Option<PathBuf>,
    #[arg(long)]
    pub test_gold: Option<PathBuf>,
    /// Comma-separated methods; defaults to topk,probability,oddballness.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<MethodArg>>,
    #[arg(long, value_enum)]
    pub g: Option<GArg>,
    #[arg(long, value_enum)]
    pub agg: Option<AggArg>,
    #[arg(long, value_enum)]
    pub combine: Option<CombineArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
}

/// Config-file shape: flags of `score`, `tune` and `eval` under `[run]`,
/// flags of `report` under `[report]`, named as on the command line with
/// underscores.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub run: RunArgs,
    #[serde(default)]
    pub report: ReportArgs,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

macro_rules! overlay {
    ($flags:expr, $file:expr, $($field:ident),*) => {
        $( if $flags.$field.is_none() { $flags.$field = $file.$field.clone(); } )*
    };
}

impl RunArgs {
    pub fn merged(mut self, file: &RunArgs) -> Self {
        overlay!(
            self,
            file,
            method,
            g,
            agg,
            threshold,
            grid,
            combine,
            dump,
            dump2,
            gold,
            out,
            predictions,
            table,
            sweep,
            beta
        );
        self
    }
}

impl ReportArgs {
    pub fn merged(mut self, file: &ReportArgs) -> Self {
        overlay!(
            self, file, dev_dump, dev_dump2, dev_gold, test_dump, test_dump2, test_gold, methods, g, agg,
            combine, out, table, beta
        );
        self
    }
}

pub fn method_of(m: MethodArg, g: Option<GArg>) -> Method {
    match m {
        MethodArg::Probability => Method::Probability,
        MethodArg::Topk => Method::TopK,
        MethodArg::Oddballness => Method::Oddballness(match g.unwrap_or(GArg::Identity) {
            GArg::Identity => GFunction::Identity,
            GArg::Square => GFunction::Square,
            GArg::Cube => GFunction::Cube,
        }),
    }
}

pub fn policy_of(a: Option<AggArg>) -> AggregationPolicy {
    match a.unwrap_or(AggArg::Max) {
        AggArg::Max => AggregationPolicy::MaxAnomaly,
        AggArg::Mean => AggregationPolicy::Mean,
        AggArg::First => AggregationPolicy::FirstSubword,
    }
}

pub fn beta_of(b: Option<f64>) -> Result<f64, CliError> {
    match b {
        None => Ok(DEFAULT_BETA),
        Some(b) if b.is_finite() && b > 0.0 => Ok(b),
        Some(b) => Err(CliError::Usage(format!("beta must be positive, got {b}"))),
    }
}

/// Checks that a combination request agrees with the method.
pub fn check_combine(method: Method, combine: CombineArg) -> Result<(), CliError> {
    let ok = match (method, combine) {
        (Method::TopK, _) => false,
        (_, CombineArg::Auto) => true,
        (Method::Oddballness(_), CombineArg::Max) | (Method::Probability, CombineArg::Min) => true,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "cannot combine {method} scores with --combine {}",
            format!("{combine:?}").to_lowercase()
        )))
    }
}

fn round_decimal(x: f64) -> f64 {
    format!("{x:.12}").parse().expect("formatted float")
}

/// Parses a grid flag; `None` means the method's default grid.
pub fn parse_grid(spec: &str) -> Result<Option<Vec<f64>>, CliError> {
    let bad = |why: &str| CliError::Usage(format!("invalid grid `{spec}`: {why}"));
    let spec = spec.trim();
    if spec == "default" {
        return Ok(None);
    }
    if let Some((start, rest)) = spec.split_once(':') {
        let (stop, step) = rest
            .split_once(':')
            .ok_or_else(|| bad("expected start:stop:step"))?;
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if !start.is_finite() || !stop.is_finite() || !step.is_finite() || step <= 0.0 || stop < start {
            return Err(bad("need start <= stop and a positive step"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        if count > 10_000_000 {
            return Err(bad("too many points"));
        }
        return Ok(Some(
            (0..=count)
                .map(|i| round_decimal(start + i as f64 * step))
                .collect(),
        ));
    }
    let values: Result<Vec<f64>, _> = spec.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let values = values.map_err(|_| bad("not a number"))?;
    if values.is_empty() {
        return Err(bad("no values"));
    }
    Ok(Some(values))
}
