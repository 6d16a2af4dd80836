//! `are-lab`: moments, power tables, efficiencies and moderate-deviation
//! rates for the NP-versus-KS comparison under local alternatives.

mod commands;
mod config;
mod layouts;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use are_lab_core::Error;

/// Exit status for a failed numeric computation.
pub const EXIT_NUMERIC: u8 = 3;
/// Exit status when a sample-size search hits its ceiling.
pub const EXIT_EXHAUSTED: u8 = 4;
pub const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "are-lab", version, about = "NP vs KS intermediate efficiency experiments")]
pub struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: machine parallelism).
    #[arg(long, global = true, env = "ARE_LAB_THREADS")]
    pub threads: Option<usize>,
    /// Config file with [simulation] and [grid] sections; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for CSV, Markdown and manifest files.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Monte Carlo replicates per estimate (before --scale).
    #[arg(long, global = true)]
    pub replicates: Option<usize>,
    /// Significance level.
    #[arg(long, global = true, value_parser = open_unit)]
    pub alpha: Option<f64>,
    /// No progress messages on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Quadrature moments of log p under the null and the alternative.
    Moments {
        #[arg(long, value_enum, default_value = "power")]
        family: Family,
        #[arg(long, required = true, num_args = 1.., value_delimiter = ',', value_parser = tail_exponent)]
        r: Vec<f64>,
        #[arg(long, required = true, num_args = 1.., value_delimiter = ',', value_parser = open_unit)]
        theta: Vec<f64>,
        #[arg(long, required = true, num_args = 1.., value_delimiter = ',', value_parser = positive_count)]
        n: Vec<usize>,
        /// Read theta as the weight of the normalized score a = (f - 1)/c.
        #[arg(long)]
        normalized: bool,
    },
    /// Reproduce a power table (1-4) or the sample-size ratio table (5).
    Table {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        id: u8,
        /// Replicate multiplier.
        #[arg(long, default_value_t = 1.0, value_parser = positive_real)]
        scale: f64,
        /// Restrict to these sample sizes (tables 1-4).
        #[arg(long, num_args = 1.., value_delimiter = ',', value_parser = cell_list)]
        cells: Vec<Vec<usize>>,
        /// Restrict table 5 to this tail exponent.
        #[arg(long, value_parser = tail_exponent)]
        r: Option<f64>,
        /// Restrict to this theta column (tables 1-4) or row (table 5).
        #[arg(long, value_parser = open_unit)]
        theta: Option<f64>,
        /// Restrict table 5 to these power levels (percent).
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        power: Vec<u32>,
        /// Skip cells with sample sizes above this.
        #[arg(long, value_parser = positive_count)]
        max_n: Option<usize>,
    },
    /// Closed-form efficiency of NP relative to KS for f_r.
    Efficiency {
        #[arg(long, required = true, num_args = 1.., value_delimiter = ',', value_parser = tail_exponent)]
        r: Vec<f64>,
    },
    /// Moderate-deviation rate -log P / (n x^2) along a grid of n.
    Moddev {
        #[arg(long, value_enum)]
        test: TestKind,
        #[arg(long, required = true, num_args = 1.., value_delimiter = ',', value_parser = positive_count)]
        n: Vec<usize>,
        /// x as a function of n: `power:<e>` (x = n^e), `const:<x>`, or
        /// `sigma:<c>` (x = c sigma_0n, NP only). Defaults: power:-0.25 for
        /// ks, sigma:1 for np.
        #[arg(long, value_parser = x_rule)]
        x_rule: Option<XRule>,
        /// Tail exponent of the alternative (np).
        #[arg(long, value_parser = tail_exponent)]
        r: Option<f64>,
        /// Alternative weight (np).
        #[arg(long, value_parser = open_unit)]
        theta: Option<f64>,
        /// Read theta in the normalized parametrization (np).
        #[arg(long)]
        normalized: bool,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Power,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestKind {
    Ks,
    Np,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum XRule {
    Power(f64),
    Const(f64),
    Sigma(f64),
}

fn open_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} must lie strictly between 0 and 1"))
    }
}

fn tail_exponent(s: &str) -> Result<f64, String> {
    open_unit(s)
}

fn positive_real(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

fn positive_count(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("'{s}' is not a count"))?;
    if v > 0 {
        Ok(v)
    } else {
        Err("must be at least 1".into())
    }
}

/// Accepts "148" or "148 153" (space separated inside one argument).
fn cell_list(s: &str) -> Result<Vec<usize>, String> {
    let v: Result<Vec<usize>, String> = s.split_whitespace().map(positive_count).collect();
    let v = v?;
    if v.is_empty() {
        return Err("empty cell list".into());
    }
    Ok(v)
}

fn x_rule(s: &str) -> Result<XRule, String> {
    let (kind, val) = s.split_once(':').ok_or_else(|| format!("x rule '{s}' needs the form kind:value"))?;
    let v: f64 = val.parse().map_err(|_| format!("'{val}' is not a number"))?;
    match kind {
        "power" if v < 0.0 && v > -0.5 => Ok(XRule::Power(v)),
        "power" => Err("power exponent must lie in (-1/2, 0)".into()),
        "const" if v > 0.0 && v < 1.0 => Ok(XRule::Const(v)),
        "const" => Err("const x must lie in (0,1)".into()),
        "sigma" if v > 0.0 => Ok(XRule::Sigma(v)),
        "sigma" => Err("sigma multiple must be positive".into()),
        _ => Err(format!("unknown x rule '{kind}' (use power, const or sigma)")),
    }
}

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Config(_) | Error::InfiniteEfficiency { .. } => EXIT_USAGE,
        Error::SearchExhausted { .. } => EXIT_EXHAUSTED,
        _ => EXIT_NUMERIC,
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(EXIT_NUMERIC);
        }
    }
    match commands::run(&cli, &args) {
        Ok(code) => ExitCode::from(code),
        Err(commands::Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
