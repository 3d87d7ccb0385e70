//! `concord`: compatibility checks, attaining samplers and block/tree
//! utilities for matrices of pairwise concordance measures.

mod commands;
mod error;
mod input;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use concord::hierarchy::Family;
use concord::Measure;

use crate::error::{CliError, CliResult};
use crate::report::Report;

const AFTER_HELP: &str = "\
Input files are detected by content:
  matrix  one row per line, comma-separated values
  block   `sizes=4,3,2; within=0.4,0.3,0.2; between=0.1,0.1,0.15`
          (fields may be on separate lines; between is the upper triangle, row by row)
  tree    nested form `((1,2,3,4);0.4,((5,6,7);0.3,(8,9);0.2);0.15);0.1`
          node := '(' item {',' item} ')' [';' value], item := index | node
          or indented form, one node per line, two spaces per level:
            0.1:
              0.4: 1 2 3 4
              0.15:
                0.3: 5 6 7
                0.2: 8 9

Exit codes: 0 success or compatible, 1 negative verdict, 2 usage or input
error, 3 numerical failure.";

#[derive(Parser, Debug)]
#[command(name = "concord", version, about = "Concordance matrix compatibility and attainment", after_help = AFTER_HELP)]
pub struct Cli {
    /// Print the report as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    /// Numerical tolerance for symmetry, PSD and range checks.
    #[arg(long, global = true, env = "CONCORD_TOL", default_value_t = 1e-9)]
    pub tol: f64,
    /// Seed for randomized commands (required by them).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress the report; only the exit code and output files remain.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    /// Positive semi-definiteness.
    Psd,
    /// Correlation matrix of a symmetric Bernoulli vector.
    Bern,
    /// Spearman's rho matrix.
    Spearman,
    /// Van der Waerden matrix (equivalent to PSD).
    Waerden,
    /// Necessary condition for Kendall's tau matrices.
    TauNecessary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BlockAction {
    Expand,
    Phi,
    Psd,
    Chol,
    Reduce,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TreeAction {
    /// Print the hierarchical matrix of a tree.
    Matrix,
    /// Recover the tree of a hierarchical matrix.
    Recover,
    /// Exit 0 iff values are nonnegative and do not decrease towards the leaves.
    Proper,
    /// Solve for one parameter per node.
    Calibrate,
    /// Calibrate and draw samples.
    Sample,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide whether a matrix is valid for a measure.
    Check {
        input: PathBuf,
        #[arg(long, short, value_enum)]
        measure: CheckKind,
        /// Where to write the certificate when `bern` succeeds.
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Build a sampler attaining the input matrix and save it as JSON.
    Attain {
        input: PathBuf,
        #[arg(long, short, value_parser = parse_measure)]
        measure: Measure,
        #[arg(long, short)]
        out: PathBuf,
        /// Margin descriptor for Bernoulli-mixture models.
        #[arg(long, default_value = "uniform")]
        margin: String,
        /// Generator family for tree inputs.
        #[arg(long, value_parser = parse_family, default_value = "gumbel")]
        family: Family,
    },
    /// Draw rows from a saved model into a CSV file.
    Sample {
        model: PathBuf,
        #[arg(long, short)]
        n: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Estimate a concordance matrix from CSV data.
    Estimate {
        data: PathBuf,
        #[arg(long, short, value_parser = parse_measure)]
        measure: Measure,
    },
    /// Attainable correlation range of two transforms.
    Bounds {
        g1: Option<String>,
        g2: Option<String>,
        #[arg(long, default_value_t = 1000)]
        quad_n: usize,
        /// `FAMILY:LO:HI:STEPS` with FAMILY lognormal or bern: CSV over the square grid.
        #[arg(long, conflicts_with_all = ["g1", "g2"])]
        grid: Option<String>,
        /// Write the grid CSV here instead of standard output.
        #[arg(long, short, requires = "grid")]
        out: Option<PathBuf>,
    },
    /// Block matrix utilities.
    Block {
        spec: PathBuf,
        #[arg(value_enum)]
        action: BlockAction,
        /// With `chol`, also print the assembled factor.
        #[arg(long)]
        dense: bool,
    },
    /// Hierarchical tree utilities.
    Tree {
        input: PathBuf,
        #[arg(value_enum)]
        action: TreeAction,
        #[arg(long, value_parser = parse_family, default_value = "gumbel")]
        family: Family,
        #[arg(long, short, value_parser = parse_measure, default_value = "tau")]
        measure: Measure,
        /// Rows for `sample`.
        #[arg(long, short)]
        n: Option<usize>,
        /// Model (calibrate) or CSV (sample) output.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn parse_measure(s: &str) -> Result<Measure, String> {
    s.parse::<Measure>().map_err(|e| e.to_string())
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse()
}

fn emit(cli: &Cli, report: &Report) {
    if cli.quiet {
        return;
    }
    let mut out = std::io::stdout().lock();
    let _ = if cli.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report.json()).expect("json value"))
    } else {
        write!(out, "{}", report.text())
    };
}

fn run(cli: &Cli) -> CliResult<Report> {
    if !(cli.tol >= 0.0 && cli.tol.is_finite()) {
        return Err(CliError::usage(anyhow::anyhow!("tolerance must be a finite nonnegative number")));
    }
    commands::dispatch(cli)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet {
        "error"
    } else {
        "warn"
    }))
    .init();
    match run(&cli) {
        Ok(report) => {
            emit(&cli, &report);
            ExitCode::from(report.status.code())
        }
        Err(e) => {
            log::debug!("{:?}", e.error);
            if cli.json && !cli.quiet {
                let v = serde_json::json!({ "error": format!("{:#}", e.error), "exit_code": e.code });
                println!("{}", serde_json::to_string_pretty(&v).expect("json value"));
            }
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
