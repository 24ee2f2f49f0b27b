mod commands;
mod input;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ffn_core::{EnumerationOptions, ErrorKind, TraceConfig, DEFAULT_SIZE_BOUND};

use input::{load_network, JetArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] ffn_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Parse => 2,
                ErrorKind::Precondition => 3,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

/// Feed-forward coupled cell networks: structure, lifts and bifurcation
/// branches.
///
/// NETWORK arguments are JSON files, names from the bundled corpus (see
/// FFN_CORPUS_DIR), or `random[:seed]`.
#[derive(Debug, Parser)]
#[command(name = "ffn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    format: Format,
    /// Shorthand for `--format json`.
    #[arg(long, global = true)]
    json: bool,
    /// Seed used by `random` network arguments.
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Layers, backward connectedness and connectivity.
    Analyze { network: String },
    /// Balanced colorings, optionally only those with a given quotient.
    Quotients {
        network: String,
        #[arg(long)]
        quotient: Option<String>,
        #[arg(long, default_value_t = DEFAULT_SIZE_BOUND)]
        bound: usize,
    },
    /// Classify a lift and decompose it into basic lifts.
    Lifts { base: String, lift: String },
    /// Enumerate bifurcation branch signatures.
    Branches {
        network: String,
        #[command(flatten)]
        jet: JetArgs,
    },
    /// Decide whether every branch on the lift is lifted from the base.
    Lifting {
        base: String,
        lift: String,
        #[command(flatten)]
        jet: JetArgs,
    },
    /// Trace equilibria numerically and match them with the signatures.
    Verify {
        network: String,
        #[command(flatten)]
        jet: JetArgs,
        /// Largest |lambda| of the sampling grid.
        #[arg(long)]
        lambda_start: Option<f64>,
        /// Ratio between consecutive |lambda| samples.
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
}

fn run(cli: &Cli, warnings: &mut Vec<String>) -> Result<commands::Output, CliError> {
    let load = |s: &str| load_network(s, cli.seed);
    let opts = |jet: &JetArgs| EnumerationOptions { zero_tolerance: jet.eps };
    let out = match &cli.command {
        Command::Analyze { network } => commands::analyze(&load(network)?)?,
        Command::Quotients {
            network,
            quotient,
            bound,
        } => {
            let target = quotient.as_deref().map(load).transpose()?;
            commands::quotients(&load(network)?, target.as_ref(), *bound)?
        }
        Command::Lifts { base, lift } => commands::lifts(&load(base)?, &load(lift)?)?,
        Command::Branches { network, jet } => {
            let net = load(network)?;
            commands::branches(&net, &jet.build(warnings)?, opts(jet))?
        }
        Command::Lifting { base, lift, jet } => {
            let (n, l) = (load(base)?, load(lift)?);
            commands::lifting(&n, &l, &jet.build(warnings)?)?
        }
        Command::Verify {
            network,
            jet,
            lambda_start,
            ratio,
            samples,
        } => {
            let net = load(network)?;
            let mut cfg = TraceConfig::default();
            if let Some(v) = lambda_start {
                cfg.lambda_start = *v;
            }
            if let Some(v) = ratio {
                cfg.ratio = *v;
            }
            if let Some(v) = samples {
                cfg.samples = *v;
            }
            if !(cfg.lambda_start > 0.0 && cfg.ratio > 0.0 && cfg.ratio < 1.0) {
                return Err(CliError::Usage("need --lambda-start > 0 and 0 < --ratio < 1".into()));
            }
            commands::verify(&net, &jet.build(warnings)?, opts(jet), &cfg)?
        }
    };
    // disconnected networks are analyzed anyway
    if out.json.get("connected") == Some(&serde_json::Value::Bool(false)) {
        warnings.push("network is not connected".into());
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let format = if cli.json { Format::Json } else { cli.format };
    let mut warnings = Vec::new();
    let result = run(&cli, &mut warnings);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    match result {
        Ok(out) => {
            let text = match format {
                Format::Table => out.table,
                Format::Json => serde_json::to_string_pretty(&out.json).expect("serializable") + "\n",
                Format::Csv => match out.csv {
                    Some(csv) => csv,
                    None => {
                        eprintln!("error: this command has no CSV output");
                        return ExitCode::from(1);
                    }
                },
            };
            // a closed pipe downstream is not an error of ours
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            ExitCode::from(out.status)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
