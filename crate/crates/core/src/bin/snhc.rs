use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snhc::scanner::{cmd_certify, cmd_scan, cmd_tree, load_config, ScanError};

#[derive(Parser)]
#[command(name = "snhc", version, about = "Certify, scan and grow homoclinic trees for saddle-node cycles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Scenario JSON document.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a field, e.g. `--set map.lambda=0.95`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Hypotheses and return-map certificates over the grid.
    Certify(ConfigArgs),
    /// Certificates and class verdicts over the (t, s) grid.
    Scan(ConfigArgs),
    /// Homoclinic tree at the first grid point.
    Tree(ConfigArgs),
}

fn run(cli: Cli) -> Result<i32, ScanError> {
    let (args, which) = match &cli.command {
        Command::Certify(a) => (a, "certify"),
        Command::Scan(a) => (a, "scan"),
        Command::Tree(a) => (a, "tree"),
    };
    let cfg = load_config(args.config.as_deref(), &args.set)?;
    let outcome = match which {
        "certify" => cmd_certify(&cfg)?,
        "scan" => cmd_scan(&cfg)?,
        _ => cmd_tree(&cfg)?.0,
    };
    for row in &outcome.rows {
        let verdict = row.classes.as_ref().map(|c| c.verdict.as_str()).unwrap_or("-");
        println!("t={:e} s={:e} {} {}", row.t, row.s, row.status(), verdict);
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("snhc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
