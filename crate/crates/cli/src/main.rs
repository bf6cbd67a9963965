use std::path::PathBuf;

use anyhow::Result;
use clap::Parser;
use pcw_cli::{run, Command, MatchFlags};

/// Photonic crystal waveguide bands, projections and phase-matching search.
#[derive(Parser)]
#[command(name = "pcw", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.directory`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// match: degenerate search (signal and idler on one band).
    #[arg(long, conflicts_with = "nondegenerate")]
    degenerate: bool,
    /// match: search all band and wavevector pairs.
    #[arg(long)]
    nondegenerate: bool,
    /// match: attach overlap integrals to each solution.
    #[arg(long)]
    overlap: bool,
}

fn main() -> Result<()> {
    let args = Args::parse();
    let flags = MatchFlags {
        degenerate: args.degenerate,
        nondegenerate: args.nondegenerate,
        overlap: args.overlap,
    };
    for path in run(args.command, &args.config, args.out.as_deref(), flags)? {
        println!("{}", path.display());
    }
    Ok(())
}
