//! Library side of the `pcw` command: configuration, output formatting and
//! the command implementations.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub use commands::{Command, MatchFlags};
pub use config::{parse_config, RunConfig};

use commands::RunContext;
use output::{OutputSet, Provenance};

/// Worker count: `PCW_THREADS` if set, else the config knob, else rayon's default.
pub fn worker_count(cfg: &RunConfig) -> Result<Option<usize>> {
    match std::env::var("PCW_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("PCW_THREADS={v:?} is not a count"))?;
            anyhow::ensure!(n >= 1, "PCW_THREADS must be >= 1");
            Ok(Some(n))
        }
        Err(_) => Ok(cfg.threads),
    }
}

/// Runs one command. On failure every file written by this run is removed.
pub fn run(cmd: Command, config_path: &Path, out_override: Option<&Path>, flags: MatchFlags) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("reading config {}", config_path.display()))?;
    let cfg = parse_config(&text)?;
    let config_dir = config_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let out_dir = match out_override {
        Some(p) => p.to_path_buf(),
        None => commands::resolve(&config_dir, &cfg.output.directory),
    };
    let mut builder = rayon::ThreadPoolBuilder::new().stack_size(64 << 20);
    if let Some(n) = worker_count(&cfg)? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building worker pool")?;

    let mut out = OutputSet::create(&out_dir)?;
    let mut prov = Provenance::new(cmd.name(), &text, cfg.solver.cutoff);
    let result = pool.install(|| {
        let mut ctx = RunContext {
            cfg: &cfg,
            config_dir: &config_dir,
            out: &mut out,
            prov: &mut prov,
            flags,
        };
        commands::execute(cmd, &mut ctx)
    });
    match result {
        Ok(()) => out.finish(prov),
        Err(e) => {
            out.discard();
            Err(e.context(format!("command `{}` failed", cmd.name())))
        }
    }
}
