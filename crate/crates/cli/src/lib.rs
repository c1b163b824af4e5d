//! `qsdlab` driver: reads a JSON configuration, runs one command and writes
//! JSON/CSV artifacts plus a `manifest.json` into the output directory.
//!
//! Exit codes: 0 success, 2 negative mathematical verdict (e.g. `c₁ = 0`),
//! 1 any other error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chains;
pub mod config;
pub mod error;
pub mod output;
pub mod report;
pub mod transport;

use std::path::Path;

pub use config::{Command, RunConfig};
pub use error::{CliError, Result};
pub use output::{Manifest, Summary};

use config::{load_json, ChainConfig, NeutronConfig, DEFAULT_TOL};
use output::{now_unix, sha256_hex, versions, OutDir, RunRecord, MANIFEST};

/// Outcome of a successful dispatch.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub verdicts: Vec<String>,
    /// Printed to stdout by the binary.
    pub message: String,
}

fn config_path(cfg: &RunConfig) -> Result<&Path> {
    let p = cfg.config.as_deref().ok_or_else(|| CliError::Usage(format!("`{}` needs --config", cfg.command.name())))?;
    if !p.exists() {
        return Err(CliError::Usage(format!("config file {} does not exist", p.display())));
    }
    Ok(p)
}

fn dispatch(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.command == Command::Report {
        let text = report::report(&cfg.out)?;
        return Ok(Outcome { exit_code: 0, verdicts: vec![], message: text });
    }
    let path = config_path(cfg)?;
    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0) {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    let (rec, bytes, mut out): (RunRecord, Vec<u8>, OutDir) = match cfg.command {
        Command::Neutron => {
            let (c, bytes) = load_json::<NeutronConfig>(path)?;
            let mut out = OutDir::create(&cfg.out)?;
            (transport::run(&c, cfg.seed, &mut out)?, bytes, out)
        }
        command => {
            let (c, bytes) = load_json::<ChainConfig>(path)?;
            let mut out = OutDir::create(&cfg.out)?;
            (chains::run(&c, command, tol, &mut out)?, bytes, out)
        }
    };
    out.plot_script()?;
    let manifest = Manifest {
        command: cfg.command.name().to_string(),
        model: rec.model.clone(),
        config: Some(path.display().to_string()),
        config_sha256: Some(sha256_hex(&bytes)),
        seed: rec.seed,
        versions: versions(),
        artifacts: out.artifacts().to_vec(),
        summary: rec.summary.clone(),
        verdicts: rec.verdicts.clone(),
        exit_code: rec.exit_code,
        created_unix: now_unix(),
    };
    out.json(MANIFEST, &manifest)?;
    let message = format!("{}: {} [{}]\n", manifest.command, manifest.model, rec.verdicts.join(", "));
    Ok(Outcome { exit_code: rec.exit_code, verdicts: rec.verdicts, message })
}

/// Runs one command, on a dedicated pool when a thread count is given.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(cfg))
        }
        None => dispatch(cfg),
    }
}

/// Runs and maps the result to a process exit code, printing diagnostics.
pub fn execute(cfg: &RunConfig) -> i32 {
    match run(cfg) {
        Ok(o) => {
            print!("{}", o.message);
            o.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
