//! Command-line front end for [`disac`].
//!
//! Sweep data is written as CSV, scalar summaries as JSON; both embed the
//! resolved [`manifest::RunManifest`] so that `disac rerun FILE` regenerates
//! the file byte for byte.

pub mod args;
pub mod commands;
pub mod error;
pub mod format;
pub mod manifest;
pub mod sim;

use std::io::Write;
use std::path::{Path, PathBuf};

use args::{from_table, read_config, Cli, Command, GlobalFileArgs};
use commands::{execute, Outcome};
use error::{CliError, Result};
use manifest::RunManifest;

/// Environment variable overriding the directory relative `--out` paths are
/// resolved against.
pub const OUT_DIR_ENV: &str = "DISAC_OUT_DIR";

/// Resolves flags, config file and defaults into a manifest, or loads one
/// for `rerun`.
pub fn manifest_from_cli(cli: Cli) -> Result<(RunManifest, Option<usize>, Option<String>)> {
    let table = match &cli.config {
        Some(path) => Some((read_config(path)?, path.clone())),
        None => None,
    };
    let global: GlobalFileArgs = match &table {
        Some((t, path)) => from_table(t, path)?,
        None => GlobalFileArgs::default(),
    };
    let threads = cli.threads.or(global.threads);
    let out = cli.out.or(global.out);

    macro_rules! resolve {
        ($args:expr) => {{
            let file = match &table {
                Some((t, path)) => from_table(t, path)?,
                None => Default::default(),
            };
            $args.resolve(file)?
        }};
    }
    let params = match cli.command {
        Command::Plan(a) => resolve!(a),
        Command::Surface(a) => resolve!(a),
        Command::Feasible(a) => resolve!(a),
        Command::Allocate(a) => resolve!(a),
        Command::Energy(a) => resolve!(a),
        Command::Simulate(a) => resolve!(a),
        Command::Rerun(r) => {
            let text = std::fs::read_to_string(&r.file).map_err(|source| CliError::Io {
                path: r.file.clone(),
                source,
            })?;
            let manifest = RunManifest::extract(&text, &r.file)?;
            // The embedded output path is part of the reproduced bytes; the
            // rerun itself writes wherever `--out` says.
            return Ok((manifest, threads, out));
        }
    };
    Ok((RunManifest::new(params, out.clone()), threads, out))
}

pub fn resolve_output_path(out: &str) -> PathBuf {
    let p = Path::new(out);
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if p.is_relative() => Path::new(&dir).join(p),
        _ => p.to_path_buf(),
    }
}

fn write_output(outcome: &Outcome, out: Option<&str>) -> Result<()> {
    match out {
        Some(out) => {
            let path = resolve_output_path(out);
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|source| CliError::Io {
                    path: parent.to_path_buf(),
                    source,
                })?;
            }
            std::fs::write(&path, &outcome.text).map_err(|source| CliError::Io { path, source })
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(outcome.text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = manifest_from_cli(cli).and_then(|(manifest, threads, out)| {
        let outcome = execute(&manifest, threads)?;
        write_output(&outcome, out.as_deref())?;
        Ok(outcome.exit_code)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
