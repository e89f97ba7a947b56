//! `piston`: simulate, average and run convergence studies for the
//! heavy-piston model.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 bad configuration. Failures
//! print one JSON line on stderr.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Parser, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Verb {
    Simulate,
    Average,
    Converge,
    Compare,
    Npiston,
    Audit,
}

impl Verb {
    fn name(self) -> &'static str {
        match self {
            Verb::Simulate => "simulate",
            Verb::Average => "average",
            Verb::Converge => "converge",
            Verb::Compare => "compare",
            Verb::Npiston => "npiston",
            Verb::Audit => "audit",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "piston",
    version,
    about = "Heavy piston dynamics and averaging studies"
)]
struct Cli {
    verb: Verb,
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Concurrent grid cells; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides `system.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write a gnuplot script for log-log error plots.
    #[arg(long)]
    plot: bool,
    /// Dotted `key=value` overrides applied after parsing, e.g. `epsilon=0.01`.
    overrides: Vec<String>,
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

fn is_config_error(e: &anyhow::Error) -> bool {
    use piston_core::Error as E;
    e.chain().any(|c| {
        matches!(
            c.downcast_ref::<E>(),
            Some(
                E::Config { .. }
                    | E::Shape(_)
                    | E::Table(_)
                    | E::Chamber { .. }
                    | E::PistonOutOfRange { .. }
            )
        )
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_manifest(
    out: &Path,
    verb: Verb,
    seed: u64,
    config: &Value,
    outputs: &[String],
) -> Result<()> {
    let canonical = serde_json::to_vec(config)?;
    let mut hashes = serde_json::Map::new();
    for name in outputs {
        let bytes =
            std::fs::read(out.join(name)).with_context(|| format!("cannot hash output {name}"))?;
        hashes.insert(name.clone(), Value::String(sha256_hex(&bytes)));
    }
    let manifest = json!({
        "tool": "piston",
        "version": env!("CARGO_PKG_VERSION"),
        "verb": verb.name(),
        "seed": seed,
        "config": config,
        "config_sha256": sha256_hex(&canonical),
        "outputs": hashes,
    });
    piston_core::io::write_json(std::fs::File::create(out.join("manifest.json"))?, &manifest)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("system.seed={seed}"));
    }
    let (doc, effective) = config::load(&cli.config, &overrides).map_err(Failure::Config)?;
    doc.validate().map_err(Failure::Config)?;
    std::fs::create_dir_all(&cli.out)
        .with_context(|| format!("cannot create {}", cli.out.display()))
        .map_err(Failure::Runtime)?;
    let ctx = commands::Context {
        doc: &doc,
        out: &cli.out,
        jobs: cli.jobs.unwrap_or(0),
        plot: cli.plot,
    };
    let result = match cli.verb {
        Verb::Simulate => commands::simulate(&ctx),
        Verb::Average => commands::average(&ctx),
        Verb::Converge => commands::converge(&ctx),
        Verb::Compare => commands::compare(&ctx),
        Verb::Npiston => commands::npiston(&ctx),
        Verb::Audit => commands::audit(&ctx),
    };
    let outputs = result.map_err(|e| {
        if is_config_error(&e) {
            Failure::Config(e)
        } else {
            Failure::Runtime(e)
        }
    })?;
    write_manifest(&cli.out, cli.verb, doc.system.seed, &effective, &outputs)
        .map_err(Failure::Runtime)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!(
                "{}",
                json!({ "status": "error", "kind": "config", "message": format!("{e:#}") })
            );
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!(
                "{}",
                json!({ "status": "error", "kind": "runtime", "message": format!("{e:#}") })
            );
            ExitCode::from(1)
        }
    }
}
