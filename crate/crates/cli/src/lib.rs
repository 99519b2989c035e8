// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

//! `msgate` command-line tool. Each subcommand reads a [`RunConfig`], writes
//! CSV or JSON tables into the output directory with a `<stem>.meta.json`
//! sidecar next to each, and exits 0 only when every in-process assertion
//! holds (1 on an assertion failure, 2 on a usage, config or numeric error).

pub mod commands;
pub mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use config::RunConfig;

pub const TOOL: &str = "msgate";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Gate(#[from] msgate::GateError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Parser)]
#[command(name = "msgate", version, about = "Amplitude-shaped Molmer-Sorensen gate design and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gate parameters as JSON records, with closure checks.
    Solve(CommonArgs),
    /// Phase-space trajectory (t,F,G,A) per scheme.
    Trajectory(CommonArgs),
    /// Populations (t,p0,p1,p2) per scheme.
    Evolve(CommonArgs),
    /// Fidelity against frequency-noise FWHM for every scheme.
    NoiseSweep(CommonArgs),
    /// Synthetic parity experiment and fidelity estimates.
    Parity(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Trajectory(_) => "trajectory",
            Command::Evolve(_) => "evolve",
            Command::NoiseSweep(_) => "noise-sweep",
            Command::Parity(_) => "parity",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Solve(a)
            | Command::Trajectory(a)
            | Command::Evolve(a)
            | Command::NoiseSweep(a)
            | Command::Parity(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default: `out` from the config, else the current directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// One named check made while running a command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Assertion {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// A file to write and the checks that concern it.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file: String,
    pub contents: String,
    pub assertions: Vec<Assertion>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub artifacts: Vec<Artifact>,
    pub seeds: BTreeMap<String, u64>,
}

impl Report {
    pub fn assertions(&self) -> impl Iterator<Item = &Assertion> {
        self.artifacts.iter().flat_map(|a| &a.assertions)
    }

    pub fn passed(&self) -> bool {
        self.assertions().all(|a| a.passed)
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    output: &'a str,
    seeds: &'a BTreeMap<String, u64>,
    config: &'a RunConfig,
    assertions: &'a [Assertion],
}

/// Sidecar file name for an output: `trajectory_sin2_k17.csv` gets
/// `trajectory_sin2_k17.meta.json`.
pub fn sidecar_name(file: &str) -> String {
    let stem = Path::new(file).file_stem().and_then(|s| s.to_str()).unwrap_or(file);
    format!("{stem}.meta.json")
}

/// Runs a command on an already loaded config without touching the disk.
pub fn dispatch(command: &str, cfg: &RunConfig) -> Result<Report, CliError> {
    match command {
        "solve" => commands::solve(cfg),
        "trajectory" => commands::trajectory(cfg),
        "evolve" => commands::evolve(cfg),
        "noise-sweep" => commands::noise_sweep(cfg),
        "parity" => commands::parity(cfg),
        other => Err(CliError::Config(format!("unknown command `{other}`"))),
    }
}

/// Writes every artifact and its sidecar into `dir`, returning the paths.
pub fn write_report(dir: &Path, command: &str, cfg: &RunConfig, report: &Report) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for a in &report.artifacts {
        let path = dir.join(&a.file);
        std::fs::write(&path, &a.contents)?;
        let meta = Sidecar {
            tool: TOOL,
            version: VERSION,
            command,
            output: &a.file,
            seeds: &report.seeds,
            config: cfg,
            assertions: &a.assertions,
        };
        let mut json = serde_json::to_string_pretty(&meta)?;
        json.push('\n');
        std::fs::write(dir.join(sidecar_name(&a.file)), json)?;
        written.push(path);
    }
    Ok(written)
}

fn execute(cli: &Cli) -> Result<Report, CliError> {
    let args = cli.command.args();
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let name = cli.command.name();
    let report = pool.install(|| dispatch(name, &cfg))?;
    for path in write_report(&dir, name, &cfg, &report)? {
        println!("wrote {}", path.display());
    }
    Ok(report)
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(report) => {
            let total = report.assertions().count();
            let failed: Vec<&Assertion> = report.assertions().filter(|a| !a.passed).collect();
            for a in &failed {
                eprintln!("FAIL {}: {}", a.name, a.detail);
            }
            println!("{} assertions, {} failed", total, failed.len());
            if failed.is_empty() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("msgate: {e}");
            2
        }
    }
}
