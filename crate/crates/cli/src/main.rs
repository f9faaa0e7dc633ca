use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use mms_cli::{run, ScenarioConfig};
use mms_core::mmspace::io::{build_space, read_space, write_space, SpaceSpec};

#[derive(Parser)]
#[command(name = "mms", version, about = "Experiments on finite metric measure spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every enabled analysis of a scenario.
    Run {
        config: PathBuf,
        /// Override the scenario's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario without running it.
    Validate { config: PathBuf },
    #[command(subcommand)]
    Space(SpaceCommand),
}

#[derive(Subcommand)]
enum SpaceCommand {
    /// Print size, edge count, mesh, diameter and mass of a space file.
    Info { file: PathBuf },
    /// Write a generated space (`interval:L:n`, `circle:L:n`, `path:FILE`) to a file.
    Gen {
        spec: SpaceSpec,
        #[arg(short, long)]
        output: PathBuf,
    },
}

/// Failures that map to exit status 2.
struct Fatal(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Fatal {
    fn from(e: E) -> Self {
        Self(e.into())
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("MMS_THREADS") else { return Ok(()) };
    let n: usize = v.parse().with_context(|| format!("MMS_THREADS={v} is not a thread count"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run_scenario(config: &Path, out: Option<PathBuf>) -> Result<bool, Fatal> {
    let mut cfg = ScenarioConfig::load(config)?;
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    let report = run(&cfg)?;
    for line in report.failed_checks() {
        eprintln!("FAIL {line}");
    }
    println!(
        "{}: {} analyses, {} -> {}",
        cfg.name,
        report.analyses.len(),
        if report.passed { "pass" } else { "fail" },
        cfg.output_dir.join("report.json").display()
    );
    Ok(report.passed)
}

fn validate(config: &Path) -> Result<bool, Fatal> {
    let cfg = ScenarioConfig::load(config)?;
    let problems = cfg.diagnostics();
    for p in &problems {
        println!("{p}");
    }
    if problems.is_empty() {
        println!("{}: valid", cfg.name);
        Ok(true)
    } else {
        Err(Fatal(anyhow::anyhow!("{} problem(s) in {}", problems.len(), config.display())))
    }
}

fn space_info(file: &Path) -> Result<bool, Fatal> {
    let f = File::open(file).with_context(|| format!("cannot open {}", file.display()))?;
    let space = read_space(BufReader::new(f)).with_context(|| file.display().to_string())?;
    println!("n = {}", space.len());
    println!("edges = {}", space.edge_count());
    println!("h = {}", space.h());
    println!("diameter = {}", space.diameter());
    println!("mass = {}", space.total_mass());
    Ok(true)
}

fn space_gen(spec: &SpaceSpec, output: &Path) -> Result<bool, Fatal> {
    let space = build_space(spec)?;
    let f = File::create(output).with_context(|| format!("cannot create {}", output.display()))?;
    let mut w = BufWriter::new(f);
    write_space(&space, &mut w)?;
    w.flush()?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Run { config, out } => run_scenario(&config, out),
        Command::Validate { config } => validate(&config),
        Command::Space(SpaceCommand::Info { file }) => space_info(&file),
        Command::Space(SpaceCommand::Gen { spec, output }) => space_gen(&spec, &output),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Fatal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
