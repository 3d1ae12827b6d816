//! Command-line front end: `run`, `validate` and `suite`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dnp_core::error::Error;
use dnp_core::harness::{prepare, run_experiment, run_suite, write_outputs};

#[derive(Parser)]
#[command(name = "dnp-steady", version, about = "Steady states of nonlocal reaction-diffusion problems with variable-exponent flux")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment configuration.
    Run {
        config: PathBuf,
        /// Output directory [default: `out` from the config, else ./out]
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and check a configuration without solving.
    Validate { config: PathBuf },
    /// Run all bundled configurations.
    Suite {
        #[arg(long, default_value = "out/suite")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Construction(_) | Error::Domain(_) | Error::Shape { .. } => 2,
        Error::Numeric(_) => 3,
        Error::Structural(_) => 1,
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::Validate { config } => read(&config).and_then(|t| prepare(&t, None)).map_err(|e| with_path(&config, e)).map(|exp| {
            println!(
                "{}: ok ({} nodes, λ₀ = {:.6}, δ₀ = {})",
                exp.name,
                exp.model.node_count(),
                exp.model.src.lambda0(),
                exp.model.src.delta0()
            );
            if let Some(w) = exp.model.p.embedding_warning(exp.model.mesh.dimension()) {
                println!("warning: {w}");
            }
            true
        }),
        Command::Run { config, out, seed } => read(&config)
            .and_then(|t| prepare(&t, seed))
            .map_err(|e| with_path(&config, e))
            .and_then(|exp| {
                let out = out.or_else(|| exp.config.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
                let run = run_experiment(&exp)?;
                write_outputs(&out, &exp, &run)?;
                for a in &run.assertions {
                    println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
                }
                println!("{}: {} (output in {})", run.name, if run.passed { "passed" } else { "failed" }, out.display());
                Ok(run.passed)
            }),
        Command::Suite { out, seed } => run_suite(Some(&out), seed).map(|s| {
            for e in &s.entries {
                println!("{} {}", if e.passed { "PASS" } else { "FAIL" }, e.name);
                for f in &e.failed_assertions {
                    println!("    {f}");
                }
                if let Some(err) = &e.error {
                    println!("    error: {err}");
                }
            }
            s.passed
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
