// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kernsim_core::harness::{audit, check_file, run_files, ExitStatus, RunOptions, ScenarioFile};
use kernsim_core::trace::{parse_jsonl, render_jsonl, render_pretty};

#[derive(Parser)]
#[command(name = "kernsim", version, about = "Deterministic embedded kernel simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a board, load apps and run to completion.
    Run {
        #[arg(long)]
        board: PathBuf,
        /// Scenario scripts (JSON) or packed binaries.
        #[arg(long = "app")]
        apps: Vec<PathBuf>,
        #[arg(long, default_value_t = kernsim_core::harness::run::DEFAULT_MAX_TICKS)]
        max_ticks: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the trace here instead of stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Validate a board without running it.
    Check {
        #[arg(long)]
        board: PathBuf,
    },
    /// Pack and sign a scenario into a process binary.
    Pack {
        #[arg(long)]
        app: PathBuf,
        #[arg(long, default_value_t = 0)]
        key_id: u16,
        #[arg(long)]
        out: PathBuf,
    },
    /// Audit a JSONL trace file.
    Audit { trace: PathBuf },
}

fn pretty() -> bool {
    std::env::var("KERNSIM_TRACE_PRETTY").is_ok_and(|v| v == "1")
}

fn write_output(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            board,
            apps,
            max_ticks,
            seed,
            trace,
        } => {
            let outcome = run_files(&board, &apps, RunOptions { max_ticks, seed });
            for v in &outcome.violations {
                eprintln!("error: {v}");
            }
            let events = outcome.trace.events();
            let text = if pretty() {
                render_pretty(&events)
            } else {
                render_jsonl(&events)
            };
            if let Err(e) = write_output(trace.as_deref(), &text) {
                eprintln!("error: writing trace: {e}");
                return ExitCode::from(ExitStatus::ConfigError.code() as u8);
            }
            eprintln!(
                "{}: stopped ({}) after {} ticks",
                board.display(),
                outcome.stop.name(),
                outcome.ticks
            );
            ExitCode::from(outcome.status.code() as u8)
        }
        Command::Check { board } => match check_file(&board) {
            Ok(()) => {
                println!("{}: ok", board.display());
                ExitCode::SUCCESS
            }
            Err(violations) => {
                for v in &violations {
                    println!("{}: {v}", board.display());
                }
                ExitCode::from(ExitStatus::ConfigError.code() as u8)
            }
        },
        Command::Pack { app, key_id, out } => {
            let packed = std::fs::read_to_string(&app)
                .map_err(|e| e.to_string())
                .and_then(|t| ScenarioFile::parse(&t).map_err(|e| e.to_string()))
                .map(|f| f.pack(key_id).encode());
            match packed.and_then(|bytes| std::fs::write(&out, bytes).map_err(|e| e.to_string())) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {}: {e}", app.display());
                    ExitCode::from(ExitStatus::ConfigError.code() as u8)
                }
            }
        }
        Command::Audit { trace } => {
            let events = std::fs::read_to_string(&trace)
                .map_err(|e| e.to_string())
                .and_then(|t| parse_jsonl(&t).map_err(|e| e.to_string()));
            let events = match events {
                Ok(ev) => ev,
                Err(e) => {
                    eprintln!("error: {}: {e}", trace.display());
                    return ExitCode::from(ExitStatus::ConfigError.code() as u8);
                }
            };
            let report = audit(&events);
            for v in &report.violations {
                println!("violation: {v}");
            }
            println!(
                "{} events, {} violations, {} privileged ops, {} upcalls, expects {} passed / {} failed",
                events.len(),
                report.violations.len(),
                report.privileged_ops,
                report.upcalls,
                report.expects_passed,
                report.expects_failed
            );
            if report.is_clean() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
