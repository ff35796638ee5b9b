// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! The batch run loop and its exit-code contract.

use std::path::{Path, PathBuf};
use std::rc::Rc;

use serde_json::json;

use crate::hw::SimClock;
use crate::kernel::binary::MAGIC;
use crate::trace::{Actor, Trace};

use super::board::Board;
use super::config::ConfigViolation;
use super::script::ScenarioFile;

pub const DEFAULT_MAX_TICKS: u64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub max_ticks: u64,
    /// Reserved for stochastic scenarios; the simulator itself is
    /// deterministic and never reads it.
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            max_ticks: DEFAULT_MAX_TICKS,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Clean = 0,
    ExpectFailed = 1,
    ConfigError = 2,
    Fatal = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    AllDone,
    Quiescent,
    MaxTicks,
    Fatal,
    ConfigError,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::AllDone => "all_done",
            StopReason::Quiescent => "quiescent",
            StopReason::MaxTicks => "max_ticks",
            StopReason::Fatal => "fatal",
            StopReason::ConfigError => "config_error",
        }
    }
}

pub struct RunOutcome {
    pub status: ExitStatus,
    pub stop: StopReason,
    pub trace: Rc<Trace>,
    pub ticks: u64,
    pub board: Option<Board>,
    pub violations: Vec<String>,
}

/// A process binary ready for the loader.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AppImage {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl AppImage {
    /// Raw binaries pass through untouched; scenarios are packed and signed
    /// with `key_id`.
    pub fn from_bytes(fallback_name: &str, raw: Vec<u8>, key_id: u16) -> Result<AppImage, String> {
        if raw.starts_with(MAGIC) {
            return Ok(AppImage {
                name: fallback_name.into(),
                bytes: raw,
            });
        }
        let text = String::from_utf8(raw).map_err(|e| e.to_string())?;
        let file = ScenarioFile::parse(&text).map_err(|e| e.to_string())?;
        Ok(AppImage {
            name: file.name.clone(),
            bytes: file.pack(key_id).encode(),
        })
    }

    pub fn from_file(path: &Path, key_id: u16) -> Result<AppImage, String> {
        let raw = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("app");
        AppImage::from_bytes(stem, raw, key_id).map_err(|e| format!("{}: {e}", path.display()))
    }
}

fn config_error(messages: Vec<String>) -> RunOutcome {
    let trace = Rc::new(Trace::new(Rc::new(SimClock::new())));
    for m in &messages {
        trace.record(Actor::Kernel, "config_error", json!({ "message": m }));
    }
    trace.record(
        Actor::Kernel,
        "run_end",
        json!({ "reason": StopReason::ConfigError.name(), "exit": ExitStatus::ConfigError.code() }),
    );
    RunOutcome {
        status: ExitStatus::ConfigError,
        stop: StopReason::ConfigError,
        trace,
        ticks: 0,
        board: None,
        violations: messages,
    }
}

fn violations_to_strings(v: Vec<ConfigViolation>) -> Vec<String> {
    v.iter().map(ToString::to_string).collect()
}

/// Builds the board from a file, loads every app and runs.
pub fn run_files(board: &Path, apps: &[PathBuf], opts: RunOptions) -> RunOutcome {
    let board = match Board::from_file(board) {
        Ok(b) => b,
        Err(v) => return config_error(violations_to_strings(v)),
    };
    let key = board.config.signing.key_id;
    let mut images = Vec::new();
    for path in apps {
        match AppImage::from_file(path, key) {
            Ok(img) => images.push(img),
            Err(e) => return config_error(vec![e]),
        }
    }
    run_board(board, &images, opts)
}

/// Loads `apps` on an already-built board, then alternates kernel steps and
/// clock ticks until every process is done, the system is quiescent, a
/// fatal diagnostic fires or `max_ticks` pass.
pub fn run_board(board: Board, apps: &[AppImage], opts: RunOptions) -> RunOutcome {
    for app in apps {
        if let Err(e) = board.load(&app.name, app.bytes.clone()) {
            return config_error(vec![e.to_string()]);
        }
    }
    let kernel = board.kernel.clone();
    let stop = loop {
        let progressed = kernel.kernel_loop_step();
        if kernel.fatal().is_some() {
            break StopReason::Fatal;
        }
        let any_process = !kernel.process_ids().is_empty();
        if kernel.loader_idle() && any_process && kernel.live_processes().is_empty() {
            break StopReason::AllDone;
        }
        if !progressed && kernel.is_quiescent() && board.bus.is_idle() {
            break StopReason::Quiescent;
        }
        if board.clock.now() >= opts.max_ticks {
            break StopReason::MaxTicks;
        }
        board.bus.tick(1);
    };
    let expect_failed = board
        .trace
        .events()
        .iter()
        .any(|e| e.kind == "expect" && e.payload["pass"] == json!(false));
    let status = match stop {
        StopReason::Fatal => ExitStatus::Fatal,
        _ if expect_failed => ExitStatus::ExpectFailed,
        _ => ExitStatus::Clean,
    };
    board.trace.record(
        Actor::Kernel,
        "run_end",
        json!({ "reason": stop.name(), "exit": status.code() }),
    );
    RunOutcome {
        status,
        stop,
        trace: board.trace.clone(),
        ticks: board.clock.now(),
        board: Some(board),
        violations: Vec::new(),
    }
}

/// Full validation of a board file without running it.
pub fn check_file(path: &Path) -> Result<(), Vec<String>> {
    Board::from_file(path).map(|_| ()).map_err(violations_to_strings)
}
