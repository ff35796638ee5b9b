// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Batch front end: board files, scenario scripts, the run loop and the
//! trace auditor.

pub mod audit;
pub mod board;
pub mod config;
pub mod run;
pub mod script;

pub use audit::{audit, AuditReport};
pub use board::{Board, LoadOutcome};
pub use config::{BoardConfig, ConfigViolation};
pub use run::{check_file, run_board, run_files, AppImage, ExitStatus, RunOptions, RunOutcome, StopReason};
pub use script::{ScenarioFile, Script, ScriptCode, ScriptLoader};
