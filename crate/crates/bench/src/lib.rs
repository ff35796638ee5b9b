// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Workloads shared by the benchmarks.

use std::path::PathBuf;

use kernsim_core::harness::{AppImage, Board, BoardConfig};

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn demo_board() -> PathBuf {
    workspace_root().join("boards/demo.json")
}

pub fn demo_apps() -> Vec<PathBuf> {
    let apps = workspace_root().join("apps");
    vec![apps.join("hello.json"), apps.join("blink.json")]
}

/// A process that issues `n` allow swaps against the scratch driver.
pub fn allow_churn(n: u32) -> AppImage {
    let text = format!(
        r#"{{
            "name": "churn",
            "app_ram": 256,
            "main": [
                {{ "loop": {{ "count": {n}, "body": [
                    {{ "syscall": {{ "class": "rw_allow", "driver": 2, "buf": 0, "base": 0, "len": 64 }} }},
                    {{ "syscall": {{ "class": "rw_allow", "driver": 2, "buf": 0, "base": 64, "len": 32 }} }},
                    {{ "syscall": {{ "class": "command", "driver": 2, "cmd": 6, "args": [7] }} }}
                ] }} }},
                "halt"
            ]
        }}"#
    );
    AppImage::from_bytes("churn", text.into_bytes(), 1).expect("churn scenario")
}

/// The demo board with a synchronous loader, so runs start immediately.
pub fn sync_demo() -> Board {
    let text = std::fs::read_to_string(demo_board()).expect("demo board");
    let mut config = BoardConfig::parse(&text).expect("demo board parses");
    config.loader = kernsim_core::harness::config::LoaderKind::Sync;
    Board::build(config, &workspace_root().join("boards")).expect("demo board builds")
}

#[cfg(test)]
mod tests {
    use super::*;
    use kernsim_core::harness::{run_board, ExitStatus, RunOptions};

    #[test]
    fn churn_runs_clean() {
        let o = run_board(sync_demo(), &[allow_churn(10)], RunOptions::default());
        assert_eq!(o.status, ExitStatus::Clean);
        assert_eq!(o.trace.count_kind("syscall"), 31);
    }
}
