// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Fixtures and reference oracles shared by the integration tests and the
//! acceptance binary.

#![allow(dead_code)]

pub mod criteria;

use std::path::PathBuf;
use std::rc::Rc;

use serde_json::{json, Value};

use kernsim_core::capabilities::CapabilityAuthority;
use kernsim_core::harness::{audit, run_board, AppImage, AuditReport, Board, BoardConfig, RunOptions, RunOutcome};
use kernsim_core::hw::SimClock;
use kernsim_core::ids::ProcessId;
use kernsim_core::kernel::code::{CodeStep, ProcessCode, ProcessEnv, ProcessImage};
use kernsim_core::kernel::driver::SyscallDriver;
use kernsim_core::kernel::{Kernel, KernelConfig};
use kernsim_core::syscall::SyscallReturn;
use kernsim_core::trace::{Trace, TraceEvent};

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn boards_dir() -> PathBuf {
    repo_root().join("boards")
}

pub fn apps_dir() -> PathBuf {
    repo_root().join("apps")
}

/// A board with every peripheral and the common capsules. `overrides` is
/// merged over the top level.
pub fn board_config(overrides: Value) -> BoardConfig {
    let mut base = json!({
        "name": "test",
        "ram_size": 32768,
        "peripherals": {
            "alarm": { "map": "maps/alarm.json", "irq": 1, "frequency": 1000 },
            "uart": { "map": "maps/uart.json", "irq": 2, "ticks_per_byte": 1 },
            "hash": { "map": "maps/hashengine.json", "irq": 3, "bytes_per_tick": 64 }
        },
        "capsules": [
            { "name": "alarm", "type": "alarm", "driver": 0 },
            { "name": "console", "type": "console", "driver": 1, "buffer_size": 16 },
            { "name": "scratch", "type": "scratch", "driver": 2 },
            { "name": "probe", "type": "scratch", "driver": 3 },
            { "name": "faulty", "type": "faulty", "driver": 4 },
            { "name": "proc_ctl", "type": "process_control", "driver": 16 },
            { "name": "proc_info", "type": "process_info", "driver": 17 }
        ],
        "capabilities": { "proc_ctl": ["ProcessManagement", "GrantInspection"] },
        "loader": "sync"
    });
    if let (Some(b), Some(o)) = (base.as_object_mut(), overrides.as_object()) {
        for (k, v) in o {
            b.insert(k.clone(), v.clone());
        }
    }
    serde_json::from_value(base).expect("test board config")
}

pub fn build(overrides: Value) -> Board {
    Board::build(board_config(overrides), &boards_dir()).expect("test board builds")
}

pub fn app(scenario: Value) -> AppImage {
    AppImage::from_bytes("app", serde_json::to_vec(&scenario).unwrap(), 0).expect("scenario packs")
}

pub fn run_scenarios(overrides: Value, scenarios: &[Value], max_ticks: u64) -> RunOutcome {
    let apps: Vec<_> = scenarios.iter().cloned().map(app).collect();
    run_board(build(overrides), &apps, RunOptions { max_ticks, seed: 0 })
}

pub fn events(outcome: &RunOutcome) -> Vec<TraceEvent> {
    outcome.trace.events().clone()
}

pub fn audit_outcome(outcome: &RunOutcome) -> AuditReport {
    audit(&outcome.trace.events())
}

pub fn of_kind<'a>(events: &'a [TraceEvent], kind: &str) -> Vec<&'a TraceEvent> {
    events.iter().filter(|e| e.kind == kind).collect()
}

/// Returns of every syscall a process made, as encoded records.
pub fn returns_of(events: &[TraceEvent], pid: u32) -> Vec<Value> {
    let actor = format!("process:{pid}");
    events
        .iter()
        .filter(|e| e.kind == "syscall_return" && e.actor.to_string() == actor)
        .map(|e| e.payload["ret"].clone())
        .collect()
}

pub fn failed_expects(events: &[TraceEvent]) -> Vec<Value> {
    events
        .iter()
        .filter(|e| e.kind == "expect" && e.payload["pass"] != json!(true))
        .map(|e| e.payload.clone())
        .collect()
}

/// Scenario files shipped in `apps/`.
pub fn shipped_apps() -> Vec<PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(apps_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    v.sort();
    v
}

/// A driver that accepts everything; used to exercise slot bookkeeping.
pub struct SlotDriver;

impl SyscallDriver for SlotDriver {
    fn command(&self, _command: u32, _arg0: u32, _arg1: u32, _pid: ProcessId) -> SyscallReturn {
        SyscallReturn::Success
    }

    fn allow_rw_count(&self) -> u32 {
        2
    }

    fn allow_ro_count(&self) -> u32 {
        2
    }

    fn subscribe_count(&self) -> u32 {
        2
    }
}

/// Process code that never issues a syscall on its own.
pub struct IdleCode(pub Vec<String>);

impl ProcessCode for IdleCode {
    fn run(&mut self, _env: &mut dyn ProcessEnv) -> CodeStep {
        CodeStep::Preempted
    }

    fn syscall_returned(&mut self, _ret: SyscallReturn) {}

    fn enter_upcall(&mut self, _handler: &str, _args: [u32; 3], _userdata: u32) -> bool {
        true
    }

    fn handler_names(&self) -> Vec<String> {
        self.0.clone()
    }

    fn has_entry(&self, _entry: &str) -> bool {
        true
    }
}

pub struct BareKernel {
    pub kernel: Rc<Kernel>,
    pub driver: Rc<dyn SyscallDriver>,
    pub trace: Rc<Trace>,
}

pub const SLOT_DRIVER: u32 = 7;

/// A kernel with one `SlotDriver` and nothing else.
pub fn bare_kernel() -> BareKernel {
    let clock = Rc::new(SimClock::new());
    let trace = Rc::new(Trace::new(clock.clone()));
    let authority = Rc::new(CapabilityAuthority::new(trace.clone()));
    let config = KernelConfig {
        ram_size: 4096,
        ..KernelConfig::default()
    };
    let kernel = Kernel::new(config, clock, trace.clone(), authority);
    let id = kernel.add_capsule("slots");
    let driver: Rc<dyn SyscallDriver> = Rc::new(SlotDriver);
    kernel
        .register_driver(id, SLOT_DRIVER, Rc::downgrade(&driver))
        .unwrap();
    BareKernel { kernel, driver, trace }
}

pub fn spawn_idle(k: &BareKernel, handlers: &[&str]) -> ProcessId {
    let code = IdleCode(handlers.iter().map(|s| s.to_string()).collect());
    let image = ProcessImage {
        flash: vec![0x5a; 64],
        app_ram: 256,
    };
    k.kernel.create_process("idle", Box::new(code), image, 512).unwrap()
}

/// Drops `seq` and `tick` so traces can be compared modulo timing.
pub fn untimed(e: &TraceEvent) -> Value {
    json!({ "actor": e.actor.to_string(), "kind": e.kind, "payload": e.payload })
}
