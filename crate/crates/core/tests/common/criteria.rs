// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! One check per acceptance criterion. Each returns a short summary on
//! success and the first discrepancy on failure.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::{Rc, Weak};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use kernsim_core::capabilities::{BoardPhase, CapabilityError, CapabilityKind};
use kernsim_core::harness::{
    audit, check_file, run_board, run_files, AppImage, AuditReport, ExitStatus, RunOptions, ScenarioFile,
};
use kernsim_core::hil::time::{Alarm, AlarmClient};
use kernsim_core::hil::virtual_alarm::MuxAlarm;
use kernsim_core::hw::{
    load_register_map, AlarmPeripheral, Bus, Chip, HwAlarm, InterruptController, IrqLine, RegisterAccess,
    RegisterFile, RegisterMapSpec, RegisterSpec, FieldSpec, SimClock,
};
use kernsim_core::memory::{AccessKind, Accessor, MemoryRegion, Permission, SimMemory};
use kernsim_core::ids::ProcessId;
use kernsim_core::syscall::{SharedRegion, SyscallInvocation, SyscallReturn, UpcallDescriptor};
use kernsim_core::trace::{Trace, TraceEvent};

use super::*;

pub type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

// ---------------------------------------------------------------- 1

#[derive(Clone, Copy, Debug)]
pub enum SlotOp {
    Allow { slot: u32, region: usize },
    Subscribe { slot: u32, handler: usize },
}

const HANDLERS: [Option<&str>; 3] = [Some("a"), Some("b"), None];

pub fn regions(base: u32) -> [SharedRegion; 3] {
    [
        SharedRegion::new(base, 16),
        SharedRegion::new(base + 64, 32),
        // Zero-length, outside every region the process owns.
        SharedRegion::new(5000, 0),
    ]
}

fn descriptor(h: usize) -> UpcallDescriptor {
    match HANDLERS[h] {
        Some(name) => UpcallDescriptor::new(name, h as u32),
        None => UpcallDescriptor::null(),
    }
}

/// Runs `ops` against a fresh process and against a per-slot reference
/// model. Returns the first mismatch.
pub fn swap_case(ops: &[SlotOp]) -> Result<(), String> {
    let k = bare_kernel();
    let pid = spawn_idle(&k, &["a", "b"]);
    let base = k.kernel.with_process(pid, |p| p.layout.memory.base).unwrap();
    let rs = regions(base);
    let mut allow_model: BTreeMap<u32, SharedRegion> = BTreeMap::new();
    let mut sub_model: BTreeMap<u32, UpcallDescriptor> = BTreeMap::new();
    for (i, op) in ops.iter().enumerate() {
        let (inv, want) = match *op {
            SlotOp::Allow { slot, region } => {
                let prev = allow_model.insert(slot, rs[region]).unwrap_or(SharedRegion::new(0, 0));
                (
                    SyscallInvocation::ReadWriteAllow {
                        driver: SLOT_DRIVER,
                        buffer: slot,
                        region: rs[region],
                    },
                    SyscallReturn::SuccessWithRegion(prev),
                )
            }
            SlotOp::Subscribe { slot, handler } => {
                let prev = sub_model.insert(slot, descriptor(handler)).unwrap_or(UpcallDescriptor::null());
                (
                    SyscallInvocation::Subscribe {
                        driver: SLOT_DRIVER,
                        subscribe: slot,
                        upcall: descriptor(handler),
                    },
                    SyscallReturn::SuccessWithUpcall(prev),
                )
            }
        };
        let got = k.kernel.handle_syscall(pid, inv);
        if got.as_ref() != Some(&want) {
            return Err(format!("{ops:?} step {i}: got {got:?}, model says {want:?}"));
        }
    }
    Ok(())
}

fn sequences(alphabet: &[SlotOp], max_len: usize) -> Vec<Vec<SlotOp>> {
    let mut all = Vec::new();
    let mut frontier: Vec<Vec<SlotOp>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &frontier {
            for op in alphabet {
                let mut s = seq.clone();
                s.push(*op);
                next.push(s);
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    all
}

pub fn c1_swap_semantics() -> Outcome {
    let allows: Vec<SlotOp> = (0..2)
        .flat_map(|slot| (0..3).map(move |region| SlotOp::Allow { slot, region }))
        .collect();
    let subs: Vec<SlotOp> = (0..2)
        .flat_map(|slot| (0..3).map(move |handler| SlotOp::Subscribe { slot, handler }))
        .collect();
    let mut cases = 0;
    for alphabet in [&allows, &subs] {
        for seq in sequences(alphabet, 5) {
            swap_case(&seq)?;
            cases += 1;
        }
    }
    Ok(format!("{cases} allow/subscribe sequences match the one-slot model"))
}

// ---------------------------------------------------------------- 2

fn isolation_workload(name: &str, grant_space: u32) -> Value {
    json!({
        "name": name,
        "app_ram": 128,
        "grant_space": grant_space,
        "flash": "isolated\n",
        "main": [
            { "syscall": { "class": "subscribe", "driver": 0, "sub": 0, "fn": "tick" } },
            { "syscall": { "class": "command", "driver": 0, "cmd": 4, "args": [40] } },
            { "syscall": { "class": "yield", "mode": "wait" } },
            { "syscall": { "class": "ro_allow", "driver": 1, "buf": 1, "base": 128, "len": 9 } },
            { "syscall": { "class": "subscribe", "driver": 1, "sub": 1, "fn": "tick" } },
            { "syscall": { "class": "command", "driver": 1, "cmd": 1, "args": [9] } },
            { "syscall": { "class": "yield", "mode": "wait" } },
            "halt"
        ],
        "handlers": { "tick": [] }
    })
}

pub fn c2_grant_isolation() -> Outcome {
    let b = isolation_workload("b", 512);
    // Same workload, but too little memory for even one grant.
    let mut a = isolation_workload("a", 8);
    a["main"].as_array_mut().unwrap().insert(
        2,
        json!({ "expect": { "variant": "failure", "err": "NOMEM" } }),
    );
    let with_a = run_scenarios(json!({}), &[b.clone(), a], 10_000);
    let alone = run_scenarios(json!({}), &[b], 10_000);
    let ev_with = events(&with_a);
    ensure!(failed_expects(&ev_with).is_empty(), "process a did not see NOMEM: {:?}", failed_expects(&ev_with));
    let a_nomem = ev_with
        .iter()
        .any(|e| e.kind == "grant_nomem" && e.payload["pid"] == json!(1));
    ensure!(a_nomem, "process a never hit NOMEM");
    let b_events = |evs: &[TraceEvent]| -> Vec<Value> {
        evs.iter()
            .filter(|e| e.subject_pid() == Some(ProcessId(0)))
            .map(untimed)
            .collect()
    };
    let lhs = b_events(&ev_with);
    let rhs = b_events(&events(&alone));
    ensure!(!lhs.is_empty(), "no events for process b");
    if lhs != rhs {
        let i = lhs.iter().zip(&rhs).position(|(x, y)| x != y).unwrap_or(lhs.len().min(rhs.len()));
        return Err(format!(
            "process b diverges at its event {i}: {:?} vs {:?}",
            lhs.get(i),
            rhs.get(i)
        ));
    }
    let b_exited = ev_with
        .iter()
        .any(|e| e.kind == "process_terminated" && e.payload["pid"] == json!(0) && e.payload["state"] == "exited");
    ensure!(b_exited, "process b did not complete");
    Ok(format!("{} events of process b identical with and without the exhausting process", lhs.len()))
}

// ---------------------------------------------------------------- 3

struct Recorder {
    id: usize,
    clock: Rc<SimClock>,
    fired: Rc<RefCell<Vec<(usize, u64)>>>,
}

impl AlarmClient for Recorder {
    fn alarm_fired(&self) {
        self.fired.borrow_mut().push((self.id, self.clock.now()));
    }
}

#[derive(Clone, Debug)]
pub struct SetEvent {
    pub tick: u64,
    pub client: usize,
    pub delay: u32,
}

/// Brute-force reference: each client fires at its deadline, or on the
/// next step if the deadline had already arrived when it was set.
pub fn alarm_oracle(clients: usize, sets: &[SetEvent], end: u64) -> Vec<(usize, u64)> {
    let mut due: Vec<Option<u64>> = vec![None; clients];
    let mut fired = Vec::new();
    for now in 0..=end {
        for (c, d) in due.iter_mut().enumerate() {
            if *d == Some(now) {
                fired.push((c, now));
                *d = None;
            }
        }
        for s in sets.iter().filter(|s| s.tick == now) {
            due[s.client] = Some(if s.delay == 0 { now + 1 } else { now + s.delay as u64 });
        }
    }
    fired.sort();
    fired
}

pub fn alarm_simulation(clients: usize, sets: &[SetEvent], end: u64, clock_start: u32) -> Vec<(usize, u64)> {
    let clock = Rc::new(SimClock::new());
    let trace = Rc::new(Trace::new(clock.clone()));
    let intc = Rc::new(InterruptController::new(trace.clone()));
    let chip = Chip::new(intc.clone());
    let bus = Bus::new(clock.clone(), intc.clone());
    let spec = load_register_map(&std::fs::read_to_string(boards_dir().join("maps/alarm.json")).unwrap()).unwrap();
    let periph = Rc::new(AlarmPeripheral::new(spec, trace, IrqLine::new(intc, 1, "alarm"), clock_start).unwrap());
    bus.attach(periph.clone());
    let hw = Rc::new(HwAlarm::new(periph, 1000));
    chip.attach(1, hw.clone());
    let mux = MuxAlarm::new(hw);
    mux.install();
    let fired = Rc::new(RefCell::new(Vec::new()));
    let mut keep = Vec::new();
    let valarms: Vec<_> = (0..clients)
        .map(|id| {
            let v = mux.new_client();
            let r: Rc<dyn AlarmClient> = Rc::new(Recorder {
                id,
                clock: clock.clone(),
                fired: fired.clone(),
            });
            v.set_alarm_client(Rc::downgrade(&r) as Weak<dyn AlarmClient>);
            keep.push(r);
            v
        })
        .collect();
    for now in 0..=end {
        for irq in chip.intc().deliverable() {
            chip.dispatch(irq);
        }
        for s in sets.iter().filter(|s| s.tick == now) {
            let v = &valarms[s.client];
            v.set_alarm(v.now().wrapping_add(s.delay));
        }
        bus.tick(1);
    }
    let mut out = fired.borrow().clone();
    out.sort();
    out
}

pub fn c3_virtual_alarm_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_a1a4);
    let mut fires = 0;
    let mut wrapped = 0;
    for case in 0..200 {
        let clients = rng.gen_range(1..=8);
        let n_sets = rng.gen_range(1..=50);
        let end: u64 = rng.gen_range(100..=10_000);
        let wrap = case % 4 == 0;
        let clock_start = if wrap {
            wrapped += 1;
            u32::MAX - rng.gen_range(0..end as u32)
        } else {
            rng.gen_range(0..1_000_000)
        };
        let mut sets: Vec<SetEvent> = (0..n_sets)
            .map(|_| SetEvent {
                tick: rng.gen_range(0..end),
                client: rng.gen_range(0..clients),
                delay: match rng.gen_range(0..10) {
                    0 => 0,
                    1 => 1,
                    _ => rng.gen_range(0..(end as u32).max(2)),
                },
            })
            .collect();
        sets.sort_by_key(|s| s.tick);
        let want = alarm_oracle(clients, &sets, end);
        let got = alarm_simulation(clients, &sets, end, clock_start);
        ensure!(
            want == got,
            "case {case} (clients {clients}, start {clock_start}): oracle {want:?} vs simulation {got:?}"
        );
        fires += want.len();
    }
    Ok(format!("200 scenarios ({wrapped} wrapping), {fires} fire events match the oracle"))
}

// ---------------------------------------------------------------- 4

pub const SPACE: u32 = 256;

pub fn mpu_oracle(regions: &[MemoryRegion], base: u32, len: u32, kind: AccessKind) -> (bool, bool) {
    if len == 0 {
        return (true, false);
    }
    if base as u64 + len as u64 > SPACE as u64 {
        return (false, true);
    }
    let allowed = (base..base + len).all(|byte| {
        regions.iter().any(|r| {
            let inside = byte as u64 >= r.base as u64 && (byte as u64) < r.base as u64 + r.length as u64;
            let perm = match kind {
                AccessKind::Read => matches!(r.permission, Permission::Read | Permission::ReadWrite),
                AccessKind::Write => matches!(r.permission, Permission::ReadWrite),
            };
            inside && perm
        })
    });
    (allowed, false)
}

pub fn c4_mpu_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4d50_5500);
    let perms = [Permission::None, Permission::Read, Permission::ReadWrite];
    let mut checks = 0u64;
    for config in 0..12 {
        let n = if config == 0 { 0 } else { rng.gen_range(1..=8) };
        let regions: Vec<MemoryRegion> = (0..n)
            .map(|_| {
                let base = rng.gen_range(0..SPACE);
                let len = rng.gen_range(0..=SPACE - base);
                MemoryRegion::new(base, len, perms[rng.gen_range(0..3)])
            })
            .collect();
        let mut mem = SimMemory::new(SPACE, 8);
        let pid = ProcessId(1);
        mem.configure_regions(pid, &regions).map_err(|e| e.to_string())?;
        for base in 0..=SPACE + 2 {
            for len in 0..=SPACE + 1 - base.min(SPACE) {
                for kind in [AccessKind::Read, AccessKind::Write] {
                    let (allowed, oob) = mpu_oracle(&regions, base, len, kind);
                    let got = mem.check(Accessor::Process(pid), base, len, kind);
                    let got_oob = matches!(got, Err(kernsim_core::memory::MemoryError::OutOfBounds { .. }));
                    ensure!(
                        got.is_ok() == allowed && got_oob == oob,
                        "regions {regions:?}: ({base}, {len}, {kind:?}) got {got:?}, oracle allowed={allowed}"
                    );
                    checks += 1;
                }
            }
        }
    }
    Ok(format!("{checks} access checks agree with the per-byte predicate"))
}

// ---------------------------------------------------------------- 5

pub fn zero_length_scenario() -> Value {
    let z = |class: &str, driver: u32, buf: u32, base: u64, absolute: bool| {
        json!({ "syscall": { "class": class, "driver": driver, "buf": buf, "base": base, "len": 0, "absolute": absolute } })
    };
    json!({
        "name": "zero_len",
        "app_ram": 64,
        "main": [
            z("rw_allow", 2, 0, 0, true),
            { "expect": { "variant": "success_region" } },
            z("rw_allow", 2, 0, 5000, true),
            { "expect": { "variant": "success_region", "base": 0, "len": 0 } },
            z("ro_allow", 2, 0, 4294967295u64, true),
            { "expect": { "variant": "success_region" } },
            z("ro_allow", 3, 0, 17, false),
            { "expect": { "variant": "success_region" } },
            z("rw_allow", 3, 0, 31999, true),
            { "expect": { "variant": "success_region" } },
            { "syscall": { "class": "command", "driver": 2, "cmd": 5, "args": [0] } },
            { "expect": { "variant": "success_value", "value": 0 } },
            { "syscall": { "class": "command", "driver": 2, "cmd": 1, "args": [0, 9] } },
            { "expect": { "variant": "failure", "err": "SIZE" } },
            { "syscall": { "class": "command", "driver": 2, "cmd": 6, "args": [9] } },
            { "expect": { "variant": "success_value" } },
            { "syscall": { "class": "command", "driver": 3, "cmd": 4, "args": [0] } },
            { "expect": { "variant": "failure", "err": "SIZE" } },
            "halt"
        ]
    })
}

/// Every scenario the suite runs, for suite-wide audits.
pub fn suite_runs() -> Vec<(String, AuditReport, Vec<TraceEvent>)> {
    let mut out = Vec::new();
    let demo = boards_dir().join("demo.json");
    for path in shipped_apps() {
        let o = run_files(&demo, std::slice::from_ref(&path), RunOptions::default());
        let ev = events(&o);
        out.push((path.display().to_string(), audit(&ev), ev));
    }
    let scenarios = [
        ("zero_length", zero_length_scenario()),
        ("read_only", read_only_scenario()),
        ("aliasing_full", aliasing_scenario(0, 16, 0, 16, 5, 5)),
        ("privileged", privileged_scenario()),
    ];
    for (name, s) in scenarios {
        let o = run_scenarios(json!({}), &[s], 10_000);
        let ev = events(&o);
        out.push((name.to_string(), audit(&ev), ev));
    }
    let both = run_files(
        &demo,
        &[apps_dir().join("hello.json"), apps_dir().join("blink.json")],
        RunOptions::default(),
    );
    let ev = events(&both);
    out.push(("demo".into(), audit(&ev), ev));
    out
}

pub fn c5_zero_length_allows() -> Outcome {
    let o = run_scenarios(json!({}), &[zero_length_scenario()], 10_000);
    let ev = events(&o);
    ensure!(failed_expects(&ev).is_empty(), "unexpected returns: {:?}", failed_expects(&ev));
    let report = audit(&ev);
    ensure!(report.is_clean(), "audit: {:?}", report.violations);
    ensure!(report.zero_length_allows == 5, "saw {} zero-length allows", report.zero_length_allows);
    ensure!(report.mem_events == 0, "{} memory events for zero-length shares", report.mem_events);
    let mut total_zero = 0;
    for (name, r, _) in suite_runs() {
        ensure!(r.is_clean(), "{name}: {:?}", r.violations);
        total_zero += r.zero_length_allows;
    }
    Ok(format!("{total_zero} zero-length allows across the suite, no memory access events for any of them"))
}

// ---------------------------------------------------------------- 6

pub fn read_only_scenario() -> Value {
    json!({
        "name": "read_only",
        "app_ram": 64,
        "flash": "KEY-0123",
        "main": [
            { "syscall": { "class": "ro_allow", "driver": 2, "buf": 0, "base": 64, "len": 8 } },
            { "expect": { "variant": "success_region", "len": 0 } },
            { "syscall": { "class": "rw_allow", "driver": 2, "buf": 0, "base": 64, "len": 8 } },
            { "expect": { "variant": "failure_region", "err": "INVAL" } },
            { "syscall": { "class": "command", "driver": 2, "cmd": 3, "args": [0, 88] } },
            { "expect": { "variant": "failure", "err": "FAIL" } },
            { "syscall": { "class": "command", "driver": 2, "cmd": 4, "args": [0] } },
            { "expect": { "variant": "success_value", "value": 75 } },
            { "syscall": { "class": "command", "driver": 2, "cmd": 0 } },
            { "expect": { "variant": "success" } },
            "halt"
        ]
    })
}

pub fn c6_read_only_allow() -> Outcome {
    let board = build(json!({}));
    let kernel = board.kernel.clone();
    let o = run_board(board, &[app(read_only_scenario())], RunOptions { max_ticks: 10_000, seed: 0 });
    let ev = events(&o);
    ensure!(o.status == ExitStatus::Clean, "run ended with {:?}", o.status);
    ensure!(failed_expects(&ev).is_empty(), "unexpected returns: {:?}", failed_expects(&ev));
    let errors = of_kind(&ev, "capsule_error");
    ensure!(errors.len() == 1, "expected one capsule error, saw {}", errors.len());
    ensure!(
        errors[0].payload["error"].as_str().unwrap_or_default().contains("read-only"),
        "capsule error was {}",
        errors[0].payload
    );
    let faults = ev.iter().filter(|e| e.kind == "process_terminated" && e.payload["state"] == "faulted").count();
    ensure!(faults == 0, "the process was faulted");
    let (base, flash_base) = (0u32, 64u32);
    let mem = kernel.memory();
    let bytes = mem.snapshot(base + flash_base, 8).ok_or("flash out of range")?;
    ensure!(bytes == b"KEY-0123", "flash bytes changed: {bytes:?}");
    let writes = ev.iter().filter(|e| e.kind == "mem" && e.payload["kind"] == "write").count();
    ensure!(writes == 0, "{writes} writes reached process memory");
    Ok("write through read-only share refused, run continued, flash bytes unchanged".into())
}

// ---------------------------------------------------------------- 7

/// Shares [a_off, +a_len) with scratch and [b_off, +b_len) with probe, then
/// writes 0xA5 through scratch at `write_at` and reads through probe at
/// `read_at`, both inside one upcall handler.
pub fn aliasing_scenario(a_off: u32, a_len: u32, b_off: u32, b_len: u32, write_at: u32, read_at: u32) -> Value {
    json!({
        "name": "alias",
        "app_ram": 128,
        "main": [
            { "syscall": { "class": "rw_allow", "driver": 2, "buf": 0, "base": a_off, "len": a_len } },
            { "syscall": { "class": "rw_allow", "driver": 3, "buf": 0, "base": b_off, "len": b_len } },
            { "syscall": { "class": "subscribe", "driver": 0, "sub": 0, "fn": "probe" } },
            { "syscall": { "class": "command", "driver": 0, "cmd": 4, "args": [1] } },
            { "syscall": { "class": "yield", "mode": "wait" } },
            "halt"
        ],
        "handlers": {
            "probe": [
                { "syscall": { "class": "command", "driver": 2, "cmd": 1, "args": [write_at, 165] } },
                { "syscall": { "class": "command", "driver": 3, "cmd": 2, "args": [read_at] } }
            ]
        }
    })
}

fn alias_observation(s: Value) -> Result<(u64, u64, Value), String> {
    let o = run_scenarios(json!({}), &[s], 10_000);
    let ev = events(&o);
    let calls: Vec<_> = ev
        .iter()
        .filter(|e| e.kind == "syscall" && e.payload["class"] == "command" && e.payload["driver"] != json!(0))
        .collect();
    ensure!(calls.len() == 2, "expected 2 capsule commands, saw {}", calls.len());
    let read = ev
        .iter()
        .rev()
        .find(|e| e.kind == "syscall_return" && e.payload["class"] == "command")
        .map(|e| e.payload["ret"].clone())
        .ok_or("no command returns")?;
    Ok((calls[0].tick, calls[1].tick, read))
}

pub fn c7_aliasing() -> Outcome {
    // Full overlap: same byte through both.
    let (t1, t2, full) = alias_observation(aliasing_scenario(0, 16, 0, 16, 5, 5))?;
    ensure!(t1 == t2, "full overlap: write at tick {t1}, read at tick {t2}");
    ensure!(full == json!({ "variant": "success_value", "value": 165 }), "full overlap read {full}");
    // Partial overlap: byte 12 is offset 12 in one share and 4 in the other.
    let (t1, t2, partial) = alias_observation(aliasing_scenario(0, 16, 8, 16, 12, 4))?;
    ensure!(t1 == t2, "partial overlap: write at tick {t1}, read at tick {t2}");
    ensure!(partial == json!({ "variant": "success_value", "value": 165 }), "partial overlap read {partial}");
    // Disjoint: the same offsets name different bytes.
    let (_, _, disjoint) = alias_observation(aliasing_scenario(0, 16, 32, 16, 5, 5))?;
    ensure!(disjoint == json!({ "variant": "success_value", "value": 0 }), "disjoint read {disjoint}");
    Ok("full and partial overlaps visible within one loop step, disjoint shares independent".into())
}

// ---------------------------------------------------------------- 8

pub fn loader_fixture_scenario() -> ScenarioFile {
    ScenarioFile::parse(
        &json!({
            "name": "loaded",
            "app_ram": 128,
            "flash": "payload bytes for the digest",
            "main": [
                { "syscall": { "class": "command", "driver": 17, "cmd": 0 } },
                "halt"
            ]
        })
        .to_string(),
    )
    .unwrap()
}

pub struct LoaderFixtures {
    pub valid: Vec<u8>,
    pub corrupt_payload: Vec<u8>,
    pub bad_header: Vec<u8>,
}

pub fn loader_fixtures() -> LoaderFixtures {
    let valid = loader_fixture_scenario().pack(0).encode();
    let mut corrupt_payload = valid.clone();
    let last = corrupt_payload.len() - 1;
    corrupt_payload[last] ^= 0x01;
    let mut bad_header = valid.clone();
    bad_header[0] = b'X';
    LoaderFixtures {
        valid,
        corrupt_payload,
        bad_header,
    }
}

fn async_states(bytes: &[u8]) -> (Vec<String>, usize) {
    let board = build(json!({ "loader": "async" }));
    let img = AppImage {
        name: "fixture".into(),
        bytes: bytes.to_vec(),
    };
    let o = run_board(board, &[img], RunOptions { max_ticks: 2_000, seed: 0 });
    let ev = events(&o);
    let states = of_kind(&ev, "loader_state")
        .iter()
        .map(|e| e.payload["state"].as_str().unwrap().to_string())
        .collect();
    let hash_jobs = ev
        .iter()
        .filter(|e| e.kind == "mmio_write" && e.actor.to_string() == "hw:hashengine")
        .count();
    (states, hash_jobs)
}

fn sync_result(bytes: &[u8]) -> String {
    let board = build(json!({ "loader": "sync" }));
    let img = AppImage {
        name: "fixture".into(),
        bytes: bytes.to_vec(),
    };
    let o = run_board(board, &[img], RunOptions { max_ticks: 2_000, seed: 0 });
    let ev = events(&o);
    of_kind(&ev, "load_sync")
        .first()
        .map(|e| e.payload["result"].as_str().unwrap().to_string())
        .unwrap_or_default()
}

pub fn c8_loader() -> Outcome {
    let f = loader_fixtures();
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();

    let (valid, _) = async_states(&f.valid);
    let happy = s(&["Fetched", "HeaderChecked", "IntegrityPending", "IntegrityChecked", "Runnable"]);
    ensure!(valid == happy, "valid binary went through {valid:?}");

    let (corrupt, _) = async_states(&f.corrupt_payload);
    let rejected = s(&["Fetched", "HeaderChecked", "IntegrityPending", "Rejected(BadIntegrity)"]);
    ensure!(corrupt == rejected, "corrupted payload went through {corrupt:?}");

    let (bad, hash_writes) = async_states(&f.bad_header);
    ensure!(bad == s(&["Fetched", "Rejected(BadHeader)"]), "bad header went through {bad:?}");
    ensure!(hash_writes == 0, "hash engine touched {hash_writes} times for a bad header");

    let async_final: Vec<String> = [&valid, &corrupt, &bad].iter().map(|v| v.last().unwrap().clone()).collect();
    let sync_final: Vec<String> = [&f.valid, &f.corrupt_payload, &f.bad_header]
        .iter()
        .map(|b| sync_result(b))
        .collect();
    ensure!(async_final == sync_final, "async {async_final:?} vs sync {sync_final:?}");
    Ok(format!("async and sync loaders agree: {sync_final:?}"))
}

// ---------------------------------------------------------------- 9

pub fn privileged_scenario() -> Value {
    json!({
        "name": "privileged",
        "app_ram": 64,
        "main": [
            { "syscall": { "class": "command", "driver": 16, "cmd": 3, "args": [0] } },
            { "expect": { "variant": "success_value" } },
            { "syscall": { "class": "command", "driver": 17, "cmd": 2 } },
            { "expect": { "variant": "success_value", "value": 1 } },
            { "syscall": { "class": "command", "driver": 17, "cmd": 1, "args": [0] } },
            { "expect": { "variant": "failure", "err": "NOSUPPORT" } },
            { "syscall": { "class": "command", "driver": 16, "cmd": 1, "args": [0] } },
            { "expect": { "variant": "success" } }
        ]
    })
}

pub fn c9_capability_gating() -> Outcome {
    let mut privileged = 0;
    for (name, report, _) in suite_runs() {
        ensure!(report.is_clean(), "{name}: {:?}", report.violations);
        privileged += report.privileged_ops;
    }
    // A capsule with no tokens cannot perform the operation at all.
    let o = run_scenarios(json!({ "capabilities": {} }), &[privileged_scenario()], 1_000);
    let ev = events(&o);
    let destroy = ev.iter().filter(|e| e.kind == "privileged" && e.payload["op"] == "process_destroy").count();
    ensure!(destroy == 0, "process destroyed without a token");

    let board = build(json!({}));
    ensure!(board.authority.phase() == BoardPhase::Finalized, "board not finalized");
    let late = board.try_mint(CapabilityKind::ProcessManagement, "scratch");
    ensure!(matches!(late, Err(CapabilityError::PhaseError)), "late mint returned {late:?}");
    ensure!(board.trace.count_kind("cap_mint_refused") == 1, "refused mint not traced");
    Ok(format!("{privileged} privileged operations, all backed by construction-time tokens; late mint refused"))
}

// ---------------------------------------------------------------- 10

pub fn c10_composition() -> Outcome {
    let fixtures = boards_dir().join("fixtures");
    let mismatch = fixtures.join("polarity_mismatch.json");
    let report = check_file(&mismatch).err().ok_or("polarity mismatch passed check")?;
    let names_both = report.iter().any(|v| v.contains("temp_sensor") && v.contains("spi_controller"));
    ensure!(names_both, "diagnostic does not name both layers: {report:?}");
    let run = run_files(&mismatch, &[apps_dir().join("alarm_4call.json")], RunOptions::default());
    ensure!(run.status == ExitStatus::ConfigError, "run exited with {:?}", run.status);
    ensure!(run.status.code() == 2, "exit code {}", run.status.code());

    let ok = fixtures.join("configurable_polarity.json");
    check_file(&ok).map_err(|v| format!("configurable polarity rejected: {v:?}"))?;
    let run = run_files(&ok, &[apps_dir().join("alarm_4call.json")], RunOptions::default());
    ensure!(run.status == ExitStatus::Clean, "configurable board run exited with {:?}", run.status);
    Ok(format!("mismatch rejected at check and run ({}); configurable polarity accepted", report[0]))
}

// ---------------------------------------------------------------- 11

fn random_spec(rng: &mut ChaCha8Rng) -> RegisterMapSpec {
    let n_regs = rng.gen_range(1..=4);
    let registers = (0..n_regs)
        .map(|i| {
            let width = [8u32, 16, 32][rng.gen_range(0..3)];
            let mut fields = Vec::new();
            let mut bit = 0;
            while bit < width {
                bit += rng.gen_range(0..3);
                if bit >= width {
                    break;
                }
                let w = rng.gen_range(1..=(width - bit).min(12));
                fields.push(FieldSpec {
                    name: format!("F{}", fields.len()),
                    bit_offset: bit,
                    bit_width: w,
                    enum_values: None,
                });
                bit += w;
            }
            RegisterSpec {
                name: format!("R{i}"),
                offset: i * 4,
                width,
                access: RegisterAccess::RW,
                fields,
            }
        })
        .collect();
    RegisterMapSpec {
        name: "random".into(),
        registers,
    }
}

pub fn c11_register_fields() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xf1e1d);
    let mut triples = 0;
    while triples < 10_000 {
        let spec = random_spec(&mut rng);
        let regs: Vec<_> = spec.registers.iter().filter(|r| !r.fields.is_empty()).cloned().collect();
        if regs.is_empty() {
            continue;
        }
        let spec = spec.validated().map_err(|e| format!("generated spec invalid: {e}"))?;
        let mut file = RegisterFile::new(spec);
        for _ in 0..20 {
            let reg = &regs[rng.gen_range(0..regs.len())];
            let field = &reg.fields[rng.gen_range(0..reg.fields.len())];
            let reg_mask: u64 = (1u64 << reg.width) - 1;
            let initial = (rng.gen::<u64>() & reg_mask) as u32;
            let value = (rng.gen::<u64>() & ((1u64 << field.bit_width) - 1)) as u32;
            file.hw_set(&reg.name, initial);
            file.field_set(&reg.name, &field.name, value).map_err(|e| e.to_string())?;
            let raw = file.read_named(&reg.name).map_err(|e| e.to_string())? as u64;
            let mask: u64 = ((1u64 << field.bit_width) - 1) << field.bit_offset;
            ensure!(
                (raw & mask) >> field.bit_offset == value as u64,
                "{}.{}: set {value}, raw {raw:#x}",
                reg.name,
                field.name
            );
            ensure!(
                raw & !mask == initial as u64 & !mask,
                "{}.{}: other bits changed {initial:#x} -> {raw:#x}",
                reg.name,
                field.name
            );
            let got = file.field_get(&reg.name, &field.name).map_err(|e| e.to_string())?;
            ensure!(got == value, "{}.{}: get returned {got}, set {value}", reg.name, field.name);
            triples += 1;
        }
    }
    Ok(format!("{triples} get-after-set triples agree with the mask/shift oracle"))
}

// ---------------------------------------------------------------- 12

pub fn c12_determinism() -> Outcome {
    let demo = boards_dir().join("demo.json");
    let apps = [apps_dir().join("hello.json"), apps_dir().join("blink.json")];
    let mut first: Option<String> = None;
    for run in 0..5 {
        let o = run_files(&demo, &apps, RunOptions { max_ticks: 100_000, seed: run });
        ensure!(o.status == ExitStatus::Clean, "run {run} exited with {:?}", o.status);
        ensure!(o.ticks >= 1_000, "run {run} lasted only {} ticks", o.ticks);
        let text = o.trace.to_jsonl();
        let ev = events(&o);
        ensure!(of_kind(&ev, "process_created").len() == 2, "run {run} did not start 2 processes");
        ensure!(!of_kind(&ev, "uart_tx").is_empty(), "no console output");
        ensure!(!of_kind(&ev, "loader_state").is_empty(), "no loader activity");
        match &first {
            None => first = Some(text),
            Some(f) => ensure!(f == &text, "run {run} differs from run 0"),
        }
    }
    let bytes = first.map_or(0, |t| t.len());
    Ok(format!("5 runs produced byte-identical traces ({bytes} bytes)"))
}

// ---------------------------------------------------------------- 13

fn upcalls(path: &str) -> Result<Vec<(u64, Value)>, String> {
    let o = run_files(
        &boards_dir().join("fixtures/configurable_polarity.json"),
        &[apps_dir().join(path)],
        RunOptions::default(),
    );
    ensure!(o.status == ExitStatus::Clean, "{path} exited with {:?}", o.status);
    let ev = events(&o);
    Ok(of_kind(&ev, "upcall")
        .iter()
        .map(|e| (e.tick, e.payload["args"].clone()))
        .collect())
}

pub fn c13_four_call() -> Outcome {
    let four = upcalls("alarm_4call.json")?;
    ensure!(four.len() == 1, "4-call scenario saw {} upcalls", four.len());
    ensure!(four[0].0 == 500, "upcall at tick {} instead of 500", four[0].0);
    let sync = upcalls("alarm_sync.json")?;
    ensure!(sync == four, "sync_command upcalls {sync:?} vs 4-call {four:?}");

    // Relative form: fires at the deadline the driver reported.
    let o = run_scenarios(
        json!({}),
        &[json!({
            "name": "relative",
            "main": [
                { "syscall": { "class": "subscribe", "driver": 0, "sub": 0, "fn": "fired" } },
                { "syscall": { "class": "command", "driver": 0, "cmd": 4, "args": [500] } },
                { "syscall": { "class": "yield", "mode": "wait" } }
            ],
            "handlers": { "fired": ["halt"] }
        })],
        10_000,
    );
    let ev = events(&o);
    let deadline = returns_of(&ev, 0)[1]["value"].as_u64().ok_or("no deadline")?;
    let fired = of_kind(&ev, "upcall").first().map(|e| e.tick).ok_or("no upcall")?;
    ensure!(fired == deadline, "relative alarm fired at {fired}, deadline {deadline}");
    Ok(format!("upcall at tick {} in both forms; relative set fired at its deadline {deadline}", four[0].0))
}

pub type Check = (&'static str, fn() -> Outcome);

pub const ALL: [Check; 13] = [
    ("swap semantics", c1_swap_semantics),
    ("grant isolation", c2_grant_isolation),
    ("timer virtualizer oracle", c3_virtual_alarm_oracle),
    ("MPU oracle", c4_mpu_oracle),
    ("zero-length allows", c5_zero_length_allows),
    ("read-only allow", c6_read_only_allow),
    ("aliasing", c7_aliasing),
    ("async loader", c8_loader),
    ("capability gating", c9_capability_gating),
    ("composition validation", c10_composition),
    ("register-field round trip", c11_register_fields),
    ("determinism", c12_determinism),
    ("4-call scenario", c13_four_call),
];
