// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Trace auditor: replays a trace and checks the invariants that must hold
//! for any run.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

use crate::trace::TraceEvent;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub violations: Vec<String>,
    pub expects_passed: usize,
    pub expects_failed: usize,
    pub privileged_ops: usize,
    pub zero_length_allows: usize,
    pub mem_events: usize,
    pub upcalls: usize,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Default)]
struct ProcessModel {
    yielded: bool,
    in_handler: bool,
    pending: Option<Value>,
    /// (driver, buf, mode) -> (base, len).
    allows: BTreeMap<(u64, u64, &'static str), (u64, u64)>,
    /// (driver, sub) -> (handler, userdata).
    upcalls: BTreeMap<(u64, u64), (String, u64)>,
}

fn num(v: &Value, key: &str) -> u64 {
    v[key].as_u64().unwrap_or(u64::MAX)
}

fn pid_of(actor: &str) -> Option<u64> {
    actor.strip_prefix("process:").and_then(|p| p.parse().ok())
}

pub fn audit(events: &[TraceEvent]) -> AuditReport {
    let mut r = AuditReport::default();
    let mut procs: BTreeMap<u64, ProcessModel> = BTreeMap::new();
    let mut minted: BTreeSet<(String, String)> = BTreeSet::new();
    let mut finalized = false;
    let mut last: Option<(u64, u64)> = None;

    for e in events {
        if let Some((seq, tick)) = last {
            if e.seq <= seq {
                r.violations.push(format!("seq {} does not follow {seq}", e.seq));
            }
            if e.tick < tick {
                r.violations.push(format!("seq {}: tick went backwards", e.seq));
            }
        }
        last = Some((e.seq, e.tick));
        let actor = e.actor.to_string();
        let p = &e.payload;
        match e.kind.as_str() {
            "cap_mint" => {
                if finalized {
                    r.violations.push(format!("seq {}: capability minted after finalize", e.seq));
                }
                let holder = p["holder"].as_str().unwrap_or_default();
                let holder = if holder == "kernel" {
                    "kernel".to_string()
                } else {
                    format!("capsule:{holder}")
                };
                minted.insert((holder, p["cap"].as_str().unwrap_or_default().into()));
            }
            "board_finalized" => finalized = true,
            "privileged" => {
                r.privileged_ops += 1;
                let cap = p["cap"].as_str().unwrap_or_default().to_string();
                if !minted.contains(&(actor.clone(), cap.clone())) {
                    r.violations
                        .push(format!("seq {}: {actor} used {cap} without a minted token", e.seq));
                }
            }
            "syscall" => {
                let Some(pid) = pid_of(&actor) else { continue };
                let m = procs.entry(pid).or_default();
                match p["class"].as_str() {
                    Some("yield") => {
                        if !m.in_handler {
                            m.yielded = true;
                        }
                    }
                    Some("rw_allow" | "ro_allow" | "subscribe") => m.pending = Some(p.clone()),
                    _ => {}
                }
            }
            "syscall_return" => {
                let Some(pid) = pid_of(&actor) else { continue };
                let m = procs.entry(pid).or_default();
                let class = p["class"].as_str().unwrap_or_default();
                if class == "yield" && !m.in_handler {
                    m.yielded = false;
                }
                let Some(call) = m.pending.take_if(|c| c["class"] == class) else {
                    continue;
                };
                check_swap(&mut r, e.seq, m, &call, &p["ret"]);
            }
            "upcall" => {
                r.upcalls += 1;
                let Some(pid) = pid_of(&actor) else { continue };
                let m = procs.entry(pid).or_default();
                if !m.yielded || m.in_handler {
                    r.violations
                        .push(format!("seq {}: upcall to process {pid} outside yield", e.seq));
                }
                let key = (num(p, "driver"), num(p, "subscribe"));
                let want = m.upcalls.get(&key).cloned();
                let got = (p["handler"].as_str().unwrap_or_default().to_string(), num(p, "userdata"));
                if want.as_ref() != Some(&got) {
                    r.violations.push(format!(
                        "seq {}: upcall {got:?} does not match subscription {want:?}",
                        e.seq
                    ));
                }
                m.in_handler = true;
            }
            "upcall_done" => {
                if let Some(m) = pid_of(&actor).and_then(|pid| procs.get_mut(&pid)) {
                    m.in_handler = false;
                }
            }
            "mem" => {
                r.mem_events += 1;
                if actor != "kernel" {
                    r.violations
                        .push(format!("seq {}: memory access attributed to {actor}", e.seq));
                }
                let (base, len) = (num(p, "base"), num(p, "len"));
                if len == 0 {
                    r.violations.push(format!("seq {}: zero-length memory access", e.seq));
                }
                let mode = if p["mode"] == "ro" { "ro" } else { "rw" };
                let key = (num(p, "driver"), num(p, "buf"), mode);
                let slot = procs
                    .get(&num(p, "pid"))
                    .and_then(|m| m.allows.get(&key))
                    .copied()
                    .unwrap_or((0, 0));
                if slot.1 == 0 || base < slot.0 || base + len > slot.0 + slot.1 {
                    r.violations.push(format!(
                        "seq {}: access [{base}, +{len}) outside shared region {slot:?}",
                        e.seq
                    ));
                }
            }
            "expect" => {
                if p["pass"] == Value::Bool(true) {
                    r.expects_passed += 1;
                } else {
                    r.expects_failed += 1;
                }
            }
            _ => {}
        }
    }
    r
}

/// Successful allow and subscribe calls must hand back exactly what the
/// previous successful call on the same slot installed.
fn check_swap(r: &mut AuditReport, seq: u64, m: &mut ProcessModel, call: &Value, ret: &Value) {
    let variant = ret["variant"].as_str().unwrap_or_default();
    match call["class"].as_str() {
        Some(class @ ("rw_allow" | "ro_allow")) => {
            if variant != "success_region" {
                return;
            }
            let mode = if class == "rw_allow" { "rw" } else { "ro" };
            let key = (num(call, "driver"), num(call, "buf"), mode);
            let new = (num(call, "base"), num(call, "len"));
            if new.1 == 0 {
                r.zero_length_allows += 1;
            }
            let prev = m.allows.insert(key, new).unwrap_or((0, 0));
            let got = (num(ret, "base"), num(ret, "len"));
            if got != prev {
                r.violations
                    .push(format!("seq {seq}: allow returned {got:?}, previous share was {prev:?}"));
            }
        }
        Some("subscribe") => {
            if variant != "success_upcall" {
                return;
            }
            let key = (num(call, "driver"), num(call, "sub"));
            let new = (call["fn"].as_str().unwrap_or_default().to_string(), num(call, "userdata"));
            let prev = m.upcalls.insert(key, new).unwrap_or(("null".into(), 0));
            let got = (ret["fn"].as_str().unwrap_or_default().to_string(), num(ret, "userdata"));
            if got != prev {
                r.violations
                    .push(format!("seq {seq}: subscribe returned {got:?}, previous was {prev:?}"));
            }
        }
        _ => {}
    }
}
