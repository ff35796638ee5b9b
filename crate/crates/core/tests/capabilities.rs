// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

mod common;

use std::rc::Rc;

use serde_json::json;

use common::criteria::privileged_scenario;
use common::*;
use kernsim_core::capabilities::{CapabilityAuthority, CapabilityError, CapabilityKind};
use kernsim_core::hw::SimClock;
use kernsim_core::trace::Trace;

#[test]
fn privileged_operations_need_minted_tokens() {
    common::criteria::c9_capability_gating().unwrap();
}

fn authority() -> CapabilityAuthority {
    let clock = Rc::new(SimClock::new());
    CapabilityAuthority::new(Rc::new(Trace::new(clock)))
}

#[test]
fn tokens_do_not_cross_boards() {
    let a = authority();
    let b = authority();
    let token = a.mint(CapabilityKind::ProcessManagement, "ctl").unwrap();
    assert_eq!(
        b.verify(&token, CapabilityKind::ProcessManagement),
        Err(CapabilityError::ForeignCapability)
    );
    assert!(a.verify(&token, CapabilityKind::ProcessManagement).is_ok());
}

#[test]
fn token_kind_is_checked() {
    let a = authority();
    let token = a.mint(CapabilityKind::GrantInspection, "ctl").unwrap();
    assert!(matches!(
        a.verify(&token, CapabilityKind::ProcessManagement),
        Err(CapabilityError::WrongKind { .. })
    ));
}

#[test]
fn finalize_happens_once() {
    let a = authority();
    a.finalize().unwrap();
    assert_eq!(a.finalize(), Err(CapabilityError::PhaseError));
    assert_eq!(a.mint(CapabilityKind::LoaderControl, "kernel"), Err(CapabilityError::PhaseError));
}

#[test]
fn partial_grant_limits_the_capsule() {
    let o = run_scenarios(
        json!({ "capabilities": { "proc_ctl": ["GrantInspection"] } }),
        &[json!({
            "name": "partial",
            "main": [
                { "syscall": { "class": "command", "driver": 16, "cmd": 3, "args": [0] } },
                { "expect": { "variant": "success_value" } },
                { "syscall": { "class": "command", "driver": 16, "cmd": 1, "args": [0] } },
                { "expect": { "variant": "failure", "err": "NOSUPPORT" } },
                "halt"
            ]
        })],
        1_000,
    );
    let ev = events(&o);
    assert!(failed_expects(&ev).is_empty(), "{:?}", failed_expects(&ev));
    assert!(audit_outcome(&o).is_clean());
    let ops: Vec<_> = of_kind(&ev, "privileged")
        .iter()
        .filter(|e| e.actor.to_string() == "capsule:proc_ctl")
        .map(|e| e.payload["op"].clone())
        .collect();
    assert_eq!(ops, vec![json!("grant_usage")]);
}

#[test]
fn self_destroy_is_traced_with_the_holder() {
    let o = run_scenarios(json!({}), &[privileged_scenario()], 1_000);
    let ev = events(&o);
    let destroy = of_kind(&ev, "privileged")
        .into_iter()
        .find(|e| e.payload["op"] == "process_destroy")
        .unwrap();
    assert_eq!(destroy.actor.to_string(), "capsule:proc_ctl");
    assert_eq!(destroy.payload["cap"], "ProcessManagement");
    assert!(of_kind(&ev, "process_terminated").iter().any(|e| e.payload["pid"] == json!(0)));
}
