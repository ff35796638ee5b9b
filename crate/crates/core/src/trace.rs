// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! The deterministic simulation log.
//!
//! Every observable event is appended here with a strictly increasing
//! sequence number and the simulated tick at which it happened. The JSON
//! lines form has a fixed key order (`seq`, `tick`, `actor`, `kind`,
//! `payload`) and payload maps are key-sorted, so identical runs produce
//! byte-identical output.

use core::fmt;
use std::cell::{Cell, Ref, RefCell};
use std::rc::Rc;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::hw::SimClock;
use crate::ids::ProcessId;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Actor {
    Kernel,
    Capsule(String),
    Process(ProcessId),
    Hw(String),
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Actor::Kernel => f.write_str("kernel"),
            Actor::Capsule(name) => write!(f, "capsule:{name}"),
            Actor::Process(pid) => write!(f, "process:{}", pid.0),
            Actor::Hw(name) => write!(f, "hw:{name}"),
        }
    }
}

impl std::str::FromStr for Actor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "kernel" {
            return Ok(Actor::Kernel);
        }
        let (tag, rest) = s.split_once(':').ok_or_else(|| format!("bad actor {s:?}"))?;
        match tag {
            "capsule" => Ok(Actor::Capsule(rest.into())),
            "hw" => Ok(Actor::Hw(rest.into())),
            "process" => rest
                .parse()
                .map(|n| Actor::Process(ProcessId(n)))
                .map_err(|_| format!("bad process id in {s:?}")),
            _ => Err(format!("bad actor {s:?}")),
        }
    }
}

impl Serialize for Actor {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Actor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub tick: u64,
    pub actor: Actor,
    pub kind: String,
    pub payload: Value,
}

impl TraceEvent {
    /// The process this event concerns, either as actor or via a `pid` field.
    pub fn subject_pid(&self) -> Option<ProcessId> {
        match &self.actor {
            Actor::Process(pid) => Some(*pid),
            _ => self
                .payload
                .get("pid")
                .and_then(Value::as_u64)
                .map(|p| ProcessId(p as u32)),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace events always serialize")
    }

    /// Human-readable rendering; not byte-stable across versions.
    pub fn to_pretty_line(&self) -> String {
        format!(
            "#{:<6} t={:<8} {:<18} {:<16} {}",
            self.seq, self.tick, self.actor.to_string(), self.kind, self.payload
        )
    }
}

/// Append-only event log shared by every component of one board.
#[derive(Debug)]
pub struct Trace {
    clock: Rc<SimClock>,
    next_seq: Cell<u64>,
    events: RefCell<Vec<TraceEvent>>,
}

impl Trace {
    pub fn new(clock: Rc<SimClock>) -> Self {
        Trace {
            clock,
            next_seq: Cell::new(0),
            events: RefCell::new(Vec::new()),
        }
    }

    pub fn record(&self, actor: Actor, kind: &str, payload: Value) {
        let seq = self.next_seq.get();
        self.next_seq.set(seq + 1);
        self.events.borrow_mut().push(TraceEvent {
            seq,
            tick: self.clock.now(),
            actor,
            kind: kind.to_string(),
            payload,
        });
    }

    pub fn events(&self) -> Ref<'_, Vec<TraceEvent>> {
        self.events.borrow()
    }

    pub fn len(&self) -> usize {
        self.events.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count_kind(&self, kind: &str) -> usize {
        self.events.borrow().iter().filter(|e| e.kind == kind).count()
    }

    pub fn to_jsonl(&self) -> String {
        render_jsonl(&self.events.borrow())
    }
}

pub fn render_jsonl(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_json_line());
        out.push('\n');
    }
    out
}

pub fn render_pretty(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_pretty_line());
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str) -> Result<Vec<TraceEvent>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
