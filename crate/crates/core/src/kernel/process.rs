// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use crate::ids::{CapsuleId, ProcessId};
use crate::memory::{Address, MemoryRegion};
use crate::syscall::{SharedRegion, SyscallReturn, UpcallDescriptor, YieldMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ProcessState {
    Unstarted,
    Running,
    Yielded(YieldMode),
    Faulted,
    Exited,
}

impl ProcessState {
    pub fn is_live(self) -> bool {
        !matches!(self, ProcessState::Faulted | ProcessState::Exited)
    }

    pub fn name(self) -> &'static str {
        match self {
            ProcessState::Unstarted => "unstarted",
            ProcessState::Running => "running",
            ProcessState::Yielded(YieldMode::Wait) => "yielded_wait",
            ProcessState::Yielded(YieldMode::NoWait) => "yielded_no_wait",
            ProcessState::Faulted => "faulted",
            ProcessState::Exited => "exited",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PendingUpcall {
    pub driver: u32,
    pub subscribe: u32,
    pub args: [u32; 3],
    pub upcall: UpcallDescriptor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropReason {
    DeadProcess,
    NotSubscribed,
    QueueFull,
}

impl DropReason {
    pub fn name(self) -> &'static str {
        match self {
            DropReason::DeadProcess => "dead process",
            DropReason::NotSubscribed => "not subscribed",
            DropReason::QueueFull => "queue full",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum AllowMode {
    ReadWrite,
    ReadOnly,
}

impl AllowMode {
    pub fn name(self) -> &'static str {
        match self {
            AllowMode::ReadWrite => "rw",
            AllowMode::ReadOnly => "ro",
        }
    }
}

/// Placement of a process inside board RAM.
///
/// ```text
/// base                                       app_break       end
///  | app RAM (rw) |  flash image (r)  |  ...free...  | grants |
///                                                    ^ grant_watermark
/// ```
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProcessLayout {
    pub memory: MemoryRegion,
    pub ram: MemoryRegion,
    pub flash: MemoryRegion,
    pub app_break: Address,
}

impl ProcessLayout {
    pub fn end(&self) -> Address {
        self.memory.base + self.memory.length
    }

    pub fn mpu_regions(&self) -> Vec<MemoryRegion> {
        [self.ram, self.flash]
            .into_iter()
            .filter(|r| r.length > 0)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GrantAllocation {
    pub base: Address,
    pub size: u32,
}

#[derive(Debug)]
pub struct ProcessControlBlock {
    pub id: ProcessId,
    pub name: String,
    pub state: ProcessState,
    pub layout: ProcessLayout,
    pub grant_watermark: Address,
    pub grants: BTreeMap<CapsuleId, GrantAllocation>,
    pub upcall_queue: VecDeque<PendingUpcall>,
    pub allow_slots: BTreeMap<(u32, u32, AllowMode), SharedRegion>,
    pub upcall_slots: BTreeMap<(u32, u32), UpcallDescriptor>,
    pub handlers: BTreeSet<String>,
    /// Return value owed to the main script once it resumes after a yield.
    pub pending_return: Option<SyscallReturn>,
    /// An upcall handler was preempted and continues next quantum.
    pub in_upcall: bool,
    pub quanta: u64,
}

impl ProcessControlBlock {
    pub fn new(id: ProcessId, name: String, layout: ProcessLayout, handlers: BTreeSet<String>) -> Self {
        ProcessControlBlock {
            id,
            name,
            state: ProcessState::Unstarted,
            grant_watermark: layout.end(),
            layout,
            grants: BTreeMap::new(),
            upcall_queue: VecDeque::new(),
            allow_slots: BTreeMap::new(),
            upcall_slots: BTreeMap::new(),
            handlers,
            pending_return: None,
            in_upcall: false,
            quanta: 0,
        }
    }

    pub fn is_live(&self) -> bool {
        self.state.is_live()
    }

    pub fn allowed(&self, driver: u32, buffer: u32, mode: AllowMode) -> SharedRegion {
        self.allow_slots
            .get(&(driver, buffer, mode))
            .copied()
            .unwrap_or(SharedRegion::EMPTY)
    }

    pub fn subscribed(&self, driver: u32, subscribe: u32) -> UpcallDescriptor {
        self.upcall_slots
            .get(&(driver, subscribe))
            .cloned()
            .unwrap_or_default()
    }

    /// Bytes consumed by grants so far.
    pub fn grant_bytes(&self) -> u32 {
        self.layout.end() - self.grant_watermark
    }

    /// Whether a scheduler pass would give this process work to do.
    pub fn has_work(&self) -> bool {
        match self.state {
            ProcessState::Unstarted | ProcessState::Running => true,
            ProcessState::Yielded(YieldMode::NoWait) => true,
            ProcessState::Yielded(YieldMode::Wait) => self.in_upcall || !self.upcall_queue.is_empty(),
            ProcessState::Faulted | ProcessState::Exited => false,
        }
    }

    /// Drops every kernel-held reference into the process.
    pub(crate) fn invalidate(&mut self) {
        self.allow_slots.clear();
        self.upcall_slots.clear();
        self.upcall_queue.clear();
        self.grants.clear();
        self.pending_return = None;
        self.in_upcall = false;
    }
}
