// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! The event-driven kernel.
//!
//! One [`Kernel::kernel_loop_step`] services pending interrupts, pumps the
//! asynchronous loader, then gives every process with work one quantum in
//! pid order. A quantum is one syscall, or one upcall handler run to
//! completion.

pub mod binary;
pub mod code;
pub mod driver;
pub mod grant;
pub mod loader;
pub mod process;

use std::cell::{Cell, Ref, RefCell};
use std::collections::{BTreeMap, BTreeSet};
use std::rc::{Rc, Weak};

use serde_json::{json, Value};
use thiserror::Error;

use crate::capabilities::{CapabilityAuthority, CapabilityError, CapabilityKind, CapabilityToken};
use crate::hw::{Chip, SimClock};
use crate::ids::{CapsuleId, ProcessId};
use crate::memory::{
    AccessKind, Accessor, Address, MemoryError, MemoryRegion, Permission, SimMemory,
    DEFAULT_MPU_MAX_REGIONS,
};
use crate::syscall::{
    encode_invocation, encode_return, ErrorCode, SharedRegion, SyscallInvocation, SyscallReturn,
    UpcallDescriptor, YieldMode,
};
use crate::trace::{Actor, Trace};

use code::{CodeStep, ProcessCode, ProcessEnv, ProcessImage};
use driver::SyscallDriver;
use grant::GrantError;
use loader::{LoaderPump, RejectReason};
use process::{
    AllowMode, DropReason, GrantAllocation, PendingUpcall, ProcessControlBlock, ProcessLayout,
    ProcessState,
};

pub use code::CodeLoader;

pub const DEFAULT_UPCALL_QUEUE_DEPTH: usize = 8;
pub const DEFAULT_CAPSULE_STEP_BUDGET: u64 = 100_000;
pub const DEFAULT_QUANTUM_STATEMENTS: u32 = 1024;

/// Carve-outs start on this boundary.
const CARVE_ALIGN: u32 = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelConfig {
    pub ram_size: u32,
    pub mpu_max_regions: usize,
    pub upcall_queue_depth: usize,
    pub capsule_step_budget: u64,
    /// Local statements a process may run per quantum before preemption.
    pub quantum_statements: u32,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            ram_size: 64 * 1024,
            mpu_max_regions: DEFAULT_MPU_MAX_REGIONS,
            upcall_queue_depth: DEFAULT_UPCALL_QUEUE_DEPTH,
            capsule_step_budget: DEFAULT_CAPSULE_STEP_BUDGET,
            quantum_statements: DEFAULT_QUANTUM_STATEMENTS,
        }
    }
}

/// An unrecoverable capsule bug. The simulation halts.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FatalDiagnostic {
    #[error("{context} exceeded its step budget of {budget}")]
    BudgetExceeded { context: String, budget: u64 },
    #[error("capsule {capsule} re-entered its grant for process {pid}")]
    Reentrancy { capsule: String, pid: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("step budget exhausted")]
pub struct BudgetExceeded;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("driver number {0} registered twice")]
    DuplicateDriver(u32),
}

struct CapsuleEntry {
    name: String,
    driver: Option<u32>,
}

type DriverEntry = (CapsuleId, Weak<dyn SyscallDriver>);

pub struct Kernel {
    config: KernelConfig,
    clock: Rc<SimClock>,
    trace: Rc<Trace>,
    authority: Rc<CapabilityAuthority>,
    pub(crate) memory: RefCell<SimMemory>,
    chip: RefCell<Option<Rc<Chip>>>,
    loader: RefCell<Option<Rc<dyn LoaderPump>>>,
    procs: RefCell<BTreeMap<ProcessId, ProcessControlBlock>>,
    codes: RefCell<BTreeMap<ProcessId, Box<dyn ProcessCode>>>,
    capsules: RefCell<Vec<CapsuleEntry>>,
    drivers: RefCell<BTreeMap<u32, DriverEntry>>,
    carve_outs: RefCell<BTreeMap<Address, u32>>,
    next_pid: Cell<u32>,
    entered: RefCell<BTreeSet<(CapsuleId, ProcessId)>>,
    budget_left: Cell<u64>,
    budget_context: RefCell<String>,
    fatal: RefCell<Option<FatalDiagnostic>>,
}

impl Kernel {
    pub fn new(
        config: KernelConfig,
        clock: Rc<SimClock>,
        trace: Rc<Trace>,
        authority: Rc<CapabilityAuthority>,
    ) -> Rc<Kernel> {
        let memory = SimMemory::new(config.ram_size, config.mpu_max_regions);
        Rc::new(Kernel {
            budget_left: Cell::new(config.capsule_step_budget),
            config,
            clock,
            trace,
            authority,
            memory: RefCell::new(memory),
            chip: RefCell::new(None),
            loader: RefCell::new(None),
            procs: RefCell::new(BTreeMap::new()),
            codes: RefCell::new(BTreeMap::new()),
            capsules: RefCell::new(Vec::new()),
            drivers: RefCell::new(BTreeMap::new()),
            carve_outs: RefCell::new(BTreeMap::new()),
            next_pid: Cell::new(0),
            entered: RefCell::new(BTreeSet::new()),
            budget_context: RefCell::new(String::new()),
            fatal: RefCell::new(None),
        })
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn clock(&self) -> &Rc<SimClock> {
        &self.clock
    }

    pub fn trace(&self) -> &Rc<Trace> {
        &self.trace
    }

    pub fn authority(&self) -> &Rc<CapabilityAuthority> {
        &self.authority
    }

    pub fn set_chip(&self, chip: Rc<Chip>) {
        *self.chip.borrow_mut() = Some(chip);
    }

    pub fn set_loader(&self, loader: Rc<dyn LoaderPump>) {
        *self.loader.borrow_mut() = Some(loader);
    }

    /// Read-only view of simulated RAM for inspection.
    pub fn memory(&self) -> Ref<'_, SimMemory> {
        self.memory.borrow()
    }

    // ---- capsules and drivers ----

    pub fn add_capsule(&self, name: &str) -> CapsuleId {
        let mut caps = self.capsules.borrow_mut();
        caps.push(CapsuleEntry {
            name: name.into(),
            driver: None,
        });
        CapsuleId(caps.len() as u16 - 1)
    }

    pub fn capsule_name(&self, id: CapsuleId) -> String {
        self.capsules
            .borrow()
            .get(id.0 as usize)
            .map(|c| c.name.clone())
            .unwrap_or_else(|| id.to_string())
    }

    pub fn capsule_actor(&self, id: CapsuleId) -> Actor {
        Actor::Capsule(self.capsule_name(id))
    }

    pub fn capsule_driver(&self, id: CapsuleId) -> Option<u32> {
        self.capsules.borrow().get(id.0 as usize).and_then(|c| c.driver)
    }

    pub fn register_driver(
        &self,
        capsule: CapsuleId,
        driver_num: u32,
        driver: Weak<dyn SyscallDriver>,
    ) -> Result<(), KernelError> {
        let mut drivers = self.drivers.borrow_mut();
        if drivers.contains_key(&driver_num) {
            return Err(KernelError::DuplicateDriver(driver_num));
        }
        drivers.insert(driver_num, (capsule, driver));
        self.capsules.borrow_mut()[capsule.0 as usize].driver = Some(driver_num);
        Ok(())
    }

    fn driver(&self, driver_num: u32) -> Option<(CapsuleId, Rc<dyn SyscallDriver>)> {
        let drivers = self.drivers.borrow();
        let (id, weak) = drivers.get(&driver_num)?;
        weak.upgrade().map(|d| (*id, d))
    }

    // ---- budget and fatal diagnostics ----

    fn begin_capsule_call(&self, context: String) {
        self.budget_left.set(self.config.capsule_step_budget);
        *self.budget_context.borrow_mut() = context;
    }

    /// Charges `n` simulated steps to the capsule call in progress.
    pub fn charge(&self, n: u64) -> Result<(), BudgetExceeded> {
        if self.fatal.borrow().is_some() {
            return Err(BudgetExceeded);
        }
        match self.budget_left.get().checked_sub(n) {
            Some(left) => {
                self.budget_left.set(left);
                Ok(())
            }
            None => {
                self.budget_left.set(0);
                let context = self.budget_context.borrow().clone();
                self.set_fatal(FatalDiagnostic::BudgetExceeded {
                    context,
                    budget: self.config.capsule_step_budget,
                });
                Err(BudgetExceeded)
            }
        }
    }

    fn set_fatal(&self, diag: FatalDiagnostic) {
        let mut fatal = self.fatal.borrow_mut();
        if fatal.is_some() {
            return;
        }
        let payload = match &diag {
            FatalDiagnostic::BudgetExceeded { context, budget } => {
                json!({ "kind": "budget", "context": context, "budget": budget, "message": diag.to_string() })
            }
            FatalDiagnostic::Reentrancy { capsule, pid } => {
                json!({ "kind": "reentrancy", "capsule": capsule, "pid": pid, "message": diag.to_string() })
            }
        };
        self.trace.record(Actor::Kernel, "fatal", payload);
        *fatal = Some(diag);
    }

    pub fn fatal(&self) -> Option<FatalDiagnostic> {
        self.fatal.borrow().clone()
    }

    // ---- processes ----

    pub fn is_live(&self, pid: ProcessId) -> bool {
        self.procs.borrow().get(&pid).is_some_and(|p| p.is_live())
    }

    pub fn process_state(&self, pid: ProcessId) -> Option<ProcessState> {
        self.procs.borrow().get(&pid).map(|p| p.state)
    }

    pub fn with_process<R>(&self, pid: ProcessId, f: impl FnOnce(&ProcessControlBlock) -> R) -> Option<R> {
        self.procs.borrow().get(&pid).map(f)
    }

    /// Every process ever created, live or not, in pid order.
    pub fn process_ids(&self) -> Vec<ProcessId> {
        self.procs.borrow().keys().copied().collect()
    }

    pub fn live_processes(&self) -> Vec<ProcessId> {
        self.procs
            .borrow()
            .values()
            .filter(|p| p.is_live())
            .map(|p| p.id)
            .collect()
    }

    pub fn find_process(&self, name: &str) -> Option<ProcessId> {
        self.procs
            .borrow()
            .values()
            .find(|p| p.name == name)
            .map(|p| p.id)
    }

    fn alloc_carve_out(&self, size: u32) -> Option<Address> {
        let carve = self.carve_outs.borrow();
        let mut cursor: u64 = 0;
        for (&base, &len) in carve.iter() {
            if cursor + size as u64 <= base as u64 {
                break;
            }
            cursor = (base as u64 + len as u64).next_multiple_of(CARVE_ALIGN as u64);
        }
        (cursor + size as u64 <= self.config.ram_size as u64).then_some(cursor as Address)
    }

    /// Places a verified process in memory. Used by both loaders.
    pub fn create_process(
        &self,
        name: &str,
        code: Box<dyn ProcessCode>,
        image: ProcessImage,
        min_memory: u32,
    ) -> Result<ProcessId, RejectReason> {
        let flash_len = image.flash.len() as u32;
        let needed = image.app_ram as u64 + flash_len as u64;
        if needed > min_memory as u64 || min_memory == 0 {
            return Err(RejectReason::NotRunnable);
        }
        let base = self.alloc_carve_out(min_memory).ok_or(RejectReason::NoRoom)?;
        let layout = ProcessLayout {
            memory: MemoryRegion::new(base, min_memory, Permission::None),
            ram: MemoryRegion::new(base, image.app_ram, Permission::ReadWrite),
            flash: MemoryRegion::new(base + image.app_ram, flash_len, Permission::Read),
            app_break: base + image.app_ram + flash_len,
        };
        let pid = ProcessId(self.next_pid.get());
        {
            let mut mem = self.memory.borrow_mut();
            mem.configure_regions(pid, &layout.mpu_regions())
                .map_err(|_| RejectReason::NotRunnable)?;
            let zeroes = vec![0u8; min_memory as usize];
            mem.write(Accessor::Kernel, base, &zeroes)
                .and_then(|_| mem.write(Accessor::Kernel, layout.flash.base, &image.flash))
                .map_err(|_| RejectReason::NoRoom)?;
        }
        self.next_pid.set(pid.0 + 1);
        self.carve_outs.borrow_mut().insert(base, min_memory);
        let handlers = code.handler_names().into_iter().collect();
        self.procs.borrow_mut().insert(
            pid,
            ProcessControlBlock::new(pid, name.into(), layout, handlers),
        );
        self.codes.borrow_mut().insert(pid, code);
        self.trace.record(
            Actor::Kernel,
            "process_created",
            json!({
                "pid": pid.0,
                "name": name,
                "base": base,
                "size": min_memory,
                "ram": image.app_ram,
                "flash": flash_len,
            }),
        );
        Ok(pid)
    }

    fn set_state(&self, pid: ProcessId, state: ProcessState) {
        let changed = {
            let mut procs = self.procs.borrow_mut();
            match procs.get_mut(&pid) {
                Some(p) if p.state != state => {
                    p.state = state;
                    true
                }
                _ => false,
            }
        };
        if changed {
            self.trace.record(
                Actor::Kernel,
                "process_state",
                json!({ "pid": pid.0, "state": state.name() }),
            );
        }
    }

    /// Ends a process and drops every reference the kernel held into it.
    fn terminate(&self, pid: ProcessId, state: ProcessState, reason: &str) {
        let base = {
            let mut procs = self.procs.borrow_mut();
            let Some(p) = procs.get_mut(&pid) else {
                return;
            };
            if !p.is_live() {
                return;
            }
            p.invalidate();
            p.layout.memory.base
        };
        self.memory.borrow_mut().clear_regions(pid);
        self.carve_outs.borrow_mut().remove(&base);
        self.codes.borrow_mut().remove(&pid);
        self.set_state(pid, state);
        self.trace.record(
            Actor::Kernel,
            "process_terminated",
            json!({ "pid": pid.0, "state": state.name(), "reason": reason }),
        );
    }

    /// Destroys a process on behalf of the holder of a management token.
    pub fn process_destroy(&self, token: &CapabilityToken, pid: ProcessId) -> Result<(), CapabilityError> {
        let holder = self.authority.verify(token, CapabilityKind::ProcessManagement)?;
        if !self.is_live(pid) {
            return Err(CapabilityError::NoSuchProcess(pid.0));
        }
        self.trace.record(
            holder,
            "privileged",
            json!({ "op": "process_destroy", "cap": CapabilityKind::ProcessManagement.name(), "pid": pid.0 }),
        );
        self.terminate(pid, ProcessState::Exited, "destroyed");
        Ok(())
    }

    /// Grant bytes consumed by a process, for holders of an inspection token.
    pub fn grant_usage(&self, token: &CapabilityToken, pid: ProcessId) -> Result<u32, CapabilityError> {
        let holder = self.authority.verify(token, CapabilityKind::GrantInspection)?;
        let used = self
            .with_process(pid, |p| p.is_live().then(|| p.grant_bytes()))
            .flatten()
            .ok_or(CapabilityError::NoSuchProcess(pid.0))?;
        self.trace.record(
            holder,
            "privileged",
            json!({ "op": "grant_usage", "cap": CapabilityKind::GrantInspection.name(), "pid": pid.0 }),
        );
        Ok(used)
    }

    // ---- grants ----

    pub(crate) fn grant_holders(&self, capsule: CapsuleId) -> Vec<ProcessId> {
        self.procs
            .borrow()
            .values()
            .filter(|p| p.is_live() && p.grants.contains_key(&capsule))
            .map(|p| p.id)
            .collect()
    }

    /// Allocates on first use, then lends the grant bytes to `f`.
    pub(crate) fn grant_enter<R>(
        &self,
        capsule: CapsuleId,
        pid: ProcessId,
        size: u32,
        f: impl FnOnce(&mut [u8]) -> R,
    ) -> Result<R, GrantError> {
        if !self.entered.borrow_mut().insert((capsule, pid)) {
            self.set_fatal(FatalDiagnostic::Reentrancy {
                capsule: self.capsule_name(capsule),
                pid: pid.0,
            });
            return Err(GrantError::Reentrant);
        }
        let r = self.grant_enter_inner(capsule, pid, size, f);
        self.entered.borrow_mut().remove(&(capsule, pid));
        r
    }

    fn grant_enter_inner<R>(
        &self,
        capsule: CapsuleId,
        pid: ProcessId,
        size: u32,
        f: impl FnOnce(&mut [u8]) -> R,
    ) -> Result<R, GrantError> {
        let base = {
            let mut procs = self.procs.borrow_mut();
            let p = procs
                .get_mut(&pid)
                .filter(|p| p.is_live())
                .ok_or(GrantError::ProcessDead)?;
            match p.grants.get(&capsule) {
                Some(a) => a.base,
                None => {
                    let fits = p.grant_watermark >= p.layout.app_break + size;
                    if !fits {
                        drop(procs);
                        self.trace.record(
                            Actor::Kernel,
                            "grant_nomem",
                            json!({ "pid": pid.0, "capsule": self.capsule_name(capsule), "size": size }),
                        );
                        return Err(GrantError::NoMem);
                    }
                    p.grant_watermark -= size;
                    let base = p.grant_watermark;
                    p.grants.insert(capsule, GrantAllocation { base, size });
                    drop(procs);
                    let _ = self
                        .memory
                        .borrow_mut()
                        .write(Accessor::Kernel, base, &vec![0; size as usize]);
                    self.trace.record(
                        Actor::Kernel,
                        "grant_alloc",
                        json!({ "pid": pid.0, "capsule": self.capsule_name(capsule), "size": size, "base": base }),
                    );
                    base
                }
            }
        };
        let mut bytes = self
            .memory
            .borrow_mut()
            .read(Accessor::Kernel, base, size)
            .map_err(|_| GrantError::ProcessDead)?;
        let r = f(&mut bytes);
        if self.is_live(pid) {
            let _ = self.memory.borrow_mut().write(Accessor::Kernel, base, &bytes);
        }
        Ok(r)
    }

    // ---- upcalls ----

    /// Queues an upcall from `capsule`'s driver to `pid`. Never runs process
    /// code; delivery happens at the process's next yield.
    pub fn schedule_upcall(
        &self,
        capsule: CapsuleId,
        pid: ProcessId,
        subscribe: u32,
        args: [u32; 3],
    ) -> Result<(), DropReason> {
        let driver = self.capsule_driver(capsule).unwrap_or(u32::MAX);
        let result = {
            let mut procs = self.procs.borrow_mut();
            match procs.get_mut(&pid).filter(|p| p.is_live()) {
                None => Err(DropReason::DeadProcess),
                Some(p) => {
                    let upcall = p.subscribed(driver, subscribe);
                    if upcall.is_null() {
                        Err(DropReason::NotSubscribed)
                    } else if let Some(q) = p
                        .upcall_queue
                        .iter_mut()
                        .find(|q| q.driver == driver && q.subscribe == subscribe)
                    {
                        q.args = args;
                        q.upcall = upcall;
                        Ok(())
                    } else if p.upcall_queue.len() >= self.config.upcall_queue_depth {
                        Err(DropReason::QueueFull)
                    } else {
                        p.upcall_queue.push_back(PendingUpcall {
                            driver,
                            subscribe,
                            args,
                            upcall,
                        });
                        Ok(())
                    }
                }
            }
        };
        let actor = self.capsule_actor(capsule);
        match result {
            Ok(()) => self.trace.record(
                actor,
                "upcall_queued",
                json!({ "pid": pid.0, "driver": driver, "subscribe": subscribe, "args": args }),
            ),
            Err(reason) => self.trace.record(
                actor,
                "upcall_dropped",
                json!({ "pid": pid.0, "driver": driver, "subscribe": subscribe, "reason": reason.name() }),
            ),
        }
        result
    }

    // ---- syscalls ----

    /// Executes one system call for `pid`. `None` means the process blocked
    /// in yield or is no longer alive; its return value, if any, is
    /// delivered when it next runs.
    pub fn handle_syscall(&self, pid: ProcessId, inv: SyscallInvocation) -> Option<SyscallReturn> {
        let (state, in_upcall) = self.with_process(pid, |p| (p.state, p.in_upcall))?;
        if !state.is_live() {
            return None;
        }
        match inv {
            SyscallInvocation::Yield(mode) => {
                if in_upcall {
                    return Some(SyscallReturn::Failure(ErrorCode::Inval));
                }
                let empty = self.with_process(pid, |p| p.upcall_queue.is_empty())?;
                if mode == YieldMode::NoWait && empty {
                    return Some(SyscallReturn::SuccessWithValue(0));
                }
                self.set_state(pid, ProcessState::Yielded(mode));
                None
            }
            SyscallInvocation::Subscribe {
                driver,
                subscribe,
                upcall,
            } => Some(self.subscribe(pid, driver, subscribe, upcall)),
            SyscallInvocation::Command {
                driver,
                command,
                arg0,
                arg1,
            } => {
                let Some((capsule, d)) = self.driver(driver) else {
                    return Some(SyscallReturn::Failure(ErrorCode::NoDevice));
                };
                self.begin_capsule_call(self.capsule_name(capsule));
                let ret = d.command(command, arg0, arg1, pid);
                self.is_live(pid).then_some(ret)
            }
            SyscallInvocation::ReadWriteAllow {
                driver,
                buffer,
                region,
            } => Some(self.allow(pid, driver, buffer, region, AllowMode::ReadWrite)),
            SyscallInvocation::ReadOnlyAllow {
                driver,
                buffer,
                region,
            } => Some(self.allow(pid, driver, buffer, region, AllowMode::ReadOnly)),
            SyscallInvocation::Exit { code } => {
                self.terminate(pid, ProcessState::Exited, &format!("exit {code}"));
                None
            }
        }
    }

    fn subscribe(&self, pid: ProcessId, driver: u32, subscribe: u32, upcall: UpcallDescriptor) -> SyscallReturn {
        let Some((_, d)) = self.driver(driver) else {
            return SyscallReturn::FailureWithUpcall(ErrorCode::NoDevice, upcall);
        };
        if subscribe >= d.subscribe_count() {
            return SyscallReturn::FailureWithUpcall(ErrorCode::NoSupport, upcall);
        }
        let mut procs = self.procs.borrow_mut();
        let p = procs.get_mut(&pid).expect("caller checked liveness");
        if let Some(h) = &upcall.handler {
            if !p.handlers.contains(h) {
                return SyscallReturn::FailureWithUpcall(ErrorCode::Inval, upcall);
            }
        }
        p.upcall_queue
            .retain(|q| !(q.driver == driver && q.subscribe == subscribe));
        let previous = p
            .upcall_slots
            .insert((driver, subscribe), upcall)
            .unwrap_or_default();
        SyscallReturn::SuccessWithUpcall(previous)
    }

    fn allow(
        &self,
        pid: ProcessId,
        driver: u32,
        buffer: u32,
        region: SharedRegion,
        mode: AllowMode,
    ) -> SyscallReturn {
        let Some((_, d)) = self.driver(driver) else {
            return SyscallReturn::FailureWithRegion(ErrorCode::NoDevice, region);
        };
        let slots = match mode {
            AllowMode::ReadWrite => d.allow_rw_count(),
            AllowMode::ReadOnly => d.allow_ro_count(),
        };
        if buffer >= slots {
            return SyscallReturn::FailureWithRegion(ErrorCode::NoSupport, region);
        }
        if region.len > 0 {
            let kind = match mode {
                AllowMode::ReadWrite => AccessKind::Write,
                AllowMode::ReadOnly => AccessKind::Read,
            };
            let ok = self
                .memory
                .borrow()
                .check(Accessor::Process(pid), region.base, region.len, kind)
                .is_ok();
            if !ok {
                return SyscallReturn::FailureWithRegion(ErrorCode::Inval, region);
            }
        }
        let mut procs = self.procs.borrow_mut();
        let p = procs.get_mut(&pid).expect("caller checked liveness");
        let previous = p
            .allow_slots
            .insert((driver, buffer, mode), region)
            .unwrap_or(SharedRegion::EMPTY);
        SyscallReturn::SuccessWithRegion(previous)
    }

    // ---- scheduling ----

    /// One iteration of the main loop. Returns false when there was nothing
    /// to do (or the simulation has halted on a fatal diagnostic).
    pub fn kernel_loop_step(&self) -> bool {
        if self.fatal.borrow().is_some() {
            return false;
        }
        let mut progressed = false;
        let chip = self.chip.borrow().clone();
        if let Some(chip) = chip {
            for irq in chip.intc().deliverable() {
                self.begin_capsule_call(format!("irq {irq}"));
                self.trace
                    .record(Actor::Kernel, "irq_dispatch", json!({ "irq": irq }));
                chip.dispatch(irq);
                progressed = true;
                if self.fatal.borrow().is_some() {
                    return true;
                }
            }
        }
        let loader = self.loader.borrow().clone();
        if let Some(loader) = loader {
            progressed |= loader.pump(self);
        }
        let ready: Vec<ProcessId> = self
            .procs
            .borrow()
            .values()
            .filter(|p| p.has_work())
            .map(|p| p.id)
            .collect();
        for pid in ready {
            if !self.with_process(pid, |p| p.has_work()).unwrap_or(false) {
                continue;
            }
            self.run_quantum(pid);
            progressed = true;
            if self.fatal.borrow().is_some() {
                break;
            }
        }
        progressed
    }

    /// No process has work and the loader has nothing in flight.
    pub fn is_quiescent(&self) -> bool {
        let procs_idle = self.procs.borrow().values().all(|p| !p.has_work());
        let loader_idle = self.loader.borrow().as_ref().is_none_or(|l| l.is_idle());
        procs_idle && loader_idle
    }

    pub fn loader_idle(&self) -> bool {
        self.loader.borrow().as_ref().is_none_or(|l| l.is_idle())
    }

    fn run_quantum(&self, pid: ProcessId) {
        let Some(mut code) = self.codes.borrow_mut().remove(&pid) else {
            return;
        };
        let (state, in_upcall, base) = self
            .with_process(pid, |p| (p.state, p.in_upcall, p.layout.memory.base))
            .expect("scheduled process exists");
        if let Some(p) = self.procs.borrow_mut().get_mut(&pid) {
            p.quanta += 1;
        }
        let mut env = KernelEnv {
            kernel: self,
            pid,
            base,
            remaining: self.config.quantum_statements,
        };
        if in_upcall {
            self.continue_upcall(pid, code.as_mut(), &mut env);
        } else if let ProcessState::Yielded(_) = state {
            self.deliver_upcall(pid, code.as_mut(), &mut env);
        } else {
            self.run_main(pid, state, code.as_mut(), &mut env);
        }
        if self.is_live(pid) {
            self.codes.borrow_mut().insert(pid, code);
        }
    }

    fn run_main(&self, pid: ProcessId, state: ProcessState, code: &mut dyn ProcessCode, env: &mut KernelEnv<'_>) {
        if state == ProcessState::Unstarted {
            self.set_state(pid, ProcessState::Running);
        }
        let owed = self
            .procs
            .borrow_mut()
            .get_mut(&pid)
            .and_then(|p| p.pending_return.take());
        if let Some(ret) = owed {
            self.trace_return(pid, "yield", &ret);
            code.syscall_returned(ret);
        }
        match code.run(env) {
            CodeStep::Syscall(inv) => {
                self.dispatch(pid, inv, code);
            }
            CodeStep::Finished => self.terminate(pid, ProcessState::Exited, "finished"),
            CodeStep::Fault(reason) => self.terminate(pid, ProcessState::Faulted, &reason),
            CodeStep::UpcallDone => {
                self.terminate(pid, ProcessState::Faulted, "returned from a handler that was not running")
            }
            CodeStep::Preempted => {}
        }
    }

    fn deliver_upcall(&self, pid: ProcessId, code: &mut dyn ProcessCode, env: &mut KernelEnv<'_>) {
        let head = self
            .procs
            .borrow_mut()
            .get_mut(&pid)
            .and_then(|p| p.upcall_queue.pop_front());
        let Some(up) = head else {
            self.resume_after_yield(pid, SyscallReturn::SuccessWithValue(0));
            return;
        };
        let handler = up.upcall.handler.clone().unwrap_or_default();
        self.trace.record(
            Actor::Process(pid),
            "upcall",
            json!({
                "driver": up.driver,
                "subscribe": up.subscribe,
                "handler": handler,
                "args": up.args,
                "userdata": up.upcall.userdata,
            }),
        );
        if !code.enter_upcall(&handler, up.args, up.upcall.userdata) {
            self.terminate(pid, ProcessState::Faulted, "upcall to missing handler");
            return;
        }
        if let Some(p) = self.procs.borrow_mut().get_mut(&pid) {
            p.in_upcall = true;
        }
        self.continue_upcall(pid, code, env);
    }

    fn continue_upcall(&self, pid: ProcessId, code: &mut dyn ProcessCode, env: &mut KernelEnv<'_>) {
        loop {
            match code.run(env) {
                CodeStep::Syscall(inv) => {
                    self.dispatch(pid, inv, code);
                    if !self.is_live(pid) {
                        return;
                    }
                }
                CodeStep::UpcallDone => {
                    let mode = match self.process_state(pid) {
                        Some(ProcessState::Yielded(m)) => m,
                        _ => YieldMode::Wait,
                    };
                    if let Some(p) = self.procs.borrow_mut().get_mut(&pid) {
                        p.in_upcall = false;
                    }
                    self.trace.record(Actor::Process(pid), "upcall_done", json!({}));
                    let ret = match mode {
                        YieldMode::Wait => SyscallReturn::Success,
                        YieldMode::NoWait => SyscallReturn::SuccessWithValue(1),
                    };
                    self.resume_after_yield(pid, ret);
                    return;
                }
                CodeStep::Preempted => return,
                CodeStep::Finished => {
                    self.terminate(pid, ProcessState::Exited, "finished");
                    return;
                }
                CodeStep::Fault(reason) => {
                    self.terminate(pid, ProcessState::Faulted, &reason);
                    return;
                }
            }
        }
    }

    fn resume_after_yield(&self, pid: ProcessId, ret: SyscallReturn) {
        if let Some(p) = self.procs.borrow_mut().get_mut(&pid) {
            p.pending_return = Some(ret);
        }
        self.set_state(pid, ProcessState::Running);
    }

    fn dispatch(&self, pid: ProcessId, inv: SyscallInvocation, code: &mut dyn ProcessCode) {
        let class = inv.class_name();
        self.trace
            .record(Actor::Process(pid), "syscall", encode_invocation(&inv));
        if let Some(ret) = self.handle_syscall(pid, inv) {
            self.trace_return(pid, class, &ret);
            code.syscall_returned(ret);
        }
    }

    fn trace_return(&self, pid: ProcessId, class: &str, ret: &SyscallReturn) {
        self.trace.record(
            Actor::Process(pid),
            "syscall_return",
            json!({ "class": class, "ret": encode_return(ret) }),
        );
    }
}

struct KernelEnv<'k> {
    kernel: &'k Kernel,
    pid: ProcessId,
    base: Address,
    remaining: u32,
}

impl KernelEnv<'_> {
    fn fault_event(&self, e: &MemoryError) {
        if let MemoryError::AccessDenied {
            base, length, kind, ..
        } = e
        {
            self.kernel.trace.record(
                Actor::Kernel,
                "mpu_fault",
                json!({ "pid": self.pid.0, "base": base, "len": length, "kind": kind.as_str() }),
            );
        }
    }
}

impl ProcessEnv for KernelEnv<'_> {
    fn pid(&self) -> ProcessId {
        self.pid
    }

    fn memory_base(&self) -> Address {
        self.base
    }

    fn read(&mut self, addr: Address, len: u32) -> Result<Vec<u8>, MemoryError> {
        let r = self
            .kernel
            .memory
            .borrow_mut()
            .read(Accessor::Process(self.pid), addr, len);
        if let Err(e) = &r {
            self.fault_event(e);
        }
        r
    }

    fn write(&mut self, addr: Address, data: &[u8]) -> Result<(), MemoryError> {
        let r = self
            .kernel
            .memory
            .borrow_mut()
            .write(Accessor::Process(self.pid), addr, data);
        if let Err(e) = &r {
            self.fault_event(e);
        }
        r
    }

    fn note(&mut self, kind: &str, payload: Value) {
        self.kernel.trace.record(Actor::Process(self.pid), kind, payload);
    }

    fn charge(&mut self) -> bool {
        if self.remaining == 0 {
            return false;
        }
        self.remaining -= 1;
        true
    }
}
