// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! The userspace side of a process, as seen by the kernel.

use serde_json::Value;

use super::binary::ProcessBinary;
use crate::ids::ProcessId;
use crate::memory::{Address, MemoryError};
use crate::syscall::{SyscallInvocation, SyscallReturn};

/// What a process did when given the CPU.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CodeStep {
    Syscall(SyscallInvocation),
    /// The running upcall handler finished.
    UpcallDone,
    /// The main program ran off its end.
    Finished,
    Fault(String),
    /// The quantum's statement allowance ran out.
    Preempted,
}

/// Services available to process code while it runs.
pub trait ProcessEnv {
    fn pid(&self) -> ProcessId;

    /// Lowest address of the process's memory.
    fn memory_base(&self) -> Address;

    /// MPU-checked read with the process's own accessor.
    fn read(&mut self, addr: Address, len: u32) -> Result<Vec<u8>, MemoryError>;

    /// MPU-checked write with the process's own accessor.
    fn write(&mut self, addr: Address, data: &[u8]) -> Result<(), MemoryError>;

    /// Records a process-attributed trace event.
    fn note(&mut self, kind: &str, payload: Value);

    /// Accounts for one local statement. False once the quantum is used up.
    fn charge(&mut self) -> bool;
}

pub trait ProcessCode {
    /// Runs until the next syscall, handler completion, or termination.
    fn run(&mut self, env: &mut dyn ProcessEnv) -> CodeStep;

    /// Delivers the return value of the last syscall.
    fn syscall_returned(&mut self, ret: SyscallReturn);

    /// Starts an upcall handler. Returns false if no such handler exists.
    fn enter_upcall(&mut self, handler: &str, args: [u32; 3], userdata: u32) -> bool;

    /// Names that subscribe may register.
    fn handler_names(&self) -> Vec<String>;

    /// Whether the named entry point exists.
    fn has_entry(&self, entry: &str) -> bool;
}

/// Memory image a binary asks for.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProcessImage {
    pub flash: Vec<u8>,
    pub app_ram: u32,
}

/// Turns a verified binary payload into runnable code.
pub trait CodeLoader {
    fn instantiate(&self, binary: &ProcessBinary) -> Result<(Box<dyn ProcessCode>, ProcessImage), String>;
}
