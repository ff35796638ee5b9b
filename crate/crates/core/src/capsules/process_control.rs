// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Process management drivers: one holding privileged tokens, one without.

use std::rc::Rc;

use crate::capabilities::{CapabilityKind, CapabilityToken};
use crate::ids::ProcessId;
use crate::kernel::driver::SyscallDriver;
use crate::kernel::Kernel;
use crate::syscall::{ErrorCode, SyscallReturn};

pub const CMD_DESTROY: u32 = 1;
pub const CMD_COUNT: u32 = 2;
pub const CMD_GRANT_USAGE: u32 = 3;

pub struct ProcessControl {
    kernel: Rc<Kernel>,
    tokens: Vec<CapabilityToken>,
}

impl ProcessControl {
    /// `tokens` are whatever the board minted for this capsule.
    pub fn new(kernel: Rc<Kernel>, tokens: Vec<CapabilityToken>) -> Rc<Self> {
        Rc::new(ProcessControl { kernel, tokens })
    }

    fn token(&self, kind: CapabilityKind) -> Option<&CapabilityToken> {
        self.tokens.iter().find(|t| t.kind() == kind)
    }
}

impl SyscallDriver for ProcessControl {
    fn command(&self, command: u32, arg0: u32, _arg1: u32, _pid: ProcessId) -> SyscallReturn {
        match command {
            0 => SyscallReturn::Success,
            CMD_DESTROY => {
                let Some(token) = self.token(CapabilityKind::ProcessManagement) else {
                    return SyscallReturn::Failure(ErrorCode::NoSupport);
                };
                match self.kernel.process_destroy(token, ProcessId(arg0)) {
                    Ok(()) => SyscallReturn::Success,
                    Err(_) => SyscallReturn::Failure(ErrorCode::Inval),
                }
            }
            CMD_COUNT => SyscallReturn::SuccessWithValue(self.kernel.live_processes().len() as u32),
            CMD_GRANT_USAGE => {
                let Some(token) = self.token(CapabilityKind::GrantInspection) else {
                    return SyscallReturn::Failure(ErrorCode::NoSupport);
                };
                match self.kernel.grant_usage(token, ProcessId(arg0)) {
                    Ok(bytes) => SyscallReturn::SuccessWithValue(bytes),
                    Err(_) => SyscallReturn::Failure(ErrorCode::Inval),
                }
            }
            _ => SyscallReturn::Failure(ErrorCode::NoSupport),
        }
    }
}

/// Unprivileged counterpart: it can count processes and nothing else.
pub struct ProcessInfo {
    kernel: Rc<Kernel>,
}

impl ProcessInfo {
    pub fn new(kernel: Rc<Kernel>) -> Rc<Self> {
        Rc::new(ProcessInfo { kernel })
    }
}

impl SyscallDriver for ProcessInfo {
    fn command(&self, command: u32, _arg0: u32, _arg1: u32, _pid: ProcessId) -> SyscallReturn {
        match command {
            0 => SyscallReturn::Success,
            CMD_COUNT => SyscallReturn::SuccessWithValue(self.kernel.live_processes().len() as u32),
            _ => SyscallReturn::Failure(ErrorCode::NoSupport),
        }
    }
}
