// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! A memory probe: reads and writes shared buffers on command.

use std::rc::Rc;

use crate::ids::{CapsuleId, ProcessId};
use crate::kernel::driver::{BufferError, SyscallDriver};
use crate::kernel::Kernel;
use crate::syscall::{ErrorCode, SyscallReturn};

use super::{buffer_error_code, report};

pub const CMD_WRITE_BYTE: u32 = 1;
pub const CMD_READ_BYTE: u32 = 2;
pub const CMD_WRITE_RO: u32 = 3;
pub const CMD_READ_RO: u32 = 4;
pub const CMD_LENGTH: u32 = 5;
pub const CMD_FILL: u32 = 6;

pub struct Scratch {
    kernel: Rc<Kernel>,
    capsule: CapsuleId,
}

impl Scratch {
    pub fn new(kernel: Rc<Kernel>, capsule: CapsuleId) -> Rc<Self> {
        Rc::new(Scratch { kernel, capsule })
    }

    fn finish(&self, pid: ProcessId, r: Result<Result<u32, BufferError>, BufferError>) -> SyscallReturn {
        match r.and_then(|inner| inner) {
            Ok(v) => SyscallReturn::SuccessWithValue(v),
            Err(e) => {
                report(&self.kernel, self.capsule, pid, e);
                SyscallReturn::Failure(buffer_error_code(e))
            }
        }
    }
}

impl SyscallDriver for Scratch {
    fn command(&self, command: u32, arg0: u32, arg1: u32, pid: ProcessId) -> SyscallReturn {
        let k = &self.kernel;
        let c = self.capsule;
        let r = match command {
            0 => return SyscallReturn::Success,
            CMD_WRITE_BYTE => k.with_rw_buffer(c, pid, 0, |b| b.write_byte(arg0, arg1 as u8).map(|_| 0)),
            CMD_READ_BYTE => k.with_rw_buffer(c, pid, 0, |b| b.read_byte(arg0).map(u32::from)),
            CMD_WRITE_RO => k.with_ro_buffer(c, pid, 0, |b| b.write(arg0, &[arg1 as u8]).map(|_| 0)),
            CMD_READ_RO => k.with_ro_buffer(c, pid, 0, |b| b.read_byte(arg0).map(u32::from)),
            CMD_LENGTH if arg0 == 0 => k.with_rw_buffer(c, pid, 0, |b| Ok(b.len())),
            CMD_LENGTH => k.with_ro_buffer(c, pid, 0, |b| Ok(b.len())),
            CMD_FILL => k.with_rw_buffer(c, pid, 0, |b| b.fill(arg0 as u8).map(|_| 0)),
            _ => return SyscallReturn::Failure(ErrorCode::NoSupport),
        };
        self.finish(pid, r)
    }

    fn allow_rw_count(&self) -> u32 {
        1
    }

    fn allow_ro_count(&self) -> u32 {
        1
    }
}
