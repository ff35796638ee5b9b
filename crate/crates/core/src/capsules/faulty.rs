// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! A deliberately buggy capsule for exercising fatal diagnostics.

use std::rc::Rc;

use crate::ids::{CapsuleId, ProcessId};
use crate::kernel::driver::SyscallDriver;
use crate::kernel::grant::{Grant, GrantData};
use crate::kernel::Kernel;
use crate::syscall::{ErrorCode, SyscallReturn};

pub const CMD_SPIN: u32 = 1;
pub const CMD_REENTER: u32 = 2;

struct Counter(u32);

impl GrantData for Counter {
    const SIZE: u32 = 4;

    fn decode(bytes: &[u8]) -> Self {
        Counter(u32::from_le_bytes(bytes[..4].try_into().unwrap()))
    }

    fn encode(&self, out: &mut [u8]) {
        out[..4].copy_from_slice(&self.0.to_le_bytes());
    }
}

pub struct Faulty {
    kernel: Rc<Kernel>,
    grant: Grant<Counter>,
}

impl Faulty {
    pub fn new(kernel: Rc<Kernel>, capsule: CapsuleId) -> Rc<Self> {
        Rc::new(Faulty {
            grant: Grant::new(kernel.clone(), capsule),
            kernel,
        })
    }
}

impl SyscallDriver for Faulty {
    fn command(&self, command: u32, _arg0: u32, _arg1: u32, pid: ProcessId) -> SyscallReturn {
        match command {
            0 => SyscallReturn::Success,
            CMD_SPIN => {
                while self.kernel.charge(1).is_ok() {}
                SyscallReturn::Failure(ErrorCode::Fail)
            }
            CMD_REENTER => {
                let r = self.grant.enter(pid, |outer| {
                    outer.0 += 1;
                    self.grant.enter(pid, |inner| inner.0 += 1)
                });
                match r {
                    Ok(Ok(())) => SyscallReturn::Success,
                    _ => SyscallReturn::Failure(ErrorCode::Fail),
                }
            }
            _ => SyscallReturn::Failure(ErrorCode::NoSupport),
        }
    }
}
