// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Userspace alarms multiplexed onto one virtual alarm.

use std::rc::{Rc, Weak};

use crate::hil::time::{order_key, passed, Alarm, AlarmClient, Ticks, HALF_RING};
use crate::hil::virtual_alarm::VirtualAlarm;
use crate::ids::{CapsuleId, ProcessId};
use crate::kernel::driver::SyscallDriver;
use crate::kernel::grant::{read_words, write_words, Grant, GrantData, GrantError};
use crate::kernel::Kernel;
use crate::syscall::{ErrorCode, SyscallReturn};

pub const CMD_EXISTS: u32 = 0;
pub const CMD_FREQUENCY: u32 = 1;
pub const CMD_NOW: u32 = 2;
pub const CMD_STOP: u32 = 3;
pub const CMD_SET_RELATIVE: u32 = 4;
pub const CMD_SET_ABSOLUTE: u32 = 5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct AlarmState {
    armed: bool,
    deadline: Ticks,
}

impl GrantData for AlarmState {
    const SIZE: u32 = 16;

    fn decode(bytes: &[u8]) -> Self {
        let [armed, deadline] = read_words::<2>(bytes);
        AlarmState {
            armed: armed != 0,
            deadline,
        }
    }

    fn encode(&self, out: &mut [u8]) {
        write_words(&[self.armed as u32, self.deadline], out);
    }
}

pub struct AlarmDriver {
    kernel: Rc<Kernel>,
    capsule: CapsuleId,
    alarm: VirtualAlarm,
    grant: Grant<AlarmState>,
}

impl AlarmDriver {
    pub fn new(kernel: Rc<Kernel>, capsule: CapsuleId, alarm: VirtualAlarm) -> Rc<Self> {
        let driver = Rc::new(AlarmDriver {
            grant: Grant::new(kernel.clone(), capsule),
            kernel,
            capsule,
            alarm,
        });
        let weak: Weak<dyn AlarmClient> = Rc::downgrade(&driver) as Weak<dyn AlarmClient>;
        driver.alarm.set_alarm_client(weak);
        driver
    }

    /// Programs the virtual alarm for the earliest armed process deadline.
    fn reprogram(&self) {
        let now = self.alarm.now();
        let mut earliest: Option<Ticks> = None;
        self.grant.each(|_, st| {
            if st.armed && earliest.is_none_or(|e| order_key(now, st.deadline) < order_key(now, e)) {
                earliest = Some(st.deadline);
            }
        });
        match earliest {
            Some(d) => self.alarm.set_alarm(d),
            None => self.alarm.disarm(),
        }
    }

    fn arm(&self, pid: ProcessId, deadline: Ticks) -> SyscallReturn {
        let r = self.grant.enter(pid, |st| {
            st.armed = true;
            st.deadline = deadline;
        });
        match r {
            Ok(()) => {
                self.reprogram();
                SyscallReturn::SuccessWithValue(deadline)
            }
            Err(e) => SyscallReturn::Failure(grant_error_code(e)),
        }
    }
}

fn grant_error_code(e: GrantError) -> ErrorCode {
    match e {
        GrantError::NoMem => ErrorCode::NoMem,
        GrantError::ProcessDead | GrantError::Reentrant => ErrorCode::Fail,
    }
}

impl SyscallDriver for AlarmDriver {
    fn command(&self, command: u32, arg0: u32, _arg1: u32, pid: ProcessId) -> SyscallReturn {
        match command {
            CMD_EXISTS => SyscallReturn::Success,
            CMD_FREQUENCY => SyscallReturn::SuccessWithValue(self.alarm.frequency()),
            CMD_NOW => SyscallReturn::SuccessWithValue(self.alarm.now()),
            CMD_STOP => match self.grant.enter(pid, |st| st.armed = false) {
                Ok(()) => {
                    self.reprogram();
                    SyscallReturn::Success
                }
                Err(e) => SyscallReturn::Failure(grant_error_code(e)),
            },
            CMD_SET_RELATIVE if arg0 >= HALF_RING => SyscallReturn::Failure(ErrorCode::Inval),
            CMD_SET_RELATIVE => self.arm(pid, self.alarm.now().wrapping_add(arg0)),
            CMD_SET_ABSOLUTE => self.arm(pid, arg0),
            _ => SyscallReturn::Failure(ErrorCode::NoSupport),
        }
    }

    fn subscribe_count(&self) -> u32 {
        1
    }
}

impl AlarmClient for AlarmDriver {
    fn alarm_fired(&self) {
        let now = self.alarm.now();
        let mut due = Vec::new();
        self.grant.each(|pid, st| {
            if st.armed && passed(now, st.deadline) {
                st.armed = false;
                due.push((pid, st.deadline));
            }
        });
        for (pid, deadline) in due {
            let _ = self.kernel.schedule_upcall(self.capsule, pid, 0, [now, deadline, 0]);
        }
        self.reprogram();
    }
}
