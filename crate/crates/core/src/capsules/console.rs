// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Console: writes process buffers out through a UART, one process at a
//! time, in chunks no larger than the kernel-owned transmit window.

use std::cell::{Cell, RefCell};
use std::rc::{Rc, Weak};

use crate::hil::uart::{Transmit, TransmitClient};
use crate::hil::BufferWindow;
use crate::ids::{CapsuleId, ProcessId};
use crate::kernel::driver::SyscallDriver;
use crate::kernel::grant::{read_words, write_words, Grant, GrantData};
use crate::kernel::Kernel;
use crate::syscall::{ErrorCode, SyscallReturn};

use super::report;

pub const DEFAULT_BUFFER_SIZE: usize = 64;
pub const CMD_WRITE: u32 = 1;
pub const ALLOW_RO_WRITE: u32 = 1;
pub const SUBSCRIBE_WRITE_DONE: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct WriteState {
    pending: bool,
    len: u32,
    written: u32,
}

impl GrantData for WriteState {
    const SIZE: u32 = 12;

    fn decode(bytes: &[u8]) -> Self {
        let [pending, len, written] = read_words::<3>(bytes);
        WriteState {
            pending: pending != 0,
            len,
            written,
        }
    }

    fn encode(&self, out: &mut [u8]) {
        write_words(&[self.pending as u32, self.len, self.written], out);
    }
}

pub struct Console {
    kernel: Rc<Kernel>,
    capsule: CapsuleId,
    uart: Rc<dyn Transmit>,
    grant: Grant<WriteState>,
    window: RefCell<Option<BufferWindow>>,
    serving: Cell<Option<ProcessId>>,
    last_served: Cell<Option<ProcessId>>,
}

impl Console {
    pub fn new(kernel: Rc<Kernel>, capsule: CapsuleId, uart: Rc<dyn Transmit>, buffer_size: usize) -> Rc<Self> {
        let console = Rc::new(Console {
            grant: Grant::new(kernel.clone(), capsule),
            kernel,
            capsule,
            uart,
            window: RefCell::new(Some(BufferWindow::new(buffer_size))),
            serving: Cell::new(None),
            last_served: Cell::new(None),
        });
        let weak: Weak<dyn TransmitClient> = Rc::downgrade(&console) as Weak<dyn TransmitClient>;
        console.uart.set_transmit_client(weak);
        console
    }

    pub fn is_busy(&self) -> bool {
        self.serving.get().is_some()
    }

    /// Starts the next chunk for the next pending process, round-robin.
    fn start_next(&self) {
        if self.serving.get().is_some() {
            return;
        }
        let mut pending = Vec::new();
        self.grant.each(|pid, st| {
            if st.pending {
                pending.push(pid);
            }
        });
        let after = self.last_served.get();
        let next = pending
            .iter()
            .copied()
            .find(|p| after.is_none_or(|a| *p > a))
            .or_else(|| pending.first().copied());
        let Some(pid) = next else {
            return;
        };
        self.last_served.set(Some(pid));
        if !self.send_chunk(pid) {
            self.start_next();
        }
    }

    /// Copies the next chunk of `pid`'s buffer and hands it to the UART.
    /// Returns false if nothing was started for `pid`.
    fn send_chunk(&self, pid: ProcessId) -> bool {
        let Ok(Some((offset, remaining))) = self.grant.enter(pid, |st| {
            st.pending.then_some((st.written, st.len - st.written))
        }) else {
            return false;
        };
        let Some(mut window) = self.window.borrow_mut().take() else {
            return false;
        };
        window.reset();
        let chunk = remaining.min(window.capacity() as u32);
        let bytes = self
            .kernel
            .with_ro_buffer(self.capsule, pid, ALLOW_RO_WRITE, |b| b.read(offset, chunk));
        let bytes = match bytes {
            Ok(Ok(b)) => b,
            Ok(Err(e)) | Err(e) => {
                *self.window.borrow_mut() = Some(window);
                report(&self.kernel, self.capsule, pid, e);
                let _ = self.grant.enter(pid, |st| st.pending = false);
                return false;
            }
        };
        window.as_mut_slice()[..bytes.len()].copy_from_slice(&bytes);
        window
            .slice(0, bytes.len())
            .expect("chunk fits the window");
        match self.uart.transmit(window) {
            Ok(()) => {
                self.serving.set(Some(pid));
                true
            }
            Err((_, window)) => {
                *self.window.borrow_mut() = Some(window);
                false
            }
        }
    }
}

impl SyscallDriver for Console {
    fn command(&self, command: u32, arg0: u32, _arg1: u32, pid: ProcessId) -> SyscallReturn {
        match command {
            0 => SyscallReturn::Success,
            CMD_WRITE => {
                let shared = self
                    .kernel
                    .with_ro_buffer(self.capsule, pid, ALLOW_RO_WRITE, |b| b.len())
                    .unwrap_or(0);
                let len = arg0.min(shared);
                if len == 0 {
                    return SyscallReturn::Failure(ErrorCode::Size);
                }
                let r = self.grant.enter(pid, |st| {
                    if st.pending {
                        return Err(ErrorCode::Busy);
                    }
                    *st = WriteState {
                        pending: true,
                        len,
                        written: 0,
                    };
                    Ok(())
                });
                match r {
                    Ok(Ok(())) => {
                        self.start_next();
                        SyscallReturn::Success
                    }
                    Ok(Err(code)) => SyscallReturn::Failure(code),
                    Err(_) => SyscallReturn::Failure(ErrorCode::NoMem),
                }
            }
            _ => SyscallReturn::Failure(ErrorCode::NoSupport),
        }
    }

    fn allow_ro_count(&self) -> u32 {
        2
    }

    fn subscribe_count(&self) -> u32 {
        2
    }
}

impl TransmitClient for Console {
    fn transmitted(&self, window: BufferWindow, count: usize, _result: Result<(), ErrorCode>) {
        *self.window.borrow_mut() = Some(window);
        let Some(pid) = self.serving.take() else {
            return;
        };
        let done = self.grant.enter(pid, |st| {
            st.written += count as u32;
            if st.written >= st.len {
                st.pending = false;
                Some(st.written)
            } else {
                None
            }
        });
        match done {
            Ok(Some(written)) => {
                let _ = self
                    .kernel
                    .schedule_upcall(self.capsule, pid, SUBSCRIBE_WRITE_DONE, [written, 0, 0]);
                self.start_next();
            }
            Ok(None) => {
                if !self.send_chunk(pid) {
                    self.start_next();
                }
            }
            Err(_) => self.start_next(),
        }
    }
}
