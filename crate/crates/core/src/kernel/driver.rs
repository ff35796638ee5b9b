// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! The capsule-facing syscall surface and scoped views of shared buffers.
//!
//! Allow slots belong to the kernel. A capsule reaches a shared buffer only
//! inside [`Kernel::with_rw_buffer`] / [`Kernel::with_ro_buffer`], whose
//! views borrow the kernel and so cannot be kept past the call. Every access
//! re-checks that the process is still alive.

use serde_json::json;
use thiserror::Error;

use super::process::AllowMode;
use super::Kernel;
use crate::ids::{CapsuleId, ProcessId};
use crate::memory::Accessor;
use crate::syscall::{SharedRegion, SyscallReturn};
use crate::trace::Actor;

pub trait SyscallDriver {
    fn command(&self, command: u32, arg0: u32, arg1: u32, pid: ProcessId) -> SyscallReturn;

    /// Number of read-write allow slots.
    fn allow_rw_count(&self) -> u32 {
        0
    }

    /// Number of read-only allow slots.
    fn allow_ro_count(&self) -> u32 {
        0
    }

    /// Number of subscribe slots.
    fn subscribe_count(&self) -> u32 {
        0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum BufferError {
    #[error("access outside the shared buffer")]
    OutOfRange,
    #[error("the sharing process is no longer alive")]
    ProcessDead,
    #[error("buffer was shared read-only")]
    WriteToReadOnly,
    #[error("capsule has no syscall driver")]
    NoDriver,
}

struct View<'k> {
    kernel: &'k Kernel,
    capsule: CapsuleId,
    pid: ProcessId,
    driver: u32,
    buffer: u32,
    mode: AllowMode,
    region: SharedRegion,
}

impl View<'_> {
    fn check(&self, offset: u32, len: u32) -> Result<u32, BufferError> {
        if !self.kernel.is_live(self.pid) {
            return Err(BufferError::ProcessDead);
        }
        match offset.checked_add(len) {
            Some(end) if end <= self.region.len => Ok(self.region.base + offset),
            _ => Err(BufferError::OutOfRange),
        }
    }

    fn event(&self, base: u32, len: u32, kind: &str) {
        self.kernel.trace().record(
            Actor::Kernel,
            "mem",
            json!({
                "pid": self.pid.0,
                "capsule": self.kernel.capsule_name(self.capsule),
                "driver": self.driver,
                "buf": self.buffer,
                "mode": self.mode.name(),
                "base": base,
                "len": len,
                "kind": kind,
            }),
        );
    }

    fn read(&self, offset: u32, len: u32) -> Result<Vec<u8>, BufferError> {
        let addr = self.check(offset, len)?;
        if len == 0 {
            return Ok(Vec::new());
        }
        self.event(addr, len, "read");
        self.kernel
            .memory
            .borrow_mut()
            .read(Accessor::Kernel, addr, len)
            .map_err(|_| BufferError::OutOfRange)
    }

    fn write(&self, offset: u32, data: &[u8]) -> Result<(), BufferError> {
        let addr = self.check(offset, data.len() as u32)?;
        if data.is_empty() {
            return Ok(());
        }
        self.event(addr, data.len() as u32, "write");
        self.kernel
            .memory
            .borrow_mut()
            .write(Accessor::Kernel, addr, data)
            .map_err(|_| BufferError::OutOfRange)
    }
}

/// A read-write share, valid for the duration of one visitor call.
pub struct ReadWriteBuffer<'k>(View<'k>);

impl ReadWriteBuffer<'_> {
    pub fn len(&self) -> u32 {
        self.0.region.len
    }

    pub fn is_empty(&self) -> bool {
        self.0.region.len == 0
    }

    pub fn read(&self, offset: u32, len: u32) -> Result<Vec<u8>, BufferError> {
        self.0.read(offset, len)
    }

    pub fn write(&self, offset: u32, data: &[u8]) -> Result<(), BufferError> {
        self.0.write(offset, data)
    }

    pub fn read_byte(&self, offset: u32) -> Result<u8, BufferError> {
        Ok(self.0.read(offset, 1)?[0])
    }

    pub fn write_byte(&self, offset: u32, value: u8) -> Result<(), BufferError> {
        self.0.write(offset, &[value])
    }

    pub fn fill(&self, value: u8) -> Result<(), BufferError> {
        self.0.write(0, &vec![value; self.len() as usize])
    }
}

/// A read-only share, valid for the duration of one visitor call.
pub struct ReadOnlyBuffer<'k>(View<'k>);

impl ReadOnlyBuffer<'_> {
    pub fn len(&self) -> u32 {
        self.0.region.len
    }

    pub fn is_empty(&self) -> bool {
        self.0.region.len == 0
    }

    pub fn read(&self, offset: u32, len: u32) -> Result<Vec<u8>, BufferError> {
        self.0.read(offset, len)
    }

    pub fn read_byte(&self, offset: u32) -> Result<u8, BufferError> {
        Ok(self.0.read(offset, 1)?[0])
    }

    /// Always refused; the process only granted read access.
    pub fn write(&self, _offset: u32, _data: &[u8]) -> Result<(), BufferError> {
        Err(BufferError::WriteToReadOnly)
    }
}

impl Kernel {
    fn view(
        &self,
        capsule: CapsuleId,
        pid: ProcessId,
        buffer: u32,
        mode: AllowMode,
    ) -> Result<View<'_>, BufferError> {
        let driver = self.capsule_driver(capsule).ok_or(BufferError::NoDriver)?;
        let region = self
            .with_process(pid, |p| p.is_live().then(|| p.allowed(driver, buffer, mode)))
            .flatten()
            .ok_or(BufferError::ProcessDead)?;
        Ok(View {
            kernel: self,
            capsule,
            pid,
            driver,
            buffer,
            mode,
            region,
        })
    }

    /// Runs `f` over the read-write buffer `pid` shared with `capsule`'s
    /// driver in slot `buffer`. An unset slot is a zero-length buffer.
    pub fn with_rw_buffer<R>(
        &self,
        capsule: CapsuleId,
        pid: ProcessId,
        buffer: u32,
        f: impl FnOnce(&ReadWriteBuffer<'_>) -> R,
    ) -> Result<R, BufferError> {
        let view = self.view(capsule, pid, buffer, AllowMode::ReadWrite)?;
        Ok(f(&ReadWriteBuffer(view)))
    }

    pub fn with_ro_buffer<R>(
        &self,
        capsule: CapsuleId,
        pid: ProcessId,
        buffer: u32,
        f: impl FnOnce(&ReadOnlyBuffer<'_>) -> R,
    ) -> Result<R, BufferError> {
        let view = self.view(capsule, pid, buffer, AllowMode::ReadOnly)?;
        Ok(f(&ReadOnlyBuffer(view)))
    }
}
