// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Per-(capsule, process) state stored inside the process's own memory.
//!
//! Space is taken lazily, top-down from the process's grant watermark, the
//! first time a capsule enters its grant for that process, and is zeroed.
//! A process that runs out of room only hurts itself.

use std::marker::PhantomData;
use std::rc::Rc;

use thiserror::Error;

use super::Kernel;
use crate::ids::{CapsuleId, ProcessId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum GrantError {
    #[error("process has no memory left for this grant")]
    NoMem,
    #[error("process is not alive")]
    ProcessDead,
    #[error("grant re-entered for the same process")]
    Reentrant,
}

/// A fixed-size record that can live in grant memory.
pub trait GrantData: Sized {
    const SIZE: u32;

    /// Decodes from exactly `SIZE` bytes. All zeroes is the initial value.
    fn decode(bytes: &[u8]) -> Self;

    fn encode(&self, out: &mut [u8]);
}

/// Handle a capsule holds to its grant region type.
pub struct Grant<T: GrantData> {
    kernel: Rc<Kernel>,
    capsule: CapsuleId,
    _data: PhantomData<T>,
}

impl<T: GrantData> Grant<T> {
    pub fn new(kernel: Rc<Kernel>, capsule: CapsuleId) -> Self {
        Grant {
            kernel,
            capsule,
            _data: PhantomData,
        }
    }

    /// Gives `f` exclusive access to this capsule's state for `pid`.
    pub fn enter<R>(&self, pid: ProcessId, f: impl FnOnce(&mut T) -> R) -> Result<R, GrantError> {
        self.kernel.grant_enter(self.capsule, pid, T::SIZE, |bytes| {
            let mut value = T::decode(bytes);
            let r = f(&mut value);
            value.encode(bytes);
            r
        })
    }

    /// Visits every live process that already holds this grant, in pid order.
    pub fn each(&self, mut f: impl FnMut(ProcessId, &mut T)) {
        for pid in self.kernel.grant_holders(self.capsule) {
            let _ = self.enter(pid, |t| f(pid, t));
        }
    }
}

/// Little-endian u32 fields packed back to back.
pub fn read_words<const N: usize>(bytes: &[u8]) -> [u32; N] {
    let mut out = [0u32; N];
    for (i, w) in out.iter_mut().enumerate() {
        *w = u32::from_le_bytes(bytes[i * 4..i * 4 + 4].try_into().unwrap());
    }
    out
}

pub fn write_words(words: &[u32], out: &mut [u8]) {
    for (i, w) in words.iter().enumerate() {
        out[i * 4..i * 4 + 4].copy_from_slice(&w.to_le_bytes());
    }
}
