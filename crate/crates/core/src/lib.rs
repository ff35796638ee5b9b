// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Deterministic simulator of a capsule-extensible embedded kernel.
//!
//! Processes are JSON scenario scripts running against a simulated chip
//! (alarm, UART, hash engine). Every observable step is recorded in a
//! [`Trace`], which is byte-identical across runs of the same inputs.

#![forbid(unsafe_code)]

pub mod capabilities;
pub mod hil;
pub mod hw;
pub mod ids;
pub mod memory;
pub mod syscall;
pub mod trace;
pub mod kernel;
pub mod capsules;
pub mod harness;

pub use capabilities::{CapabilityAuthority, CapabilityError, CapabilityKind, CapabilityToken};
pub use ids::{CapsuleId, ProcessId};
pub use kernel::{Kernel, KernelConfig};
pub use memory::{AccessKind, MemoryRegion, Permission, SimMemory};
pub use syscall::{ErrorCode, SharedRegion, SyscallInvocation, SyscallReturn, UpcallDescriptor, YieldMode};
pub use trace::{Actor, Trace, TraceEvent};
